"""Report figures: every suite and build report gets one PNG rendered next
to its CSV/JSON output. Rendering is headless (Agg) and strips volatile
metadata so repeated runs produce identical bytes."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = dict(dpi=110, metadata={"Software": "flowforge"})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def order_figure(rows, x_key, title, slope, expected, path):
    """Log-log order study with the fitted and expected slopes."""
    x = np.array([r[x_key] for r in rows], dtype=float)
    c0 = np.array([r["c0"] for r in rows], dtype=float)
    c1 = np.array([r["c1"] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.loglog(x, c0, "o-", label="C0 distance")
    ax.loglog(x, c1, "s-", label="C1 distance")
    if np.all(c1 > 0):
        anchor = c1[0] * (x / x[0]) ** expected
        ax.loglog(x, anchor, "k--", lw=0.8,
                  label=f"slope {expected:g} reference")
    ax.set_xlabel(x_key)
    ax.set_ylabel("distance")
    ax.set_title(f"{title} (fitted slope {slope:.3f})")
    ax.legend(fontsize=8)
    _finish(fig, path)


def conditioning_figure(rows, path):
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    idx = np.arange(len(rows))
    labels = [f"k={r['kappa']:g}\ng={r['gamma']:g}" for r in rows]
    ax.semilogy(idx, [r["upper_bound"] for r in rows], "k^--", label="upper bound")
    ax.semilogy(idx, [r["lower_bound"] for r in rows], "kv--", label="lower bound")
    ax.semilogy(idx, [r["sv_max"] for r in rows], "rs", label="observed max sv")
    ax.semilogy(idx, [r["sv_min"] for r in rows], "bo", label="observed min sv")
    ax.set_xticks(idx, labels, fontsize=7)
    ax.set_ylabel("singular value")
    ax.set_title("flow-map Jacobian conditioning")
    ax.legend(fontsize=8)
    _finish(fig, path)


def decay_figure(rows, path):
    t = np.array([r["t"] for r in rows])
    val = np.array([r["lyapunov"] for r in rows])
    bound = np.array([r["bound"] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(t, val, "b-", label="functional")
    ax.semilogy(t, bound, "k--", label="exp(-t/10) bound")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title("convergence functional decay")
    ax.legend(fontsize=8)
    _finish(fig, path)


def margin_figure(rows, key_pairs, title, path):
    """Scatter of per-row margins; anything below zero is a violation."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for key, label in key_pairs:
        vals = [r[key] for r in rows]
        ax.plot(range(len(rows)), vals, "o", ms=3, label=label)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("row")
    ax.set_ylabel("margin")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _finish(fig, path)


def error_table_figure(rows, value_key, tol_key, title, path):
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    vals = np.array([r[value_key] for r in rows], dtype=float)
    tols = np.array([r[tol_key] for r in rows], dtype=float)
    ax.semilogy(range(len(rows)), np.maximum(vals, 1e-18), "bo", ms=3,
                label=value_key)
    ax.semilogy(range(len(rows)), tols, "k--", lw=0.8, label="tolerance")
    ax.set_xlabel("row")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _finish(fig, path)


def suite_figure(summary, path):
    """Dispatch on suite name."""
    name = summary["suite"]
    rows = summary["rows"]
    if name in ("henon-order", "euler-order", "perturbation-order"):
        x_key = {"henon-order": "tau", "euler-order": "eta",
                 "perturbation-order": "eps"}[name]
        expected = 1.0 if name == "euler-order" else 2.0
        order_figure(rows, x_key, name, summary["slope"], expected, path)
    elif name == "conditioning":
        conditioning_figure(rows, path)
    elif name == "lyapunov":
        decay_figure(rows, path)
    elif name == "convolution":
        margin_figure(rows, [("lower_margin", "lower"),
                             ("upper_margin", "upper")],
                      "convolution Hessian sandwich margins", path)
    elif name == "variance":
        error_table_figure(rows, "diff_norm", "tol",
                           "covariance closed form vs integration", path)
    elif name == "wasserstein":
        margin_figure(rows, [("worst_violation", "worst violation")],
                      "distance property violations", path)
    else:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.text(0.5, 0.5, f"suite {name}", ha="center")
        _finish(fig, path)


def build_figure(report, path):
    """Two panels: per-chunk solve residuals, and the error/conditioning
    numbers of the finished network."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.4))
    res = report.chunk_residuals
    if res is not None and len(res):
        ax1.semilogy(range(len(res)), np.maximum(res, 1e-18), "bo-", ms=3)
    ax1.set_xlabel("chunk")
    ax1.set_ylabel("max solve residual")
    ax1.set_title("coefficient-system residuals")
    labels = ["C0 error", "C1 error", "roundtrip", "inverse pair"]
    vals = [report.c0_error, report.c1_error, report.roundtrip_error,
            report.inverse_pair_error]
    ax2.bar(labels, np.maximum(vals, 1e-18))
    ax2.set_yscale("log")
    ax2.set_title(f"cond {report.cond_worst:.3g} "
                  f"(bound {report.cond_bound:.3g})")
    ax2.tick_params(axis="x", labelsize=7)
    _finish(fig, path)


def sample_figure(pushed, target, path, max_coords=4):
    """Marginal histograms of pushed samples against the target draws."""
    dim = min(pushed.shape[1], max_coords)
    fig, axes = plt.subplots(1, dim, figsize=(3.2 * dim, 3.0), squeeze=False)
    for i in range(dim):
        ax = axes[0][i]
        bins = np.linspace(min(pushed[:, i].min(), target[:, i].min()),
                           max(pushed[:, i].max(), target[:, i].max()), 60)
        ax.hist(target[:, i], bins=bins, density=True, alpha=0.45,
                label="target")
        ax.hist(pushed[:, i], bins=bins, density=True, alpha=0.45,
                label="pushforward", histtype="step", lw=1.4)
        ax.set_title(f"coordinate {i}", fontsize=9)
        if i == 0:
            ax.legend(fontsize=7)
    _finish(fig, path)
