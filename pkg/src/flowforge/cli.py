"""Batch experiment driver.

    flowforge build  --config cfg.json [--seed N] [--out DIR] [--threads N]
    flowforge verify --config cfg.json [...]
    flowforge sample --config cfg.json [...]

Configs are strict JSON documents (unknown fields are rejected). Every
command writes machine-readable CSV/JSON reports plus a rendered PNG
figure into the output directory. Exit codes: 0 ok, 1 assertion failure,
2 config error, 3 numeric/solver error, 4 divergence.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import sys
from pathlib import Path

import numpy as np

from . import figures, suites
from .coupling import CouplingNetwork
from .errors import (ConfigError, DivergenceError, FitError, InputError,
                     PreconditionError, SingularBlockError, SolvabilityError)
from .metrics import sliced_w1, w1_1d
from .odeflow import FlowProbe, grid_points
from .pipeline import (BuildConfig, build_network, evaluate_w1, pad_source,
                       truncated_gaussian_samples)

GLOBAL_FIELDS = {"seed": int, "out_dir": str, "threads": int}

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DIVERGENCE = 4


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _split_fields(cfg, allowed):
    """Separate global fields, reject anything not in ``allowed``."""
    body, globals_ = {}, {}
    for key, val in cfg.items():
        if key in GLOBAL_FIELDS:
            if not isinstance(val, GLOBAL_FIELDS[key]) or isinstance(val, bool):
                raise ConfigError(f"field {key!r} must be {GLOBAL_FIELDS[key].__name__}")
            globals_[key] = val
        elif key in allowed:
            body[key] = val
        else:
            raise ConfigError(f"unknown config field {key!r}")
    return body, globals_


def _require(body, fields):
    missing = [f for f in fields if f not in body]
    if missing:
        raise ConfigError("missing required field(s): " + ", ".join(missing))


def _parse_sigma(raw, d):
    if isinstance(raw, (int, float)):
        if d != 1:
            raise ConfigError("scalar sigma_x only valid for d=1")
        return np.array([[float(raw)]])
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != d:
            raise ConfigError("diagonal sigma_x must have length d")
        return np.diag(arr)
    if arr.shape != (d, d):
        raise ConfigError(f"sigma_x must be {d}x{d}")
    return arr


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_rows_csv(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in cols])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _schema_of(rows):
    if not rows:
        return {"columns": []}
    cols = []
    for key, val in rows[0].items():
        if isinstance(val, (bool, np.bool_)):
            t = "bool"
        elif isinstance(val, (int, np.integer)):
            t = "int"
        elif isinstance(val, (float, np.floating)):
            t = "float"
        else:
            t = "str"
        cols.append({"name": key, "type": t})
    return {"columns": cols}


BUILD_FIELDS = {"d", "sigma_x", "gamma", "epsilon", "tau", "eta", "phi",
                "radius", "mu_x", "probe_grid", "probe_half_width",
                "ref_steps"}


def cmd_build(cfg, out_dir, seed):
    body, _ = _split_fields(cfg, BUILD_FIELDS)
    _require(body, ["d", "sigma_x", "gamma"])
    d = body["d"]
    if not isinstance(d, int) or d < 1:
        raise ConfigError("d must be a positive integer")
    gamma = body["gamma"]
    if not isinstance(gamma, (int, float)) or not 0.0 < gamma < 2.0:
        raise ConfigError(
            f"gamma={gamma} invalid: the construction requires 0 < gamma < 2")
    kwargs = {k: body[k] for k in ("epsilon", "tau", "eta", "phi", "radius",
                                   "probe_grid", "probe_half_width",
                                   "ref_steps") if k in body}
    try:
        build_cfg = BuildConfig(d=d, sigma_x=_parse_sigma(body["sigma_x"], d),
                                gamma=float(gamma),
                                mu_x=(np.asarray(body["mu_x"], dtype=float)
                                      if "mu_x" in body else None),
                                seed=seed, **kwargs)
    except (InputError, PreconditionError) as err:
        raise ConfigError(str(err))
    net, report = build_network(build_cfg)
    w1 = evaluate_w1(net, build_cfg, n_samples=20000, seed=seed)
    report.w1 = w1
    net.save(Path(out_dir) / "network.json")
    _write_json(Path(out_dir) / "report.json", report.to_dict())
    box = np.array([[-build_cfg.probe_half_width,
                     build_cfg.probe_half_width]] * (2 * d))
    pts = grid_points(box, build_cfg.grid_per_axis())
    jac, _ = net.jacobian_many(pts)
    probe = FlowProbe(pts, net.pushforward(pts), jac)
    probe.to_csv(Path(out_dir) / "probes.csv")
    figures.build_figure(report, Path(out_dir) / "build.png")
    print(f"build ok: {report.blocks} blocks, C0 error {report.c0_error:.4g}, "
          f"worst condition {report.cond_worst:.4g}")
    return EXIT_OK


def cmd_verify(cfg, out_dir, seed):
    body, _ = _split_fields(cfg, {"suite", "params"})
    _require(body, ["suite"])
    name = body["suite"]
    if name not in suites.SUITES:
        raise ConfigError(f"unknown suite {name!r}; available: "
                          + ", ".join(sorted(suites.SUITES)))
    params = body.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    sig = inspect.signature(suites.SUITES[name])
    unknown = [k for k in params if k not in sig.parameters]
    if unknown:
        raise ConfigError(f"unknown suite parameter(s): {', '.join(unknown)}")
    params.setdefault("seed", seed)
    summary = suites.run_suite(name, **params)
    rows = summary["rows"]
    _write_rows_csv(Path(out_dir) / f"{name}.csv", rows)
    _write_json(Path(out_dir) / f"{name}_schema.json", _schema_of(rows))
    payload = {k: v for k, v in summary.items() if k != "rows"}
    _write_json(Path(out_dir) / "summary.json", payload)
    figures.suite_figure(summary, Path(out_dir) / f"{name}.png")
    if not summary["passed"]:
        failing = next((r for r in rows if not r.get("pass", True)), None)
        print(f"suite {name} FAILED; first failing row: {failing}",
              file=sys.stderr)
        return EXIT_ASSERTION
    print(f"suite {name} passed ({len(rows)} rows)")
    return EXIT_OK


SAMPLE_FIELDS = {"network", "n_samples", "d", "sigma_x", "gamma", "mu_x",
                 "radius", "n_directions"}


def cmd_sample(cfg, out_dir, seed):
    body, _ = _split_fields(cfg, SAMPLE_FIELDS)
    _require(body, ["network", "n_samples", "d", "sigma_x", "gamma"])
    n = body["n_samples"]
    if not isinstance(n, int) or n <= 0:
        raise ConfigError("n_samples must be a positive integer")
    net_path = Path(body["network"])
    if not net_path.exists():
        raise ConfigError(f"network file not found: {net_path}")
    net = CouplingNetwork.load(net_path)
    d = body["d"]
    sigma_x = _parse_sigma(body["sigma_x"], d)
    mu_x = np.asarray(body["mu_x"], dtype=float) if "mu_x" in body else None
    p0 = pad_source(mu_x, sigma_x)
    radius = body.get("radius")
    if radius is None:
        radius = float(net.domain[0, 1]) if net.domain is not None else 4.0
    rng = np.random.Generator(np.random.Philox(key=seed))
    latent = truncated_gaussian_samples(n, 2 * d, radius, rng)
    pushed = net.pushforward(latent)
    target = p0.sample(n, rng)
    per_coord = [w1_1d(pushed[:, i], target[:, i]) for i in range(2 * d)]
    sw1 = sliced_w1(pushed, target,
                    n_directions=body.get("n_directions", 64), seed=seed + 1)
    header = ",".join([f"x_{i}" for i in range(d)]
                      + [f"v_{i}" for i in range(d)])
    np.savetxt(Path(out_dir) / "samples.csv", pushed, delimiter=",",
               header=header, comments="")
    _write_json(Path(out_dir) / "w1.json",
                {"n_samples": n, "radius": radius,
                 "per_coordinate_w1": per_coord, "sliced_w1": float(sw1)})
    figures.sample_figure(pushed, target, Path(out_dir) / "sample.png")
    print(f"sample ok: n={n}, sliced W1 {sw1:.4g}")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="flowforge",
        description="build, verify and sample well-conditioned affine "
                    "coupling networks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "verify", "sample"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out_dir = Path(args.out if args.out is not None
                       else cfg.get("out_dir", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = {"build": cmd_build, "verify": cmd_verify,
                   "sample": cmd_sample}[args.command]
        return handler(cfg, out_dir, seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (SolvabilityError, SingularBlockError, FitError,
            np.linalg.LinAlgError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, PreconditionError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
