"""Command-line interface.

Subcommands: ``analyze``, ``simulate``, ``replicate``, ``coverage``, ``frt``.
Settings come from an optional JSON config; command-line flags override the
config, which overrides built-in defaults. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from switchback.design import AssignmentDesign, draw_assignment
from switchback.dgp import simulate as simulate_outcomes
from switchback.exceptions import DataError, DesignError, NumericalError
from switchback.hac import HacConfig
from switchback.inference import frt_sharp, report
from switchback.montecarlo import (
    ExperimentConfig,
    build_design_spec,
    build_model,
    coverage_table,
    replicate,
    write_csv,
    write_experiment,
)
from switchback.regression import RegressionSpec, estimate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
SIMULATION_STREAM = 2
BUNDLED_CONFIG = "ar1_coverage.json"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    """Validated experiment data; ``p`` or ``mean``/``var`` describe the design."""

    time: np.ndarray
    z: np.ndarray
    y: np.ndarray
    p: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.y.size

    def design(self) -> AssignmentDesign | None:
        if self.p is not None:
            return AssignmentDesign.binary(self.p)
        if self.mean is not None:
            return AssignmentDesign.continuous(self.mean, self.var)
        return None


def _number(raw: str, column: str, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise DataError(f"row {row}: cannot parse {column}={raw!r} as a number") from None
    if not np.isfinite(value):
        raise DataError(f"row {row}: {column} is not finite")
    return value


def parse_dataset(path, binary: bool | None = None) -> Dataset:
    """Read a CSV with columns ``time, z, y`` and optionally ``p`` or ``mean, var``.

    Header names are case-insensitive. Times must run 1..T without gaps or
    duplicates. With a ``p`` column (or ``binary=True``) treatments must be 0/1.
    Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty")
        names = [h.strip().lower() for h in header]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in header")
        for required in ("time", "z", "y"):
            if required not in names:
                raise DataError(f"missing required column {required!r}")
        has_p = "p" in names
        has_mv = "mean" in names or "var" in names
        if has_p and has_mv:
            raise DataError("give either a p column or mean/var columns, not both")
        if has_mv and not ("mean" in names and "var" in names):
            raise DataError("mean and var columns must appear together")
        cols = {name: [] for name in names}
        for row, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(names):
                raise DataError(f"row {row}: expected {len(names)} fields, found {len(record)}")
            for name, raw in zip(names, record):
                if raw.strip() == "" and name in ("time", "z", "y", "p", "mean", "var"):
                    raise DataError(f"row {row}: missing value for {name}")
                cols[name].append(_number(raw, name, row) if name in ("time", "z", "y", "p", "mean", "var")
                                  else raw)
    if not cols["time"]:
        raise DataError("dataset has no rows")
    t = np.array(cols["time"])
    for row, value in enumerate(t, start=1):
        if value != row:
            if row > 1 and value == t[row - 2]:
                raise DataError(f"row {row}: duplicate time {value:g}")
            raise DataError(f"row {row}: expected time {row}, found {value:g} (times must run 1..T without gaps)")
    z = np.array(cols["z"])
    if binary is None:
        binary = has_p
    if binary:
        bad = np.flatnonzero((z != 0) & (z != 1))
        if bad.size:
            raise DataError(f"row {bad[0] + 1}: treatment z={z[bad[0]]:g} is not 0 or 1 under a binary design")
    return Dataset(
        t, z, np.array(cols["y"]),
        np.array(cols["p"]) if has_p else None,
        np.array(cols["mean"]) if has_mv else None,
        np.array(cols["var"]) if has_mv else None,
    )


def write_dataset(path, z, y, design: AssignmentDesign) -> Path:
    rows = []
    for t in range(design.T):
        row = {"time": t + 1, "z": float(z[t]), "y": float(y[t])}
        if design.kind == "binary":
            row["p"] = float(design.p[t])
        else:
            row["mean"] = float(design.means[t])
            row["var"] = float(design.variances[t])
        rows.append(row)
    return write_csv(path, rows)


# --------------------------------------------------------------------------
# configuration plumbing


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def bundled_config() -> dict:
    text = resources.files("switchback").joinpath("configs", BUNDLED_CONFIG).read_text()
    return json.loads(text)


def _joint(raw) -> list[int] | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        try:
            return [int(x) for x in raw.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"--joint-lags expects comma-separated integers, got {raw!r}") from None
    return [int(x) for x in raw]


def _bandwidth(raw):
    if raw is None or raw == "auto":
        return raw
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise UsageError(f"bandwidth must be an integer or 'auto', got {raw!r}") from None


def _settings(args, cfg: dict) -> dict:
    """Merge flags over config over defaults for analysis commands."""
    reg = dict(cfg.get("regression", {}))
    hac = dict(cfg.get("hac", {}))
    if args.K is not None:
        reg["K"] = args.K
    if getattr(args, "bandwidth", None) is not None:
        hac["bandwidth"] = _bandwidth(args.bandwidth)
    if getattr(args, "kernel", None) is not None:
        hac["kernel"] = args.kernel
    if "bandwidth" in hac:
        hac["bandwidth"] = _bandwidth(hac["bandwidth"])
    pick = lambda flag, key, default: flag if flag is not None else cfg.get(key, default)  # noqa: E731
    return {
        "spec": RegressionSpec(int(reg.get("K", 5)), reg.get("variant", "full"), reg.get("lag")),
        "hac": HacConfig(**hac),
        "level": float(pick(getattr(args, "level", None), "level", 0.95)),
        "joint": _joint(pick(getattr(args, "joint_lags", None), "joint_lags", None)),
        "frt_draws": int(pick(getattr(args, "frt_draws", None), "frt_draws", 0)),
        "seed": int(pick(getattr(args, "seed", None), "seed", 0)),
    }


def _dataset_design(data: Dataset, cfg: dict) -> AssignmentDesign:
    design = data.design()
    if design is None:
        if "design" not in cfg:
            raise DataError("dataset has no p or mean/var columns and the config has no design block")
        design = build_design_spec(cfg["design"], data.T)
    if design.kind == "continuous" and "design" in cfg and cfg["design"].get("kind") == "continuous":
        # samplers from the config let the randomization test redraw paths
        from_cfg = build_design_spec(cfg["design"], data.T)
        if np.allclose(from_cfg.means, design.means) and np.allclose(from_cfg.variances, design.variances):
            design = from_cfg
    return design


# --------------------------------------------------------------------------
# commands


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def format_report(data: Dataset, result, rep) -> str:
    """Summary line shaped like a trading-table row, then one line per lag."""
    y, z = data.y, data.z
    a = float(y[z == 1].mean()) if np.any(z == 1) else float("nan")
    b = float(y[z == 0].mean()) if np.any(z == 0) else float("nan")
    head = ["Length", "A", "B", "p"]
    vals = [str(data.T), _fmt(a), _fmt(b), _fmt(rep.wald.p_value)]
    for lag in rep.lags:
        head += [lag.label, f"p({lag.label})"]
        vals += [_fmt(lag.estimate), _fmt(lag.p_value)]
    lines = ["  ".join(head), "  ".join(vals), ""]
    pct = f"{100 * rep.level:g}%"
    lines.append(f"{'lag':<10}{'estimate':>14}{'se':>14}{pct + ' low':>14}{pct + ' high':>14}{'p':>12}")
    for lag in rep.lags:
        flag = "  (degenerate se)" if lag.degenerate else ""
        lines.append(f"{lag.label:<10}{lag.estimate:>14.6g}{lag.se:>14.6g}{lag.low:>14.6g}"
                     f"{lag.high:>14.6g}{lag.p_value:>12.4g}{flag}")
    w = rep.wald
    lines.append(f"\njoint Wald on lags {list(w.subset)}: statistic {w.statistic:.6g}, df {w.df}, p {w.p_value:.4g}")
    if rep.frt is not None:
        f = rep.frt
        lines.append(f"randomization test: statistic {f.observed:.6g}, draws {f.n_perm}, p {f.p_value:.4g}"
                     + (f" ({f.n_failed} singular draws dropped)" if f.n_failed else ""))
    return "\n".join(lines)


def cmd_analyze(args, cfg: dict, frt_only: bool = False) -> int:
    s = _settings(args, cfg)
    data = parse_dataset(args.data)
    design = _dataset_design(data, cfg)
    result = estimate(data.y, data.z, design, s["spec"], hac=s["hac"])
    frt = None
    n_perm = s["frt_draws"] if not frt_only or s["frt_draws"] else 999
    if n_perm:
        frt = frt_sharp(data.y, data.z, design, s["spec"], s["joint"], n_perm, s["seed"], s["hac"])
    rep = report(result, s["level"], s["joint"], frt)
    out = {"T": data.T, "estimate": result.to_dict(), "report": rep.to_dict()}
    if args.output:
        Path(args.output).write_text(json.dumps(out, indent=2))
    if frt_only:
        print(f"randomization test: statistic {frt.observed:.6g}, draws {frt.n_perm}, p {frt.p_value:.4g}")
    else:
        print(format_report(data, result, rep))
    return EXIT_OK


def cmd_simulate(args, cfg: dict) -> int:
    if "model" not in cfg:
        raise UsageError("simulate needs a config with a 'model' block")
    T = args.T or (cfg.get("T", [None])[0] if isinstance(cfg.get("T"), list) else cfg.get("T"))
    if not T:
        raise UsageError("simulate needs --T or a T entry in the config")
    T = int(T)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    design = build_design_spec(cfg.get("design", {"kind": "binary", "p": 0.5}), T)
    model_spec = dict(cfg["model"])
    if model_spec.get("center"):
        model_spec.setdefault("K", cfg.get("regression", {}).get("K", 0))
        model_spec.setdefault("p", cfg.get("design", {}).get("p", 0.5))
    model = build_model(model_spec, T)
    z = draw_assignment(design, seed, SIMULATION_STREAM, T, 0)
    y = simulate_outcomes(model, z)
    path = write_dataset(args.output, z, y, design)
    print(f"wrote {T} rows to {path}")
    return EXIT_OK


def _experiment_config(args, cfg: dict) -> ExperimentConfig:
    cfg = dict(cfg)
    for key in ("joint_lags", "frt_draws"):
        cfg.pop(key, None)
    if not cfg:
        cfg = bundled_config()
    exp = ExperimentConfig.from_dict(cfg)
    hac = dict(exp.hac)
    if args.bandwidth is not None:
        hac["bandwidth"] = _bandwidth(args.bandwidth)
    if args.kernel is not None:
        hac["kernel"] = args.kernel
    reg = dict(exp.regression)
    if args.K is not None:
        reg["K"] = args.K
    return exp.override(T=tuple(args.T) if args.T else None, R=args.R, seed=args.seed, level=args.level,
                        hac=hac, regression=reg)


def cmd_replicate(args, cfg: dict) -> int:
    exp = _experiment_config(args, cfg)
    sets = {T: replicate(exp, T=T, n_jobs=args.jobs) for T in exp.T}
    for T, reps in sets.items():
        s = reps.summary()
        print(f"T={T} R={reps.R}")
        for lab, tau, m, sd in zip(s["labels"], s["tau"], s["mean"], s["sd"]):
            print(f"  {lab:<10} true {tau:>10.6g}  mean {m:>10.6g}  sd {sd:>10.6g}")
    if args.output:
        for path in write_experiment(args.output, exp, sets=sets):
            print(f"wrote {path}")
    return EXIT_OK


def cmd_coverage(args, cfg: dict) -> int:
    exp = _experiment_config(args, cfg)
    table, sets = coverage_table(exp, n_jobs=args.jobs)
    print(f"empirical {100 * table.level:g}% coverage, R={table.R}")
    print(f"{'T':>8}" + "".join(f"{lab:>10}" for lab in table.labels))
    for i, T in enumerate(table.T):
        print(f"{T:>8}" + "".join(f"{c:>10.4f}" for c in table.coverage[i]))
    if args.output:
        for path in write_experiment(args.output, exp, table=table, sets=sets):
            print(f"wrote {path}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="switchback", description="Lagged-effect estimation for switchback experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, analysis: bool):
        p.add_argument("--config", help="JSON config; flags override its fields")
        p.add_argument("--K", type=int, help="number of lags")
        p.add_argument("--bandwidth", help="HAC bandwidth: integer or 'auto' for floor(T^(1/4))")
        p.add_argument("--kernel", help="HAC kernel (bartlett)")
        p.add_argument("--level", type=float, help="confidence level")
        p.add_argument("--seed", type=int, help="root random seed")
        p.add_argument("--output", help="output file (analyze/frt/simulate) or directory")
        if analysis:
            p.add_argument("data", help="CSV with time, z, y and p or mean/var columns")
            p.add_argument("--joint-lags", help="comma-separated lag indices for the joint test")
            p.add_argument("--frt-draws", type=int, help="randomization-test draws (0 skips)")

    common(sub.add_parser("analyze", help="estimate lagged effects from a dataset"), True)
    common(sub.add_parser("frt", help="randomization test of the sharp null"), True)
    p = sub.add_parser("simulate", help="generate a dataset from a model config")
    common(p, False)
    p.add_argument("--T", type=int, help="series length")
    for name, helptext in (("replicate", "Monte Carlo replications"), ("coverage", "coverage table")):
        p = sub.add_parser(name, help=helptext)
        common(p, False)
        p.add_argument("--T", type=int, nargs="+", help="series lengths")
        p.add_argument("--R", type=int, help="replications per T")
        p.add_argument("--jobs", type=int, help="worker processes (default $SWITCHBACK_JOBS or 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        if args.command == "analyze":
            return cmd_analyze(args, cfg)
        if args.command == "frt":
            return cmd_analyze(args, cfg, frt_only=True)
        if args.command == "simulate":
            if not args.output:
                raise UsageError("simulate needs --output")
            return cmd_simulate(args, cfg)
        if args.command == "replicate":
            return cmd_replicate(args, cfg)
        return cmd_coverage(args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, DesignError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
