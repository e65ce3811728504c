"""Command-line interface.

Every command reads its settings from flags, optionally on top of a TOML
file given with ``--config`` (keys are the long flag names with dashes or
underscores), and writes ``report.json`` plus CSV tables to the output
directory.  The output directory defaults to ``$VOLJUMP_OUTPUT_DIR`` or the
current directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .bootstrap import BootstrapConfig, bootstrap_from_spot
from .changepoint import locate
from .config import BlockLengthWarning, FormatError, ObservationSeries, ParameterError, TuningConfig
from .paths import PRESETS, monte_carlo_study, preset, simulate_path
from .spectral import estimate_spot_vol
from .testing import RuleKind, TestRule, report_from_spot

SCHEMA_VERSION = 1
OUTPUT_ENV = "VOLJUMP_OUTPUT_DIR"
GRID_TOL = 1e-9

logger = logging.getLogger("voljump")

TUNING_KEYS = ("bins", "block_len", "tau", "regularity", "pilot_freqs", "cutoff", "noise_variance",
               "oracle_scale", "truncate_changepoint")
BOOT_KEYS = ("replications", "filter_len", "pseudo_shift", "reuse_weights", "workers")


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


def _parse_float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"line {line}: cannot parse {text.strip()!r} as a number") from None
    if not math.isfinite(value):
        raise FormatError(f"line {line}: non-finite value {text.strip()!r}")
    return value


def read_csv(path) -> ObservationSeries:
    """One value per line, or ``time,value`` pairs on the grid ``i/n``."""
    times, values = [], []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) == 1:
                values.append(_parse_float(row[0], line_no))
            elif len(row) == 2:
                times.append(_parse_float(row[0], line_no))
                values.append(_parse_float(row[1], line_no))
            else:
                raise FormatError(f"line {line_no}: expected 1 or 2 columns, got {len(row)}")
    if times and len(times) != len(values):
        raise FormatError("mixed one- and two-column rows")
    if len(values) < 2:
        raise FormatError("need at least two observations")
    if times:
        n = len(values) - 1
        grid = np.arange(n + 1) / n
        bad = np.flatnonzero(np.abs(np.asarray(times) - grid) > GRID_TOL)
        if bad.size:
            i = int(bad[0])
            raise FormatError(f"time column is not the uniform grid i/n: index {i} has t={times[i]!r}, expected {grid[i]!r}")
    return ObservationSeries(np.asarray(values))


def read_binary(path) -> ObservationSeries:
    """Little-endian float64 vector."""
    raw = Path(path).read_bytes()
    if len(raw) % 8:
        raise FormatError(f"binary file size {len(raw)} is not a multiple of 8 bytes")
    return ObservationSeries(np.frombuffer(raw, dtype="<f8").astype(np.float64))


def ingest(path, fmt: str = "auto") -> ObservationSeries:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such file: {path}")
    if fmt == "auto":
        fmt = "bin" if path.suffix.lower() in (".bin", ".f64", ".dat") else "csv"
    if fmt == "csv":
        return read_csv(path)
    if fmt == "bin":
        return read_binary(path)
    raise FormatError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config_file(path) -> dict:
    import tomli

    with open(path, "rb") as fh:
        data = tomli.load(fh)
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            raise FormatError(f"config file must be flat; section {key!r} found")
        flat[key.replace("-", "_")] = value
    return flat


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    settings = {}
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config"):
            settings[key] = value
    return settings


def _tuning(settings: dict) -> TuningConfig:
    return TuningConfig(**{k: settings[k] for k in TUNING_KEYS if k in settings})


def _rule(settings: dict) -> TestRule:
    return TestRule(RuleKind(settings.get("rule", "ov-trunc")), float(settings.get("level", 0.1)))


def _bootstrap_cfg(settings: dict) -> BootstrapConfig:
    kw = {k: settings[k] for k in BOOT_KEYS if k in settings}
    if "pseudo_shift" in kw:
        shift = kw["pseudo_shift"]
        kw["pseudo_shift"] = None if str(shift) == "alpha" else int(shift)
    return BootstrapConfig(seed=int(settings.get("seed", 0)), level=float(settings.get("level", 0.1)), **kw)


def _load_input(settings: dict):
    """Observation series and, for simulated input, the simulated path."""
    has_input = settings.get("input") is not None
    has_sim = settings.get("simulate") is not None
    if has_input == has_sim:
        raise ParameterError("give exactly one of --input and --simulate")
    if has_input:
        return ingest(settings["input"], settings.get("format", "auto")), None, None
    spec = preset(settings["simulate"], seed=int(settings.get("seed", 0)), **_sim_overrides(settings))
    path = simulate_path(spec)
    return path.observed, path, spec


def _sim_overrides(settings: dict) -> dict:
    out = {}
    if settings.get("n") is not None:
        out["n"] = int(settings["n"])
    if settings.get("noise_std") is not None:
        out["noise_std"] = float(settings["noise_std"])
    if settings.get("delta") is not None and str(settings.get("simulate", "")).startswith("h1"):
        out["delta"] = float(settings["delta"])
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _outdir(settings: dict) -> Path:
    out = Path(settings.get("out") or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_report(outdir: Path, command: str, config: dict, results: dict) -> Path:
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "version": __version__,
        "backend": backend_name(),
        "config": config,
        "results": results,
    }
    target = outdir / "report.json"
    target.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return target


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def _base_config(settings: dict, cfg: TuningConfig, spec) -> dict:
    return {
        "input": settings.get("input"),
        "format": settings.get("format", "auto") if settings.get("input") else None,
        "simulate": settings.get("simulate"),
        "simulation_spec": None if spec is None else spec.to_dict(),
        "seed": int(settings.get("seed", 0)),
        "tuning": cfg.to_dict(),
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    settings = resolve(args)
    cfg, rule = _tuning(settings), _rule(settings)
    obs, _, spec = _load_input(settings)
    cfg.validate(obs.n)
    spot = estimate_spot_vol(obs, cfg)
    report = report_from_spot(spot, rule, cfg)
    out = _outdir(settings)
    config = _base_config(settings, cfg, spec) | {"rule": rule.kind.value, "level": rule.level}
    write_report(out, "test", config, {"n": obs.n, **report.to_dict()})
    _write_spot_tables(out, spot, cfg)
    print(f"{rule.kind.value} statistic={report.statistic:.6g} critical={report.critical:.6g} "
          f"p={report.p_value:.4g} reject={report.reject}")
    return 0


def _write_spot_tables(out: Path, spot, cfg: TuningConfig) -> None:
    write_table(out / "spot.csv", ("bin", "time", "spot", "pilot"),
                [(k + 1, k * cfg.h, float(v), float(p)) for k, (v, p) in enumerate(zip(spot.per_bin, spot.pilot))])
    a = cfg.block_len
    write_table(out / "blocks.csv", ("i", "overlap", "trunc"),
                [(a + i, float(o), float(t)) for i, (o, t) in enumerate(zip(spot.blocks.overlap, spot.blocks.trunc))])


def cmd_estimate(args) -> int:
    settings = resolve(args)
    cfg = _tuning(settings)
    obs, path, spec = _load_input(settings)
    cfg.validate(obs.n)
    spot = estimate_spot_vol(obs, cfg)
    per_bin = spot.per_bin
    if cfg.truncate_changepoint:
        per_bin = np.where(np.abs(per_bin) <= cfg.threshold, per_bin, 0.0)
    delta = settings.get("delta")
    est = locate(per_bin, cfg, delta=delta, n=obs.n)
    out = _outdir(settings)
    results = {"n": obs.n, "noise_var_hat": spot.noise_var_hat, **est.to_dict()}
    if path is not None:
        results["true_theta"] = path.theta
    write_report(out, "estimate", _base_config(settings, cfg, spec) | {"delta": delta}, results)
    _write_spot_tables(out, spot, cfg)
    write_table(out / "diamond.csv", ("i", "time", "diamond"),
                [(cfg.block_len + i, (cfg.block_len + i) * cfg.h, float(v)) for i, v in enumerate(est.diamond_values)])
    print(f"theta_hat={est.theta_hat:.6g} (bin {est.argmax_bin})")
    return 0


def cmd_bootstrap(args) -> int:
    settings = resolve(args)
    cfg, bcfg = _tuning(settings), _bootstrap_cfg(settings)
    obs, _, spec = _load_input(settings)
    cfg.validate(obs.n)
    result = bootstrap_from_spot(estimate_spot_vol(obs, cfg), cfg, bcfg, obs.n)
    out = _outdir(settings)
    config = _base_config(settings, cfg, spec) | {"bootstrap": bcfg.to_dict()}
    write_report(out, "bootstrap", config, {"n": obs.n, **result.to_dict()})
    write_table(out / "pseudo.csv", ("replicate", "statistic"), [(i, float(v)) for i, v in enumerate(result.pseudo_stats)])
    print(f"statistic={result.statistic:.6g} quantile={result.quantile():.6g} reject={result.reject()}")
    return 0


def cmd_simulate(args) -> int:
    settings = resolve(args)
    if settings.get("simulate") is None:
        raise ParameterError("simulate needs --simulate PRESET")
    settings.pop("input", None)
    _, path, spec = _load_input(settings)
    out = _outdir(settings)
    n = spec.n
    grid = np.arange(n + 1) / n
    fmt = settings.get("format") or "csv"
    fmt = "csv" if fmt == "auto" else fmt
    if fmt == "bin":
        data_file = out / "observed.bin"
        data_file.write_bytes(path.observed.values.astype("<f8").tobytes())
    else:
        data_file = out / "observed.csv"
        write_table_plain(data_file, zip(grid.tolist(), path.observed.values.tolist()))
    write_table(out / "truth.csv", ("i", "time", "latent", "vol", "jumps"),
                [(i, float(t), float(x), float(v), float(j)) for i, (t, x, v, j) in
                 enumerate(zip(grid, path.latent.values, path.vol_path, path.jump_path))])
    results = {"n": n, "theta": path.theta, "data_file": data_file.name}
    write_report(out, "simulate", {"simulate": settings["simulate"], "seed": int(settings.get("seed", 0)),
                                   "format": fmt, "simulation_spec": spec.to_dict()}, results)
    print(f"wrote {data_file}")
    return 0


def write_table_plain(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for t, v in rows:
            writer.writerow((repr(t), repr(v)))


def parse_grid(text: str) -> tuple[str, list[float]]:
    """``name=start:stop:step`` (stop inclusive) or ``name=v1,v2,...``."""
    if "=" not in text:
        raise ParameterError(f"grid must look like name=start:stop:step, got {text!r}")
    name, spec = text.split("=", 1)
    if ":" in spec:
        start, stop, step = (float(p) for p in spec.split(":"))
        if step <= 0:
            raise ParameterError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    else:
        values = [float(p) for p in spec.split(",")]
    return name.strip(), values


def cmd_study(args) -> int:
    settings = resolve(args)
    cfg = _tuning(settings)
    name, deltas = parse_grid(settings.get("grid", "deltas=0.15:0.45:0.05"))
    if name not in ("deltas", "delta"):
        raise ParameterError(f"unsupported grid variable {name!r}")
    design = settings.get("design", "nu")
    reps = int(settings.get("reps", 500))
    seed = int(settings.get("seed", 0))
    levels = [float(v) for v in str(settings.get("levels", "0.1,0.05")).split(",")]
    kinds = [RuleKind(k) for k in str(settings.get("rules", "ov-trunc,nov-trunc")).split(",")]
    rules = [TestRule(k, lv) for k in kinds for lv in levels]
    specs = [preset(f"h1-{design}", delta=d) for d in deltas]
    null_spec = preset(f"h0-{design}") if settings.get("null_calibration") else None
    bcfg = _bootstrap_cfg(settings) if settings.get("bootstrap") else None
    cfg.validate(specs[0].n)
    table = monte_carlo_study(specs, rules, reps, cfg=cfg, seed=seed, workers=int(settings.get("workers", 1)),
                              null_spec=null_spec, bootstrap=bcfg, labels=[f"delta={d:g}" for d in deltas])
    out = _outdir(settings)
    records = table.to_records()
    for rec, spec_delta in zip(records, [d for d in deltas for _ in rules]):
        rec["delta"] = spec_delta
        rec["power"] = rec["rejection_rate"]
    header = ("delta", "rule", "level", "power") + tuple(c for c in table.columns if c not in ("rule", "level"))
    write_table(out / "study.csv", header, [[rec.get(c) for c in header] for rec in records])
    config = {"tuning": cfg.to_dict(), "seed": seed, "reps": reps, "design": design, "grid": {name: deltas},
              "rules": [r.kind.value for r in rules], "levels": levels,
              "null_calibration": null_spec is not None, "bootstrap": None if bcfg is None else bcfg.to_dict(),
              "workers": int(settings.get("workers", 1))}
    write_report(out, "study", config, {"rows": records})
    for rec in records:
        print(f"delta={rec['delta']:g} {rec['rule']} level={rec['level']:g} power={rec['power']:.3f}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="TOML file with default values for any flag")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    if data:
        p.add_argument("--input", help="observation file (CSV or little-endian float64)")
        p.add_argument("--format", choices=("auto", "csv", "bin"))
        p.add_argument("--simulate", choices=PRESETS, help="simulate a preset design instead of reading input")
        p.add_argument("--n", type=int, help="sample size of simulated input")
        p.add_argument("--noise-std", type=float, dest="noise_std")
        p.add_argument("--delta", type=float, help="volatility jump size")
    g = p.add_argument_group("tuning")
    g.add_argument("--bins", type=int)
    g.add_argument("--block-len", type=int, dest="block_len")
    g.add_argument("--tau", type=float)
    g.add_argument("--regularity", type=float)
    g.add_argument("--pilot-freqs", type=int, dest="pilot_freqs")
    g.add_argument("--cutoff", type=int)
    g.add_argument("--noise-variance", type=float, dest="noise_variance")
    g.add_argument("--oracle-scale", action="store_const", const=True, dest="oracle_scale")
    g.add_argument("--truncate-changepoint", action="store_const", const=True, dest="truncate_changepoint")


def _add_rule(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rule", choices=[k.value for k in RuleKind])
    p.add_argument("--level", type=float)


def _add_boot(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("bootstrap")
    g.add_argument("--replications", type=int)
    g.add_argument("--filter-len", type=int, dest="filter_len")
    g.add_argument("--pseudo-shift", dest="pseudo_shift", help="integer or 'alpha' (the block length)")
    g.add_argument("--reestimate-weights", action="store_const", const=False, dest="reuse_weights")
    g.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voljump", description="Detect and locate volatility jumps in noisy high-frequency prices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run a volatility-jump test")
    _add_common(p)
    _add_rule(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate", help="estimate spot volatility and the change point")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bootstrap", help="bootstrap-calibrated test")
    _add_common(p)
    p.add_argument("--level", type=float)
    _add_boot(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="write a simulated path")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="Monte Carlo power study over a grid of jump sizes")
    _add_common(p, data=False)
    p.add_argument("--grid", help="e.g. deltas=0.15:0.45:0.05")
    p.add_argument("--reps", type=int)
    p.add_argument("--design", choices=("nu", "default", "clean"))
    p.add_argument("--levels", help="comma-separated levels (default 0.1,0.05)")
    p.add_argument("--rules", help="comma-separated rules (default ov-trunc,nov-trunc)")
    p.add_argument("--null-calibration", action="store_const", const=True, dest="null_calibration",
                   help="also report power against empirical null quantiles")
    p.add_argument("--bootstrap", action="store_const", const=True, help="also decide with the bootstrap")
    _add_boot(p)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", BlockLengthWarning)
    del args.verbose, args.command
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
