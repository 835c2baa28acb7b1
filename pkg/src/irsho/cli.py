"""Command-line front end: ``irsho analyze|sweep|validate|mine``.

Exit codes: 0 success, 1 tolerance failure (``validate``), 2 bad input.
Every CSV starts with a ``# schema: irsho-<kind> v1`` comment line.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import CONFIG_KEYS, ConfigError, NetworkConfig, config_from_mapping, db_to_lin, lin_to_db, load_config
from .baseline import run_baseline
from .ho_engine import PP_COUPLINGS, HoMetrics, analyze_grid, run_analysis
from .mc_sim import simulate_matched

__all__ = ["main", "build_parser", "write_csv", "SCHEMA_VERSION", "TOLERANCES"]

log = logging.getLogger("irsho")

SCHEMA_VERSION = 1
TOLERANCES = {"P_hof": 0.02, "P_pp": 0.02, "trigger_tv": 0.05}
EXIT_OK, EXIT_TOL, EXIT_INPUT = 0, 1, 2

_METRIC_COLS = ["P_hof", "P_pp", "E_ht_m", "E_ht_norm_m", "E_ho_m", "E_hof_m", "E_pp_m", "trigger_mass", "L_m", "clamps"]


class InputError(Exception):
    """Bad command-line or file input (exit code 2)."""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path: Path, kind: str, header: list[str], rows) -> None:
    """Write a CSV with the versioned schema comment line and LF endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: irsho-{kind} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _pmf_rows(m: HoMetrics, pmf: np.ndarray):
    for i, (x, p) in enumerate(zip(m.x, pmf)):
        yield i, x, x / m.L, p


def _parse_range(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``, or a comma list."""
    try:
        if ":" in text:
            a, b, s = (float(t) for t in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / s + 1e-9)) + 1
            return [round(a + k * s, 10) for k in range(n)]
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad range {text!r}; use start:stop:step or a comma list") from None
    if not vals:
        raise InputError("empty range")
    return vals


def _load(args) -> tuple[NetworkConfig, dict]:
    if not args.config:
        raise InputError("--config is required")
    cfg, run = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise InputError("--seed must be in [0, 2^64)")
        run["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise InputError("--trials must be >= 1")
        run["n_trials"] = args.trials
    coupling = getattr(args, "pp_coupling", None) or run.get("pp_coupling", "literal")
    if coupling not in PP_COUPLINGS:
        raise InputError(f"pp_coupling must be one of {PP_COUPLINGS}")
    run["pp_coupling"] = coupling
    return cfg, run


def _summary(label: str, m: HoMetrics) -> str:
    def f(v, unit=""):
        return "n/a" if v is None else f"{v:.6g}{unit}"

    return (
        f"{label}: P_hof={f(m.P_hof)} P_pp={f(m.P_pp)} E[x_ht]/L={f(m.E_ht_norm and m.E_ht_norm / m.L)} "
        f"E[x_ho]={f(m.E_ho, ' m')} L={m.L:.3f} m"
    )


def cmd_analyze(args) -> int:
    cfg, run = _load(args)
    out = Path(args.out)
    m = run_analysis(cfg, pp_coupling=run["pp_coupling"])
    rows = [["irs"] + [m.scalars()[k] for k in _METRIC_COLS]]
    header = ["run"] + _METRIC_COLS
    print(_summary("irs", m))
    if args.baseline:
        b = run_baseline(cfg, m, pp_coupling=run["pp_coupling"])
        bs = b.metrics.scalars()
        rows.append(["baseline"] + [bs[k] for k in _METRIC_COLS])
        ratio = ["ratio"] + [
            (m.scalars()[k] / bs[k]) if bs[k] not in (None, 0) and m.scalars()[k] is not None else None
            for k in _METRIC_COLS
        ]
        rows.append(ratio)
        print(_summary("baseline", b.metrics))
    write_csv(out / "metrics.csv", "metrics", header, rows)
    pmf_head = ["i", "x_i_m", "x_over_L", "probability"]
    write_csv(out / "trigger_pmf.csv", "trigger-pmf", pmf_head, _pmf_rows(m, m.p_ht))
    write_csv(out / "exec_pmf.csv", "exec-pmf", pmf_head, _pmf_rows(m, m.p_ho))
    return EXIT_OK


def _load_sweep(path) -> tuple[dict, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read sweep file: {exc}") from exc
    if not isinstance(raw, dict) or "sweep" not in raw:
        raise InputError("sweep file must be an object with a 'sweep' mapping")
    base = raw.get("base", {})
    sweep = raw["sweep"]
    if not isinstance(sweep, dict) or not 1 <= len(sweep) <= 2:
        raise InputError("'sweep' must name one or two parameters")
    for k, vals in sweep.items():
        if k not in CONFIG_KEYS:
            raise InputError(f"swept name {k!r} is not a config field")
        if not isinstance(vals, list) or not vals:
            raise InputError(f"sweep list for {k!r} is empty")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in vals):
            raise InputError(f"sweep list for {k!r} must hold numbers")
    return base, sweep


def cmd_sweep(args) -> int:
    base, sweep = _load_sweep(args.config)
    cfg0, run = config_from_mapping(base)
    coupling = args.pp_coupling or run.get("pp_coupling", "literal")
    if coupling not in PP_COUPLINGS:
        raise InputError(f"pp_coupling must be one of {PP_COUPLINGS}")
    names = list(sweep)
    rows = []
    fast = set(names) <= {"gamma_ho_db", "t_t_ms"}
    if fast:
        gam = sweep.get("gamma_ho_db", [lin_to_db(cfg0.gamma_ho)])
        tts = sweep.get("t_t_ms", [cfg0.T_t * 1e3])
        for t in tts:
            config_from_mapping({**base, "t_t_ms": t})  # validate each point
        grid = analyze_grid(cfg0, [db_to_lin(g) for g in gam], [t * 1e-3 for t in tts], pp_coupling=coupling)
        base_grid = None
        if args.baseline:
            base_grid = analyze_grid(cfg0.replace(N=0), [db_to_lin(g) for g in gam], [t * 1e-3 for t in tts], pp_coupling=coupling)
        for combo in itertools.product(*(sweep[n] for n in names)):
            pt = dict(zip(names, combo))
            key = (pt.get("t_t_ms", tts[0]) * 1e-3, float(db_to_lin(pt.get("gamma_ho_db", gam[0]))))
            m = grid[key]
            row = list(combo) + [m.scalars()[k] for k in _METRIC_COLS]
            if base_grid is not None:
                b = base_grid[key]
                row += [b.P_hof, b.P_pp]
            rows.append(row)
    else:
        for combo in itertools.product(*(sweep[n] for n in names)):
            cfg, _ = config_from_mapping({**base, **dict(zip(names, combo))})
            m = run_analysis(cfg, pp_coupling=coupling)
            row = list(combo) + [m.scalars()[k] for k in _METRIC_COLS]
            if args.baseline:
                b = run_analysis(cfg.replace(N=0), pp_coupling=coupling)
                row += [b.P_hof, b.P_pp]
            rows.append(row)
            log.info("sweep point %s done", combo)
    header = names + _METRIC_COLS + (["P_hof_baseline", "P_pp_baseline"] if args.baseline else [])
    write_csv(Path(args.out) / "sweep.csv", "sweep", header, rows)
    print(f"wrote {len(rows)} sweep rows")
    return EXIT_OK


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def cmd_validate(args) -> int:
    cfg, run = _load(args)
    seed = run.get("seed", 0)
    n = run.get("n_trials", 10_000)
    m = run_analysis(cfg, pp_coupling=run["pp_coupling"])
    mc = simulate_matched(cfg, n_trials=n, seed=seed)
    rows = []
    ok = True
    for name in ("P_hof", "P_pp"):
        est = mc.estimates[name]
        a = getattr(m, name)
        delta = abs(a - est.mean)
        passed = delta <= TOLERANCES[name]
        ok &= passed
        rows.append([name, a, est.mean, est.ci95, delta, TOLERANCES[name], delta <= est.ci95, passed])
    tv = total_variation(m.p_ht, mc.trigger_pmf)
    passed = tv <= TOLERANCES["trigger_tv"]
    ok &= passed
    rows.append(["trigger_tv", None, tv, None, tv, TOLERANCES["trigger_tv"], None, passed])
    header = ["metric", "analytic", "mc", "mc_ci95", "delta", "tolerance", "within_ci", "pass"]
    write_csv(Path(args.out) / "validate.csv", "validate", header, rows)
    for r in rows:
        print(f"{r[0]}: analytic={_fmt(r[1])} mc={_fmt(r[2])} delta={_fmt(r[4])} tol={r[5]} {'PASS' if r[7] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_TOL


def cmd_mine(args) -> int:
    cfg, run = _load(args)
    if not 0 < args.target <= 1:
        raise InputError("--target must be in (0, 1]")
    tts = _parse_range(args.tt_ms)
    gams = _parse_range(args.gamma_db)
    for t in tts:
        k = t * 1e-3 / cfg.T_d
        if t < 0 or abs(k - round(k)) > 1e-6:
            raise InputError(f"T_t grid value {t} ms is not a non-negative multiple of T_d")
        if t * 1e-3 >= cfg.T_p:
            raise InputError(f"T_t grid value {t} ms must be below T_p")
    grid = analyze_grid(cfg, [db_to_lin(g) for g in gams], [t * 1e-3 for t in tts], pp_coupling=run["pp_coupling"])
    rows = []
    best = None
    for t in tts:
        for g in gams:
            m = grid[(t * 1e-3, float(db_to_lin(g)))]
            worst = max(m.P_hof, m.P_pp)
            # a probability never exceeds one, so target 1 constrains nothing
            feas = worst < args.target or args.target >= 1.0
            rows.append([t, g, m.P_hof, m.P_pp, worst, feas])
            if best is None or worst < best[4]:
                best = rows[-1]
    header = ["t_t_ms", "gamma_ho_db", "P_hof", "P_pp", "max_prob", "feasible"]
    out = Path(args.out)
    write_csv(out / "mine.csv", "mine", header, rows)
    write_csv(out / "feasible.csv", "feasible", header, [r for r in rows if r[5]])
    n_feas = sum(1 for r in rows if r[5])
    print(f"{n_feas} of {len(rows)} grid points feasible at target {args.target}")
    print(f"best: T_t={best[0]} ms, gamma_HO={best[1]} dB, max(P_hof, P_pp)={best[4]:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsho", description="Handover analysis for IRS-assisted cellular networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=False):
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--pp-coupling", choices=PP_COUPLINGS, default=None)
        if trials:
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--trials", type=int, default=None)

    sp = sub.add_parser("analyze", help="single analytic run")
    common(sp)
    sp.add_argument("--baseline", action="store_true", help="add the no-IRS run and ratios")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("sweep", help="parameter sweep from a sweep file")
    common(sp)
    sp.add_argument("--baseline", action="store_true", help="add baseline columns")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="analytic versus matched-geometry Monte Carlo")
    common(sp, trials=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("mine", help="feasible (T_t, gamma_HO) grid search")
    common(sp)
    sp.add_argument("--target", type=float, default=1e-3)
    sp.add_argument("--tt-ms", default="0:640:40", help="T_t grid in ms")
    sp.add_argument("--gamma-db", default="-8:4:0.5", help="gamma_HO grid in dB")
    sp.set_defaults(func=cmd_mine)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
