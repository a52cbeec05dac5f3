"""Command-line entry point: ``etvo simulate | analyze | compare | theory``.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numeric or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .channel import read_packets, write_packets
from .config import ConfigError, RunConfig, config_from_dict, config_hash, load_config
from .engine import EtvoParams
from .metrics import ge_steady_state, steady_state_tail, theoretical_update_duration
from .pipeline import InvariantError, analysis_inputs, analyze, compare, session_theory, simulate_session
from .signal import TraceFormatError, read_trace, write_trace

log = logging.getLogger("etvo")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _write_session(cfg: RunConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    session = simulate_session(cfg)
    write_trace(out / "sensed.csv", session.sensed)
    write_packets(out / "trace.csv", session.trace)
    write_trace(out / "reconstructed.csv", session.reconstructed)
    echo = cfg.to_dict()
    provenance = {
        "config": echo,
        "config_hash": config_hash(echo),
        "seed": cfg.seed,
        "version": __version__,
        "packets_sent": session.trace.n_sent,
        "packets_delivered": len(session.trace),
        "warmup_samples": session.reconstructed.meta.get("warmup_samples", 0),
        "theory_update_s": session_theory(cfg),
    }
    (out / "provenance.json").write_text(json.dumps(provenance, indent=1, sort_keys=True) + "\n")
    return provenance


def _simulate_one(args):
    cfg, out = args
    return _write_session(cfg, out)


def cmd_simulate(ns) -> int:
    cfg = load_config(ns.config)
    overrides = {}
    for key in ("duration", "f_s", "lead_in", "awgn_snr_db"):
        v = getattr(ns, key)
        if v is not None:
            overrides[key] = v
    if ns.recon_mode:
        overrides["recon_mode"] = ns.recon_mode
    if overrides:
        cfg = config_from_dict({**cfg.to_dict(), **overrides})
    out = Path(ns.out)
    seeds = ns.seed
    jobs = [(cfg.with_seed(s), out if len(seeds) == 1 else out / f"seed_{s}") for s in seeds]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(j) for j in jobs]
    for (c, o), prov in zip(jobs, results):
        log.info("seed %s -> %s (%d/%d packets delivered)", c.seed, o,
                 prov["packets_delivered"], prov["packets_sent"])
    return EXIT_OK


def _params_from_args(ns, dt: float) -> EtvoParams:
    base = None
    if getattr(ns, "config", None):
        base = load_config(ns.config).etvo
    vals = {
        "dt_min": 0.0, "m": 64, "p_prop": 0.005, "p_fixed": 0.01, "p_slack": 0.005,
    }
    if base is not None:
        vals.update(dt_min=base.dt_min, m=base.m, p_prop=base.p_prop,
                    p_fixed=base.p_fixed, p_slack=base.p_slack)
    for key in vals:
        v = getattr(ns, key)
        if v is not None:
            vals[key] = v
    try:
        return EtvoParams(t=dt, **vals)
    except ValueError as exc:
        raise ConfigError(f"etvo: {exc}") from None


def _load_pair(ns):
    sensed = read_trace(ns.sensed)
    recon = read_trace(ns.reconstructed)
    if not np.isclose(sensed.dt, recon.dt, rtol=1e-9, atol=0):
        raise TraceFormatError(f"sampling period mismatch: {sensed.dt} vs {recon.dt}")
    return sensed, recon


def cmd_analyze(ns) -> int:
    sensed, recon = _load_pair(ns)
    params = _params_from_args(ns, recon.dt)
    trace = None
    if ns.trace:
        trace = read_packets(ns.trace)
    theory = None
    if ns.config:
        theory = session_theory(load_config(ns.config))
    try:
        report = analyze(
            sensed, recon, params, trim=ns.trim, trace=trace, theory_update_s=theory,
            with_dtw=ns.with_dtw, smooth_evo_sigma=ns.smooth_evo_sigma, seed=ns.seed,
        )
    except ValueError as exc:
        raise TraceFormatError(str(exc)) from None
    if ns.verify:
        _verify(sensed, recon, params, ns.trim, report)
    Path(ns.out).write_text(report.to_json())
    m = report.metrics
    print(f"T_ETVO {m.t_etvo * 1e3:.4f} ms  E_ETVO {m.e_etvo:.6g}  RMSE {m.rmse:.6g}  "
          f"adjustments {report.n_adjustments}")
    return EXIT_OK


def _verify(sensed, recon, params, trim, report) -> None:
    from .oracle import MAX_ETVO_M, MAX_ETVO_N, brute_force_etvo, memo_etvo_costs

    f, g, _ = analysis_inputs(sensed, recon, params, trim)
    if len(g) > MAX_ETVO_N or params.m > MAX_ETVO_M:
        raise ConfigError(f"--verify: instance too large (N <= {MAX_ETVO_N}, M <= {MAX_ETVO_M})")
    best, _ = brute_force_etvo(f, g, params)
    memo = float(np.min(memo_etvo_costs(f, g, params)))
    for name, ref in (("enumeration", best), ("recursion", memo)):
        if abs(ref - report.path_cost) > 1e-12:
            raise InvariantError(f"path cost {report.path_cost!r} disagrees with {name} {ref!r}")
    print(f"verified: path cost {report.path_cost:.12g} matches enumeration and recursion")


def cmd_compare(ns) -> int:
    sensed, recon = _load_pair(ns)
    params = _params_from_args(ns, recon.dt)
    try:
        table, summary = compare(sensed, recon, params, trim=ns.trim)
    except ValueError as exc:
        raise TraceFormatError(str(exc)) from None
    with open(ns.out, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = list(table)
        w.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])
    text = json.dumps(summary, indent=1)
    if ns.summary:
        Path(ns.summary).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _theory_rates(ns) -> tuple[float, float, dict]:
    chosen = [ns.uniform_loss is not None, ns.bursty is not None, ns.p is not None or ns.r is not None]
    if sum(chosen) != 1:
        raise ConfigError("theory: give exactly one of --uniform-loss, --bursty, or --p/--r")
    if ns.uniform_loss is not None:
        q = ns.uniform_loss
        if not 0 <= q < 1:
            raise ConfigError("--uniform-loss: must lie in [0, 1)")
        return q, 1.0 - q, {"model": "uniform", "q": q}
    if ns.bursty is not None:
        pi_b, x = ns.bursty, ns.x
        if not 0 <= pi_b < 1 or not 0 < x <= 1:
            raise ConfigError("--bursty/--x: need 0 <= loss < 1 and 0 < x <= 1")
        return x * pi_b, x * (1 - pi_b), {"model": "gilbert_elliott", "pi_b": pi_b, "x": x}
    if ns.p is None or ns.r is None:
        raise ConfigError("theory: --p and --r go together")
    return ns.p, ns.r, {"model": "rates"}


def cmd_theory(ns) -> int:
    p, r, model = _theory_rates(ns)
    try:
        dt = theoretical_update_duration(ns.fs, p, r)
        pi_g, pi_b = ge_steady_state(p, r, ns.n_max)
        tail = steady_state_tail(p, r, ns.n_max)
    except ValueError as exc:
        raise ConfigError(f"theory: {exc}") from None
    out = {
        "f_s": ns.fs, "p": p, "r": r, "loss": model,
        "update_duration_s": dt, "pi_g": pi_g, "pi_b": [float(v) for v in pi_b], "tail": tail,
    }
    if ns.json:
        print(json.dumps(out, indent=1))
        return EXIT_OK
    print(f"update duration: {dt * 1e3:.6g} ms  (f_s={ns.fs:g} Hz, p={p:g}, r={r:g})")
    print(f"{'state':>8}  probability")
    print(f"{'G':>8}  {pi_g:.6g}")
    for n, v in enumerate(pi_b, start=1):
        print(f"{'B' + str(n):>8}  {v:.6g}")
    print(f"{'B>' + str(ns.n_max):>8}  {tail:.6g}")
    return EXIT_OK


def _add_etvo_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ETVO parameters (override --config)")
    g.add_argument("--config", help="YAML config; its etvo section supplies defaults")
    g.add_argument("--dt-min", dest="dt_min", type=float, help="minimum time offset in seconds")
    g.add_argument("--m", type=int, help="number of offset rows")
    g.add_argument("--p-prop", dest="p_prop", type=float)
    g.add_argument("--p-fixed", dest="p_fixed", type=float)
    g.add_argument("--p-slack", dest="p_slack", type=float)
    p.add_argument("--trim", action="store_true",
                   help="drop reconstructed samples whose window is not covered by the sensed trace")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etvo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate, impair and reconstruct a session")
    s.add_argument("config")
    s.add_argument("--seed", type=int, nargs="+", required=True)
    s.add_argument("--out", default=".")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--duration", type=float)
    s.add_argument("--f-s", dest="f_s", type=float)
    s.add_argument("--lead-in", dest="lead_in", type=float)
    s.add_argument("--awgn-snr-db", dest="awgn_snr_db", type=float)
    s.add_argument("--recon-mode", dest="recon_mode", choices=["zero_order_hold", "linear_extrapolation"])
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="ETVO metrics for a sensed/reconstructed pair")
    a.add_argument("sensed")
    a.add_argument("reconstructed")
    a.add_argument("--out", default="report.json")
    a.add_argument("--trace", help="packet trace for the packets-per-second metric")
    a.add_argument("--smooth-evo-sigma", dest="smooth_evo_sigma", type=float,
                   help="add a Gaussian-smoothed EVO (sigma in samples) for display")
    a.add_argument("--with-dtw", dest="with_dtw", action="store_true")
    a.add_argument("--verify", action="store_true", help="cross-check against the brute-force oracle")
    a.add_argument("--seed", type=int, help="seed recorded in the report")
    _add_etvo_flags(a)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="per-sample ETVO vs DTW table")
    c.add_argument("sensed")
    c.add_argument("reconstructed")
    c.add_argument("--out", default="compare.csv")
    c.add_argument("--summary")
    _add_etvo_flags(c)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("theory", help="closed-form update duration and steady state")
    t.add_argument("--fs", type=float, required=True)
    t.add_argument("--uniform-loss", dest="uniform_loss", type=float)
    t.add_argument("--bursty", type=float, help="average loss for the Gilbert-Elliott model")
    t.add_argument("--x", type=float, default=0.25, help="burstiness scalar (with --bursty)")
    t.add_argument("--p", type=float)
    t.add_argument("--r", type=float)
    t.add_argument("--n-max", dest="n_max", type=int, default=5)
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_theory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, ArithmeticError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
