"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (collected again in the terminal
summary) and then asserts, so a failure is both visible and fatal.
"""

import json
import math
import time

import numpy as np
import pytest

from etvo.cli import main
from etvo.config import config_from_dict
from etvo.dtw import dtw_align
from etvo.engine import EtvoParams, forward_pass, run_etvo
from etvo.metrics import simulated_update_duration, theoretical_update_duration
from etvo.oracle import brute_force_dtw, brute_force_etvo
from etvo.pipeline import InvariantError, analyze, compare, simulate_session
from etvo.signal import UniformSeries

from conftest import CONSERVATION_LOG, random_instance, record

F_S = 1000.0
PAPER_PENALTIES = (0.005, 0.01, 0.005)

# (loss model, x, average loss, quoted update duration in ms)
QUOTED = [
    ("uniform", 1.0, 0.2, 0.75),
    ("uniform", 1.0, 0.5, 1.5),
    ("uniform", 1.0, 0.8, 4.5),
    ("bursty", 0.25, 0.2, 1.5),
    ("bursty", 0.25, 0.5, 4.5),
    ("bursty", 0.25, 0.8, 16.5),
]


def session_config(seed, *, channel, recon="zero_order_hold", duration=5.0, m=32,
                   penalties=PAPER_PENALTIES, snr=None, freq=1.0, amplitude=1.0):
    d = {
        "duration": duration,
        "f_s": F_S,
        "seed": seed,
        "lead_in": 0.1,
        "motion": {"components": [[amplitude, freq, 0.0]]},
        "channel": channel,
        "recon_mode": recon,
        "etvo": {"dt_min": 0.0, "m": m, "p_prop": penalties[0], "p_fixed": penalties[1],
                 "p_slack": penalties[2]},
    }
    if snr is not None:
        d["awgn_snr_db"] = snr
    return config_from_dict(d)


def test_criterion_01_closed_form_table(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for model, x, loss, quoted in QUOTED:
        args = ["--uniform-loss", str(loss)] if model == "uniform" else ["--bursty", str(loss), "--x", str(x)]
        assert main(["theory", "--fs", "1000", *args, "--json"]) == 0
        got = json.loads(capsys.readouterr().out)["update_duration_s"]
        worst = max(worst, abs(got - quoted / 1000) / (quoted / 1000))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    with capsys.disabled():
        record(1, ok, f"closed-form table, worst rel err {worst:.1e}, {elapsed:.3f} s")
    assert ok


@pytest.mark.slow
def test_criterion_02_monte_carlo(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    details = []
    for i, (_, x, loss, quoted) in enumerate(QUOTED):
        sim = simulated_update_duration(F_S, loss, x, 4_000_000, seed=100 + i)
        rel = abs(sim - quoted / 1000) / (quoted / 1000)
        worst = max(worst, rel)
        details.append(f"{sim * 1e3:.3f}")
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 30
    with capsys.disabled():
        record(2, ok, f"Monte-Carlo {details} ms, worst rel err {worst:.2%}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_oracle_equivalence(capsys):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst, bad_warp = 0.0, 0
    for _ in range(500):
        f, g, params = random_instance(rng)
        ref, _ = brute_force_etvo(f, g, params)
        r = run_etvo(f, g, params)
        worst = max(worst, abs(r.path_cost - ref))
        w = r.warp
        bad_warp += int(np.any(w < 0) or np.any(np.diff(w) > 1))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and bad_warp == 0 and elapsed < 60
    with capsys.disabled():
        record(3, ok, f"500 instances vs enumeration, max |diff| {worst:.1e}, bad warps {bad_warp}, {elapsed:.1f} s")
    assert ok


def test_criterion_04_dtw_correctness(capsys):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 11))
        f = UniformSeries(0.0, 1e-3, rng.choice([-1.0, 0.0, 1.0, 2.0], n))
        g = UniformSeries(0.0, 1e-3, rng.choice([-1.0, 0.0, 1.0, 2.0], n))
        mismatches += dtw_align(f, g).distance != brute_force_dtw(f, g)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    with capsys.disabled():
        record(4, ok, f"500 DTW instances vs enumeration, {mismatches} mismatches, {elapsed:.1f} s")
    assert ok


def test_criterion_05_conservation(capsys):
    # Every run_etvo call in the suite goes through the checking wrapper in
    # conftest; this test adds a deliberately varied batch of its own.
    rng = np.random.default_rng(5)
    before = CONSERVATION_LOG["runs"]
    worst = 0.0
    for k in range(300):
        n, m = int(rng.integers(1, 400)), int(rng.integers(1, 40))
        scale = 10.0 ** rng.integers(-3, 4)
        f, g = scale * rng.normal(size=n + m - 1), scale * rng.normal(size=n)
        pen = rng.choice([0.0, 1e-4, 0.005, 0.01, 0.1, 1.0], 3)
        params = EtvoParams(-0.01, m, 1e-3, *pen)
        try:
            r = run_etvo(f, g, params)
        except InvariantError:
            worst = math.inf
            break
        total = math.fsum(r.evo) + r.penalty_cost
        if r.path_cost:
            worst = max(worst, abs(total - r.path_cost) / abs(r.path_cost))
    ok = worst <= 1e-12 and CONSERVATION_LOG["runs"] - before == 300
    with capsys.disabled():
        record(5, ok, f"conservation on 300 varied runs (and every other run in the suite), worst rel {worst:.1e}")
    assert ok


def test_criterion_06_constant_delay(capsys):
    rows, ok = [], True
    for delay_ms in (0, 4, 8, 15):
        cfg = session_config(6, channel={"base_delay": delay_ms / 1000})
        s = simulate_session(cfg)
        rep = analyze(s.sensed, s.reconstructed, cfg.etvo, trim=True)
        m = rep.metrics
        good = abs(m.t_etvo - delay_ms / 1000) <= 1e-3 and m.e_etvo <= 1e-9
        good &= (m.rmse > 0) if delay_ms else True
        ok &= good
        rows.append(f"{delay_ms}ms->T={m.t_etvo * 1e3:.3f}ms E={m.e_etvo:.1e} RMSE={m.rmse:.3g}")
    with capsys.disabled():
        record(6, ok, "constant delay: " + "; ".join(rows))
    assert ok


def test_criterion_07_noise_robustness(capsys):
    rows, ok = [], True
    for seed in range(5):
        cfg = session_config(seed, channel={"base_delay": 0.015}, duration=2.0, snr=70.0)
        s = simulate_session(cfg)
        _, summary = compare(s.sensed, s.reconstructed, cfg.etvo, trim=True)
        ok &= summary["eto_std"] < summary["dtw_delay_std"]
        rows.append(f"{summary['eto_std'] * 1e3:.3f}<{summary['dtw_delay_std'] * 1e3:.3f}")
    with capsys.disabled():
        record(7, ok, f"AWGN 70 dB, std(ETO) < std(DTW delay) in ms: {rows}")
    assert ok


def _impaired_session(seed):
    cfg = session_config(
        seed, duration=2.0, recon="linear_extrapolation", freq=2.0, amplitude=20.0,
        channel={"base_delay": 0.01, "jitter_std": 0.004,
                 "loss": {"model": "gilbert_elliott", "pi_b": 0.3, "x": 0.25}},
    )
    s = simulate_session(cfg)
    return s, cfg.etvo


def test_criterion_08_penalty_monotonicity(capsys):
    violations, counts_seen, travel_seen = 0, [], []
    for seed in range(10):
        s, base = _impaired_session(seed)
        counts = []
        for pf in (0.0, 0.05, 0.1):
            p = EtvoParams(base.dt_min, base.m, base.t, 0.005, pf, 0.005)
            counts.append(analyze(s.sensed, s.reconstructed, p, trim=True).n_adjustments)
        travel = []
        for pp in (0.0, 0.025, 0.05):
            p = EtvoParams(base.dt_min, base.m, base.t, pp, 0.01, 0.005)
            rep = analyze(s.sensed, s.reconstructed, p, trim=True)
            travel.append(int(np.sum(np.abs(np.diff(np.rint((rep.eto - p.dt_min) / p.t))))))
        violations += counts != sorted(counts, reverse=True)
        violations += travel != sorted(travel, reverse=True)
        counts_seen.append(counts)
        travel_seen.append(travel)
    ok = violations == 0
    with capsys.disabled():
        record(8, ok, f"penalty sweeps on 10 seeds, {violations} violations; "
                      f"adjustments {counts_seen[:3]}..., travel {travel_seen[:3]}...")
    assert ok


def test_criterion_09_sawtooth_direction(capsys):
    theory = theoretical_update_duration(F_S, 0.25 * 0.5, 0.25 * 0.5)
    measured, ok = [], True
    for seed in range(10):
        cfg = session_config(seed, duration=20.0, m=64,
                             channel={"loss": {"model": "gilbert_elliott", "pi_b": 0.5, "x": 0.25}})
        s = simulate_session(cfg)
        t = analyze(s.sensed, s.reconstructed, cfg.etvo, trim=True).metrics.t_etvo
        measured.append(round(t * 1e3, 3))
        ok &= t <= theory
    with capsys.disabled():
        record(9, ok, f"bursty 50% x=0.25, T_ETVO ms {measured} <= theory {theory * 1e3:.3g} ms")
    assert ok


def _best_time(f, g, params, repeats=5):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        forward_pass(f, g, params)
        best = min(best, time.perf_counter() - t0)
    return best


@pytest.mark.slow
def test_criterion_10_performance(capsys):
    rng = np.random.default_rng(10)
    params = EtvoParams(0.0, 64, 1e-3, *PAPER_PENALTIES)

    def instance(n):
        return rng.normal(size=n + 63), rng.normal(size=n)

    forward_pass(*instance(100), params)  # compile / load the kernel cache
    f, g = instance(20_000)
    t0 = time.perf_counter()
    forward_pass(f, g, params)
    single = time.perf_counter() - t0
    times = [_best_time(*instance(n), params) for n in (10_000, 20_000, 40_000)]
    ratios = [b / a for a, b in zip(times, times[1:])]
    ok = single < 2.0 and max(ratios) <= 2.5
    with capsys.disabled():
        record(10, ok, f"N=20000 M=64 in {single * 1e3:.1f} ms; doubling ratios "
                       f"{[round(r, 2) for r in ratios]}")
    assert ok
