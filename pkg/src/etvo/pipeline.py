"""Generate -> impair -> reconstruct -> align -> report."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import __version__
from .channel import (
    GilbertElliottLoss,
    PacketTrace,
    UniformLoss,
    reconstruct,
    simulate_channel,
)
from .config import RunConfig, config_hash
from .dtw import dtw_distance, path_residuals, warp_to_delay
from .engine import EtvoParams, AlignmentResult, penalty_of_warp, reference_window, run_etvo
from .metrics import SessionMetrics, e_etvo, packets_per_second, t_etvo, theoretical_update_duration
from .signal import UniformSeries, add_awgn, gen_motion, rmse

__all__ = [
    "REPORT_SCHEMA",
    "InvariantError",
    "Session",
    "ReportBundle",
    "simulate_session",
    "session_theory",
    "covered_range",
    "analysis_inputs",
    "check_conservation",
    "analyze",
    "compare",
]

REPORT_SCHEMA = "etvo-report/1"
CONSERVATION_RTOL = 1e-12


class InvariantError(RuntimeError):
    """A numeric self-check failed."""


@dataclass(frozen=True, eq=False)
class Session:
    sensed: UniformSeries
    trace: PacketTrace
    reconstructed: UniformSeries


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def simulate_session(cfg: RunConfig) -> Session:
    """Sensed trace (with lead-in on both sides) and the receiver's reconstruction.

    AWGN, when configured, is measurement noise on the sensed trace only; the
    channel carries the clean motion.
    """
    seed = 0 if cfg.seed is None else cfg.seed
    motion = gen_motion(cfg.motion_spec(), seed)
    lead = cfg.lead_samples
    clean = UniformSeries(-lead / cfg.f_s, 1.0 / cfg.f_s, motion.values)
    trace = simulate_channel(clean, cfg.channel)
    recon = reconstruct(trace, cfg.f_s, (cfg.n_samples - 1) / cfg.f_s, cfg.recon_mode)
    sensed = clean
    if cfg.awgn_snr_db is not None:
        sensed = add_awgn(clean, cfg.awgn_snr_db, _sub_seed(seed, 1))
    return Session(sensed, trace, recon)


def session_theory(cfg: RunConfig) -> float | None:
    """Closed-form update duration when the channel has a plain loss model."""
    loss = cfg.channel.loss
    if cfg.channel.deadband is not None:
        return None
    if loss is None:
        p, r = 0.0, 1.0
    elif isinstance(loss, UniformLoss):
        p, r = loss.q, 1.0 - loss.q
    elif isinstance(loss, GilbertElliottLoss):
        ge = loss.chain()
        p, r = ge.p, ge.r
    else:
        return None
    return theoretical_update_duration(cfg.f_s, p, r)


def covered_range(sensed: UniformSeries, g: UniformSeries, params: EtvoParams) -> tuple[int, int]:
    """Range ``[start, stop)`` of ``g`` samples whose alignment window lies inside ``sensed``."""
    lead = params.dt_min + (params.m - 1) * params.t
    first = (sensed.t0 + lead - g.t0) / g.dt
    last = (sensed.t_end + params.dt_min - g.t0) / g.dt
    start = max(0, math.ceil(first - 1e-6))
    stop = min(len(g), math.floor(last + 1e-6) + 1)
    return start, stop


def analysis_inputs(
    sensed: UniformSeries, recon: UniformSeries, params: EtvoParams, trim: bool = False
) -> tuple[UniformSeries, UniformSeries, UniformSeries]:
    """``(f, g, same_time)``: ETVO reference window, analysed output, and the
    sensed samples at ``g``'s own timestamps (for RMSE and DTW)."""
    g = recon
    if trim:
        start, stop = covered_range(sensed, recon, params)
        if stop <= start:
            raise ValueError("no reconstructed sample has a complete alignment window")
        g = recon.slice(start, stop)
    f = reference_window(sensed, g, params)
    i0 = sensed.index_of(g.t0)
    if i0 < 0 or i0 + len(g) > len(sensed):
        raise ValueError("sensed trace does not span the reconstructed samples")
    same = sensed.slice(i0, i0 + len(g))
    return f, g, same


def check_conservation(result: AlignmentResult, params: EtvoParams) -> None:
    """Raise unless sum(EVO) + recounted penalties equals the path cost."""
    total = math.fsum(result.evo) + penalty_of_warp(result.warp, params)
    if not math.isclose(total, result.path_cost, rel_tol=CONSERVATION_RTOL, abs_tol=1e-300):
        raise InvariantError(
            f"EVO + penalties = {total!r} but path cost = {result.path_cost!r}"
        )


def _digest(s: UniformSeries) -> str:
    h = hashlib.sha256()
    h.update(np.float64([s.t0, s.dt]).tobytes())
    h.update(np.ascontiguousarray(s.values).tobytes())
    return h.hexdigest()


def _params_dict(p: EtvoParams) -> dict:
    return {"dt_min": p.dt_min, "m": p.m, "t": p.t, "p_prop": p.p_prop, "p_fixed": p.p_fixed, "p_slack": p.p_slack}


@dataclass(frozen=True, eq=False)
class ReportBundle:
    metrics: SessionMetrics
    eto: np.ndarray
    evo: np.ndarray
    params: dict
    config_hash: str
    seed: int | None = None
    version: str = __version__
    n_adjustments: int = 0
    path_cost: float = 0.0
    penalty_cost: float = 0.0
    t0: float = 0.0
    dt: float = 1.0
    evo_smoothed: np.ndarray | None = None
    dtw_delay: np.ndarray | None = None
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> dict[str, Any]:
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "schema": REPORT_SCHEMA,
            "version": self.version,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "created": self.created,
            "params": self.params,
            "metrics": self.metrics.to_dict(),
            "path_cost": self.path_cost,
            "penalty_cost": self.penalty_cost,
            "n_adjustments": self.n_adjustments,
            "t0": self.t0,
            "dt": self.dt,
            "eto": arr(self.eto),
            "evo": arr(self.evo),
            "evo_smoothed": arr(self.evo_smoothed),
            "dtw_delay": arr(self.dtw_delay),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")

        def arr(a):
            return None if a is None else np.asarray(a, dtype=float)

        return cls(
            metrics=SessionMetrics(**d["metrics"]),
            eto=arr(d["eto"]),
            evo=arr(d["evo"]),
            params=d["params"],
            config_hash=d["config_hash"],
            seed=d["seed"],
            version=d["version"],
            n_adjustments=d["n_adjustments"],
            path_cost=d["path_cost"],
            penalty_cost=d["penalty_cost"],
            t0=d["t0"],
            dt=d["dt"],
            evo_smoothed=arr(d.get("evo_smoothed")),
            dtw_delay=arr(d.get("dtw_delay")),
            created=d["created"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportBundle":
        return cls.from_dict(json.loads(text))


def analyze(
    sensed: UniformSeries,
    recon: UniformSeries,
    params: EtvoParams,
    *,
    trim: bool = False,
    trace: PacketTrace | None = None,
    theory_update_s: float | None = None,
    with_dtw: bool = False,
    smooth_evo_sigma: float | None = None,
    seed: int | None = None,
) -> ReportBundle:
    f, g, same = analysis_inputs(sensed, recon, params, trim)
    result = run_etvo(f, g, params)
    check_conservation(result, params)
    pps = None
    if trace is not None:
        pps = packets_per_second(trace, g.t0 + len(g) * g.dt, t_start=g.t0)
    metrics = SessionMetrics(
        t_etvo=t_etvo(result),
        e_etvo=e_etvo(result),
        rmse=rmse(same, g),
        packets_per_second=pps,
        theory_update_s=theory_update_s,
    )
    smoothed = None
    if smooth_evo_sigma:
        # Display only; never feeds the metrics above.
        smoothed = gaussian_filter1d(result.evo, smooth_evo_sigma, mode="nearest")
    dtw_delay = None
    if with_dtw:
        _, path = dtw_distance(same, g)
        dtw_delay = warp_to_delay(path, g.dt)
    provenance = {
        "params": _params_dict(params),
        "sensed": _digest(sensed),
        "reconstructed": _digest(recon),
        "trim": trim,
        "seed": seed,
    }
    return ReportBundle(
        metrics=metrics,
        eto=result.eto,
        evo=result.evo,
        params=_params_dict(params),
        config_hash=config_hash(provenance),
        seed=seed,
        n_adjustments=result.n_adjustments,
        path_cost=result.path_cost,
        penalty_cost=result.penalty_cost,
        t0=g.t0,
        dt=g.dt,
        evo_smoothed=smoothed,
        dtw_delay=dtw_delay,
    )


def compare(
    sensed: UniformSeries, recon: UniformSeries, params: EtvoParams, *, trim: bool = False
) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    """Per-sample ETVO and DTW columns plus summary numbers."""
    f, g, same = analysis_inputs(sensed, recon, params, trim)
    result = run_etvo(f, g, params)
    check_conservation(result, params)
    distance, path = dtw_distance(same, g)
    dtw_delay = warp_to_delay(path, g.dt)
    residual = path_residuals(same, g, path)
    table = {
        "t_seconds": g.times,
        "eto_s": result.eto,
        "dtw_delay_s": dtw_delay,
        "evo": result.evo,
        "dtw_residual": residual,
    }
    summary = {
        "t_etvo": t_etvo(result),
        "e_etvo": e_etvo(result),
        "rmse": rmse(same, g),
        "dtw_distance": distance,
        "dtw_mean_delay": float(np.mean(dtw_delay)),
        "eto_std": float(np.std(result.eto)),
        "dtw_delay_std": float(np.std(dtw_delay)),
        "etvo_adjustments": result.n_adjustments,
        "dtw_adjustments": int(np.count_nonzero(np.diff(dtw_delay))),
    }
    return table, summary
