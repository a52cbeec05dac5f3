"""Run configuration: YAML loading, validation with field paths, hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .channel import ChannelProfile, GilbertElliottLoss, ReconstructionMode, UniformLoss
from .engine import EtvoParams
from .signal import MotionSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "config_from_dict", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class RunConfig:
    duration: float
    f_s: float
    seed: int | None = None
    lead_in: float = 0.1
    components: tuple[tuple[float, float, float], ...] = ((1.0, 0.5, 0.0),)
    quiet_intervals: tuple[tuple[float, float], ...] = ()
    channel: ChannelProfile = field(default_factory=ChannelProfile)
    recon_mode: ReconstructionMode = ReconstructionMode.LINEAR_EXTRAPOLATION
    etvo: EtvoParams | None = None
    awgn_snr_db: float | None = None

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.f_s))

    @property
    def lead_samples(self) -> int:
        return int(round(self.lead_in * self.f_s))

    def motion_spec(self) -> MotionSpec:
        """Motion over the whole sensed span: lead-in, session, and an equal tail."""
        total = self.n_samples + 2 * self.lead_samples
        quiet = tuple((a + self.lead_in, b + self.lead_in) for a, b in self.quiet_intervals)
        return MotionSpec(total / self.f_s, self.f_s, self.components, quiet)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, channel=replace(self.channel, seed=seed))

    def to_dict(self) -> dict:
        ch = self.channel
        if ch.loss is None:
            loss: Any = None
        elif isinstance(ch.loss, UniformLoss):
            loss = {"model": "uniform", "q": ch.loss.q}
        else:
            loss = {"model": "gilbert_elliott", "pi_b": ch.loss.pi_b, "x": ch.loss.x}
        out = {
            "duration": self.duration,
            "f_s": self.f_s,
            "seed": self.seed,
            "lead_in": self.lead_in,
            "motion": {
                "components": [list(c) for c in self.components],
                "quiet_intervals": [list(q) for q in self.quiet_intervals],
            },
            "channel": {
                "base_delay": ch.base_delay,
                "jitter_std": ch.jitter_std,
                "loss": loss,
                "deadband": ch.deadband,
            },
            "recon_mode": self.recon_mode.value,
            "awgn_snr_db": self.awgn_snr_db,
            "etvo": None,
        }
        if self.etvo is not None:
            e = self.etvo
            out["etvo"] = {
                "dt_min": e.dt_min, "m": e.m, "p_prop": e.p_prop,
                "p_fixed": e.p_fixed, "p_slack": e.p_slack,
            }
        return out


def config_hash(d: Mapping) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _num(d: Mapping, key: str, path: str, default=None, *, required=False, positive=False, nonneg=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}{key}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{path}{key}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{path}{key}: must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{path}{key}: must be >= 0")
    return v


def _section(d: Mapping, key: str) -> Mapping:
    v = d.get(key) or {}
    if not isinstance(v, Mapping):
        raise ConfigError(f"{key}: expected a section")
    return v


def _pairs(raw, path: str, width: int) -> tuple:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a list")
    out = []
    for n, item in enumerate(raw):
        if not isinstance(item, (list, tuple)) or len(item) != width:
            raise ConfigError(f"{path}[{n}]: expected {width} numbers")
        try:
            vals = tuple(float(v) for v in item)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}[{n}]: expected {width} numbers") from None
        out.append(vals)
    return tuple(out)


def _loss(raw) -> UniformLoss | GilbertElliottLoss | None:
    if raw is None or raw == "none":
        return None
    if not isinstance(raw, Mapping):
        raise ConfigError("channel.loss: expected a section or null")
    model = raw.get("model")
    try:
        if model == "uniform":
            return UniformLoss(_num(raw, "q", "channel.loss.", required=True))
        if model == "gilbert_elliott":
            pi_b = _num(raw, "pi_b", "channel.loss.", required=True)
            x = _num(raw, "x", "channel.loss.", 1.0)
            return GilbertElliottLoss(pi_b, x)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"channel.loss: {exc}") from None
    raise ConfigError(f"channel.loss.model: expected 'uniform' or 'gilbert_elliott', got {model!r}")


def config_from_dict(d: Mapping) -> RunConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("<root>: expected a mapping")
    duration = _num(d, "duration", "", required=True, positive=True)
    f_s = _num(d, "f_s", "", required=True, positive=True)
    lead_in = _num(d, "lead_in", "", 0.1, nonneg=True)
    seed = d.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed: expected a non-negative integer")

    motion = _section(d, "motion")
    components = _pairs(motion.get("components", [[1.0, 0.5, 0.0]]), "motion.components", 3)
    quiet = _pairs(motion.get("quiet_intervals"), "motion.quiet_intervals", 2)
    for n, (a, b) in enumerate(quiet):
        if not 0 <= a <= b <= duration:
            raise ConfigError(f"motion.quiet_intervals[{n}]: must lie within [0, duration]")

    ch = _section(d, "channel")
    try:
        channel = ChannelProfile(
            base_delay=_num(ch, "base_delay", "channel.", 0.0, nonneg=True),
            jitter_std=_num(ch, "jitter_std", "channel.", 0.0, nonneg=True),
            loss=_loss(ch.get("loss")),
            deadband=_num(ch, "deadband", "channel.", None, nonneg=True),
            seed=seed or 0,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"channel: {exc}") from None

    try:
        recon = ReconstructionMode(d.get("recon_mode", ReconstructionMode.LINEAR_EXTRAPOLATION.value))
    except ValueError:
        raise ConfigError(f"recon_mode: unknown mode {d.get('recon_mode')!r}") from None

    etvo = None
    if d.get("etvo") is not None:
        e = _section(d, "etvo")
        t = _num(e, "t", "etvo.", 1.0 / f_s, positive=True)
        if not math.isclose(t, 1.0 / f_s, rel_tol=1e-9):
            raise ConfigError(f"etvo.t: {t} is inconsistent with f_s={f_s}")
        m = e.get("m", 64)
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            raise ConfigError("etvo.m: expected a positive integer")
        etvo = EtvoParams(
            dt_min=_num(e, "dt_min", "etvo.", 0.0),
            m=m,
            t=1.0 / f_s,
            p_prop=_num(e, "p_prop", "etvo.", 0.005, nonneg=True),
            p_fixed=_num(e, "p_fixed", "etvo.", 0.01, nonneg=True),
            p_slack=_num(e, "p_slack", "etvo.", 0.005, nonneg=True),
        )
        # The sensed trace carries lead_in on both sides of the session.
        need = max(etvo.dt_min + (m - 1) / f_s, -etvo.dt_min)
        if lead_in < need - 1e-9 / f_s:
            raise ConfigError(f"lead_in: {lead_in} s is too short for the ETVO window, need {need:g} s")

    snr = d.get("awgn_snr_db")
    if snr is not None:
        snr = _num(d, "awgn_snr_db", "")

    cfg = RunConfig(
        duration=duration, f_s=f_s, seed=seed, lead_in=lead_in, components=components,
        quiet_intervals=quiet, channel=channel, recon_mode=recon, etvo=etvo, awgn_snr_db=snr,
    )
    if cfg.n_samples < 1:
        raise ConfigError("duration: shorter than one sample period")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: not valid YAML: {exc}") from None
    return config_from_dict(raw or {})
