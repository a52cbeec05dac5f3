import numpy as np
import pytest

from etvo.engine import AlignmentResult, EtvoParams
from etvo.pipeline import (
    InvariantError,
    ReportBundle,
    analysis_inputs,
    analyze,
    check_conservation,
    covered_range,
)
from etvo.signal import UniformSeries


def test_conservation_guard_fires():
    params = EtvoParams(0.0, 3, 1.0, 0.1, 0.2, 0.0)
    w = np.array([2, 0, 0])  # one drop of 2: penalty 0.2 + 0.2
    good = AlignmentResult(w, w * 1.0, np.array([1.0, 0.5, 0.0]), 1.9, 0.4)
    check_conservation(good, params)
    bad = AlignmentResult(w, w * 1.0, np.array([1.0, 0.5, 0.0]), 1.9 + 1e-9, 0.4)
    with pytest.raises(InvariantError):
        check_conservation(bad, params)


def test_trim_keeps_covered_samples_only():
    sensed = UniformSeries(-0.005, 1e-3, np.sin(np.arange(60) / 4))
    recon = UniformSeries(-0.005, 1e-3, np.zeros(60))
    params = EtvoParams(0.0, 8, 1e-3)
    start, stop = covered_range(sensed, recon, params)
    assert (start, stop) == (7, 60)
    with pytest.raises(ValueError):
        analysis_inputs(sensed, recon, params, trim=False)
    f, g, same = analysis_inputs(sensed, recon, params, trim=True)
    assert len(f) == len(g) + 7
    assert same.t0 == g.t0 and len(same) == len(g)


def test_smoothing_never_touches_metrics():
    sensed = UniformSeries(-0.05, 1e-3, np.sin(np.arange(400) / 9))
    recon = sensed.slice(45, 350).with_values(np.sin(np.arange(45, 350) / 9) + 0.01 * np.cos(np.arange(305)))
    params = EtvoParams(0.0, 16, 1e-3, 0.005, 0.01, 0.005)
    plain = analyze(sensed, recon, params)
    smooth = analyze(sensed, recon, params, smooth_evo_sigma=4.0)
    assert plain.metrics == smooth.metrics
    np.testing.assert_array_equal(plain.evo, smooth.evo)
    assert smooth.evo_smoothed.shape == smooth.evo.shape


def test_report_schema_is_checked():
    with pytest.raises(ValueError):
        ReportBundle.from_dict({"schema": "something-else"})
