import functools

import numpy as np
import pytest

import etvo
from etvo import engine, pipeline
from etvo.engine import EtvoParams
from etvo.pipeline import check_conservation

# Every ETVO run anywhere in the suite is checked for EVO/penalty conservation.
# Patched at import time so test modules bind the checked function.
_original_run_etvo = engine.run_etvo
CONSERVATION_LOG = {"runs": 0}


@functools.wraps(_original_run_etvo)
def _checked_run_etvo(f, g, params):
    result = _original_run_etvo(f, g, params)
    check_conservation(result, params)
    CONSERVATION_LOG["runs"] += 1
    return result


for _mod in (engine, pipeline, etvo):
    _mod.run_etvo = _checked_run_etvo


ALPHABET = np.array([-1.0, 0.0, 1.0, 2.0])
PENALTY_GRID = (0.0, 0.01, 0.1)


def random_instance(rng, n_max=8, m_max=4, penalties=PENALTY_GRID):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    f = rng.choice(ALPHABET, n + m - 1)
    g = rng.choice(ALPHABET, n)
    pp, pf, ps = (float(rng.choice(penalties)) for _ in range(3))
    return f, g, EtvoParams(0.0, m, 1.0, pp, pf, ps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_RESULTS = []


def record(criterion, passed, detail):
    line = f"[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
    terminalreporter.write_line(f"ETVO runs checked for conservation: {CONSERVATION_LOG['runs']}")
