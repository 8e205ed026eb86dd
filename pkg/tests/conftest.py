import numpy as np
import pytest

from flexbeam.expr import function_and_derivatives
from flexbeam.model import DirichletDatum, LoadField, Loads, ModelParams


def datum(text: str) -> DirichletDatum:
    return DirichletDatum(*function_and_derivatives(text), description=text)


def load(text: str) -> LoadField:
    return LoadField(function_and_derivatives(text, 0)[0], description=text)


def observed_order(ns, values) -> float:
    """Least-squares slope of log(value) against log(h)."""
    h = 2.0 / np.asarray(ns, dtype=float)
    return float(np.polyfit(np.log(h), np.log(np.abs(values)), 1)[0])


# shipped instances (also used by the demos)
NONHOM_W = "0.1 + 0.3*x - 0.2*x**2 + 0.25*x**3"
BASE = ModelParams(eta=1.0, mu=10.0, gamma=0.5, alpha=0.02, beta=0.015, sigma=0.05)


@pytest.fixture
def base_params():
    return BASE


@pytest.fixture
def nonhom_w():
    return datum(NONHOM_W)


@pytest.fixture
def unit_load():
    return Loads.single(LoadField.constant(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  " + "; ".join(m for _, m in parts))
