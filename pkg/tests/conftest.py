import numpy as np
import pytest
from hypothesis import strategies as st

from contextlab.qcore import QuantumState

# raw Pauli matrices, kept separate from the package so oracles do not share code with it
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I = np.eye(2, dtype=complex)

finite_angle = st.floats(min_value=-20, max_value=20, allow_nan=False, allow_infinity=False)
component = st.floats(min_value=-1, max_value=1, allow_nan=False, allow_infinity=False)


@st.composite
def pure_states(draw):
    re = np.array([draw(component) for _ in range(4)])
    im = np.array([draw(component) for _ in range(4)])
    v = re + 1j * im
    n = np.linalg.norm(v)
    if n < 1e-3:
        v = np.array([1, 0, 0, 0], dtype=complex)
        n = 1.0
    return QuantumState.pure(v / n)


@st.composite
def mixed_states(draw):
    k = draw(st.integers(min_value=1, max_value=4))
    kets = [draw(pure_states()).data for _ in range(k)]
    w = np.array([draw(st.floats(min_value=0.01, max_value=1)) for _ in range(k)])
    w = w / w.sum()
    rho = sum(p * np.outer(v, v.conj()) for p, v in zip(w, kets))
    return QuantumState.mixed((rho + rho.conj().T) / 2)


any_state = st.one_of(pure_states(), mixed_states())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
