import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contextlab.observables import PauliObservable, default_square
from contextlab.qcore import GateSequence, LightShift, MolmerSorensen
from contextlab.synthesis import (
    SynthesisFailed,
    SynthesisProblem,
    ascend,
    build_sequence,
    cached_mapping,
    default_readout_qubit,
    gradient,
    objective,
    synthesize_mapping,
    verify_mapping,
)

P = PauliObservable.parse


def conj(seq, target):
    u = seq.matrix()
    return u @ target.matrix @ u.conj().T


def test_trivial_target_gives_empty_sequence():
    res = synthesize_mapping(SynthesisProblem(P("ZI"), readout_qubit=1))
    assert len(res.sequence) == 0
    assert res.fidelity == 1.0


def test_correlation_needs_entangling_gate():
    res = synthesize_mapping(SynthesisProblem(P("ZZ"), readout_qubit=2))
    assert res.sequence.count(MolmerSorensen) >= 1
    np.testing.assert_allclose(conj(res.sequence, P("ZZ")), P("IZ").matrix, atol=1e-6)
    assert res.residual <= 1e-6


def test_local_target_uses_local_gates_only():
    res = synthesize_mapping(SynthesisProblem.for_target(P("XI")))
    assert res.sequence.count(MolmerSorensen) == 0
    np.testing.assert_allclose(conj(res.sequence, P("XI")), P("ZI").matrix, atol=1e-6)


def test_template_without_ms_rejected_for_correlations():
    with pytest.raises(ValueError):
        SynthesisProblem(P("XX"), template=("C", "L", "C"))


def test_nonpositive_tolerance_rejected():
    with pytest.raises(ValueError):
        SynthesisProblem(P("XX"), tolerance=0)


def test_failure_is_reported():
    # a lone light shift cannot move X on qubit 1 onto qubit 2
    problem = SynthesisProblem(P("XI"), readout_qubit=2, template=("L",), max_restarts=2)
    with pytest.raises(SynthesisFailed) as err:
        synthesize_mapping(problem)
    assert 0 <= err.value.best_fidelity <= 1


def test_readout_rule():
    assert default_readout_qubit(P("ZI")) == 1
    assert default_readout_qubit(P("IX")) == 2
    assert default_readout_qubit(P("YY")) == 2


def test_deterministic():
    a = synthesize_mapping(SynthesisProblem(P("XZ")), seed=3)
    b = synthesize_mapping(SynthesisProblem(P("XZ")), seed=3)
    assert a == b


def test_verify_mapping_examples():
    empty = GateSequence(())
    assert verify_mapping(empty, P("ZI"), 1) == 0
    assert verify_mapping(empty, P("XI"), 1) == pytest.approx(2 * math.sqrt(2))


def test_zero_gradient_at_identity():
    problem = SynthesisProblem(P("ZI"), readout_qubit=1, template=("C", "L", "C"))
    g = gradient(problem, np.zeros(problem.n_params))
    assert np.linalg.norm(g) < 1e-9


def test_gradient_small_at_optimum():
    problem = SynthesisProblem(P("YY"))
    res = synthesize_mapping(problem)
    x = np.array([v for g in res.sequence for v in ((g.theta,) if isinstance(g, LightShift) else (g.theta, g.phi))])
    assert objective(problem, x) == pytest.approx(1, abs=1e-12)
    assert np.linalg.norm(gradient(problem, x)) <= 1e-4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_directional_derivative_matches_gradient(seed):
    problem = SynthesisProblem(P("XX"))
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 2 * math.pi, problem.n_params)
    d = rng.normal(size=problem.n_params)
    d /= np.linalg.norm(d)
    h = 1e-6
    fd = (objective(problem, x + h * d) - objective(problem, x - h * d)) / (2 * h)
    assert gradient(problem, x) @ d == pytest.approx(fd, abs=1e-5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ascent_is_monotone(seed):
    problem = SynthesisProblem(P("ZX"))
    x0 = np.random.default_rng(seed).uniform(0, 2 * math.pi, problem.n_params)
    _, _, trace = ascend(problem, x0)
    assert all(b > a for a, b in zip(trace.values, trace.values[1:]))


def test_build_sequence_slots():
    seq = build_sequence(("C", "L", "M", "C", "L"), np.arange(8, dtype=float))
    assert len(seq) == 5
    assert seq.count(MolmerSorensen) == 1


@pytest.mark.parametrize("swap", ["none", "yz"])
def test_every_square_observable_maps(swap):
    for a in default_square(swap).observables():
        r = default_readout_qubit(a)
        res = cached_mapping(a, r)
        assert res.residual <= 1e-6
        assert res.restarts_used <= 50
        mapped = conj(res.sequence, a)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(mapped)), [-1, -1, 1, 1], atol=1e-9)
        u = res.sequence.matrix()
        np.testing.assert_allclose(u.conj().T @ mapped @ u, a.matrix, atol=1e-10)
