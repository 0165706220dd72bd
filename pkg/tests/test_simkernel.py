import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from contextlab.estimators import sequence_distribution
from contextlab.observables import PauliObservable, default_square
from contextlab.qcore import QuantumState, apply, gate_matrix, ket, prepare_singlet, state_roster
from contextlab.simkernel import (
    DOWN,
    NOISE_PROFILES,
    UP,
    CircuitBackend,
    DetectionModel,
    IdealBackend,
    NoiseModel,
    apply_depolarizing,
    depolarize,
    make_backend,
    measure_qnd,
    noisy_gate_channel,
    run_rng,
    run_sequence,
    sample_outcomes,
    superoperator,
)

from conftest import I, mixed_states, pure_states

P = PauliObservable.parse
SINGLET = prepare_singlet()[0]


class TestDetection:
    def test_analytic_rates(self):
        det = DetectionModel()
        assert det.p_down_given_up() == pytest.approx(math.exp(-7.8) * 8.8, rel=1e-12)
        assert det.p_up_given_down() == pytest.approx(1 - math.exp(-0.07) * 1.07, rel=1e-12)
        assert det.p_down_given_up() == pytest.approx(stats.poisson.cdf(1, 7.8), rel=1e-12)
        assert det.p_up_given_down() == pytest.approx(stats.poisson.sf(1, 0.07), rel=1e-9)
        assert round(100 * det.p_down_given_up(), 2) == 0.36
        assert round(100 * det.p_up_given_down(), 2) == 0.23

    def test_threshold(self):
        assert NOISE_PROFILES["paper-2009"].detection.threshold == 1.5

    def test_invalid_model(self):
        with pytest.raises(ValueError):
            DetectionModel(1.0, 2.0, 1.5)

    def test_invalid_noise(self):
        with pytest.raises(ValueError):
            NoiseModel(ms_gate_error=1.5)

    def test_confusion_columns_sum_to_one(self):
        conf = DetectionModel().confusion()
        for true in (UP, DOWN):
            assert conf[UP, true] + conf[DOWN, true] == pytest.approx(1)


class TestMeasureQnd:
    def test_singlet_zz_is_minus_one(self, rng):
        for _ in range(20):
            out, post = measure_qnd(SINGLET, P("ZZ"), IdealBackend(), rng)
            assert out == -1
            assert post.fidelity(SINGLET) == pytest.approx(1)

    def test_dd_x_is_fair(self):
        dist = sequence_distribution(QuantumState.pure(ket("dd")), [P("XI")], IdealBackend())
        assert dist[(1,)] == pytest.approx(0.5) and dist[(-1,)] == pytest.approx(0.5)

    def test_repeatability(self, rng):
        for _ in range(200):
            rec = run_sequence(SINGLET, [P("ZI"), P("ZI")], IdealBackend(), rng)
            assert rec.outcomes[0] == rec.outcomes[1]

    def test_repeatability_mixed(self, rng):
        rho = dict(state_roster())["rho5"]
        for _ in range(200):
            rec = run_sequence(rho, [P("XZ"), P("XZ")], IdealBackend(), rng)
            assert rec.outcomes[0] == rec.outcomes[1]


class TestRunSequence:
    def test_singlet_column3(self, rng):
        sq = default_square()
        for _ in range(50):
            rec = run_sequence(SINGLET, sq.line("col", 3), IdealBackend(), rng)
            assert rec.outcomes == (-1, -1, -1)
            assert len(rec.entries) == 3

    def test_singlet_row1_product(self, rng):
        for _ in range(50):
            rec = run_sequence(SINGLET, default_square().line("row", 1), IdealBackend(), rng)
            assert math.prod(rec.outcomes) == 1

    def test_maximally_mixed_row1_by_projectors(self):
        # Born probabilities of a commuting triple are tr(P_a P_b P_c rho)
        line = default_square().line("row", 1)
        rho = np.eye(4) / 4
        for pat in itertools.product((1, -1), repeat=3):
            proj = np.eye(4)
            for a, v in zip(line, pat):
                proj = proj @ (np.eye(4) + v * a.matrix) / 2
            p = np.trace(proj @ rho).real
            assert p == pytest.approx(0.25 if math.prod(pat) == 1 else 0.0, abs=1e-12)
        dist = sequence_distribution(QuantumState.maximally_mixed(), line, IdealBackend())
        for pat, p in dist.items():
            assert p == pytest.approx(0.25 if math.prod(pat) == 1 else 0.0, abs=1e-12)

    def test_non_commuting_sequence_warns(self, rng):
        with pytest.warns(UserWarning):
            run_sequence(SINGLET, [P("ZI"), P("XI"), P("ZI")], IdealBackend(), rng)

    def test_seeded_runs_repeat(self):
        be = CircuitBackend(NOISE_PROFILES["paper-2009"])
        a = [sample_outcomes(be, be.prepare(SINGLET), default_square().line("row", 3), run_rng(7, i))[0] for i in range(30)]
        b = [sample_outcomes(be, be.prepare(SINGLET), default_square().line("row", 3), run_rng(7, i))[0] for i in range(30)]
        assert a == b


class TestDepolarizing:
    def test_zero_is_identity(self):
        rho = SINGLET.density_matrix()
        np.testing.assert_array_equal(depolarize(rho, "both", 0.0), rho)

    @given(st.one_of(pure_states(), mixed_states()))
    def test_full_is_maximally_mixed(self, state):
        np.testing.assert_allclose(apply_depolarizing(state, "both", 1.0).data, np.eye(4) / 4, atol=1e-12)

    def test_single_qubit_full(self):
        out = depolarize(np.outer(ket("uu"), ket("uu")), 1, 1.0)
        up = np.diag([1, 0])
        np.testing.assert_allclose(out, np.kron(I / 2, up), atol=1e-12)
        out = depolarize(np.outer(ket("uu"), ket("uu")), 2, 1.0)
        np.testing.assert_allclose(out, np.kron(up, I / 2), atol=1e-12)

    @settings(max_examples=40)
    @given(st.one_of(pure_states(), mixed_states()), st.sampled_from([0.02, 0.1]), st.sampled_from([1, 2, "both"]))
    def test_purity_does_not_increase(self, state, p, qubits):
        out = apply_depolarizing(state, qubits, p)
        assert out.purity() <= state.purity() + 1e-12
        assert np.trace(out.data).real == pytest.approx(1)

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            depolarize(np.eye(4) / 4, 1, -0.1)

    @given(mixed_states())
    def test_superoperator_matches_channel(self, state):
        from contextlab.qcore import MolmerSorensen

        ch = noisy_gate_channel(MolmerSorensen(0.7, 0.3), NoiseModel(0.05, 0.01, None))
        s = superoperator(ch)
        rho = state.data
        np.testing.assert_allclose((s @ rho.reshape(16)).reshape(4, 4), ch(rho), atol=1e-12)


class TestCircuitBackend:
    def test_noiseless_exact_matches_ideal(self):
        # mappings are exact to the synthesis tolerance, not to machine precision
        be = make_backend("circuit", "noiseless")
        for name, state in state_roster():
            for kind, k in [("row", 3), ("col", 3), ("col", 1)]:
                line = default_square().line(kind, k)
                a = sequence_distribution(state, line, be)
                b = sequence_distribution(state, line, IdealBackend())
                for pat in a:
                    assert a[pat] == pytest.approx(b[pat], abs=1e-6), (name, kind, k)

    def test_noiseless_post_state_matches_lueders(self):
        be = make_backend("circuit", "noiseless")
        psi = dict(state_roster())["psi4"]
        for out in (UP, DOWN):
            lu = be.instrument(P("XX"))[out] @ psi.density_matrix().reshape(16)
            proj = (np.eye(4) + out * P("XX").matrix) / 2
            expected = proj @ psi.density_matrix() @ proj
            np.testing.assert_allclose(lu.reshape(4, 4), expected, atol=1e-6)

    def test_chi_square_against_ideal(self):
        """Sampled zero-noise circuit frequencies versus ideal Born probabilities, N = 1e5."""
        be = make_backend("circuit", "noiseless")
        state = dict(state_roster())["psi4"]
        line = [P("XZ"), P("ZX"), P("YY")]
        n = 100_000
        counts = dict.fromkeys(itertools.product((1, -1), repeat=3), 0)
        for i in range(n):
            rng = run_rng(2024, i)
            counts[sample_outcomes(be, be.prepare(state), line, rng)[0]] += 1
        probs = sequence_distribution(state, line, IdealBackend())
        support = [pat for pat in probs if probs[pat] > 1e-12]
        assert sum(counts[pat] for pat in counts if pat not in support) == 0
        obs = np.array([counts[pat] for pat in support])
        exp = np.array([probs[pat] for pat in support]) * n
        assert stats.chisquare(obs, exp).pvalue > 0.01

    def test_noisy_sampling_agrees_with_exact(self):
        be = make_backend("circuit", "paper-2009")
        line = default_square().line("col", 3)
        exact = sum(math.prod(pat) * p for pat, p in sequence_distribution(SINGLET, line, be).items())
        n = 4000
        vals = [math.prod(sample_outcomes(be, be.prepare(SINGLET), line, run_rng(5, i))[0]) for i in range(n)]
        se = np.std(vals, ddof=1) / math.sqrt(n)
        assert abs(np.mean(vals) - exact) < 4 * se

    def test_forward_map_is_gate_by_gate(self):
        be = make_backend("circuit", "paper-2009")
        m = be.mapping(P("YY"))
        rho = SINGLET.density_matrix()
        for g in m.sequence:
            rho = noisy_gate_channel(g, be.noise)(rho)
        np.testing.assert_allclose((m.forward @ SINGLET.density_matrix().reshape(16)).reshape(4, 4), rho, atol=1e-12)

    def test_ideal_gate_path_agrees_with_apply(self):
        be = make_backend("circuit", "noiseless")
        m = be.mapping(P("ZX"))
        u = m.sequence.matrix()
        assert np.allclose(u, np.linalg.multi_dot([gate_matrix(g) for g in reversed(m.sequence.gates)]))
        out = apply(SINGLET, m.sequence).density_matrix()
        np.testing.assert_allclose((m.forward @ SINGLET.density_matrix().reshape(16)).reshape(4, 4), out, atol=1e-12)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            make_backend("quantum-annealer")


def test_detection_monte_carlo():
    from contextlab.simkernel import sample_detection

    det = DetectionModel()
    n = 1_000_000
    for true, p in ((UP, det.p_down_given_up()), (DOWN, det.p_up_given_down())):
        assigned, _ = sample_detection(true, det, np.random.default_rng(11), n)
        k = int(np.sum(assigned != true))
        assert abs(k / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
