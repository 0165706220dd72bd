"""Sequential QND measurement simulation.

Two backends share one interface:

* :class:`IdealBackend` measures with the Lueders rule directly (projectors
  ``(I +- A)/2``), with a pure-state fast path.
* :class:`CircuitBackend` maps ``A`` onto ``sigma_z`` of one qubit with a
  synthesized gate sequence, depolarizes after every gate, reads the qubit
  out through a Poisson photon-count model and applies the inverse sequence.

A backend turns a :class:`~contextlab.qcore.QuantumState` into a per-run
state with ``prepare`` and advances it with ``measure``. Quantum backends also
expose ``instrument(A)``: one linear map per reported outcome, which the exact
(non-sampling) paths in :mod:`contextlab.estimators` use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Protocol, Sequence

import numpy as np

from contextlab.observables import PauliObservable, commutes
from contextlab.qcore import (
    I2,
    Collective,
    GateSequence,
    LightShift,
    MolmerSorensen,
    QuantumState,
    gate_matrix,
)
from contextlab.synthesis import cached_mapping, default_readout_qubit

UP, DOWN = 1, -1
DEGENERATE_TOL = 1e-15


class DegenerateProbability(ArithmeticError):
    pass


# ---------------------------------------------------------------- noise model


@dataclass(frozen=True)
class DetectionModel:
    """Poisson photon counts; a count above ``threshold`` is assigned bright (up)."""

    mean_bright: float = 7.8
    mean_dark: float = 0.07
    threshold: float = 1.5

    def __post_init__(self):
        if not (self.mean_bright > self.threshold > self.mean_dark >= 0):
            raise ValueError("need mean_bright > threshold > mean_dark >= 0")

    def p_up_given_down(self) -> float:
        return 1.0 - poisson_cdf(math.floor(self.threshold), self.mean_dark)

    def p_down_given_up(self) -> float:
        return poisson_cdf(math.floor(self.threshold), self.mean_bright)

    def confusion(self) -> dict[tuple[int, int], float]:
        """``P(reported, true)`` for labels +1 (up) / -1 (down)."""
        e_du = self.p_down_given_up()
        e_ud = self.p_up_given_down()
        return {(UP, UP): 1 - e_du, (DOWN, UP): e_du, (UP, DOWN): e_ud, (DOWN, DOWN): 1 - e_ud}


def poisson_cdf(k: int, mean: float) -> float:
    if k < 0:
        return 0.0
    return math.exp(-mean) * sum(mean**j / math.factorial(j) for j in range(k + 1))


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate errors plus photon-count readout.

    ``detection=None`` means a perfect readout.
    """

    ms_gate_error: float = 0.02
    local_gate_error: float = 0.002
    detection: DetectionModel | None = field(default_factory=DetectionModel)

    def __post_init__(self):
        for name in ("ms_gate_error", "local_gate_error"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {p!r}")


NOISE_PROFILES: dict[str, NoiseModel] = {
    "paper-2009": NoiseModel(0.02, 0.002, DetectionModel(7.8, 0.07, 1.5)),
    "noiseless": NoiseModel(0.0, 0.0, None),
    "detection-only": NoiseModel(0.0, 0.0, DetectionModel(7.8, 0.07, 1.5)),
}


def sample_detection(true_label: int, det: DetectionModel, rng: np.random.Generator, size: int | None = None):
    """Draw photon counts for a bright (+1) or dark (-1) ion and threshold them.

    Returns ``(assigned_label, counts)``; arrays when ``size`` is given.
    """
    if true_label not in (UP, DOWN):
        raise ValueError(f"label must be +1 (up) or -1 (down), got {true_label!r}")
    mean = det.mean_bright if true_label == UP else det.mean_dark
    counts = rng.poisson(mean, size)
    assigned = np.where(counts > det.threshold, UP, DOWN)
    if size is None:
        return int(assigned), int(counts)
    return assigned, counts


# ---------------------------------------------------------- channel plumbing


def depolarize(rho: np.ndarray, qubits: Literal[1, 2, "both"], p: float) -> np.ndarray:
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {p!r}")
    if p == 0:
        return rho
    if qubits == "both":
        return (1 - p) * rho + p * np.trace(rho) * np.eye(4) / 4
    r = rho.reshape(2, 2, 2, 2)
    if qubits == 1:
        reduced = np.einsum("ijil->jl", r)
        replaced = np.kron(I2 / 2, reduced)
    elif qubits == 2:
        reduced = np.einsum("ijkj->ik", r)
        replaced = np.kron(reduced, I2 / 2)
    else:
        raise ValueError(f"qubits must be 1, 2 or 'both', got {qubits!r}")
    return (1 - p) * rho + p * replaced


def apply_depolarizing(state: QuantumState, qubits: Literal[1, 2, "both"], p: float) -> QuantumState:
    rho = depolarize(state.density_matrix(), qubits, p)
    return QuantumState.mixed((rho + rho.conj().T) / 2)


def superoperator(channel) -> np.ndarray:
    """16x16 matrix of a linear map on 4x4 matrices, acting on row-major vec(rho)."""
    cols = []
    for k in range(16):
        e = np.zeros(16, dtype=complex)
        e[k] = 1
        cols.append(np.asarray(channel(e.reshape(4, 4))).reshape(16))
    return np.array(cols).T


def noisy_gate_channel(gate, noise: NoiseModel):
    u = gate_matrix(gate)

    def channel(rho):
        rho = u @ rho @ u.conj().T
        if isinstance(gate, MolmerSorensen):
            return depolarize(rho, "both", noise.ms_gate_error)
        if isinstance(gate, Collective):
            return depolarize(depolarize(rho, 1, noise.local_gate_error), 2, noise.local_gate_error)
        return depolarize(rho, 1, noise.local_gate_error)

    return channel


def noisy_sequence_superoperator(seq: GateSequence, noise: NoiseModel) -> np.ndarray:
    s = np.eye(16, dtype=complex)
    for g in seq:
        s = superoperator(noisy_gate_channel(g, noise)) @ s
    return s


def _projector(a: PauliObservable, outcome: int) -> np.ndarray:
    return (np.eye(4) + outcome * a.matrix) / 2


def _lueders_superop(p: np.ndarray) -> np.ndarray:
    return np.kron(p, p.conj())


# -------------------------------------------------------------------- backends


class Backend(Protocol):
    name: str

    def prepare(self, state: QuantumState, rng: np.random.Generator) -> Any: ...

    def measure(self, run_state: Any, a: PauliObservable, rng: np.random.Generator) -> tuple[int, Any]: ...


def _sample_branch(p_plus: float, rng: np.random.Generator) -> int:
    outcome = UP if rng.random() < p_plus else DOWN
    p = p_plus if outcome == UP else 1 - p_plus
    if p < DEGENERATE_TOL:
        raise DegenerateProbability(f"sampled a branch with probability {p!r}")
    return outcome


@dataclass(frozen=True)
class IdealBackend:
    """Projective Lueders measurement; ``flip_probability`` flips each reported outcome."""

    flip_probability: float = 0.0
    name: str = "ideal"

    def prepare(self, state: QuantumState, rng=None) -> np.ndarray:
        return np.array(state.data)

    def measure(self, psi: np.ndarray, a: PauliObservable, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        m = a.matrix
        if psi.ndim == 1:
            plus = (psi + m @ psi) / 2
            p_plus = float(np.vdot(plus, plus).real)
            outcome = _sample_branch(p_plus, rng)
            branch = plus if outcome == UP else psi - plus
            post = branch / math.sqrt(p_plus if outcome == UP else 1 - p_plus)
        else:
            proj = _projector(a, UP)
            p_plus = float(np.trace(proj @ psi).real)
            outcome = _sample_branch(p_plus, rng)
            proj = proj if outcome == UP else np.eye(4) - proj
            p = p_plus if outcome == UP else 1 - p_plus
            post = proj @ psi @ proj / p
        if self.flip_probability and rng.random() < self.flip_probability:
            outcome = -outcome
        return outcome, post

    def instrument(self, a: PauliObservable) -> dict[int, np.ndarray]:
        lu = {o: _lueders_superop(_projector(a, o)) for o in (UP, DOWN)}
        e = self.flip_probability
        return {o: (1 - e) * lu[o] + e * lu[-o] for o in (UP, DOWN)}


@dataclass(frozen=True)
class Mapping:
    readout_qubit: int
    sequence: GateSequence
    forward: np.ndarray
    backward: np.ndarray


class CircuitBackend:
    """Gate-level QND measurement with depolarizing noise and photon-count readout.

    Mappings are synthesized once per observable (``synthesis_seed``) and
    compiled with the noise into 16x16 superoperators for the forward and
    inverse sequences.
    """

    name = "circuit"

    def __init__(self, noise: NoiseModel | None = None, synthesis_seed: int = 0):
        self.noise = noise if noise is not None else NOISE_PROFILES["paper-2009"]
        self.synthesis_seed = synthesis_seed
        self._mappings: dict[PauliObservable, Mapping] = {}

    def __repr__(self):
        return f"CircuitBackend(noise={self.noise!r}, synthesis_seed={self.synthesis_seed})"

    def mapping(self, a: PauliObservable) -> Mapping:
        m = self._mappings.get(a)
        if m is None:
            r = default_readout_qubit(a)
            seq = cached_mapping(a, r, self.synthesis_seed).sequence
            m = Mapping(
                r,
                seq,
                noisy_sequence_superoperator(seq, self.noise),
                noisy_sequence_superoperator(seq.inverse(), self.noise),
            )
            self._mappings[a] = m
        return m

    def prepare(self, state: QuantumState, rng=None) -> np.ndarray:
        return state.density_matrix().reshape(16)

    @cached_property
    def _readout_projectors(self) -> dict[tuple[int, int], np.ndarray]:
        out = {}
        for q in (1, 2):
            for label in (UP, DOWN):
                z = np.diag([1, -1]).astype(complex)
                p1 = (I2 + label * z) / 2
                out[q, label] = np.kron(p1, I2) if q == 1 else np.kron(I2, p1)
        return out

    def measure(self, vec: np.ndarray, a: PauliObservable, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        m = self.mapping(a)
        rho = (m.forward @ vec).reshape(4, 4)
        p_up = self._readout_projectors[m.readout_qubit, UP]
        prob_up = min(max(float(np.trace(p_up @ rho).real), 0.0), 1.0)
        true = _sample_branch(prob_up, rng)
        proj = self._readout_projectors[m.readout_qubit, true]
        rho = proj @ rho @ proj / (prob_up if true == UP else 1 - prob_up)
        det = self.noise.detection
        reported = true if det is None else sample_detection(true, det, rng)[0]
        return reported, m.backward @ rho.reshape(16)

    def instrument(self, a: PauliObservable) -> dict[int, np.ndarray]:
        m = self.mapping(a)
        proj = {t: _lueders_superop(self._readout_projectors[m.readout_qubit, t]) for t in (UP, DOWN)}
        det = self.noise.detection
        if det is None:
            conf = {(UP, UP): 1.0, (DOWN, DOWN): 1.0, (UP, DOWN): 0.0, (DOWN, UP): 0.0}
        else:
            conf = det.confusion()
        return {o: m.backward @ sum(conf[o, t] * proj[t] for t in (UP, DOWN)) @ m.forward for o in (UP, DOWN)}


def make_backend(name: str, noise: NoiseModel | str | None = None, synthesis_seed: int = 0):
    if name == "ideal":
        return IdealBackend()
    if name == "circuit":
        if isinstance(noise, str):
            noise = NOISE_PROFILES[noise]
        return CircuitBackend(noise, synthesis_seed)
    raise ValueError(f"unknown backend {name!r}; expected 'ideal' or 'circuit'")


# ---------------------------------------------------------------- measurement


@dataclass(frozen=True)
class MeasurementRecord:
    entries: tuple[tuple[PauliObservable, int], ...]
    final_state: Any

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(o for _, o in self.entries)


def _to_state(run_state: Any) -> Any:
    if not isinstance(run_state, np.ndarray):
        return run_state
    if run_state.shape == (4,):
        return QuantumState.pure(run_state / np.linalg.norm(run_state))
    rho = run_state.reshape(4, 4)
    rho = (rho + rho.conj().T) / 2
    return QuantumState.mixed(rho / np.trace(rho).real)


def measure_qnd(state: QuantumState, a: PauliObservable, backend: Backend, rng: np.random.Generator):
    """One QND measurement; returns ``(outcome, post_state)``."""
    outcome, post = backend.measure(backend.prepare(state, rng), a, rng)
    return outcome, _to_state(post)


def run_sequence(
    state: QuantumState,
    observables: Sequence[PauliObservable],
    backend: Backend,
    rng: np.random.Generator,
    check_compatibility: bool = True,
) -> MeasurementRecord:
    """Measure ``observables`` in the given temporal order on one fresh copy of ``state``."""
    if check_compatibility:
        for i, a in enumerate(observables):
            for b in observables[i + 1 :]:
                if not commutes(a, b):
                    warnings.warn(f"sequence contains non-commuting pair {a}, {b}", stacklevel=2)
    outcomes, final = sample_outcomes(backend, backend.prepare(state, rng), observables, rng)
    return MeasurementRecord(tuple(zip(observables, outcomes)), _to_state(final))


def sample_outcomes(backend: Backend, run_state: Any, observables: Sequence[PauliObservable], rng) -> tuple[tuple[int, ...], Any]:
    out = []
    for a in observables:
        o, run_state = backend.measure(run_state, a, rng)
        out.append(o)
    return tuple(out), run_state


def run_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one run, derived from ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
