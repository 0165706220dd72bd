"""Two-qubit states, the ion-trap elementary gate set and circuit composition.

Basis convention: ``|up>`` is the +1 eigenstate of sigma_z, the ordered basis
is (up-up, up-down, down-up, down-down) and qubit 1 is the left tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I4 = np.eye(4, dtype=complex)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)

PURE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10
UNITARY_TOL = 1e-10


def ket(label: str) -> np.ndarray:
    """Basis ket from a two-character label such as ``"ud"`` (up, down)."""
    single = {"u": UP, "d": DOWN}
    return np.kron(single[label[0]], single[label[1]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A two-qubit state, either a normalized ket or a density matrix.

    Use :meth:`pure` or :meth:`mixed` to build one; both validate the
    invariants (normalization, Hermiticity, unit trace, positivity).
    """

    kind: Literal["pure", "mixed"]
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))
        if self.kind == "pure":
            if self.data.shape != (4,):
                raise ValueError(f"pure state needs 4 amplitudes, got shape {self.data.shape}")
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1.0) > PURE_TOL:
                raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        elif self.kind == "mixed":
            rho = self.data
            if rho.shape != (4, 4):
                raise ValueError(f"density matrix must be 4x4, got shape {rho.shape}")
            if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(rho).real - 1.0) > HERMITIAN_TOL:
                raise ValueError(f"density matrix trace is {np.trace(rho).real!r}, not 1")
            if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
                raise ValueError("density matrix has a negative eigenvalue")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    @classmethod
    def pure(cls, amplitudes: Iterable[complex], normalize: bool = False) -> QuantumState:
        a = np.asarray(list(amplitudes), dtype=complex)
        if normalize:
            a = a / np.linalg.norm(a)
        return cls("pure", a)

    @classmethod
    def mixed(cls, rho: np.ndarray) -> QuantumState:
        return cls("mixed", np.asarray(rho, dtype=complex))

    @classmethod
    def maximally_mixed(cls) -> QuantumState:
        return cls("mixed", I4 / 4)

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def as_mixed(self) -> QuantumState:
        return self if self.kind == "mixed" else QuantumState.mixed(self.density_matrix())

    def expectation(self, operator: np.ndarray) -> float:
        if self.kind == "pure":
            return float(np.vdot(self.data, operator @ self.data).real)
        return float(np.trace(operator @ self.data).real)

    def purity(self) -> float:
        if self.kind == "pure":
            return 1.0
        return float(np.trace(self.data @ self.data).real)

    def fidelity(self, other: QuantumState) -> float:
        """Overlap fidelity; exact (Uhlmann) when at least one side is pure."""
        if self.kind == "pure" and other.kind == "pure":
            return float(abs(np.vdot(self.data, other.data)) ** 2)
        if self.kind == "pure":
            return other.expectation(np.outer(self.data, self.data.conj()))
        if other.kind == "pure":
            return self.expectation(np.outer(other.data, other.data.conj()))
        return _uhlmann_fidelity(self.data, other.data)


def _uhlmann_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    w, v = np.linalg.eigh(rho)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    ev = np.clip(np.linalg.eigvalsh(inner), 0, None)
    return float(np.sum(np.sqrt(ev)) ** 2)


def negativity(state: QuantumState) -> float:
    """Sum of |negative eigenvalues| of the partial transpose on qubit 2."""
    rho = state.density_matrix().reshape(2, 2, 2, 2)
    pt = rho.transpose(0, 3, 2, 1).reshape(4, 4)
    ev = np.linalg.eigvalsh(pt)
    return float(-ev[ev < 0].sum())


# --------------------------------------------------------------------------- gates


def sigma_phi(phi: float) -> np.ndarray:
    return math.cos(phi) * SX + math.sin(phi) * SY


@dataclass(frozen=True)
class LightShift:
    """Addressed phase rotation exp(-i theta/2 sigma_z) on qubit 1."""

    theta: float

    def matrix(self) -> np.ndarray:
        a = np.exp(-0.5j * self.theta)
        return np.diag([a, a, a.conjugate(), a.conjugate()])

    def inverse(self) -> LightShift:
        return LightShift(-self.theta)


@dataclass(frozen=True)
class Collective:
    """Resonant rotation exp(-i theta/2 (sigma_phi x I + I x sigma_phi))."""

    theta: float
    phi: float

    def matrix(self) -> np.ndarray:
        r = math.cos(self.theta / 2) * I2 - 1j * math.sin(self.theta / 2) * sigma_phi(self.phi)
        return np.kron(r, r)

    def inverse(self) -> Collective:
        return Collective(-self.theta, self.phi)


@dataclass(frozen=True)
class MolmerSorensen:
    """Entangling gate exp(+i theta/2 sigma_phi x sigma_phi).

    The positive exponent is the one under which MS(pi/2, phi) maps
    ``|dd>`` to ``|dd> + i exp(-2i phi) |uu>`` and the singlet recipe in
    :func:`prepare_singlet` holds; see README, "Conventions".
    """

    theta: float
    phi: float

    def matrix(self) -> np.ndarray:
        s = sigma_phi(self.phi)
        return math.cos(self.theta / 2) * I4 + 1j * math.sin(self.theta / 2) * np.kron(s, s)

    def inverse(self) -> MolmerSorensen:
        return MolmerSorensen(-self.theta, self.phi)


ElementaryGate = LightShift | Collective | MolmerSorensen


def gate_matrix(gate: ElementaryGate) -> np.ndarray:
    if not all(math.isfinite(x) for x in _params(gate)):
        raise ValueError(f"non-finite gate parameter in {gate!r}")
    return gate.matrix()


def _params(gate: ElementaryGate) -> tuple[float, ...]:
    if isinstance(gate, LightShift):
        return (gate.theta,)
    return (gate.theta, gate.phi)


@dataclass(frozen=True)
class GateSequence:
    """Gates in temporal order: ``gates[0]`` acts first."""

    gates: tuple[ElementaryGate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def matrix(self) -> np.ndarray:
        u = I4.copy()
        for g in self.gates:
            u = gate_matrix(g) @ u
        return u

    def inverse(self) -> GateSequence:
        return GateSequence(tuple(g.inverse() for g in reversed(self.gates)))

    def count(self, kind: type) -> int:
        return sum(isinstance(g, kind) for g in self.gates)


def unitary_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive distance 1 - |tr(U^dag V)| / 4."""
    return 1.0 - abs(np.trace(u.conj().T @ v)) / 4


def apply(state: QuantumState, seq: GateSequence | Sequence[ElementaryGate]) -> QuantumState:
    if not isinstance(seq, GateSequence):
        seq = GateSequence(tuple(seq))
    if len(seq) == 0:
        return state
    u = seq.matrix()
    if state.kind == "pure":
        return QuantumState.pure(u @ state.data)
    rho = u @ state.data @ u.conj().T
    return QuantumState.mixed((rho + rho.conj().T) / 2)


# ---------------------------------------------------------------- state recipes

SINGLET = (ket("ud") - ket("du")) / math.sqrt(2)
DHV_GAMMA = math.sqrt(2) - 1


class PreparationError(RuntimeError):
    pass


def prepare_singlet() -> tuple[QuantumState, GateSequence]:
    """Singlet from |dd> via MS(pi/2, 0), then U(pi/2, 3pi/4), then U_z(pi)."""
    seq = GateSequence((MolmerSorensen(math.pi / 2, 0.0), Collective(math.pi / 2, 3 * math.pi / 4), LightShift(math.pi)))
    state = apply(QuantumState.pure(ket("dd")), seq)
    fid = state.fidelity(QuantumState.pure(SINGLET))
    if fid < 1 - 1e-10:
        raise PreparationError(f"singlet recipe reached fidelity {fid:.3e}")
    return state, seq


def prepare_dhv_state() -> QuantumState:
    """(|uu> + i g |du> + g |ud> + i |dd>) / sqrt(2 + 2 g^2) with g = sqrt(2) - 1."""
    g = DHV_GAMMA
    psi = ket("uu") + 1j * g * ket("du") + g * ket("ud") + 1j * ket("dd")
    return QuantumState.pure(psi / math.sqrt(2 + 2 * g * g))


def werner_state(visibility: float) -> QuantumState:
    return QuantumState.mixed(visibility * np.outer(SINGLET, SINGLET.conj()) + (1 - visibility) * I4 / 4)


NEAR_MIXED_WEIGHT = 0.05


def state_roster() -> list[tuple[str, QuantumState]]:
    """Ten representative test states: entangled, product, mixed.

    psi1-psi3 are maximally entangled, psi4 partially entangled, rho5 a
    Werner state with visibility 0.8, psi6-psi9 product states and rho10 is
    (1 - 0.05) I/4 + 0.05 |uu><uu|.
    """
    s2 = 1 / math.sqrt(2)
    plus = np.array([s2, s2], dtype=complex)
    minus = np.array([s2, -s2], dtype=complex)
    plus_i = np.array([s2, 1j * s2], dtype=complex)
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    uu = ket("uu")
    eps = NEAR_MIXED_WEIGHT
    return [
        ("psi1", prepare_singlet()[0]),
        ("psi2", QuantumState.pure((ket("uu") + ket("dd")) * s2)),
        ("psi3", QuantumState.pure((ket("ud") + 1j * ket("du")) * s2)),
        ("psi4", QuantumState.pure(c * ket("uu") + s * ket("dd"))),
        ("rho5", werner_state(0.8)),
        ("psi6", QuantumState.pure(ket("uu"))),
        ("psi7", QuantumState.pure(ket("du"))),
        ("psi8", QuantumState.pure(np.kron(plus, minus))),
        ("psi9", QuantumState.pure(np.kron(plus_i, DOWN))),
        ("rho10", QuantumState.mixed((1 - eps) * I4 / 4 + eps * np.outer(uu, uu.conj()))),
    ]
