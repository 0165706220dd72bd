"""Numerical search for gate sequences that map an observable onto a sigma_z readout.

Given a Pauli observable ``A`` and a readout qubit ``r``, we look for a
sequence ``U`` of elementary gates with ``U A U^dag = sigma_z^(r)``. Measuring
``sigma_z^(r)`` after ``U`` and undoing ``U`` afterwards then implements a QND
measurement of ``A``. The search maximizes

    f(params) = Re tr(sigma_z^(r) U A U^dag) / 4

over the angles of a fixed gate template by gradient ascent with a
backtracking line search and random restarts. ``f == 1`` iff the mapping is
exact, and the Frobenius residual obeys ``residual**2 == 8 * (1 - f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from contextlab.observables import PauliObservable
from contextlab.qcore import Collective, GateSequence, LightShift, MolmerSorensen

TWO_PI = 2 * math.pi

# slot kinds: "C" collective, "L" light shift, "M" Molmer-Sorensen
ENTANGLING_TEMPLATE = ("C", "L", "M", "C", "L")
LOCAL_TEMPLATE = ("C", "L", "C")
_N_PARAMS = {"C": 2, "L": 1, "M": 2}

FD_STEP = 1e-6
ROUNDTRIP_TOL = 1e-10


class SynthesisFailed(RuntimeError):
    def __init__(self, best_fidelity: float, restarts: int):
        super().__init__(f"no mapping within tolerance after {restarts} restarts (best fidelity {best_fidelity:.12f})")
        self.best_fidelity = best_fidelity


def readout_observable(readout_qubit: int) -> PauliObservable:
    if readout_qubit == 1:
        return PauliObservable("Z", "I")
    if readout_qubit == 2:
        return PauliObservable("I", "Z")
    raise ValueError(f"readout qubit must be 1 or 2, got {readout_qubit!r}")


def default_readout_qubit(target: PauliObservable) -> int:
    """Single-qubit targets are read on their own qubit, correlations on qubit 2."""
    return 1 if target.support == (1,) else 2


@dataclass(frozen=True)
class SynthesisProblem:
    target: PauliObservable
    readout_qubit: int = 2
    template: tuple[str, ...] | None = None
    max_restarts: int = 50
    tolerance: float = 1e-6
    max_iterations: int = 5000

    def __post_init__(self):
        readout_observable(self.readout_qubit)
        if self.template is None:
            t = ENTANGLING_TEMPLATE if len(self.target.support) == 2 else LOCAL_TEMPLATE
            object.__setattr__(self, "template", t)
        else:
            object.__setattr__(self, "template", tuple(self.template))
        if any(s not in _N_PARAMS for s in self.template):
            raise ValueError(f"unknown slot in template {self.template!r}")
        if len(self.target.support) == 2 and "M" not in self.template:
            raise ValueError(f"{self.target} acts on both qubits; template needs an entangling slot")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    @property
    def n_params(self) -> int:
        return sum(_N_PARAMS[s] for s in self.template)

    @classmethod
    def for_target(cls, target: PauliObservable, **kw) -> SynthesisProblem:
        kw.setdefault("readout_qubit", default_readout_qubit(target))
        return cls(target, **kw)


@dataclass(frozen=True)
class SynthesisResult:
    sequence: GateSequence
    fidelity: float
    restarts_used: int
    residual: float


def build_sequence(template: Sequence[str], params: np.ndarray) -> GateSequence:
    gates = []
    i = 0
    for slot in template:
        if slot == "C":
            gates.append(Collective(float(params[i]), float(params[i + 1])))
        elif slot == "L":
            gates.append(LightShift(float(params[i])))
        else:
            gates.append(MolmerSorensen(float(params[i]), float(params[i + 1])))
        i += _N_PARAMS[slot]
    return GateSequence(tuple(gates))


def objective(problem: SynthesisProblem, params: np.ndarray) -> float:
    u = build_sequence(problem.template, params).matrix()
    z = readout_observable(problem.readout_qubit).matrix
    return float(np.trace(z @ u @ problem.target.matrix @ u.conj().T).real / 4)


def gradient(problem: SynthesisProblem, params: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of :func:`objective`."""
    params = np.asarray(params, dtype=float)
    g = np.empty_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = h
        g[k] = (objective(problem, params + e) - objective(problem, params - e)) / (2 * h)
    return g


def verify_mapping(seq: GateSequence, target: PauliObservable, readout_qubit: int) -> float:
    """Frobenius residual ||U A U^dag - sigma_z^(r)||; raises if U^dag (U A U^dag) U != A."""
    u = seq.matrix()
    mapped = u @ target.matrix @ u.conj().T
    back = u.conj().T @ mapped @ u
    if np.max(np.abs(back - target.matrix)) > ROUNDTRIP_TOL:
        raise ArithmeticError(f"round trip of {target} through the mapping is not the identity")
    return float(np.linalg.norm(mapped - readout_observable(readout_qubit).matrix))


@dataclass
class AscentTrace:
    values: list[float]
    converged: bool


def ascend(
    problem: SynthesisProblem,
    x0: np.ndarray,
    initial_step: float = 0.1,
    shrink: float = 0.5,
    max_backtracks: int = 40,
    grad_tol: float = 1e-9,
) -> tuple[np.ndarray, float, AscentTrace]:
    """Gradient ascent with backtracking; each accepted step strictly raises f.

    The first trial of each line search is ``initial_step`` times the last
    accepted step multiplier, grown by 2x after a first-try success, so
    well-conditioned stretches do not crawl.
    """
    # residual**2 == 8 (1 - f); stop with a 10x margin on the residual
    target_f = 1 - problem.tolerance**2 / 800
    x = np.array(x0, dtype=float)
    fx = objective(problem, x)
    values = [fx]
    scale = 1.0
    converged = fx >= target_f
    for _ in range(problem.max_iterations):
        if converged:
            break
        g = gradient(problem, x)
        if np.linalg.norm(g) < grad_tol:
            break
        step = initial_step * scale
        for n_back in range(max_backtracks):
            xn = x + step * g
            fn = objective(problem, xn)
            if fn > fx:
                break
            step *= shrink
        else:
            break
        x, fx = xn, fn
        values.append(fx)
        scale = step / initial_step * (2.0 if n_back == 0 else 1.0)
        scale = min(scale, 64.0)
        converged = fx >= target_f
    return np.mod(x, TWO_PI), fx, AscentTrace(values, converged)


def synthesize_mapping(problem: SynthesisProblem, seed: int = 0) -> SynthesisResult:
    """Find a sequence mapping ``problem.target`` onto ``sigma_z`` of the readout qubit.

    Restart ``r`` draws its start point from an independent child of
    ``SeedSequence(seed)``; restarts run in index order and the first one
    meeting the tolerance is returned. Raises :class:`SynthesisFailed` if
    none does within ``max_restarts``.
    """
    if problem.target == readout_observable(problem.readout_qubit):
        return SynthesisResult(GateSequence(()), 1.0, 0, 0.0)
    children = np.random.SeedSequence(seed).spawn(problem.max_restarts)
    best = -np.inf
    for r, child in enumerate(children):
        x0 = np.random.default_rng(child).uniform(0, TWO_PI, problem.n_params)
        x, fx, _ = ascend(problem, x0)
        seq = build_sequence(problem.template, x)
        residual = verify_mapping(seq, problem.target, problem.readout_qubit)
        if residual <= problem.tolerance:
            return SynthesisResult(seq, min(max(fx, 0.0), 1.0), r + 1, residual)
        best = max(best, fx)
    raise SynthesisFailed(max(best, 0.0), problem.max_restarts)


@lru_cache(maxsize=None)
def cached_mapping(target: PauliObservable, readout_qubit: int, seed: int = 0) -> SynthesisResult:
    return synthesize_mapping(SynthesisProblem(target, readout_qubit), seed)
