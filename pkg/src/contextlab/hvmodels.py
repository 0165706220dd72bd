"""Classical hidden-variable oracles.

* Exhaustive noncontextual assignments for the square (bound 4).
* The four-observable CHSH-type combination (bound 2).
* Markovian disturbance models for the sequential inequality: stored values
  of the four observables, where measuring one observable flips each other
  stored value independently with a fixed probability. Every term of the
  inequality is computed exactly by summing over initial values and flip
  events; :func:`random_model_sweep` checks the bound over random models.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from contextlab.observables import KS_WEIGHTS, LINES, MerminPeresSquare, PauliObservable, default_square

DHV_LABELS = ("A12", "A13", "A22", "A23")
_IDX = {name: i for i, name in enumerate(DHV_LABELS)}
# ordered pairs (first, second) with their weight, and the matching p_err (B, A) terms
DHV_PAIR_TERMS = ((("A12", "A13"), 1), (("A22", "A23"), 1), (("A12", "A22"), 1), (("A13", "A23"), -1))
DHV_BAB_TERMS = (("A13", "A12"), ("A23", "A22"), ("A22", "A12"), ("A23", "A13"))
BOUND_SLACK = 1e-9

# all 16 value tuples for (A12, A13, A22, A23), row order matches initial_dist
VALUE_TUPLES = np.array(list(itertools.product((1, -1), repeat=4)), dtype=int)


class BoundViolation(AssertionError):
    pass


# ----------------------------------------------------------- noncontextual KS


@dataclass(frozen=True)
class NoncontextualAssignment:
    """Predetermined +-1 values v[i][j] for the nine square positions."""

    v: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if any(x not in (1, -1) for row in self.v for x in row):
            raise ValueError("assignment values must be +1 or -1")

    @classmethod
    def from_flat(cls, values: Sequence[int]) -> NoncontextualAssignment:
        values = tuple(int(x) for x in values)
        return cls((values[0:3], values[3:6], values[6:9]))

    def line_product(self, kind: str, k: int) -> int:
        if kind == "row":
            a, b, c = self.v[k - 1]
        else:
            a, b, c = (self.v[i][k - 1] for i in range(3))
        return a * b * c

    def ks_value(self) -> int:
        return sum(w * self.line_product(kind, k) for (kind, k), w in KS_WEIGHTS.items())


def all_assignments() -> list[NoncontextualAssignment]:
    return [NoncontextualAssignment.from_flat(bits) for bits in itertools.product((1, -1), repeat=9)]


def brute_force_ks_bound() -> tuple[int, list[NoncontextualAssignment]]:
    """Maximum of R1 + R2 + R3 + C1 + C2 - C3 over all 512 assignments, and its maximizers."""
    scored = [(a.ks_value(), a) for a in all_assignments()]
    best = max(s for s, _ in scored)
    return best, [a for s, a in scored if s == best]


def quantum_line_signs(square: MerminPeresSquare | None = None) -> dict[tuple[str, int], int]:
    from contextlab.observables import line_product

    square = square or default_square()
    return {(kind, k): line_product(square, kind, k) for kind, k in LINES}


def assignments_matching_signs(signs: dict[tuple[str, int], int]) -> list[NoncontextualAssignment]:
    return [a for a in all_assignments() if all(a.line_product(kind, k) == s for (kind, k), s in signs.items())]


def brute_force_chsh_bound() -> tuple[int, int]:
    """(max, min) of <AB> + <CD> + <AC> - <BD> over the 16 deterministic assignments."""
    values = [a * b + c * d + a * c - b * d for a, b, c, d in itertools.product((1, -1), repeat=4)]
    return max(values), min(values)


class NoncontextualBackend:
    """Simulator that answers every measurement from predetermined values.

    Each run draws one assignment from ``weights`` (a distribution over the
    512 assignments; default: uniform over the maximizers of the KS
    combination) and reports ``v(A)`` for the square position holding ``A``.
    """

    name = "noncontextual"

    def __init__(self, square: MerminPeresSquare, weights: Sequence[float] | None = None):
        self.square = square
        self._assignments = all_assignments()
        if weights is None:
            best = max(a.ks_value() for a in self._assignments)
            w = np.array([a.ks_value() == best for a in self._assignments], dtype=float)
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (512,) or (w < 0).any():
                raise ValueError("weights must be 512 non-negative numbers")
        self.weights = w / w.sum()

    def prepare(self, state, rng: np.random.Generator) -> NoncontextualAssignment:
        return self._assignments[rng.choice(512, p=self.weights)]

    def measure(self, v: NoncontextualAssignment, a: PauliObservable, rng) -> tuple[int, NoncontextualAssignment]:
        i, j = self.square.position(a)
        return v.v[i - 1][j - 1], v

    def sequence_distribution(self, state, observables: Sequence[PauliObservable]) -> dict[tuple[int, ...], float]:
        pos = [self.square.position(a) for a in observables]
        out = {pat: 0.0 for pat in itertools.product((1, -1), repeat=len(observables))}
        for a, w in zip(self._assignments, self.weights):
            if w:
                out[tuple(a.v[i - 1][j - 1] for i, j in pos)] += w
        return out


# ------------------------------------------------------- disturbance models


@dataclass(frozen=True, eq=False)
class DisturbanceModel:
    """Markovian flip model over the values of (A12, A13, A22, A23).

    ``initial_dist[t]`` is the probability of ``VALUE_TUPLES[t]``;
    ``flip[m][t]`` the probability that measuring observable ``m`` flips the
    stored value of ``t`` (zero on the diagonal).
    """

    initial_dist: np.ndarray
    flip: np.ndarray
    observables: tuple[PauliObservable, ...] | None = None

    def __post_init__(self):
        d = np.asarray(self.initial_dist, dtype=float)
        q = np.asarray(self.flip, dtype=float)
        if d.shape != (16,) or (d < 0).any() or abs(d.sum() - 1) > 1e-12:
            raise ValueError("initial_dist must be 16 probabilities summing to 1")
        if q.shape != (4, 4) or (q < 0).any() or (q > 1).any():
            raise ValueError("flip must be a 4x4 table of probabilities")
        if np.any(np.diag(q) != 0):
            raise ValueError("measuring an observable cannot flip its own value")
        object.__setattr__(self, "initial_dist", d)
        object.__setattr__(self, "flip", q)

    @classmethod
    def deterministic(cls, values: Sequence[int] = (1, 1, 1, 1), flip=None) -> DisturbanceModel:
        d = np.zeros(16)
        d[_tuple_index(values)] = 1.0
        return cls(d, np.zeros((4, 4)) if flip is None else np.asarray(flip, dtype=float))

    def flip_kernel(self, measured: int) -> np.ndarray:
        """16x16 transition matrix K[new, old] applied after measuring ``measured``."""
        return self._kernels[measured]

    @cached_property
    def _kernels(self) -> tuple[np.ndarray, ...]:
        out = []
        for m in range(4):
            k = np.ones((1, 1))
            for t in range(4):
                q = self.flip[m, t]
                k = np.kron(k, np.array([[1 - q, q], [q, 1 - q]]))
            out.append(k)
        return tuple(out)


def _tuple_index(values: Sequence[int]) -> int:
    idx = 0
    for v in values:
        idx = 2 * idx + (0 if v == 1 else 1)
    return idx


def sequence_expectation(model: DisturbanceModel, sequence: Sequence[str], tracked: Sequence[int]) -> float:
    """E[product of the outcomes at positions ``tracked``] for a measurement sequence.

    Sums over every path of stored values: weight vector ``w[lambda]`` holds
    the probability of reaching ``lambda`` times the product of tracked
    outcomes so far.
    """
    w = model.initial_dist.copy()
    for pos, name in enumerate(sequence):
        m = _IDX[name]
        if pos in tracked:
            w = w * VALUE_TUPLES[:, m]
        w = model.flip_kernel(m) @ w
    return float(w.sum())


def pair_correlation(model: DisturbanceModel, first: str, second: str) -> float:
    return sequence_expectation(model, (first, second), (0, 1))


def perr(model: DisturbanceModel, b: str, a: str) -> float:
    """Probability that the first and last outcomes of B, A, B differ."""
    return (1 - sequence_expectation(model, (b, a, b), (0, 2))) / 2


def evaluate_dhv_model(model: DisturbanceModel) -> float:
    value = sum(w * pair_correlation(model, f, s) for (f, s), w in DHV_PAIR_TERMS)
    return value - 2 * sum(perr(model, b, a) for b, a in DHV_BAB_TERMS)


def disturbance_assumption_gap(model: DisturbanceModel, b: str, a: str) -> float:
    """RHS - LHS of the assumption p[(B+;B) and (B(2)-;AB)] <= p[B(1)+, B(3)-; BAB].

    LHS: probability that the stored B value is +1 and the sequence A, B
    reports -1 for B. RHS: probability that B, A, B reports +1 then -1.
    """
    ib = _IDX[b]
    plus = VALUE_TUPLES[:, ib] == 1
    # stored B = +1, then measure A and B
    w = np.where(plus, model.initial_dist, 0.0)
    w = model.flip_kernel(_IDX[a]) @ w
    lhs = float(w[VALUE_TUPLES[:, ib] == -1].sum())
    # B reports +1, then A, then B reports -1
    w = np.where(plus, model.initial_dist, 0.0)
    w = model.flip_kernel(_IDX[a]) @ (model.flip_kernel(ib) @ w)
    rhs = float(w[VALUE_TUPLES[:, ib] == -1].sum())
    return rhs - lhs


def random_model(rng: np.random.Generator) -> DisturbanceModel:
    d = rng.dirichlet(np.ones(16))
    q = rng.uniform(0, 1, (4, 4))
    np.fill_diagonal(q, 0)
    return DisturbanceModel(d, q)


def random_model_sweep(n_models: int, seed: int = 0, include: Sequence[DisturbanceModel] = ()) -> float:
    """Largest classical X_DHV over ``n_models`` random Markovian models (plus ``include``).

    Raises :class:`BoundViolation` if any model exceeds 2.
    """
    if n_models < 1:
        raise ValueError("n_models must be at least 1")
    rng = np.random.default_rng(seed)
    models = list(include) + [random_model(rng) for _ in range(n_models)]
    best = -np.inf
    for i, m in enumerate(models):
        x = evaluate_dhv_model(m)
        if x > 2 + BOUND_SLACK:
            raise BoundViolation(f"model {i} reaches {x!r} > 2")
        best = max(best, x)
    return float(best)
