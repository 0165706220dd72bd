"""Monte Carlo and exact estimators for line products, X_KS, p_err and X_DHV.

Every sampled quantity is a :class:`CorrelationEstimate` carrying a 1-sigma
standard error. Lines are measured on disjoint batches of fresh
preparations, so aggregate errors add in quadrature. Each run draws from its
own stream ``run_rng(seed, *batch_key, run_index)``, which makes results
independent of how batches are scheduled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from contextlab.observables import (
    KS_WEIGHTS,
    LINES,
    LineKind,
    MerminPeresSquare,
    PauliObservable,
    dhv_observable_set,
    line_name,
)
from contextlab.qcore import QuantumState
from contextlab.simkernel import Backend, IdealBackend, run_rng, sample_outcomes

PERMUTATIONS: tuple[tuple[int, int, int], ...] = tuple(itertools.permutations((1, 2, 3)))
OUTCOME_PATTERNS: tuple[tuple[int, int, int], ...] = tuple(itertools.product((1, -1), repeat=3))
HIST_LABELS = tuple("h_" + "".join("p" if v > 0 else "m" for v in pat) for pat in OUTCOME_PATTERNS)
DEFAULT_SHOTS = 1100

# stream tags keep batches of different estimators apart
_TAG_LINE, _TAG_PAIR, _TAG_BAB = 1, 2, 3


@dataclass(frozen=True)
class CorrelationEstimate:
    mean: float
    std_error: float
    n_runs: int

    @classmethod
    def from_samples(cls, values: Sequence[float]) -> CorrelationEstimate:
        v = np.asarray(values, dtype=float)
        n = v.size
        sd = float(v.std(ddof=1)) if n > 1 else 0.0
        return cls(float(v.mean()), sd / math.sqrt(n), n)

    @classmethod
    def binomial(cls, successes: int, n: int) -> CorrelationEstimate:
        p = successes / n
        return cls(p, math.sqrt(p * (1 - p) / n), n)


@dataclass(frozen=True)
class Aggregate:
    """Signed sum of independent estimates; error in quadrature."""

    mean: float
    std_error: float
    n_runs: int

    @classmethod
    def combine(cls, terms: Sequence[tuple[float, CorrelationEstimate]]) -> Aggregate:
        mean = sum(w * e.mean for w, e in terms)
        err = math.sqrt(sum((w * e.std_error) ** 2 for w, e in terms))
        return cls(mean, err, sum(e.n_runs for _, e in terms))

    def sigmas_above(self, bound: float) -> float:
        if self.std_error == 0:
            return math.inf if self.mean > bound else -math.inf
        return (self.mean - bound) / self.std_error


@dataclass(frozen=True)
class LineResult:
    kind: LineKind
    index: int
    order: tuple[int, int, int]
    estimate: CorrelationEstimate
    histogram: dict[tuple[int, int, int], int]

    @property
    def name(self) -> str:
        return line_name(self.kind, self.index)


@dataclass(frozen=True)
class KsReport:
    lines: tuple[LineResult, ...]
    x_ks: Aggregate

    @property
    def r(self) -> tuple[CorrelationEstimate, ...]:
        return tuple(l.estimate for l in self.lines if l.kind == "row")

    @property
    def c(self) -> tuple[CorrelationEstimate, ...]:
        return tuple(l.estimate for l in self.lines if l.kind == "col")

    @property
    def joint_histograms(self) -> dict[str, dict[tuple[int, int, int], int]]:
        return {l.name: l.histogram for l in self.lines}


def _line_key(kind: LineKind, k: int) -> int:
    return (0 if kind == "row" else 3) + k - 1


def _check_order(order: Sequence[int]) -> tuple[int, int, int]:
    order = tuple(int(i) for i in order)
    if sorted(order) != [1, 2, 3]:
        raise ValueError(f"order must be a permutation of (1, 2, 3), got {order!r}")
    return order


# ---------------------------------------------------------------- exact path


def sequence_distribution(state: QuantumState, observables: Sequence[PauliObservable], backend: Any) -> dict[tuple[int, ...], float]:
    """Exact probability of every reported outcome tuple, in temporal order.

    Uses the backend's instruments (linear map per outcome) or, for classical
    backends, their own ``sequence_distribution``.
    """
    backend = backend if backend is not None else IdealBackend()
    if hasattr(backend, "sequence_distribution"):
        return backend.sequence_distribution(state, observables)
    instruments = [backend.instrument(a) for a in observables]
    vec = state.density_matrix().reshape(16)
    out = {}
    for pattern in itertools.product((1, -1), repeat=len(observables)):
        v = vec
        for inst, o in zip(instruments, pattern):
            v = inst[o] @ v
        out[pattern] = float(np.trace(v.reshape(4, 4)).real)
    return out


def exact_line_distribution(
    state: QuantumState, square: MerminPeresSquare, kind: LineKind, k: int, order: Sequence[int] = (1, 2, 3), backend: Any = None
) -> dict[tuple[int, int, int], float]:
    """Joint outcome law keyed by line position (member 1, 2, 3), whatever the temporal order."""
    order = _check_order(order)
    members = square.line(kind, k)
    temporal = sequence_distribution(state, [members[i - 1] for i in order], backend)
    out = {}
    for pattern, p in temporal.items():
        by_position = [0, 0, 0]
        for pos, v in zip(order, pattern):
            by_position[pos - 1] = v
        out[tuple(by_position)] = p
    return out


def exact_line_product(state, square, kind, k, order=(1, 2, 3), backend=None) -> float:
    dist = exact_line_distribution(state, square, kind, k, order, backend)
    return sum(p * v[0] * v[1] * v[2] for v, p in dist.items())


def exact_xks(state: QuantumState, square: MerminPeresSquare, backend: Any = None, order=(1, 2, 3)) -> float:
    return sum(w * exact_line_product(state, square, kind, k, order, backend) for (kind, k), w in KS_WEIGHTS.items())


def exact_pair_correlation(state, first: PauliObservable, second: PauliObservable, backend=None) -> float:
    return sum(p * v[0] * v[1] for v, p in sequence_distribution(state, [first, second], backend).items())


def exact_perr(state, b: PauliObservable, a: PauliObservable, backend=None) -> float:
    return sum(p for v, p in sequence_distribution(state, [b, a, b], backend).items() if v[0] != v[2])


def exact_xdhv(state: QuantumState, square: MerminPeresSquare, backend: Any = None) -> float:
    a12, a13, a22, a23 = dhv_observable_set(square)
    value = 0.0
    for (first, second), w in zip(dhv_pairs(a12, a13, a22, a23), DHV_PAIR_WEIGHTS):
        value += w * exact_pair_correlation(state, first, second, backend)
    for b, a in dhv_bab(a12, a13, a22, a23):
        value -= 2 * exact_perr(state, b, a, backend)
    return value


# ------------------------------------------------------------- sampling path


def _sample_batch(state, observables, backend, n_runs, seed, key) -> list[tuple[int, ...]]:
    backend = backend if backend is not None else IdealBackend()
    out = []
    for i in range(n_runs):
        rng = run_rng(seed, *key, i)
        outcomes, _ = sample_outcomes(backend, backend.prepare(state, rng), observables, rng)
        out.append(outcomes)
    return out


def estimate_line(
    state: QuantumState,
    square: MerminPeresSquare,
    kind: LineKind,
    k: int,
    order: Sequence[int] = (1, 2, 3),
    n_runs: int = DEFAULT_SHOTS,
    backend: Backend = None,
    seed: int = 0,
) -> tuple[CorrelationEstimate, dict[tuple[int, int, int], int]]:
    """Measure one line in ``order`` on ``n_runs`` fresh copies.

    Returns the mean product v1 v2 v3 and the 8-bin histogram keyed by
    outcome per line position.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    order = _check_order(order)
    members = square.line(kind, k)
    key = (_TAG_LINE, _line_key(kind, k), PERMUTATIONS.index(order))
    samples = _sample_batch(state, [members[i - 1] for i in order], backend, n_runs, seed, key)
    hist = {pat: 0 for pat in OUTCOME_PATTERNS}
    products = []
    for temporal in samples:
        by_position = [0, 0, 0]
        for pos, v in zip(order, temporal):
            by_position[pos - 1] = v
        hist[tuple(by_position)] += 1
        products.append(temporal[0] * temporal[1] * temporal[2])
    return CorrelationEstimate.from_samples(products), hist


def estimate_xks(
    state: QuantumState,
    square: MerminPeresSquare,
    n_runs_per_line: int = DEFAULT_SHOTS,
    backend: Backend = None,
    seed: int = 0,
    orders: dict[tuple[str, int], Sequence[int]] | Sequence[int] | None = None,
) -> KsReport:
    """Six line batches combined as R1 + R2 + R3 + C1 + C2 - C3.

    ``orders`` is one temporal order for all lines or a per-line mapping.
    """
    lines = []
    for kind, k in LINES:
        if orders is None:
            order = (1, 2, 3)
        elif isinstance(orders, dict):
            order = orders.get((kind, k), (1, 2, 3))
        else:
            order = orders
        est, hist = estimate_line(state, square, kind, k, order, n_runs_per_line, backend, seed)
        lines.append(LineResult(kind, k, _check_order(order), est, hist))
    agg = Aggregate.combine([(KS_WEIGHTS[l.kind, l.index], l.estimate) for l in lines])
    return KsReport(tuple(lines), agg)


@dataclass(frozen=True)
class PermutationSweep:
    """``table[line][order]``: line product per temporal order; 36 row x column combinations."""

    table: dict[tuple[str, int], dict[tuple[int, int, int], LineResult]]
    combinations: dict[tuple[tuple[int, int, int], tuple[int, int, int]], Aggregate]

    @property
    def values(self) -> list[float]:
        return [a.mean for a in self.combinations.values()]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def total_preparations(self) -> int:
        return sum(r.estimate.n_runs for per in self.table.values() for r in per.values())


def permutation_sweep(
    state: QuantumState, square: MerminPeresSquare, n_runs: int = DEFAULT_SHOTS, backend: Backend = None, seed: int = 0
) -> PermutationSweep:
    """All 6 temporal orders of all 6 lines, then the 36 combinations.

    A combination applies one order to every row and one order to every
    column, giving X_KS(row_order, col_order).
    """
    table = {}
    for kind, k in LINES:
        table[kind, k] = {}
        for order in PERMUTATIONS:
            est, hist = estimate_line(state, square, kind, k, order, n_runs, backend, seed)
            table[kind, k][order] = LineResult(kind, k, order, est, hist)
    combos = {}
    for row_order in PERMUTATIONS:
        for col_order in PERMUTATIONS:
            terms = []
            for (kind, k), w in KS_WEIGHTS.items():
                order = row_order if kind == "row" else col_order
                terms.append((w, table[kind, k][order].estimate))
            combos[row_order, col_order] = Aggregate.combine(terms)
    return PermutationSweep(table, combos)


def estimate_pair(state, first: PauliObservable, second: PauliObservable, n_runs: int, backend, seed: int, key=()) -> CorrelationEstimate:
    """<first second> with ``first`` measured before ``second``."""
    samples = _sample_batch(state, [first, second], backend, n_runs, seed, (_TAG_PAIR, *key))
    return CorrelationEstimate.from_samples([u * v for u, v in samples])


def estimate_perr(
    state: QuantumState, b: PauliObservable, a: PauliObservable, n_runs: int = DEFAULT_SHOTS, backend: Backend = None, seed: int = 0, key=()
) -> CorrelationEstimate:
    """Fraction of B, A, B runs whose first and last outcomes differ (binomial error)."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    samples = _sample_batch(state, [b, a, b], backend, n_runs, seed, (_TAG_BAB, *key))
    return CorrelationEstimate.binomial(sum(s[0] != s[2] for s in samples), n_runs)


def dhv_pairs(a12, a13, a22, a23):
    return ((a12, a13), (a22, a23), (a12, a22), (a13, a23))


DHV_PAIR_WEIGHTS = (1, 1, 1, -1)


def dhv_bab(a12, a13, a22, a23):
    """(B, A) for each p_err[B A B] term, aligned with :func:`dhv_pairs`."""
    return ((a13, a12), (a23, a22), (a22, a12), (a23, a13))


@dataclass(frozen=True)
class DhvReport:
    pairs: tuple[tuple[str, CorrelationEstimate], ...]
    perr: tuple[tuple[str, CorrelationEstimate], ...]
    x_dhv: Aggregate
    square_labels: dict[str, PauliObservable] = field(default_factory=dict)


def estimate_xdhv(
    state: QuantumState, square: MerminPeresSquare, n_runs: int = DEFAULT_SHOTS, backend: Backend = None, seed: int = 0
) -> DhvReport:
    """Four ordered pair correlations and four BAB error rates, combined with quadrature errors."""
    obs = dhv_observable_set(square)
    labels = dict(zip(("A12", "A13", "A22", "A23"), obs))
    name = {v: k for k, v in labels.items()}
    pairs, terms = [], []
    for i, ((first, second), w) in enumerate(zip(dhv_pairs(*obs), DHV_PAIR_WEIGHTS)):
        est = estimate_pair(state, first, second, n_runs, backend, seed, key=(i,))
        pairs.append((name[first] + name[second], est))
        terms.append((w, est))
    perr = []
    for i, (b, a) in enumerate(dhv_bab(*obs)):
        est = estimate_perr(state, b, a, n_runs, backend, seed, key=(i,))
        perr.append((name[b] + name[a] + name[b], est))
        terms.append((-2, est))
    return DhvReport(tuple(pairs), tuple(perr), Aggregate.combine(terms), labels)
