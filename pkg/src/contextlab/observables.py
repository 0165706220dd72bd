"""Signed two-qubit Pauli observables and the Mermin-Peres square."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from contextlab.qcore import I2, I4, SX, SY, SZ

PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}

# single-qubit products: (a, b) -> (phase, c) with sigma_a sigma_b = phase * sigma_c
_PRODUCT = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _m = PAULI[_a] @ PAULI[_b]
    for _c in "IXYZ":
        _ph = np.trace(PAULI[_c].conj().T @ _m) / 2
        if abs(_ph) > 0.5:
            _PRODUCT[_a, _b] = (complex(np.round(_ph)), _c)

AxisSwap = Literal["none", "yz"]
LineKind = Literal["row", "col"]


class NotProportionalToIdentity(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliObservable:
    p1: str
    p2: str
    sign: int = 1

    def __post_init__(self):
        if self.p1 not in PAULI or self.p2 not in PAULI:
            raise ValueError(f"unknown Pauli label in {self.p1!r}, {self.p2!r}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")

    @classmethod
    def parse(cls, text: str) -> PauliObservable:
        """``"ZX"``, ``"-YY"`` or ``"+IZ"`` style labels."""
        text = text.strip().upper()
        sign = -1 if text.startswith("-") else 1
        body = text.lstrip("+-")
        if len(body) != 2:
            raise ValueError(f"cannot parse observable {text!r}")
        return cls(body[0], body[1], sign)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = self.sign * np.kron(PAULI[self.p1], PAULI[self.p2])
        m.setflags(write=False)
        return m

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, p in ((1, self.p1), (2, self.p2)) if p != "I")

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + self.p1 + self.p2

    def __mul__(self, other: PauliObservable) -> PauliObservable:
        """Product of two commuting observables (again a signed Pauli)."""
        ph1, c1 = _PRODUCT[self.p1, other.p1]
        ph2, c2 = _PRODUCT[self.p2, other.p2]
        phase = ph1 * ph2 * self.sign * other.sign
        if abs(phase.imag) > 1e-12:
            raise ValueError(f"{self} and {other} do not commute; product is not Hermitian")
        return PauliObservable(c1, c2, int(round(phase.real)))

    def swap_yz(self) -> PauliObservable:
        t = {"Y": "Z", "Z": "Y"}
        return PauliObservable(t.get(self.p1, self.p1), t.get(self.p2, self.p2), self.sign)


def commutes(a: PauliObservable, b: PauliObservable) -> bool:
    anti = sum(x != "I" and y != "I" and x != y for x, y in ((a.p1, b.p1), (a.p2, b.p2)))
    return anti % 2 == 0


_DEFAULT_GRID = (
    ("ZI", "IZ", "ZZ"),
    ("IX", "XI", "XX"),
    ("ZX", "XZ", "YY"),
)


@dataclass(frozen=True)
class MerminPeresSquare:
    grid: tuple[tuple[PauliObservable, ...], ...]
    axis_swap: AxisSwap = "none"

    def __getitem__(self, ij: tuple[int, int]) -> PauliObservable:
        """1-based ``square[i, j]``."""
        i, j = ij
        return self.grid[i - 1][j - 1]

    def line(self, kind: LineKind, k: int) -> tuple[PauliObservable, PauliObservable, PauliObservable]:
        if kind == "row":
            return tuple(self.grid[k - 1])
        if kind == "col":
            return tuple(self.grid[i][k - 1] for i in range(3))
        raise ValueError(f"line kind must be 'row' or 'col', got {kind!r}")

    def observables(self) -> list[PauliObservable]:
        return [a for row in self.grid for a in row]

    def position(self, a: PauliObservable) -> tuple[int, int]:
        for i, row in enumerate(self.grid, start=1):
            for j, b in enumerate(row, start=1):
                if b == a:
                    return i, j
        raise KeyError(f"{a} is not in the square")

    def replace(self, i: int, j: int, a: PauliObservable) -> MerminPeresSquare:
        rows = [list(r) for r in self.grid]
        rows[i - 1][j - 1] = a
        return MerminPeresSquare(tuple(tuple(r) for r in rows), self.axis_swap)

    def swapped(self) -> MerminPeresSquare:
        rows = tuple(tuple(a.swap_yz() for a in r) for r in self.grid)
        return MerminPeresSquare(rows, "none" if self.axis_swap == "yz" else "yz")

    def __str__(self) -> str:
        return "\n".join("  ".join(f"{str(a):>3}" for a in r) for r in self.grid)


# (kind, index) in the order R1 R2 R3 C1 C2 C3
LINES: tuple[tuple[LineKind, int], ...] = tuple((k, i) for k in ("row", "col") for i in (1, 2, 3))
# sign each line product enters the KS combination with
KS_WEIGHTS = {("row", 1): 1, ("row", 2): 1, ("row", 3): 1, ("col", 1): 1, ("col", 2): 1, ("col", 3): -1}


def line_name(kind: LineKind, k: int) -> str:
    return f"{'R' if kind == 'row' else 'C'}{k}"


def parse_line(name: str) -> tuple[LineKind, int]:
    name = name.strip().upper()
    if len(name) == 2 and name[0] in "RC" and name[1] in "123":
        return ("row" if name[0] == "R" else "col"), int(name[1])
    raise ValueError(f"unknown line {name!r}; expected R1..R3 or C1..C3")


def default_square(axis_swap: AxisSwap = "none") -> MerminPeresSquare:
    sq = MerminPeresSquare(tuple(tuple(PauliObservable.parse(s) for s in r) for r in _DEFAULT_GRID))
    if axis_swap == "yz":
        return sq.swapped()
    if axis_swap != "none":
        raise ValueError(f"axis_swap must be 'none' or 'yz', got {axis_swap!r}")
    return sq


def line_product(square: MerminPeresSquare, kind: LineKind, k: int, tol: float = 1e-12) -> int:
    """Sign s such that the ordered product of the line's matrices is s * I."""
    m = I4
    for a in square.line(kind, k):
        m = m @ a.matrix
    for s in (1, -1):
        if np.max(np.abs(m - s * I4)) <= tol:
            return s
    raise NotProportionalToIdentity(f"{line_name(kind, k)} product is not +-I")


def within_line_pairs(square: MerminPeresSquare) -> list[tuple[str, PauliObservable, PauliObservable]]:
    """The 18 (line, a, b) pairs that must commute."""
    out = []
    for kind, k in LINES:
        for a, b in itertools.combinations(square.line(kind, k), 2):
            out.append((line_name(kind, k), a, b))
    return out


def dhv_observable_set(square: MerminPeresSquare) -> tuple[PauliObservable, ...]:
    """(A12, A13, A22, A23) used by the disturbance-corrected inequality."""
    if square.axis_swap != "yz":
        raise ValueError("the disturbance test uses the square with y and z exchanged")
    return square[1, 2], square[1, 3], square[2, 2], square[2, 3]
