import itertools

import numpy as np
import pytest

from contextlab.observables import (
    KS_WEIGHTS,
    LINES,
    NotProportionalToIdentity,
    PauliObservable,
    commutes,
    default_square,
    dhv_observable_set,
    line_product,
    within_line_pairs,
)

from conftest import I, X, Y, Z

P = PauliObservable.parse
RAW = {"I": I, "X": X, "Y": Y, "Z": Z}


def raw(label):
    return np.kron(RAW[label[0]], RAW[label[1]])


def test_default_grid_entries():
    sq = default_square()
    assert sq[3, 3] == P("YY")
    assert sq[2, 1] == P("IX")
    assert sq[1, 1] == P("ZI")
    assert [str(a) for a in sq.observables()] == ["ZI", "IZ", "ZZ", "IX", "XI", "XX", "ZX", "XZ", "YY"]


def test_swapped_grid_entries():
    sq = default_square("yz")
    assert sq[1, 1] == P("YI")
    assert sq[3, 3] == P("ZZ")
    assert sq.axis_swap == "yz"


def test_swap_is_involution():
    assert default_square("yz").swapped() == default_square()


@pytest.mark.parametrize(
    "a,b,expected",
    [("ZI", "IZ", True), ("ZI", "XI", False), ("YY", "XX", True), ("ZX", "XZ", True), ("ZI", "XX", False)],
)
def test_commutes(a, b, expected):
    assert commutes(P(a), P(b)) is expected


def test_commutes_matches_matrix_commutator():
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=2)]
    for a, b in itertools.product(labels, repeat=2):
        m, n = raw(a), raw(b)
        assert commutes(P(a), P(b)) == np.allclose(m @ n, n @ m)


@pytest.mark.parametrize("swap", ["none", "yz"])
def test_within_line_pairs_commute(swap):
    pairs = within_line_pairs(default_square(swap))
    assert len(pairs) == 18
    assert all(commutes(a, b) for _, a, b in pairs)


def test_some_cross_line_pair_does_not_commute():
    sq = default_square()
    assert not commutes(sq[1, 1], sq[2, 2])


@pytest.mark.parametrize("swap", ["none", "yz"])
def test_line_products(swap):
    sq = default_square(swap)
    signs = {line: line_product(sq, *line) for line in LINES}
    assert signs == {("row", 1): 1, ("row", 2): 1, ("row", 3): 1, ("col", 1): 1, ("col", 2): 1, ("col", 3): -1}


def test_row1_product_by_hand():
    m = raw("ZI") @ raw("IZ") @ raw("ZZ")
    np.testing.assert_allclose(m, np.eye(4), atol=1e-12)
    m = raw("ZZ") @ raw("XX") @ raw("YY")
    np.testing.assert_allclose(m, -np.eye(4), atol=1e-12)


def test_line_product_independent_of_order():
    sq = default_square()
    for kind, k in LINES:
        mats = [a.matrix for a in sq.line(kind, k)]
        prods = {tuple(np.round(np.linalg.multi_dot([mats[i] for i in perm]).ravel(), 12)) for perm in itertools.permutations(range(3))}
        assert len(prods) == 1


def test_ks_sign_sum_is_six():
    sq = default_square()
    assert sum(w * line_product(sq, *line) for line, w in KS_WEIGHTS.items()) == 6


def test_corrupted_square_raises():
    bad = default_square().replace(3, 3, P("XX"))
    with pytest.raises(NotProportionalToIdentity):
        line_product(bad, "col", 3)


def test_entries_square_to_identity():
    for a in default_square().observables() + default_square("yz").observables():
        np.testing.assert_allclose(a.matrix @ a.matrix, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(a.matrix, a.matrix.conj().T)


def test_product_of_commuting_observables():
    assert P("YY") * P("XX") == P("-ZZ")
    assert P("ZI") * P("ZX") == P("IX")
    np.testing.assert_allclose((P("XZ") * P("ZX")).matrix, raw("XZ") @ raw("ZX"))
    with pytest.raises(ValueError):
        P("ZI") * P("XI")


def test_dhv_observable_set():
    a12, a13, a22, a23 = dhv_observable_set(default_square("yz"))
    assert (a12, a13, a22, a23) == (P("IY"), P("YY"), P("XI"), P("XX"))
    assert commutes(a12, a22) and commutes(a13, a23) and commutes(a12, a13) and commutes(a22, a23)


def test_dhv_observable_set_needs_swapped_square():
    with pytest.raises(ValueError):
        dhv_observable_set(default_square())


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        P("XYZ")
    with pytest.raises(ValueError):
        PauliObservable("Q", "I")
