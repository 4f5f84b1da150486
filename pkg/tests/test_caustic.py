import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from contact_caustic import caustic
from contact_caustic.caustic import CausticSlice, Crossing, Symbol
from contact_caustic.classifier import SYMBOLS
from contact_caustic.model import heisenberg

TWO_PI = 2 * math.pi


def grid(n=2048, offset=0.0):
    return np.arange(n) * (TWO_PI / n) + offset


def deltoid(t):
    return np.column_stack([2 * np.cos(t) + np.cos(2 * t), 2 * np.sin(t) - np.sin(2 * t)])


def astroid(t):
    return np.column_stack([np.cos(t) ** 3, np.sin(t) ** 3])


def hypocycloid6(t):
    return np.column_stack([5 * np.cos(t) + np.cos(5 * t), 5 * np.sin(t) - np.sin(5 * t)])


def figure_eight(t):
    return np.column_stack([np.cos(t), np.sin(2 * t) / 2])


@pytest.mark.parametrize("curve,cusps", [
    (deltoid, [0, TWO_PI / 3, 2 * TWO_PI / 3]),
    (astroid, [0, math.pi / 2, math.pi, 3 * math.pi / 2]),
    (hypocycloid6, list(np.arange(6) * TWO_PI / 6)),
])
def test_cusps_of_hypocycloids(curve, cusps):
    phi = grid(offset=0.001)
    found = caustic.find_cusps(phi, curve(phi))
    assert len(found) == len(cusps)
    err = [min(abs((f - c + math.pi) % TWO_PI - math.pi) for c in cusps) for f in found]
    assert max(err) < 0.5 * TWO_PI / phi.size
    assert caustic.find_crossings(phi, curve(phi)) == []


def test_smooth_curves_have_no_cusps():
    phi = grid()
    assert caustic.find_cusps(phi, np.column_stack([np.cos(phi), 2 * np.sin(phi)])) == []
    assert caustic.find_cusps(phi, figure_eight(phi)) == []


def test_figure_eight_crossing():
    phi = grid(offset=0.0003)
    found = caustic.find_crossings(phi, figure_eight(phi))
    assert len(found) == 1
    c = found[0]
    assert np.allclose(c.point, [0, 0], atol=1e-6)
    assert sorted([c.phi_a, c.phi_b]) == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-3)


def test_limacon_inner_loop_crossing():
    # r = 1/2 + cos t crosses itself once at the origin
    phi = grid(offset=0.0002)
    rad = 0.5 + np.cos(phi)
    found = caustic.find_crossings(phi, np.column_stack([rad * np.cos(phi), rad * np.sin(phi)]))
    assert len(found) == 1
    assert sorted([found[0].phi_a, found[0].phi_b]) == pytest.approx(
        [2 * math.pi / 3, 4 * math.pi / 3], abs=1e-3)


def test_detect_cusps_rejects_odd_counts():
    phi = grid()
    with pytest.raises(caustic.CuspCountUnexpected) as info:
        caustic.detect_cusps((phi, deltoid(phi)))
    assert info.value.count == 3


doubled = st.lists(st.integers(0, 6), min_size=6, max_size=6).map(tuple)


@given(doubled, st.integers(0, 5), st.booleans())
def test_canonical_form_is_dihedral_invariant(d, k, rev):
    t = d[::-1] if rev else d
    t = t[k:] + t[:k]
    assert Symbol(t).canonical() == Symbol(d).canonical()
    assert Symbol(d).canonical().canonical() == Symbol(d).canonical()
    assert Symbol(d).n_crossings == Symbol(d).canonical().n_crossings


def test_reference_symbols_are_distinct():
    canon = {Symbol.from_entries(e).canonical() for e in SYMBOLS.values()}
    assert len(canon) == len(SYMBOLS)
    for name, e in SYMBOLS.items():
        assert caustic.symbol_name(Symbol.from_entries(e)) == name


def test_symbol_formatting_and_validation():
    s = Symbol.from_entries((0.5, 0.5, 1, 0, 0, 1))
    assert str(s) == "(1/2,1/2,1,0,0,1)"
    assert s.entries == (0.5, 0.5, 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Symbol.from_entries((0.3, 0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        Symbol((1, 2, 3))


def _fake_slice(cusps, crossings, n=1200):
    phi = grid(n)
    return CausticSlice(h=0.01, side=1, phi=phi, xy=np.zeros((n, 2)), r=np.ones(n),
                        tau=np.ones(n), cusp_angles=list(cusps), crossings=crossings)


def test_extract_symbol_counts_passages():
    cusps = np.arange(6) * TWO_PI / 6 + 0.1
    mid = cusps + TWO_PI / 12
    # S1 = (0,1,1,1,1,1): ten passages on arcs 1..5, two per arc
    pairs = [(mid[1] - 0.1, mid[2] + 0.1), (mid[1] + 0.1, mid[4] - 0.1),
             (mid[2] - 0.1, mid[5] + 0.1), (mid[3] - 0.1, mid[5] - 0.1),
             (mid[3] + 0.1, mid[4] + 0.1)]
    cr = [Crossing(a, b, (0.0, 0.0)) for a, b in pairs]
    sym = caustic.extract_symbol(_fake_slice(cusps, cr))
    assert sym.doubled == (0, 2, 2, 2, 2, 2)
    assert caustic.symbol_name(sym) == "S1"


def test_passage_on_cusp_raises():
    cusps = np.arange(6) * TWO_PI / 6
    cr = [Crossing(cusps[2] + 1e-4, 0.5, (0.0, 0.0))]
    with pytest.raises(caustic.PassageOnCusp):
        caustic.extract_symbol(_fake_slice(cusps, cr))


def test_extract_symbol_needs_six_cusps():
    with pytest.raises(caustic.CuspCountUnexpected):
        caustic.extract_symbol(_fake_slice([0.0, 1.0, 2.0, 3.0], []))


def test_heisenberg_slice_is_a_point():
    sl = caustic.slice(heisenberg(), 0.1, 1, n_grid=512)
    assert caustic.is_point_slice(sl)
    assert np.abs(sl.xy).max() <= 1e-8
    assert sl.cusp_angles == [] and sl.crossings == []
    np.testing.assert_allclose(sl.r, 10.0, rtol=1e-10)


def test_slice_argument_checks():
    with pytest.raises(ValueError):
        caustic.slice(heisenberg(), 0.1, 1, n_grid=256)
    with pytest.raises(ValueError):
        caustic.slice_points(heisenberg(), -0.1, 1, [0.0])
    with pytest.raises(ValueError):
        caustic.slice_points(heisenberg(), 0.1, 0, [0.0])


def test_sidecar_shape():
    sl = _fake_slice([0.1] * 6, [Crossing(1.0, 2.0, (0.5, -0.5))])
    rec = sl.sidecar()
    assert rec["side"] == "plus" and rec["n_grid"] == 1200
    assert rec["crossings"][0]["point"] == [0.5, -0.5]
