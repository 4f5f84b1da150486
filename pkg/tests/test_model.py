import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from contact_caustic.model import (
    NAMED_FIELDS, ConfigError, NormalFormCoefficients as NF, eval_beta, eval_frame, eval_gamma,
    eval_poly, frame_polynomials, heisenberg, pack_frame,
)

small = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
coeff_sets = st.fixed_dictionaries({name: small for name in NAMED_FIELDS}).map(lambda d: NF(**d))
points = st.tuples(small, small, small)


def gamma_oracle(c, x, y, w):
    """Graded pieces written out as in the normal form."""
    g2 = (c.c0 + c.c2) * (x * x + y * y) + (c.c0 - c.c2) * (x * x - y * y) - 2 * c.c1 * x * y
    g3 = ((c.c11 * x + c.c12 * y) * (x * x + y * y) + 3 * (c.c31 * x - c.c32 * y) * (x * x - y * y)
          - 2 * (c.c31 * x ** 3 + c.c32 * y ** 3))
    g4 = (w / 2 * ((c.c421 + c.c422) * (x * x + y * y) + (c.c421 - c.c422) * (x * x - y * y)
                   - 2 * c.c423 * x * y)
          + c.c441 * (x * x + y * y) ** 2 + c.c442 * (x ** 4 + y ** 4 - 6 * x * x * y * y)
          + 4 * c.c443 * x * y * (x * x - y * y) + c.c444 * (x ** 4 - y ** 4)
          - 2 * c.c445 * x * y * (x * x + y * y))
    return g2 + g3 + g4


@given(coeff_sets, points)
def test_gamma_matches_graded_formula(c, pt):
    x, y, w = pt
    assert eval_gamma(c, pt) == pytest.approx(gamma_oracle(c, x, y, w), rel=1e-12, abs=1e-11)


@given(coeff_sets, st.floats(-3, 3))
def test_gamma_vanishes_to_second_order_on_axis(c, w):
    # gamma(0,0,w) = d_x gamma(0,0,w) = d_y gamma(0,0,w) = 0
    eps = 1e-6
    assert eval_gamma(c, (0, 0, w)) == 0
    gx = (eval_gamma(c, (eps, 0, w)) - eval_gamma(c, (-eps, 0, w))) / (2 * eps)
    gy = (eval_gamma(c, (0, eps, w)) - eval_gamma(c, (0, -eps, w))) / (2 * eps)
    assert abs(gx) < 1e-8 and abs(gy) < 1e-8


def test_frame_at_origin():
    X1, X2 = eval_frame(NF(c0=1, c31=2, beta_terms=[(1, 0, 0, 3.0)]), (0, 0, 0.7))
    np.testing.assert_array_equal(X1, [1, 0, 0])
    np.testing.assert_array_equal(X2, [0, 1, 0])


def _bracket(c, pt, eps=1e-6):
    """[X1, X2] by central differences of the frame."""
    pt = np.asarray(pt, dtype=float)

    def jac(k):
        J = np.zeros((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = eps
            J[:, i] = (eval_frame(c, pt + e)[k] - eval_frame(c, pt - e)[k]) / (2 * eps)
        return J

    X1, X2 = eval_frame(c, pt)
    return jac(1) @ X1 - jac(0) @ X2


@given(coeff_sets)
def test_contact_condition_at_origin(c):
    X1, X2 = eval_frame(c, (0, 0, 0))
    B = _bracket(c, (0, 0, 0))
    np.testing.assert_allclose(B, [0, 0, -1], atol=1e-8)
    assert abs(np.linalg.det(np.column_stack([X1, X2, B]))) > 0.5


@given(coeff_sets, points)
def test_packed_frame_matches_eval(c, pt):
    exps, coef, comp = pack_frame(c)
    x, y, w = pt
    vals = np.zeros(6)
    for (i, j, k), v, idx in zip(exps, coef, comp):
        vals[idx] += v * x ** i * y ** j * w ** k
    X1, X2 = eval_frame(c, pt)
    np.testing.assert_allclose(vals, np.concatenate([X1, X2]), rtol=1e-12, atol=1e-10)


def test_beta_terms():
    c = NF(beta_terms=[(1, 0, 0, 2.0), (0, 1, 1, -1.0)])
    assert eval_beta(c, (0.5, 2.0, 3.0)) == pytest.approx(2 * 0.5 - 2.0 * 3.0)
    X1, X2 = eval_frame(c, (0.5, 2.0, 3.0))
    b = eval_beta(c, (0.5, 2.0, 3.0))
    np.testing.assert_allclose(X1[:2], [1 + 4 * b, -b])


def test_gamma_extra_term():
    c = NF(gamma_extra=[(5, 0, 0, 1.5), (1, 0, 2, -2.0)])
    assert eval_gamma(c, (2.0, 0.0, 1.0)) == pytest.approx(1.5 * 32 - 4.0)


@pytest.mark.parametrize("bad", [
    {"c0": float("nan")},
    {"c0": "1"},
    {"c0": True},
    {"gamma_extra": [(2, 0, 0, 1.0)]},
    {"gamma_extra": [(1, 1, 1)]},
    {"gamma_extra": [(1.5, 3, 0, 1.0)]},
    {"beta_terms": [(0, 0, 3, 1.0)]},
])
def test_invalid_coefficients(bad):
    with pytest.raises(ConfigError):
        NF(**bad)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        NF.from_dict({"c0": 1.0, "c99": 2.0})


@given(coeff_sets)
def test_dict_roundtrip(c):
    assert NF.from_dict(c.to_dict()) == c


def test_heisenberg_frame_is_flat():
    polys = frame_polynomials(heisenberg())
    assert [eval_poly(p, (1.0, 2.0, 3.0)) for p in polys] == [1.0, 0.0, 1.0, 0.0, 1.0, -0.5]


def test_b_property_and_replace():
    c = NF(c31=0.3, c32=-0.4)
    assert c.b == complex(0.3, -0.4)
    assert c.replace(c31=1.0).c31 == 1.0 and c.c31 == 0.3
    assert math.isclose(abs(c.b), 0.5)
