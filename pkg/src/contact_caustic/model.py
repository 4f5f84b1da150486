"""Normal-form metric data for 3D contact sub-Riemannian structures.

The orthonormal frame is written in normal coordinates ``(x, y, w)``::

    X1 = (1 + y^2 b) dx - x y b dy + (y/2)(1 + g) dw
    X2 = (1 + x^2 b) dy - x y b dx - (x/2)(1 + g) dw

with ``b = beta`` and ``g = gamma`` polynomial.  ``gamma`` is assembled from the
named invariants of its degree 2, 3 and 4 graded pieces (weights 1, 1, 2) plus
optional higher order monomials.  Everything is stored as exact polynomial
data so derivatives are taken by differentiating monomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Dict, Iterable, Mapping, NamedTuple, Tuple

import numpy as np

Monomial = Tuple[int, int, int]
Poly = Dict[Monomial, float]

NAMED_FIELDS = (
    "c0", "c1", "c2",
    "c11", "c12", "c31", "c32",
    "c421", "c422", "c423", "c441", "c442", "c443", "c444", "c445",
)


class ConfigError(ValueError):
    """Invalid coefficient data or configuration."""


def _as_terms(terms: Iterable) -> Tuple[Tuple[int, int, int, float], ...]:
    out = []
    for t in terms:
        if len(t) != 4:
            raise ConfigError(f"monomial term must be [i, j, k, coeff], got {t!r}")
        i, j, k, c = t
        if any(int(e) != e or e < 0 for e in (i, j, k)):
            raise ConfigError(f"exponents must be non-negative integers, got {t!r}")
        out.append((int(i), int(j), int(k), float(c)))
    return tuple(out)


@dataclass(frozen=True)
class NormalFormCoefficients:
    """Taylor data of ``beta`` and ``gamma``.

    ``gamma_extra`` and ``beta_terms`` are tuples of ``(i, j, k, coeff)``
    standing for ``coeff * x**i * y**j * w**k``.
    """

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c11: float = 0.0
    c12: float = 0.0
    c31: float = 0.0
    c32: float = 0.0
    c421: float = 0.0
    c422: float = 0.0
    c423: float = 0.0
    c441: float = 0.0
    c442: float = 0.0
    c443: float = 0.0
    c444: float = 0.0
    c445: float = 0.0
    gamma_extra: Tuple[Tuple[int, int, int, float], ...] = field(default=())
    beta_terms: Tuple[Tuple[int, int, int, float], ...] = field(default=())

    def __post_init__(self):
        for name in NAMED_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        gamma_extra = _as_terms(self.gamma_extra)
        beta_terms = _as_terms(self.beta_terms)
        for i, j, k, _ in gamma_extra:
            if i + j + 2 * k < 5:
                raise ConfigError(
                    f"gamma_extra monomial ({i},{j},{k}) has graded order {i + j + 2 * k} < 5")
        for i, j, k, _ in beta_terms:
            if i + j < 1:
                raise ConfigError(f"beta monomial ({i},{j},{k}) does not vanish on the w-axis")
        object.__setattr__(self, "gamma_extra", gamma_extra)
        object.__setattr__(self, "beta_terms", beta_terms)

    @classmethod
    def from_dict(cls, data: Mapping) -> "NormalFormCoefficients":
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown coefficient keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in NAMED_FIELDS}
        out["gamma_extra"] = [list(t) for t in self.gamma_extra]
        out["beta_terms"] = [list(t) for t in self.beta_terms]
        return out

    def replace(self, **changes) -> "NormalFormCoefficients":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return NormalFormCoefficients(**data)

    @property
    def b(self) -> complex:
        return complex(self.c31, self.c32)


def heisenberg() -> NormalFormCoefficients:
    """The flat model: ``beta = gamma = 0``."""
    return NormalFormCoefficients()


# --- polynomial data -------------------------------------------------------

def _add(poly: Poly, mono: Monomial, c: float) -> None:
    if c != 0.0:
        poly[mono] = poly.get(mono, 0.0) + c


def gamma_polynomial(coeffs: NormalFormCoefficients) -> Poly:
    """Monomial expansion ``{(i, j, k): coeff}`` of gamma."""
    c = coeffs
    g: Poly = {}
    # degree 2: 2 c0 x^2 + 2 c2 y^2 - 2 c1 x y
    _add(g, (2, 0, 0), 2.0 * c.c0)
    _add(g, (0, 2, 0), 2.0 * c.c2)
    _add(g, (1, 1, 0), -2.0 * c.c1)
    # degree 3: (c11 x + c12 y)(x^2 + y^2) + c31 (x^3 - 3 x y^2) + c32 (y^3 - 3 x^2 y)
    _add(g, (3, 0, 0), c.c11 + c.c31)
    _add(g, (1, 2, 0), c.c11 - 3.0 * c.c31)
    _add(g, (2, 1, 0), c.c12 - 3.0 * c.c32)
    _add(g, (0, 3, 0), c.c12 + c.c32)
    # degree 4, w part: (w/2)(2 c421 x^2 + 2 c422 y^2 - 2 c423 x y)
    _add(g, (2, 0, 1), c.c421)
    _add(g, (0, 2, 1), c.c422)
    _add(g, (1, 1, 1), -c.c423)
    # degree 4, quartic part
    _add(g, (4, 0, 0), c.c441 + c.c442 + c.c444)
    _add(g, (0, 4, 0), c.c441 + c.c442 - c.c444)
    _add(g, (2, 2, 0), 2.0 * c.c441 - 6.0 * c.c442)
    _add(g, (3, 1, 0), 4.0 * c.c443 - 2.0 * c.c445)
    _add(g, (1, 3, 0), -4.0 * c.c443 - 2.0 * c.c445)
    for i, j, k, v in c.gamma_extra:
        _add(g, (i, j, k), v)
    return g


def beta_polynomial(coeffs: NormalFormCoefficients) -> Poly:
    b: Poly = {}
    for i, j, k, v in coeffs.beta_terms:
        _add(b, (i, j, k), v)
    return b


def _shift(poly: Poly, di: int, dj: int, scale: float) -> Poly:
    return {(i + di, j + dj, k): scale * v for (i, j, k), v in poly.items()}


def _sum(*polys: Poly) -> Poly:
    out: Poly = {}
    for p in polys:
        for m, v in p.items():
            _add(out, m, v)
    return out


def frame_polynomials(coeffs: NormalFormCoefficients) -> Tuple[Poly, ...]:
    """The six frame components ``(X1x, X1y, X1w, X2x, X2y, X2w)`` as polynomials."""
    beta = beta_polynomial(coeffs)
    gamma = gamma_polynomial(coeffs)
    one = {(0, 0, 0): 1.0}
    x1x = _sum(one, _shift(beta, 0, 2, 1.0))
    x1y = _shift(beta, 1, 1, -1.0)
    x1w = _sum({(0, 1, 0): 0.5}, _shift(gamma, 0, 1, 0.5))
    x2x = _shift(beta, 1, 1, -1.0)
    x2y = _sum(one, _shift(beta, 2, 0, 1.0))
    x2w = _sum({(1, 0, 0): -0.5}, _shift(gamma, 1, 0, -0.5))
    return x1x, x1y, x1w, x2x, x2y, x2w


def pack_frame(coeffs: NormalFormCoefficients):
    """Flatten the frame polynomials into arrays for the compiled flow kernels.

    Returns ``(exps, coef, comp)``: int exponents ``(m, 3)``, float
    coefficients ``(m,)`` and the component index ``0..5`` of each monomial.
    """
    exps, coef, comp = [], [], []
    for idx, poly in enumerate(frame_polynomials(coeffs)):
        for mono in sorted(poly):
            v = poly[mono]
            if v != 0.0:
                exps.append(mono)
                coef.append(v)
                comp.append(idx)
    return (np.asarray(exps, dtype=np.int64).reshape(-1, 3),
            np.asarray(coef, dtype=np.float64),
            np.asarray(comp, dtype=np.int64))


def eval_poly(poly: Poly, pt) -> float:
    x, y, w = (float(v) for v in pt)
    return float(sum(v * x ** i * y ** j * w ** k for (i, j, k), v in poly.items()))


def eval_gamma(coeffs: NormalFormCoefficients, pt) -> float:
    return eval_poly(gamma_polynomial(coeffs), pt)


def eval_beta(coeffs: NormalFormCoefficients, pt) -> float:
    return eval_poly(beta_polynomial(coeffs), pt)


class FramePair(NamedTuple):
    X1: np.ndarray
    X2: np.ndarray


def eval_frame(coeffs: NormalFormCoefficients, pt) -> FramePair:
    """Frame vectors at ``pt``, components in ``(dx, dy, dw)`` order."""
    x, y, _ = (float(v) for v in pt)
    b = eval_beta(coeffs, pt)
    g = eval_gamma(coeffs, pt)
    X1 = np.array([1.0 + y * y * b, -x * y * b, 0.5 * y * (1.0 + g)])
    X2 = np.array([-x * y * b, 1.0 + x * x * b, -0.5 * x * (1.0 + g)])
    return FramePair(X1, X2)
