"""Closed-form invariants predicting the self-intersection regime.

Nothing here integrates the flow.  The quartic coefficients of gamma give the
real trigonometric polynomials

    P(phi) = A cos 2phi + B sin 2phi + C cos 4phi + D sin 4phi

one per side, and the cubic part ``b = c31 + i c32`` gives the factor
``sin(3 phi + omega_b)``.  In the complex picture ``z = exp(i theta)`` with
``theta = 2 phi``::

    Pt(z) = mu z^4 + nu z^3 + conj(nu) z + conj(mu),     Tt(z) = b z^3 + conj(b)

so unit roots of ``Pt`` sit at twice the zeros of ``P`` and unit roots of
``Tt`` at twice the zeros of ``sin(3 phi + omega_b)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import NormalFormCoefficients

TWO_PI = 2.0 * math.pi

TOL_C = 1e-12
TOL_RES = 1e-8
TOL_CIRCLE = 1e-8
TOL_SEP = 1e-6

SYMBOLS: Dict[str, Tuple[float, ...]] = {
    "S1": (0, 1, 1, 1, 1, 1),
    "S2": (2, 1, 1, 1, 1, 1),
    "S3": (2, 1, 1, 2, 1, 0),
    "S4": (0.5, 0.5, 1, 0, 0, 1),
    "S5": (1, 0.5, 0.5, 1, 1, 1),
    "S6": (1.5, 0.5, 1, 1, 0, 1),
    "S7": (2, 0.5, 0.5, 2, 0, 0),
}
GENERIC_FAMILY = ("S1", "S2", "S3")
DEGENERATE_FAMILY = ("S4", "S5", "S6", "S7")


class AllZero(ValueError):
    pass


class DegenerateLeadingCoefficient(ValueError):
    pass


class NumericalRootFailure(RuntimeError):
    pass


class Regime(str, enum.Enum):
    OFF_C = "OFF_C"
    ON_C_GENERIC = "ON_C_GENERIC"
    ON_C_DEGENERATE_PLUS = "ON_C_DEGENERATE_PLUS"
    ON_C_DEGENERATE_MINUS = "ON_C_DEGENERATE_MINUS"
    NON_GENERIC = "NON_GENERIC"
    DEGENERATE_B = "DEGENERATE_B"


def wrap_angle(a):
    """Reduce to ``[0, 2 pi)``; guards the float case ``-tiny % 2 pi == 2 pi``."""
    a = np.mod(a, TWO_PI)
    return np.where(a >= TWO_PI, 0.0, a)


def abcd(coeffs: NormalFormCoefficients) -> Tuple[float, float, float, float, float, float]:
    """``(A+, A-, B+, B-, C, D)``."""
    c = coeffs
    a0 = 35.0 / 8.0 * (c.c422 - c.c421) + 45.0 * c.c445
    a1 = 3.0 * math.pi * c.c423
    b0 = 35.0 / 8.0 * c.c423 + 45.0 * c.c444
    b1 = 3.0 * math.pi * (c.c421 - c.c422)
    return a0 + a1, a0 - a1, b0 + b1, b0 - b1, 36.0 * c.c443, -36.0 * c.c442


def b_polar(c31: float, c32: float) -> Tuple[float, float]:
    """``(b_tilde, omega_b)`` with ``c31 = bt sin(w)``, ``c32 = -bt cos(w)``."""
    bt = math.hypot(c31, c32)
    if bt == 0.0:
        return 0.0, 0.0
    return bt, float(wrap_angle(math.atan2(c31, -c32)))


def mu_nu(A: float, B: float, C: float, D: float) -> Tuple[complex, complex]:
    return complex(C, -D) / 2.0, complex(A, -B) / 2.0


def p_tilde(mu: complex, nu: complex) -> np.ndarray:
    """Coefficients of ``Pt``, highest degree first."""
    return np.array([mu, nu, 0.0, np.conj(nu), np.conj(mu)], dtype=complex)


def t_tilde(b: complex) -> np.ndarray:
    return np.array([b, 0.0, 0.0, np.conj(b)], dtype=complex)


def build_polynomials(coeffs: NormalFormCoefficients):
    """``(Pt+, Pt-, Tt)`` coefficient arrays, highest degree first."""
    ap, am, bp, bm, C, D = abcd(coeffs)
    mu, nu_p = mu_nu(ap, bp, C, D)
    _, nu_m = mu_nu(am, bm, C, D)
    return p_tilde(mu, nu_p), p_tilde(mu, nu_m), t_tilde(coeffs.b)


def _trim(poly) -> np.ndarray:
    poly = np.asarray(poly, dtype=complex)
    nz = np.flatnonzero(poly != 0)
    if nz.size == 0:
        raise ValueError("zero polynomial")
    return poly[nz[0]:]


def unit_roots(poly, tol_circle: float = TOL_CIRCLE, tol_sep: float = TOL_SEP,
               return_simple: bool = False):
    """Angles in ``[0, 2 pi)`` of the roots of ``poly`` on the unit circle.

    Roots come from the companion matrix and get a few Newton corrections.
    With ``return_simple`` the result is ``(angles, simple)`` where
    ``simple`` is false if two unit roots are closer than ``tol_sep``.
    """
    p = _trim(poly)
    if p.size == 1:
        angles = np.empty(0)
        return (angles, True) if return_simple else angles
    roots = np.roots(p)
    if not np.all(np.isfinite(roots)):
        raise NumericalRootFailure("non-finite roots")
    dp = np.polyder(p)
    for _ in range(3):
        d = np.polyval(dp, roots)
        ok = np.abs(d) > 1e-300
        step = np.zeros_like(roots)
        step[ok] = np.polyval(p, roots[ok]) / d[ok]
        roots = roots - step
    on = np.abs(np.abs(roots) - 1.0) <= tol_circle
    angles = np.sort(wrap_angle(np.angle(roots[on])))
    simple = True
    if angles.size > 1:
        gaps = np.diff(np.concatenate([angles, [angles[0] + TWO_PI]]))
        simple = bool(gaps.min() > tol_sep)
    return (angles, simple) if return_simple else angles


def trig_poly(phi, A: float, B: float, C: float, D: float):
    phi = np.asarray(phi, dtype=float)
    return A * np.cos(2 * phi) + B * np.sin(2 * phi) + C * np.cos(4 * phi) + D * np.sin(4 * phi)


def trig_zeros(A: float, B: float, C: float, D: float, n_samples: int = 4096) -> np.ndarray:
    """Zeros of ``P`` on ``[0, 2 pi)`` by sampling and Brent refinement."""
    if A == B == C == D == 0:
        raise AllZero("trigonometric polynomial vanishes identically")
    grid = np.linspace(0.0, TWO_PI, n_samples + 1)
    vals = trig_poly(grid, A, B, C, D)
    f = lambda t: float(trig_poly(t, A, B, C, D))
    zeros = []
    for k in range(n_samples):
        a, b = grid[k], grid[k + 1]
        va, vb = vals[k], vals[k + 1]
        if va == 0.0:
            zeros.append(a)
        elif va * vb < 0.0:
            zeros.append(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    zeros = np.sort(wrap_angle(np.asarray(zeros)))
    if zeros.size > 1:
        keep = np.concatenate([[True], np.diff(zeros) > 1e-12])
        zeros = zeros[keep]
        if TWO_PI - zeros[-1] + zeros[0] <= 1e-12:
            zeros = zeros[:-1]
    return zeros


def cusp_angles(omega_b: float) -> np.ndarray:
    """Zeros of ``sin(3 phi + omega_b)`` in ``[0, 2 pi)``."""
    return np.sort(wrap_angle((np.arange(6) * math.pi - omega_b) / 3.0))


def sylvester_matrix(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    m, n = p.size - 1, q.size - 1
    S = np.zeros((m + n, m + n), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = p
    for i in range(m):
        S[n + i, i:i + n + 1] = q
    return S


def resultant(p, q) -> complex:
    """Determinant of the Sylvester matrix; both leading coefficients must be
    non-zero."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    if p[0] == 0 or q[0] == 0:
        raise DegenerateLeadingCoefficient("leading coefficient vanishes")
    return complex(np.linalg.det(sylvester_matrix(p, q)))


def rotate_invariants(mu: complex, nu: complex, b: complex, alpha: float):
    """Action of a rotation by ``alpha`` of the normal coordinates on
    ``(mu, nu, b)``; unit roots of both polynomials turn by ``2 alpha``."""
    return (mu * np.exp(-4j * alpha), nu * np.exp(-2j * alpha), b * np.exp(-3j * alpha))


def homogeneous_scale(mu: complex, nu: complex, b: complex) -> float:
    return max(abs(mu), abs(nu), abs(b)) ** 7


@dataclass
class ClassifierReport:
    b_tilde: float
    omega_b: float
    A_plus: float
    A_minus: float
    B_plus: float
    B_minus: float
    C: float
    D: float
    mu: complex
    nu_plus: complex
    nu_minus: complex
    unit_roots_plus: List[float]
    unit_roots_minus: List[float]
    t_roots: List[float]
    res_plus: Optional[complex]
    res_minus: Optional[complex]
    res_plus_rel: Optional[float]
    res_minus_rel: Optional[float]
    regime: Regime
    predicted_family_plus: List[str]
    predicted_family_minus: List[str]
    cusp_angles: List[float] = field(default_factory=list)
    adherent_plus: List[float] = field(default_factory=list)
    adherent_minus: List[float] = field(default_factory=list)
    simple_roots: bool = True
    notes: List[str] = field(default_factory=list)

    def family(self, side: int) -> List[str]:
        return self.predicted_family_plus if side > 0 else self.predicted_family_minus

    def to_dict(self) -> dict:
        def cx(v):
            return None if v is None else [float(v.real), float(v.imag)]

        return {
            "b_tilde": self.b_tilde,
            "omega_b": self.omega_b,
            "A_plus": self.A_plus,
            "A_minus": self.A_minus,
            "B_plus": self.B_plus,
            "B_minus": self.B_minus,
            "C": self.C,
            "D": self.D,
            "mu": cx(self.mu),
            "nu_plus": cx(self.nu_plus),
            "nu_minus": cx(self.nu_minus),
            "unit_roots_plus": [float(v) for v in self.unit_roots_plus],
            "unit_roots_minus": [float(v) for v in self.unit_roots_minus],
            "t_roots": [float(v) for v in self.t_roots],
            "res_plus": cx(self.res_plus),
            "res_minus": cx(self.res_minus),
            "res_plus_rel": self.res_plus_rel,
            "res_minus_rel": self.res_minus_rel,
            "regime": self.regime.value,
            "predicted_family_plus": list(self.predicted_family_plus),
            "predicted_family_minus": list(self.predicted_family_minus),
            "cusp_angles": [float(v) for v in self.cusp_angles],
            "adherent_plus": [float(v) for v in self.adherent_plus],
            "adherent_minus": [float(v) for v in self.adherent_minus],
            "simple_roots": self.simple_roots,
            "notes": list(self.notes),
        }


def _side_family(res_rel: Optional[float], n_roots: int) -> List[str]:
    if res_rel is not None and res_rel <= TOL_RES:
        return list(DEGENERATE_FAMILY)
    if n_roots == 2:
        return ["S1"]
    if n_roots == 4:
        return ["S2", "S3"]
    return []


def classify(coeffs: NormalFormCoefficients, tol_c: float = TOL_C) -> ClassifierReport:
    ap, am, bp, bm, C, D = abcd(coeffs)
    bt, om = b_polar(coeffs.c31, coeffs.c32)
    mu, nu_p = mu_nu(ap, bp, C, D)
    _, nu_m = mu_nu(am, bm, C, D)
    b = coeffs.b
    P_plus, P_minus, T = p_tilde(mu, nu_p), p_tilde(mu, nu_m), t_tilde(b)
    notes: List[str] = []

    def roots_of(P):
        if not np.any(P != 0):
            return np.empty(0), True
        return unit_roots(P, return_simple=True)

    ur_p, simple_p = roots_of(P_plus)
    ur_m, simple_m = roots_of(P_minus)
    t_roots = unit_roots(T) if b != 0 else np.empty(0)

    res = {}
    for key, P, nu in (("plus", P_plus, nu_p), ("minus", P_minus, nu_m)):
        if mu == 0 or b == 0:
            res[key] = (None, None)
            continue
        value = resultant(P, T)
        res[key] = (value, abs(value) / homogeneous_scale(mu, nu, b))

    on_c = abs(coeffs.c0 - coeffs.c2) <= tol_c and abs(coeffs.c1) <= tol_c
    fam_p: List[str] = []
    fam_m: List[str] = []
    if not on_c:
        regime = Regime.OFF_C
    elif b == 0:
        regime = Regime.DEGENERATE_B
        notes.append("b = 0: the cubic invariant vanishes, no six-cusp prediction")
    else:
        if mu == 0:
            notes.append("mu = 0: resultant undefined, family from root count only")
        fam_p = _side_family(res["plus"][1], ur_p.size)
        fam_m = _side_family(res["minus"][1], ur_m.size)
        deg_p = fam_p == list(DEGENERATE_FAMILY)
        deg_m = fam_m == list(DEGENERATE_FAMILY)
        if deg_p and deg_m:
            regime = Regime.NON_GENERIC
        elif deg_p:
            regime = Regime.ON_C_DEGENERATE_PLUS
        elif deg_m:
            regime = Regime.ON_C_DEGENERATE_MINUS
        else:
            regime = Regime.ON_C_GENERIC

    cusps = cusp_angles(om) if bt > 0 else np.empty(0)

    def adherent(A, B):
        if A == B == C == D == 0:
            return sorted(cusps.tolist())
        return sorted(np.concatenate([trig_zeros(A, B, C, D), cusps]).tolist())

    return ClassifierReport(
        b_tilde=bt, omega_b=om, A_plus=ap, A_minus=am, B_plus=bp, B_minus=bm, C=C, D=D,
        mu=mu, nu_plus=nu_p, nu_minus=nu_m,
        unit_roots_plus=ur_p.tolist(), unit_roots_minus=ur_m.tolist(),
        t_roots=np.asarray(t_roots).tolist(),
        res_plus=res["plus"][0], res_minus=res["minus"][0],
        res_plus_rel=res["plus"][1], res_minus_rel=res["minus"][1],
        regime=regime, predicted_family_plus=fam_p, predicted_family_minus=fam_m,
        cusp_angles=cusps.tolist(), adherent_plus=adherent(ap, bp),
        adherent_minus=adherent(am, bm), simple_roots=bool(simple_p and simple_m),
        notes=notes,
    )
