"""Suspension coefficients of the caustic slices.

For small ``h`` the slice image admits an expansion
``(x, y)(phi, h) = sum_{l>=3} h^l f_l(phi)``.  The coefficients are recovered
by a per-angle least-squares fit over several heights.

Side ``-1`` is expanded in the signed height ``-h`` with the image reflected
through the axis, ``-(x, y) = sum (-h)^l f_l^-(phi)``.  With that convention
``f_3`` and ``f_4`` coincide on both sides and ``f_5^-`` carries the lower
invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import caustic
from .classifier import ClassifierReport, trig_poly
from .flow import DEFAULT_SETTINGS, FlowSettings
from .model import NormalFormCoefficients

TWO_PI = 2.0 * math.pi

DEFAULT_H_LIST = (0.03, 0.04, 0.05, 0.06, 0.07)
DEFAULT_N_PHI = 128
# heights and degree for the structural identity checks: the truncation of
# h^6, h^7 terms spoils f_4 and f_5 at the coarse defaults
IDENTITY_H_LIST = tuple(round(0.005 * i, 3) for i in range(1, 13))
IDENTITY_K = 9
IDENTITY_N_PHI = 64
MAX_CONDITION = 1e12
TOL_ANGLE = 0.05


class IllConditioned(ValueError):
    pass


class DegenerateB(ValueError):
    pass


def phi_grid(n: int = DEFAULT_N_PHI) -> np.ndarray:
    return np.arange(n) * (TWO_PI / n)


@dataclass
class SuspensionFit:
    side: int
    k: int
    phi: np.ndarray
    f: Dict[int, np.ndarray]          # l -> (n, 2)
    residual: float
    h_list: tuple = ()
    condition: float = 0.0
    coef_error: Dict[int, float] = field(default_factory=dict)

    def predict(self, h: float) -> np.ndarray:
        """Slice image at height ``h > 0`` on this side."""
        hs = self.side * h
        xy = sum(hs ** l * fl for l, fl in self.f.items())
        return self.side * xy

    def derivative(self, l: int) -> np.ndarray:
        return spectral_derivative(self.f[l])

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "k": self.k,
            "h_list": [float(h) for h in self.h_list],
            "residual": float(self.residual),
            "condition": float(self.condition),
            "coef_error": {str(l): float(e) for l, e in sorted(self.coef_error.items())},
            "phi": self.phi.tolist(),
            "f": {str(l): fl.tolist() for l, fl in sorted(self.f.items())},
        }


def spectral_derivative(values: np.ndarray) -> np.ndarray:
    """Derivative of periodic samples on a uniform grid over [0, 2 pi)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    spectrum = np.fft.fft(values, axis=0)
    shape = (n,) + (1,) * (values.ndim - 1)
    return np.real(np.fft.ifft(1j * k.reshape(shape) * spectrum, axis=0))


def fit_samples(samples: Sequence[np.ndarray], h_list: Sequence[float], side: int, k: int):
    """Least-squares fit of stacked slice samples.

    ``samples[i]`` holds the ``(n, 2)`` image at ``h_list[i]``.  Returns
    ``(f, residual, condition)``.
    """
    h = np.asarray(h_list, dtype=float)
    hs = side * h
    powers = np.arange(3, k + 1)
    V = hs[:, None] ** powers[None, :]
    scale = np.linalg.norm(V, axis=0)
    Ve = V / scale
    cond = float(np.linalg.cond(Ve))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditioned(f"Vandermonde condition {cond:.3e} for h_list={list(h_list)}")
    data = side * np.stack([np.asarray(s, dtype=float) for s in samples])   # (m, n, 2)
    m, n, _ = data.shape
    rhs = data.reshape(m, 2 * n)
    coef, *_ = np.linalg.lstsq(Ve, rhs, rcond=None)
    coef = coef / scale[:, None]
    fit = V @ coef
    residual = float(np.abs(fit - rhs).max())
    f = {int(l): coef[i].reshape(n, 2) for i, l in enumerate(powers)}
    return f, residual, cond


def truncation_error(samples, h_list, side: int, k: int, f: Dict[int, np.ndarray]):
    """Per-coefficient error estimate: change of ``f_l`` when the degree drops
    to ``k - 1``."""
    if k <= 3:
        return {}
    try:
        lower, _, _ = fit_samples(samples, h_list, side, k - 1)
    except IllConditioned:
        return {}
    return {l: float(np.abs(f[l] - lower[l]).max()) for l in lower}


def fit_suspension(coeffs: NormalFormCoefficients, side: int = 1,
                   h_list: Sequence[float] = DEFAULT_H_LIST, phis=None, k: int = 5,
                   settings: FlowSettings = DEFAULT_SETTINGS) -> SuspensionFit:
    """Fit ``f_3 .. f_k`` from slices at the heights in ``h_list``."""
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    if k < 3:
        raise ValueError("degree k must be at least 3")
    h_list = tuple(float(h) for h in h_list)
    if len(set(h_list)) < k - 1 or any(h <= 0 for h in h_list):
        raise ValueError(f"need at least {k - 1} distinct positive heights")
    phis = phi_grid() if phis is None else np.asarray(phis, dtype=float)
    samples = [caustic.slice_points(coeffs, h, side, phis, settings)[0] for h in h_list]
    return fit_from_samples(samples, h_list, side, k, phis)


def fit_from_samples(samples, h_list, side: int, k: int, phis) -> SuspensionFit:
    f, residual, cond = fit_samples(samples, h_list, side, k)
    return SuspensionFit(side=side, k=k, phi=np.asarray(phis, dtype=float), f=f,
                         residual=residual, h_list=tuple(h_list), condition=cond,
                         coef_error=truncation_error(samples, h_list, side, k, f))


# --- structural identities ----------------------------------------------------

def wedge(fit4: SuspensionFit, fit5: SuspensionFit) -> np.ndarray:
    """Pointwise ``det(f_4', f_5)``."""
    d4 = fit4.derivative(4)
    f5 = fit5.f[5]
    return d4[:, 0] * f5[:, 1] - d4[:, 1] * f5[:, 0]


def wedge_prediction(phi, report: ClassifierReport, side: int) -> np.ndarray:
    A = report.A_plus if side > 0 else report.A_minus
    B = report.B_plus if side > 0 else report.B_minus
    P = trig_poly(phi, A, B, report.C, report.D)
    return -20.0 * math.pi ** 2 * report.b_tilde * np.sin(3 * phi + report.omega_b) * P


def _check_pair(fit_plus: SuspensionFit, fit_minus: SuspensionFit):
    for fit in (fit_plus, fit_minus):
        if fit.k < 5:
            raise ValueError("wedge checks need fits of degree at least 5")
    if fit_plus.phi.shape != fit_minus.phi.shape or not np.allclose(fit_plus.phi, fit_minus.phi):
        raise ValueError("fits must share the angle grid")


@dataclass
class WedgeCheck:
    side: int
    residual: float
    numeric: np.ndarray
    predicted: np.ndarray


def wedge_checks(fit_plus: SuspensionFit, fit_minus: SuspensionFit,
                 report: ClassifierReport) -> List[WedgeCheck]:
    _check_pair(fit_plus, fit_minus)
    if report.b_tilde < 1e-12:
        raise DegenerateB("b vanishes, the wedge factorisation carries no information")
    out = []
    for side, fit5 in ((1, fit_plus), (-1, fit_minus)):
        # f_4 is shared by both sides; take it from the upper fit
        num = wedge(fit_plus, fit5)
        pred = wedge_prediction(fit_plus.phi, report, side)
        scale = max(np.abs(num).max(), np.abs(pred).max())
        res = float(np.abs(num - pred).max() / scale) if scale > 0 else 0.0
        out.append(WedgeCheck(side=side, residual=res, numeric=num, predicted=pred))
    return out


def wedge_residual(fit_plus: SuspensionFit, fit_minus: SuspensionFit,
                   report: ClassifierReport) -> float:
    """Largest relative deviation of ``det(f_4', f_5)`` from its closed form
    over both sides."""
    return max(c.residual for c in wedge_checks(fit_plus, fit_minus, report))


def periodic_zeros(phi: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sign changes of periodic samples, located by linear interpolation."""
    v = np.asarray(values, dtype=float)
    n = v.size
    step = TWO_PI / n
    nxt = np.roll(v, -1)
    idx = np.flatnonzero((v == 0) | (v * nxt < 0))
    out = []
    for i in idx:
        if v[i] == 0:
            out.append(phi[i])
        else:
            out.append(phi[i] + step * v[i] / (v[i] - nxt[i]))
    return np.sort(np.mod(out, TWO_PI))


def _circ(a, b):
    d = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :]) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def zero_sets_match(z1: np.ndarray, z2: np.ndarray, tol: float) -> bool:
    if len(z1) != len(z2):
        return False
    if len(z1) == 0:
        return True
    d = _circ(z1, z2)
    return bool(d.min(axis=1).max() <= tol and d.min(axis=0).max() <= tol)


def wedge_zero_match(check: WedgeCheck, phi: np.ndarray, tol_steps: float = 2.0) -> bool:
    step = TWO_PI / phi.size
    return zero_sets_match(periodic_zeros(phi, check.numeric),
                           periodic_zeros(phi, check.predicted), tol_steps * step)


def side_difference(fit_plus: SuspensionFit, fit_minus: SuspensionFit, l: int) -> float:
    return float(np.abs(fit_plus.f[l] - fit_minus.f[l]).max())


# --- adherent angles --------------------------------------------------------------

@dataclass
class AdherentReport:
    crossings: List[dict] = field(default_factory=list)
    zeros: List[float] = field(default_factory=list)
    tol_angle: float = TOL_ANGLE
    applicable: bool = True

    @property
    def all_matched(self) -> bool:
        return all(c["matched"] for c in self.crossings)

    def to_dict(self) -> dict:
        return {"applicable": self.applicable, "tol_angle": self.tol_angle,
                "zeros": [float(z) for z in self.zeros],
                "crossings": self.crossings, "all_matched": self.all_matched}


def adherent_candidate(phi_a: float, phi_b: float) -> float:
    """Angle ``phi`` with the crossing close to the pair ``(phi, phi + pi)``,
    reduced modulo pi."""
    z = np.exp(2j * phi_a) + np.exp(2j * (phi_b - math.pi))
    return float((np.angle(z) / 2) % math.pi)


def adherent_angle_check(crossings: Sequence, predicted_angles: Optional[Sequence[float]] = None,
                         fit: Optional[SuspensionFit] = None,
                         tol_angle: float = TOL_ANGLE) -> AdherentReport:
    """Distance of every crossing's adherence candidate to the nearest zero.

    Zeros are ``predicted_angles`` when given, otherwise the sign changes of
    ``det(f_4', f_5)`` from ``fit``.  Both are compared modulo pi.
    """
    if predicted_angles is None:
        if fit is None:
            raise ValueError("need predicted angles or a fit")
        predicted_angles = periodic_zeros(fit.phi, wedge(fit, fit))
    zeros = np.sort(np.mod(np.asarray(predicted_angles, dtype=float), math.pi))
    rep = AdherentReport(zeros=zeros.tolist(), tol_angle=tol_angle)
    for cr in crossings:
        cand = adherent_candidate(cr.phi_a, cr.phi_b)
        if zeros.size:
            d = np.abs(zeros - cand) % math.pi
            dist = float(np.minimum(d, math.pi - d).min())
        else:
            dist = math.inf
        rep.crossings.append({"phi_a": float(cr.phi_a), "phi_b": float(cr.phi_b),
                              "candidate": cand, "distance": dist,
                              "matched": bool(dist <= tol_angle)})
    return rep
