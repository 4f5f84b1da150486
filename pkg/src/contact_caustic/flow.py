"""Hamiltonian geodesic flow, exponential map and its Jacobian.

The Hamiltonian is ``H = (h1^2 + h2^2) / 2`` with ``ha = <lambda, Xa>``; unit
speed geodesics live on ``H = 1/2``.  The state is ``(x, y, w, p, q, r)``.
Tangent vectors along the flow are propagated with the exact Hessian of
``H``, obtained by differentiating the frame monomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import NormalFormCoefficients, pack_frame

TWO_PI = 2.0 * math.pi


class StepFailure(RuntimeError):
    """Integration produced non-finite values or lost the energy level."""


class NoBracket(RuntimeError):
    """No sign change of the exponential-map Jacobian near ``2 pi / |r|``."""


@dataclass(frozen=True)
class FlowSettings:
    steps_per_period: int = 2000
    tol_energy: float = 1e-9

    def __post_init__(self):
        if self.steps_per_period < 16:
            raise ValueError("steps_per_period must be >= 16")
        if not self.tol_energy > 0:
            raise ValueError("tol_energy must be positive")


DEFAULT_SETTINGS = FlowSettings()


@dataclass(frozen=True)
class CotangentState:
    x: float
    y: float
    w: float
    p: float
    q: float
    r: float

    @classmethod
    def from_array(cls, a) -> "CotangentState":
        return cls(*(float(v) for v in a[:6]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.p, self.q, self.r])


@dataclass(frozen=True)
class GeodesicArc:
    phi: float
    r: float
    times: np.ndarray
    states: np.ndarray  # (n, 6)
    energy_drift: float

    def state(self, i: int) -> CotangentState:
        return CotangentState.from_array(self.states[i])

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1, :3].copy()


# --- compiled kernels ------------------------------------------------------

@numba.njit(cache=True)
def _frame_eval(exps, coef, comp, q, V, G, Hs, P, order):
    """Frame components (V[a, j]), their gradients G[a, j, i] and Hessians
    Hs[a, j, i, l] at ``q``; ``a`` is the frame index, ``j`` the component.
    ``P`` is scratch for the power table, shape (3, max_degree + 1)."""
    V[:] = 0.0
    if order >= 1:
        G[:] = 0.0
    if order >= 2:
        Hs[:] = 0.0
    nd = P.shape[1]
    for d in range(3):
        P[d, 0] = 1.0
        for n in range(1, nd):
            P[d, n] = P[d, n - 1] * q[d]
    for m in range(coef.shape[0]):
        c = coef[m]
        a = comp[m] // 3
        j = comp[m] % 3
        e0 = exps[m, 0]
        e1 = exps[m, 1]
        e2 = exps[m, 2]
        x0 = P[0, e0]
        y0 = P[1, e1]
        w0 = P[2, e2]
        V[a, j] += c * x0 * y0 * w0
        if order == 0:
            continue
        x1 = e0 * P[0, e0 - 1] if e0 >= 1 else 0.0
        y1 = e1 * P[1, e1 - 1] if e1 >= 1 else 0.0
        w1 = e2 * P[2, e2 - 1] if e2 >= 1 else 0.0
        G[a, j, 0] += c * x1 * y0 * w0
        G[a, j, 1] += c * x0 * y1 * w0
        G[a, j, 2] += c * x0 * y0 * w1
        if order == 1:
            continue
        x2 = e0 * (e0 - 1) * P[0, e0 - 2] if e0 >= 2 else 0.0
        y2 = e1 * (e1 - 1) * P[1, e1 - 2] if e1 >= 2 else 0.0
        w2 = e2 * (e2 - 1) * P[2, e2 - 2] if e2 >= 2 else 0.0
        Hs[a, j, 0, 0] += c * x2 * y0 * w0
        Hs[a, j, 1, 1] += c * x0 * y2 * w0
        Hs[a, j, 2, 2] += c * x0 * y0 * w2
        v01 = c * x1 * y1 * w0
        v02 = c * x1 * y0 * w1
        v12 = c * x0 * y1 * w1
        Hs[a, j, 0, 1] += v01
        Hs[a, j, 1, 0] += v01
        Hs[a, j, 0, 2] += v02
        Hs[a, j, 2, 0] += v02
        Hs[a, j, 1, 2] += v12
        Hs[a, j, 2, 1] += v12


@numba.njit(cache=True)
def _workspace(exps):
    nd = 1
    for m in range(exps.shape[0]):
        for d in range(3):
            if exps[m, d] + 1 > nd:
                nd = exps[m, d] + 1
    return (np.empty((2, 3)), np.empty((2, 3, 3)), np.empty((2, 3, 3, 3)),
            np.empty((3, nd)), np.empty(2), np.empty((2, 3)),
            np.empty((3, 3)), np.empty((3, 3)), np.empty((3, 3)))


@numba.njit(cache=True)
def _hamiltonian(exps, coef, comp, s):
    ws = _workspace(exps)
    V = ws[0]
    _frame_eval(exps, coef, comp, s[:3], V, ws[1], ws[2], ws[3], 0)
    h1 = s[3] * V[0, 0] + s[4] * V[0, 1] + s[5] * V[0, 2]
    h2 = s[3] * V[1, 0] + s[4] * V[1, 1] + s[5] * V[1, 2]
    return 0.5 * (h1 * h1 + h2 * h2)


@numba.njit(cache=True)
def _rhs(exps, coef, comp, s, out, ntan, ws):
    """Hamiltonian vector field on s[:6] plus the linearised flow on the
    ``ntan`` tangent vectors stored in s[6 + 6 k: 12 + 6 k]."""
    V, G, Hs, P, h, D, Hll, Hql, Hqq = ws
    order = 2 if ntan > 0 else 1
    _frame_eval(exps, coef, comp, s[:3], V, G, Hs, P, order)
    lam0 = s[3]
    lam1 = s[4]
    lam2 = s[5]
    for a in range(2):
        h[a] = lam0 * V[a, 0] + lam1 * V[a, 1] + lam2 * V[a, 2]
        for i in range(3):
            D[a, i] = lam0 * G[a, 0, i] + lam1 * G[a, 1, i] + lam2 * G[a, 2, i]
    for j in range(3):
        out[j] = h[0] * V[0, j] + h[1] * V[1, j]
        out[3 + j] = -(h[0] * D[0, j] + h[1] * D[1, j])
    if ntan == 0:
        return
    for i in range(3):
        for k in range(3):
            hll = 0.0
            hql = 0.0
            hqq = 0.0
            for a in range(2):
                hll += V[a, i] * V[a, k]
                hql += D[a, i] * V[a, k] + h[a] * G[a, k, i]
                hqq += D[a, i] * D[a, k] + h[a] * (lam0 * Hs[a, 0, i, k] + lam1 * Hs[a, 1, i, k]
                                                   + lam2 * Hs[a, 2, i, k])
            Hll[i, k] = hll
            Hql[i, k] = hql
            Hqq[i, k] = hqq
    for t in range(ntan):
        o = 6 + 6 * t
        for k in range(3):
            acc = 0.0
            for i in range(3):
                acc += Hql[i, k] * s[o + i] + Hll[k, i] * s[o + 3 + i]
            out[o + k] = acc
        for i in range(3):
            acc = 0.0
            for l in range(3):
                acc += Hqq[i, l] * s[o + l] + Hql[i, l] * s[o + 3 + l]
            out[o + 3 + i] = -acc


@numba.njit(cache=True)
def _rk4_step(exps, coef, comp, s, dt, ntan, k1, k2, k3, k4, tmp, out, ws):
    n = s.shape[0]
    _rhs(exps, coef, comp, s, k1, ntan, ws)
    for i in range(n):
        tmp[i] = s[i] + 0.5 * dt * k1[i]
    _rhs(exps, coef, comp, tmp, k2, ntan, ws)
    for i in range(n):
        tmp[i] = s[i] + 0.5 * dt * k2[i]
    _rhs(exps, coef, comp, tmp, k3, ntan, ws)
    for i in range(n):
        tmp[i] = s[i] + dt * k3[i]
    _rhs(exps, coef, comp, tmp, k4, ntan, ws)
    for i in range(n):
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@numba.njit(cache=True)
def _integrate(exps, coef, comp, s0, t_final, nsteps, ntan, record):
    """Fixed-step RK4 from 0 to t_final; returns (states, final) where
    states holds every step when ``record`` is true."""
    n = s0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    ws = _workspace(exps)
    s = s0.copy()
    nxt = np.empty(n)
    dt = t_final / nsteps
    if record:
        hist = np.empty((nsteps + 1, n))
        hist[0] = s
    else:
        hist = np.empty((1, n))
    for k in range(nsteps):
        _rk4_step(exps, coef, comp, s, dt, ntan, k1, k2, k3, k4, tmp, nxt, ws)
        s[:] = nxt
        if record:
            hist[k + 1] = s
    return hist, s


@numba.njit(cache=True)
def _det3(c0, c1, c2):
    return (c0[0] * (c1[1] * c2[2] - c1[2] * c2[1])
            - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]))


@numba.njit(cache=True)
def _jac_det(exps, coef, comp, s, f, ws):
    _rhs(exps, coef, comp, s, f, 0, ws)
    return _det3(f[:3], s[6:9], s[12:15])


@numba.njit(cache=True)
def _initial_state(phi, r):
    s = np.zeros(18)
    s[3] = math.cos(phi)
    s[4] = math.sin(phi)
    s[5] = r
    s[9] = -math.sin(phi)
    s[10] = math.cos(phi)
    s[17] = 1.0
    return s


@numba.njit(cache=True)
def _conjugate_point(exps, coef, comp, phi, r, steps_per_period, lo_frac, hi_frac):
    """First zero of det dE/d(t, phi, r) in (lo_frac, hi_frac) * 2 pi/|r|.

    Returns (status, tau, endpoint[3]); status 0 on success, 1 when no sign
    change was found, 2 on non-finite values.  The zero is bracketed on the
    fixed-step grid and polished by Illinois regula falsi on a single RK4
    step of variable length taken from the bracketing grid node.
    """
    period = 2.0 * math.pi / abs(r)
    dt = period / steps_per_period
    n = 18
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    ws = _workspace(exps)
    f = np.empty(18)
    nxt = np.empty(n)
    s = _initial_state(phi, r)
    res = np.zeros(3)
    kmax = int(math.ceil(hi_frac * steps_per_period))
    kmin = int(math.floor(lo_frac * steps_per_period))
    d_prev = 0.0
    for k in range(kmax):
        _rk4_step(exps, coef, comp, s, dt, 2, k1, k2, k3, k4, tmp, nxt, ws)
        d = _jac_det(exps, coef, comp, nxt, f, ws)
        if not math.isfinite(d):
            return 2, 0.0, res
        if k + 1 > kmin and d_prev != 0.0 and (d > 0.0) != (d_prev > 0.0):
            # root in [k dt, (k+1) dt]; s is the state at k dt
            a = 0.0
            b = dt
            fa = d_prev
            fb = d
            side = 0
            c = b
            for _ in range(100):
                c = (a * fb - b * fa) / (fb - fa)
                _rk4_step(exps, coef, comp, s, c, 2, k1, k2, k3, k4, tmp, nxt, ws)
                fc = _jac_det(exps, coef, comp, nxt, f, ws)
                if fc == 0.0 or abs(b - a) <= 1e-15 * period:
                    break
                if (fc > 0.0) == (fb > 0.0):
                    b = c
                    fb = fc
                    if side == -1:
                        fa *= 0.5
                    side = -1
                else:
                    a = c
                    fa = fc
                    if side == 1:
                        fb *= 0.5
                    side = 1
                if abs(b - a) <= 1e-14 * period:
                    break
            _rk4_step(exps, coef, comp, s, c, 2, k1, k2, k3, k4, tmp, nxt, ws)
            res[0] = nxt[0]
            res[1] = nxt[1]
            res[2] = nxt[2]
            return 0, k * dt + c, res
        if k + 1 >= kmin:
            d_prev = d
        s[:] = nxt
    return 1, 0.0, res


@numba.njit(cache=True)
def _conjugate_points(exps, coef, comp, phis, rs, steps_per_period, lo_frac, hi_frac):
    m = phis.shape[0]
    status = np.zeros(m, dtype=np.int64)
    taus = np.zeros(m)
    pts = np.zeros((m, 3))
    for i in range(m):
        st, tau, p = _conjugate_point(exps, coef, comp, phis[i], rs[i], steps_per_period,
                                      lo_frac, hi_frac)
        status[i] = st
        taus[i] = tau
        pts[i] = p
    return status, taus, pts


@numba.njit(cache=True)
def _endpoints(exps, coef, comp, phis, rs, ts, steps_per_period):
    m = phis.shape[0]
    out = np.zeros((m, 3))
    for i in range(m):
        s0 = np.zeros(6)
        s0[3] = math.cos(phis[i])
        s0[4] = math.sin(phis[i])
        s0[5] = rs[i]
        if ts[i] > 0.0:
            period = 2.0 * math.pi / abs(rs[i]) if rs[i] != 0.0 else 2.0 * math.pi
            nsteps = max(1, int(math.ceil(ts[i] / period * steps_per_period)))
            _, s = _integrate(exps, coef, comp, s0, ts[i], nsteps, 0, False)
            out[i] = s[:3]
    return out


# --- public API ------------------------------------------------------------

class _Packed:
    """Frame arrays cached per coefficient set."""

    _cache: dict = {}

    @classmethod
    def get(cls, coeffs: NormalFormCoefficients):
        key = id(coeffs)
        hit = cls._cache.get(key)
        if hit is not None and hit[0] is coeffs:
            return hit[1]
        packed = pack_frame(coeffs)
        if len(cls._cache) > 64:
            cls._cache.clear()
        cls._cache[key] = (coeffs, packed)
        return packed


def hamiltonian(coeffs: NormalFormCoefficients, state) -> float:
    s = np.asarray(state.as_array() if isinstance(state, CotangentState) else state,
                   dtype=float)
    return float(_hamiltonian(*_Packed.get(coeffs), s[:6]))


def flow_rhs(coeffs: NormalFormCoefficients, state) -> np.ndarray:
    """``(dH/dp, dH/dq, dH/dr, -dH/dx, -dH/dy, -dH/dw)``."""
    s = np.asarray(state.as_array() if isinstance(state, CotangentState) else state,
                   dtype=float)[:6].copy()
    out = np.empty(6)
    packed = _Packed.get(coeffs)
    _rhs(*packed, s, out, 0, _workspace(packed[0]))
    return out


def _nsteps(t_final: float, r: float, settings: FlowSettings) -> int:
    period = TWO_PI / abs(r) if r != 0 else TWO_PI
    return max(1, int(math.ceil(t_final / period * settings.steps_per_period)))


def integrate(coeffs: NormalFormCoefficients, state0, t_final: float,
              settings: FlowSettings = DEFAULT_SETTINGS, *, check_energy: bool = True
              ) -> GeodesicArc:
    """Integrate the geodesic flow from ``state0`` on ``[0, t_final]``.

    Energy drift is measured against ``H(state0)``; :class:`StepFailure` is
    raised when it exceeds ``settings.tol_energy`` or values blow up.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    s0 = np.asarray(state0.as_array() if isinstance(state0, CotangentState) else state0,
                    dtype=float)[:6].copy()
    packed = _Packed.get(coeffs)
    n = _nsteps(t_final, s0[5], settings)
    hist, _ = _integrate(*packed, s0, float(t_final), n, 0, True)
    if not np.all(np.isfinite(hist)):
        raise StepFailure("non-finite state during integration")
    h0 = _hamiltonian(*packed, s0)
    drift = max(abs(_hamiltonian(*packed, row) - h0) for row in hist)
    if check_energy and drift > settings.tol_energy:
        raise StepFailure(f"energy drift {drift:.3e} exceeds {settings.tol_energy:.1e}")
    phi = math.atan2(s0[4], s0[3]) % TWO_PI
    times = np.linspace(0.0, t_final, n + 1)
    return GeodesicArc(phi=phi, r=float(s0[5]), times=times, states=hist,
                       energy_drift=float(drift))


def initial_covector(phi: float, r: float) -> CotangentState:
    """Point of the unit cylinder over the origin, ``(p, q) = (cos phi, sin phi)``."""
    return CotangentState(0.0, 0.0, 0.0, math.cos(phi), math.sin(phi), float(r))


def exp_map(coeffs: NormalFormCoefficients, t: float, phi: float, r: float,
            settings: FlowSettings = DEFAULT_SETTINGS) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    out = exp_map_many(coeffs, [t], [phi], [r], settings)
    return out[0]


def exp_map_many(coeffs, ts, phis, rs, settings: FlowSettings = DEFAULT_SETTINGS) -> np.ndarray:
    ts, phis, rs = (np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=float),
                                                         np.broadcast(ts, phis, rs).shape)).ravel()
                    for v in (ts, phis, rs))
    out = _endpoints(*_Packed.get(coeffs), phis, rs, ts, settings.steps_per_period)
    if not np.all(np.isfinite(out)):
        raise StepFailure("non-finite endpoint")
    return out


def exp_jacobian(coeffs: NormalFormCoefficients, t: float, phi: float, r: float,
                 settings: FlowSettings = DEFAULT_SETTINGS, method: str = "variational"
                 ) -> np.ndarray:
    """3x3 matrix of partials of the exponential map, columns ``(t, phi, r)``.

    ``method="variational"`` integrates the linearised flow alongside the
    geodesic.  ``method="fd"`` uses central differences with one Richardson
    level (steps ``1e-6`` scaled by the period, 1 and ``|r|``).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    packed = _Packed.get(coeffs)
    if method == "variational":
        s0 = _initial_state(float(phi), float(r))
        _, s = _integrate(*packed, s0, float(t), _nsteps(t, r, settings), 2, False)
        f = np.empty(6)
        _rhs(*packed, s[:6].copy(), f, 0, _workspace(packed[0]))
        J = np.column_stack([f[:3], s[6:9], s[12:15]])
    elif method == "fd":
        base = np.array([t, phi, r], dtype=float)
        steps = np.array([1e-6 * TWO_PI / abs(r), 1e-6, 1e-6 * abs(r)])
        J = np.empty((3, 3))
        for col in range(3):
            d1 = _central(coeffs, base, col, steps[col], settings)
            d2 = _central(coeffs, base, col, 2.0 * steps[col], settings)
            J[:, col] = (4.0 * d1 - d2) / 3.0
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(J)):
        raise StepFailure("non-finite Jacobian")
    return J


def _central(coeffs, base, col, step, settings):
    plus = base.copy()
    minus = base.copy()
    plus[col] += step
    minus[col] -= step
    # same step count on both sides keeps the discretisation error smooth
    n_ref = _nsteps(base[0], base[2], settings)
    pts = []
    for b in (plus, minus):
        s0 = np.zeros(6)
        s0[3:] = math.cos(b[1]), math.sin(b[1]), b[2]
        _, s = _integrate(*_Packed.get(coeffs), s0, float(b[0]), n_ref, 0, False)
        pts.append(s[:3])
    return (pts[0] - pts[1]) / (2.0 * step)


def conjugate_points(coeffs: NormalFormCoefficients, phis, rs,
                     settings: FlowSettings = DEFAULT_SETTINGS,
                     window=(0.7, 1.3)):
    """Vectorised first conjugate times and conjugate points.

    Returns ``(status, tau, points)``; ``status`` is 0 on success, 1 when no
    sign change was found in the window, 2 on numerical failure.
    """
    phis = np.ascontiguousarray(np.asarray(phis, dtype=float).ravel())
    rs = np.ascontiguousarray(np.broadcast_to(np.asarray(rs, dtype=float), phis.shape)).copy()
    if np.any(rs == 0):
        raise ValueError("r must be non-zero")
    return _conjugate_points(*_Packed.get(coeffs), phis, rs, settings.steps_per_period,
                             float(window[0]), float(window[1]))


def heisenberg_geodesic(t, phi: float, r: float) -> np.ndarray:
    """Closed-form flat geodesic, rows ``(x, y, w)`` for each ``t``."""
    t = np.asarray(t, dtype=float)
    p, q = math.cos(phi), math.sin(phi)
    if r == 0:
        return np.stack([p * t, q * t, np.zeros_like(t)], axis=-1)
    rt = r * t
    x = (p * np.sin(rt) + q * (1.0 - np.cos(rt))) / r
    y = (-p * (1.0 - np.cos(rt)) + q * np.sin(rt)) / r
    w = (rt - np.sin(rt)) / (2.0 * r * r)
    return np.stack([x, y, w], axis=-1)
