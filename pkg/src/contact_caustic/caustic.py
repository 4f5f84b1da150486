"""Conjugate times, horizontal slices of the caustic and their symbols.

A slice at height ``h > 0`` on side ``+1`` (``w > 0``) or ``-1`` (``w < 0``)
is sampled on a uniform grid of initial angles ``phi``; for each angle the
covector radius ``r`` is solved so that the first conjugate point has
``w = side * pi * h**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares

from . import flow
from .flow import DEFAULT_SETTINGS, FlowSettings, NoBracket, StepFailure
from .model import NormalFormCoefficients

TWO_PI = 2.0 * math.pi

THETA_SPEED = 0.05
REVERSAL_ANGLE = math.pi / 2
TOL_CUSP_STEPS = 2
TOL_MERGE_STEPS = 3


class SolveFailure(RuntimeError):
    pass


class CuspCountUnexpected(RuntimeError):
    def __init__(self, count: int, angles=()):
        super().__init__(f"found {count} cusps, expected 4 or 6")
        self.count = count
        self.angles = list(angles)


class PassageOnCusp(RuntimeError):
    pass


@dataclass(frozen=True)
class Crossing:
    phi_a: float
    phi_b: float
    point: Tuple[float, float]


@dataclass
class CausticSlice:
    h: float
    side: int
    phi: np.ndarray          # (n,)
    xy: np.ndarray           # (n, 2)
    r: np.ndarray            # (n,)
    tau: np.ndarray          # (n,)
    cusp_angles: List[float] = field(default_factory=list)
    crossings: List[Crossing] = field(default_factory=list)
    cusp_error: Optional[str] = None

    @property
    def n_grid(self) -> int:
        return self.phi.size

    @property
    def step(self) -> float:
        return TWO_PI / self.phi.size

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.phi, self.xy])

    def sidecar(self) -> dict:
        return {
            "h": self.h,
            "side": "plus" if self.side > 0 else "minus",
            "n_grid": self.n_grid,
            "cusp_angles": [float(a) for a in self.cusp_angles],
            "crossings": [
                {"phi_a": c.phi_a, "phi_b": c.phi_b, "point": [c.point[0], c.point[1]]}
                for c in self.crossings
            ],
            "cusp_error": self.cusp_error,
        }


# --- conjugate times -------------------------------------------------------

def conjugate_time(coeffs: NormalFormCoefficients, phi: float, r: float,
                   settings: FlowSettings = DEFAULT_SETTINGS) -> float:
    """First positive zero of the exponential-map Jacobian determinant.

    Searched in ``[0.7, 1.3] * 2 pi/|r|``, widened twice before giving up
    with :class:`NoBracket`.
    """
    if r == 0:
        raise ValueError("r must be non-zero")
    for window in ((0.7, 1.3), (0.5, 1.6), (0.3, 2.0)):
        status, tau, _ = flow.conjugate_points(coeffs, [phi], [r], settings, window)
        if status[0] == 0:
            return float(tau[0])
        if status[0] == 2:
            raise StepFailure("non-finite values while locating the conjugate time")
    raise NoBracket(f"no conjugate time near 2 pi/|r| for phi={phi}, r={r}")


def conjugate_point(coeffs, phi, r, settings: FlowSettings = DEFAULT_SETTINGS):
    status, tau, pts = flow.conjugate_points(coeffs, [phi], [r], settings)
    if status[0] != 0:
        raise NoBracket(f"no conjugate time near 2 pi/|r| for phi={phi}, r={r}")
    return float(tau[0]), pts[0]


# --- slices ----------------------------------------------------------------

def _solve_radii(coeffs, phis, h, side, settings, max_iter=50, rtol=1e-13):
    """Per-angle secant iteration on ``r`` so that the conjugate point has
    ``w = side * pi * h^2``."""
    target = math.pi * h * h
    n = phis.size
    r = np.full(n, side / h)
    tau = np.zeros(n)
    pts = np.zeros((n, 3))
    done = np.zeros(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    r_prev = w_prev = None
    for it in range(max_iter):
        active = ~(done | failed)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        st, t_a, p_a = flow.conjugate_points(coeffs, phis[idx], r[idx], settings)
        bad = st != 0
        failed[idx[bad]] = True
        good = idx[~bad]
        tau[good] = t_a[~bad]
        pts[good] = p_a[~bad]
        w = side * pts[:, 2]
        err = np.abs(w / target - 1.0)
        conv = good[err[good] <= rtol]
        done[conv] = True
        upd = good[err[good] > rtol]
        if upd.size == 0:
            continue
        new_r = r.copy()
        if r_prev is None:
            # w scales like 1/r^2 to leading order
            new_r[upd] = r[upd] * np.sqrt(w[upd] / target)
        else:
            dw = w[upd] - w_prev[upd]
            ok = dw != 0
            sec = upd[ok]
            new_r[sec] = r[sec] - (w[sec] - target) * (r[sec] - r_prev[sec]) / dw[ok]
            flat = upd[~ok]
            new_r[flat] = r[flat] * np.sqrt(w[flat] / target)
        r_prev = r.copy()
        w_prev = w.copy()
        r = new_r
        if not np.all(np.isfinite(r[upd])) or np.any(np.sign(r[upd]) != side):
            failed[upd[~np.isfinite(r[upd]) | (np.sign(r[upd]) != side)]] = True
    failed |= ~done
    return r, tau, pts, failed


def _fallback_radius(coeffs, phi, h, side, settings):
    target = math.pi * h * h

    def g(rr):
        _, p = conjugate_point(coeffs, phi, rr, settings)
        return side * p[2] - target

    lo, hi = sorted((side * 0.5 / h, side * 2.0 / h))
    rr = brentq(g, lo, hi, rtol=1e-14, xtol=1e-14 * abs(lo))
    t, p = conjugate_point(coeffs, phi, rr, settings)
    return rr, t, p


def slice_points(coeffs: NormalFormCoefficients, h: float, side: int, phis,
                 settings: FlowSettings = DEFAULT_SETTINGS):
    """Conjugate points at height ``h`` for the given angles.

    Returns ``(xy, r, tau)``.  Angles where the secant stalls are retried
    with a bracketed solve; :class:`SolveFailure` when more than 1% still
    fail.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    phis = np.asarray(phis, dtype=float)
    r, tau, pts, failed = _solve_radii(coeffs, phis, h, side, settings)
    for i in np.flatnonzero(failed):
        try:
            r[i], tau[i], pts[i] = _fallback_radius(coeffs, phis[i], h, side, settings)
            failed[i] = False
        except (ValueError, RuntimeError):
            pass
    if failed.sum() > 0.01 * phis.size:
        raise SolveFailure(f"{int(failed.sum())} of {phis.size} angles failed at h={h}")
    if failed.any():
        # interpolate the few stragglers periodically so the grid stays uniform
        good = ~failed
        for col in range(2):
            pts[failed, col] = np.interp(phis[failed], phis[good], pts[good, col],
                                         period=TWO_PI)
    return pts[:, :2].copy(), r, tau


def slice(coeffs: NormalFormCoefficients, h: float, side: int = 1, n_grid: int = 1024,
          settings: FlowSettings = DEFAULT_SETTINGS, detect: bool = True) -> CausticSlice:
    """Horizontal slice of the semi-caustic at height ``h`` with cusp and
    crossing detection."""
    if n_grid < 512:
        raise ValueError("n_grid must be at least 512")
    phis = np.arange(n_grid) * (TWO_PI / n_grid)
    xy, r, tau = slice_points(coeffs, h, side, phis, settings)
    out = CausticSlice(h=float(h), side=int(side), phi=phis, xy=xy, r=r, tau=tau)
    if detect and not is_point_slice(out):
        try:
            out.cusp_angles = detect_cusps(out)
        except CuspCountUnexpected as exc:
            out.cusp_angles = exc.angles
            out.cusp_error = str(exc)
        out.crossings = detect_self_intersections(out)
    return out


def is_point_slice(sl: CausticSlice, rel_tol: float = 1e-6) -> bool:
    """True when the slice has collapsed onto the w-axis (relative to h^4)."""
    return float(np.abs(sl.xy).max()) <= rel_tol * sl.h ** 4


# --- cusps ------------------------------------------------------------------

def _curve_arrays(sl):
    if isinstance(sl, CausticSlice):
        return sl.phi, sl.xy
    phi, xy = sl
    return np.asarray(phi, dtype=float), np.asarray(xy, dtype=float)


def find_cusps(phi, xy, theta_speed: float = THETA_SPEED,
               reversal: float = REVERSAL_ANGLE) -> List[float]:
    """Cusp angles of a closed, uniformly sampled curve.

    A cusp is a local minimum of the discrete speed below
    ``theta_speed * median`` across which the segment direction turns by at
    least ``reversal``.  The angle is where the velocity component along the
    turn axis changes sign, linearly interpolated.
    """
    n = phi.size
    step = TWO_PI / n
    d = np.roll(xy, -1, axis=0) - xy          # segment k: sample k -> k+1
    speed = np.hypot(d[:, 0], d[:, 1])
    med = float(np.median(speed))
    if med == 0.0:
        return []
    prev = np.roll(speed, 1)
    nxt = np.roll(speed, -1)
    candidates = np.flatnonzero((speed <= prev) & (speed < nxt) & (speed < theta_speed * med))
    cusps = []
    for k in candidates:
        # compare directions two segments away on either side
        before = d[(k - 2) % n]
        after = d[(k + 2) % n]
        nb = np.hypot(*before)
        na = np.hypot(*after)
        if nb == 0 or na == 0:
            continue
        cosang = float(np.dot(before, after) / (nb * na))
        if math.acos(max(-1.0, min(1.0, cosang))) < reversal:
            continue
        axis = after / na - before / nb
        axis /= np.hypot(*axis)
        # signed speed along the axis at segment midpoints k-1, k, k+1
        js = [(k + o) % n for o in (-2, -1, 0, 1, 2)]
        v = np.array([np.dot(d[j], axis) for j in js])
        mids = (k + np.array([-2, -1, 0, 1, 2]) + 0.5) * step
        pos = None
        for a in range(4):
            if v[a] <= 0.0 < v[a + 1]:
                pos = mids[a] + (mids[a + 1] - mids[a]) * (-v[a]) / (v[a + 1] - v[a])
                break
        if pos is None:
            pos = (k + 0.5) * step
        cusps.append((phi[0] + pos) % TWO_PI)
    cusps = sorted(cusps)
    # merge duplicates from flat minima
    merged: List[float] = []
    for c in cusps:
        if merged and (c - merged[-1]) < 2 * step:
            continue
        merged.append(c)
    if len(merged) > 1 and merged[0] + TWO_PI - merged[-1] < 2 * step:
        merged.pop()
    return merged


def detect_cusps(sl, theta_speed: float = THETA_SPEED, reversal: float = REVERSAL_ANGLE
                 ) -> List[float]:
    """Cusp angles of a slice; :class:`CuspCountUnexpected` unless 4 or 6."""
    phi, xy = _curve_arrays(sl)
    cusps = find_cusps(phi, xy, theta_speed, reversal)
    if len(cusps) not in (4, 6):
        raise CuspCountUnexpected(len(cusps), cusps)
    return cusps


# --- self-intersections ------------------------------------------------------

def find_crossings(phi, xy, merge_steps: int = TOL_MERGE_STEPS, block: int = 256
                   ) -> List[Crossing]:
    """Transversal crossings of the closed polyline through ``xy``.

    Adjacent segments are skipped; crossings whose two parameters are within
    ``merge_steps`` grid spacings of each other or of an earlier crossing
    are dropped as discretisation duplicates.
    """
    n = phi.size
    step = TWO_PI / n
    P = xy
    d = np.roll(P, -1, axis=0) - P
    lo = np.minimum(P, P + d)
    hi = np.maximum(P, P + d)
    hits = []
    for i0 in range(0, n, block):
        i1 = min(n, i0 + block)
        I = np.arange(i0, i1)
        # bounding-box prefilter against every later segment
        ov = ((lo[I, None, 0] <= hi[None, :, 0]) & (lo[None, :, 0] <= hi[I, None, 0])
              & (lo[I, None, 1] <= hi[None, :, 1]) & (lo[None, :, 1] <= hi[I, None, 1]))
        J = np.arange(n)
        ov &= J[None, :] > I[:, None] + 1
        ov &= ~((I[:, None] == 0) & (J[None, :] == n - 1))
        ii, jj = np.nonzero(ov)
        ii = ii + i0
        if ii.size == 0:
            continue
        di, dj = d[ii], d[jj]
        w0 = P[jj] - P[ii]
        den = di[:, 0] * dj[:, 1] - di[:, 1] * dj[:, 0]
        nz = den != 0
        s = np.full(ii.size, -1.0)
        t = np.full(ii.size, -1.0)
        s[nz] = (w0[nz, 0] * dj[nz, 1] - w0[nz, 1] * dj[nz, 0]) / den[nz]
        t[nz] = (w0[nz, 0] * di[nz, 1] - w0[nz, 1] * di[nz, 0]) / den[nz]
        ok = (s >= 0) & (s < 1) & (t >= 0) & (t < 1)
        for a, b, sa, tb in zip(ii[ok], jj[ok], s[ok], t[ok]):
            hits.append((a + sa, b + tb, P[a] + sa * d[a]))
    out: List[Crossing] = []
    kept: List[Tuple[float, float]] = []
    for pa, pb, pt in sorted(hits, key=lambda x: (x[0], x[1])):
        gap = abs(pb - pa)
        if min(gap, n - gap) <= merge_steps:
            continue
        dup = False
        for qa, qb in kept:
            da = min(abs(pa - qa), n - abs(pa - qa))
            db = min(abs(pb - qb), n - abs(pb - qb))
            if da <= merge_steps and db <= merge_steps:
                dup = True
                break
        if dup:
            continue
        kept.append((pa, pb))
        out.append(Crossing(phi_a=float((phi[0] + pa * step) % TWO_PI),
                            phi_b=float((phi[0] + pb * step) % TWO_PI),
                            point=(float(pt[0]), float(pt[1]))))
    return out


def detect_self_intersections(sl, merge_steps: int = TOL_MERGE_STEPS) -> List[Crossing]:
    phi, xy = _curve_arrays(sl)
    return find_crossings(phi, xy, merge_steps)


# --- symbols ------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    """Six half-integers, stored doubled (number of passages per arc)."""

    doubled: Tuple[int, ...]

    def __post_init__(self):
        dbl = tuple(int(v) for v in self.doubled)
        if len(dbl) != 6 or any(v < 0 for v in dbl):
            raise ValueError("a symbol has six non-negative entries")
        object.__setattr__(self, "doubled", dbl)

    @classmethod
    def from_entries(cls, entries: Sequence[float]) -> "Symbol":
        dbl = []
        for e in entries:
            v = 2 * float(e)
            if v != round(v):
                raise ValueError(f"{e} is not a half-integer")
            dbl.append(int(round(v)))
        return cls(tuple(dbl))

    @property
    def entries(self) -> Tuple[float, ...]:
        return tuple(v / 2 for v in self.doubled)

    @property
    def n_crossings(self) -> float:
        return sum(self.doubled) / 2

    def canonical(self) -> "Symbol":
        return canonical_symbol(self)

    def name(self) -> Optional[str]:
        return symbol_name(self)

    def __str__(self) -> str:
        def fmt(v):
            return str(v // 2) if v % 2 == 0 else f"{v}/2"
        return "(" + ",".join(fmt(v) for v in self.doubled) + ")"


def _dihedral(t: Tuple[int, ...]):
    for rev in (False, True):
        base = t[::-1] if rev else t
        for k in range(6):
            yield base[k:] + base[:k]


def canonical_symbol(sym: Symbol) -> Symbol:
    """Lexicographically smallest tuple over rotations and reversals."""
    return Symbol(min(_dihedral(sym.doubled)))


def _reference_symbols():
    from .classifier import SYMBOLS
    return {name: canonical_symbol(Symbol.from_entries(e)) for name, e in SYMBOLS.items()}


def symbol_name(sym: Symbol) -> Optional[str]:
    canon = canonical_symbol(sym)
    for name, ref in _reference_symbols().items():
        if ref == canon:
            return name
    return None


def _arc_index(angle: float, cusps: Sequence[float]) -> int:
    """Index i of the arc (cusps[i], cusps[i+1]) containing ``angle``."""
    k = int(np.searchsorted(cusps, angle % TWO_PI, side="right")) - 1
    return k % len(cusps)


def _circ_dist(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def passages_per_arc(cusps: Sequence[float], crossings: Sequence[Crossing],
                     tol_cusp: float) -> Tuple[int, ...]:
    cusps = sorted(c % TWO_PI for c in cusps)
    counts = [0] * len(cusps)
    for cr in crossings:
        for a in (cr.phi_a, cr.phi_b):
            near = min(_circ_dist(a, c) for c in cusps)
            if near <= tol_cusp:
                raise PassageOnCusp(f"passage at {a:.6f} within {near:.2e} of a cusp")
            counts[_arc_index(a, cusps)] += 1
    return tuple(counts)


def extract_symbol(sl: CausticSlice, tol_cusp_steps: float = TOL_CUSP_STEPS) -> Symbol:
    """Passages of crossings on each of the six arcs between cusps."""
    if len(sl.cusp_angles) != 6:
        raise CuspCountUnexpected(len(sl.cusp_angles), sl.cusp_angles)
    counts = passages_per_arc(sl.cusp_angles, sl.crossings, tol_cusp_steps * sl.step)
    return Symbol(counts)


# --- cut time ------------------------------------------------------------------

@dataclass(frozen=True)
class CutEstimate:
    t: float
    tau_conj: float
    partner: Optional[Tuple[float, float]]
    found: bool


def cut_time_estimate(coeffs: NormalFormCoefficients, phi: float, r: float,
                      window: float = 0.5, settings: FlowSettings = DEFAULT_SETTINGS,
                      n_starts: int = 8) -> CutEstimate:
    """Earliest Maxwell time up to the first conjugate time.

    Looks for another geodesic ``(phi', r')`` with ``|phi' - phi - pi| <=
    window`` reaching the same point at the same time, by multi-start least
    squares on ``E(t, phi', r') = E(t, phi, r)``.  Falls back to the
    conjugate time (``found=False``) when no partner is found.
    """
    tau = conjugate_time(coeffs, phi, r, settings)
    scale = 1.0 / abs(r)
    best = None

    def resid(v):
        t, ph, rr = v
        a = flow.exp_map(coeffs, t, phi, r, settings)
        b = flow.exp_map(coeffs, t, ph, rr, settings)
        # w is second order: rescale so all components weigh alike
        return np.array([(b[0] - a[0]) / scale, (b[1] - a[1]) / scale,
                         (b[2] - a[2]) / scale ** 2])

    offsets = np.linspace(-window, window, n_starts)
    for off in offsets:
        x0 = np.array([0.97 * tau, phi + math.pi + off, r])
        lo = [0.5 * tau, phi + math.pi - window, r - 0.2 * abs(r)]
        hi = [tau, phi + math.pi + window, r + 0.2 * abs(r)]
        try:
            sol = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14,
                                gtol=1e-14, max_nfev=200)
        except (ValueError, RuntimeError):
            continue
        if not sol.success or np.max(np.abs(sol.fun)) > 1e-9:
            continue
        t, ph, rr = sol.x
        if _circ_dist(ph, phi) < 1e-3 and abs(rr - r) < 1e-6 * abs(r):
            continue
        if best is None or t < best[0]:
            best = (float(t), float(ph % TWO_PI), float(rr))
    if best is None or best[0] > tau:
        return CutEstimate(t=tau, tau_conj=tau, partner=None, found=False)
    return CutEstimate(t=best[0], tau_conj=tau, partner=(best[1], best[2]), found=True)
