"""Cross-checks between the integrated caustic and the algebraic classifier.

:func:`run_validation` returns a plain dict with one entry per check; the
numbers are rounded so that the JSON is reproducible byte for byte.
"""

from __future__ import annotations

import math
from typing import Dict, List

import numpy as np

from . import caustic, fitseries, flow
from .classifier import Regime, classify
from .scenario import ScenarioConfig, is_heisenberg, side_name

TWO_PI = 2.0 * math.pi
SIG_DIGITS = 10

TOL_HEIS_TIME = 1e-8
TOL_HEIS_ORBIT = 1e-9
TOL_POINT = 1e-8
TOL_WEDGE = 0.05
SIDE_FACTOR = 5.0
ZERO_STEPS = 2.0


def rounded(value):
    """Round floats recursively to a fixed number of significant digits."""
    if isinstance(value, float):
        if not math.isfinite(value) or value == 0.0:
            return value if math.isfinite(value) else str(value)
        return float(f"{value:.{SIG_DIGITS}g}")
    if isinstance(value, dict):
        return {k: rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [rounded(v) for v in value]
    if isinstance(value, np.generic):
        return rounded(value.item())
    return value


def _check(name: str, passed: bool, **info) -> dict:
    return {"name": name, "passed": bool(passed), **info}


def heisenberg_checks(cfg: ScenarioConfig) -> List[dict]:
    coeffs = cfg.coefficients
    # the closed-form tolerances need the finer default step
    settings = flow.FlowSettings(max(cfg.steps_per_period, flow.DEFAULT_SETTINGS.steps_per_period),
                                 cfg.tol_energy)
    out = []
    phis = np.arange(8) * (TWO_PI / 8)
    worst = 0.0
    for r in (0.5, 1.0, 2.0, 5.0, 10.0):
        tau = [caustic.conjugate_time(coeffs, p, r, settings) for p in phis]
        worst = max(worst, float(np.max(np.abs(np.array(tau) * r / TWO_PI - 1.0))))
    out.append(_check("heisenberg_conjugate_time", worst <= TOL_HEIS_TIME,
                      value=worst, tol=TOL_HEIS_TIME))

    worst = 0.0
    for phi, r in ((0.3, 1.0), (2.0, -2.5), (4.0, 7.0)):
        s0 = flow.initial_covector(phi, r).as_array()
        arc = flow.integrate(coeffs, s0, TWO_PI / abs(r), settings)
        exact = flow.heisenberg_geodesic(arc.times, phi, r)
        worst = max(worst, float(np.abs(arc.states[:, :3] - exact).max()))
    out.append(_check("heisenberg_geodesic_closed_form", worst <= TOL_HEIS_ORBIT,
                      value=worst, tol=TOL_HEIS_ORBIT))

    for side in cfg.sides:
        phis = fitseries.phi_grid(cfg.n_phi)
        xy = caustic.slice_points(coeffs, cfg.h, side, phis, settings)[0]
        size = float(np.abs(xy).max())
        out.append(_check(f"point_slice_{side_name(side)}", size <= TOL_POINT,
                          value=size, tol=TOL_POINT))
        fit = fitseries.fit_suspension(coeffs, side, fitseries.DEFAULT_H_LIST, phis, 5, settings)
        size = max(float(np.abs(v).max()) for v in fit.f.values())
        out.append(_check(f"zero_suspension_{side_name(side)}", size <= TOL_POINT,
                          value=size, tol=TOL_POINT))
    return out


def symbol_checks(cfg: ScenarioConfig, report) -> List[dict]:
    out = []
    on_c = report.regime not in (Regime.OFF_C, Regime.DEGENERATE_B)
    want_cusps = 6 if on_c else 4
    for side in cfg.sides:
        key = side_name(side)
        sl = caustic.slice(cfg.coefficients, cfg.h, side, cfg.n_grid, cfg.settings)
        n_cusps = len(sl.cusp_angles)
        out.append(_check(f"cusp_count_{key}", n_cusps == want_cusps,
                          value=n_cusps, expected=want_cusps,
                          n_crossings=len(sl.crossings)))
        if not on_c:
            continue
        try:
            sym = caustic.extract_symbol(sl)
        except (caustic.CuspCountUnexpected, caustic.PassageOnCusp) as exc:
            out.append(_check(f"symbol_{key}", False, error=str(exc)))
            continue
        name = caustic.symbol_name(sym)
        family = report.family(side)
        out.append(_check(f"classifier_contains_{key}", name in family,
                          symbol=str(sym.canonical()), found=name, family=list(family)))
        if key in cfg.expected:
            out.append(_check(f"expected_symbol_{key}", name == cfg.expected[key],
                              found=name, expected=cfg.expected[key]))
    return out


def fit_checks(cfg: ScenarioConfig, report) -> List[dict]:
    phis = fitseries.phi_grid(cfg.n_phi)
    fits = {s: fitseries.fit_suspension(cfg.coefficients, s, cfg.h_list, phis, cfg.k,
                                        cfg.settings) for s in (1, -1)}
    fp, fm = fits[1], fits[-1]
    out = []
    for l in (3, 4):
        diff = fitseries.side_difference(fp, fm, l)
        tol = SIDE_FACTOR * max(fp.coef_error.get(l, 0.0), fm.coef_error.get(l, 0.0))
        out.append(_check(f"side_equality_f{l}", diff <= tol, value=diff, tol=tol,
                          scale=float(np.abs(fp.f[l]).max())))
    checks = fitseries.wedge_checks(fp, fm, report)
    for wc in checks:
        key = side_name(wc.side)
        out.append(_check(f"wedge_identity_{key}", wc.residual <= TOL_WEDGE,
                          value=wc.residual, tol=TOL_WEDGE))
        out.append(_check(f"wedge_zero_set_{key}",
                          fitseries.wedge_zero_match(wc, phis, ZERO_STEPS),
                          numeric=fitseries.periodic_zeros(phis, wc.numeric).tolist(),
                          predicted=fitseries.periodic_zeros(phis, wc.predicted).tolist()))
    out.append(_check("fit_residual", max(fp.residual, fm.residual) < 1e-6,
                      value=max(fp.residual, fm.residual), tol=1e-6))
    return out


def run_validation(cfg: ScenarioConfig) -> Dict:
    report = classify(cfg.coefficients)
    checks: List[dict] = []
    heis = is_heisenberg(cfg.coefficients)
    if heis or "heisenberg" in cfg.checks:
        checks += heisenberg_checks(cfg)
    if not heis and "symbols" in cfg.checks:
        checks += symbol_checks(cfg, report)
    if not heis and "fit" in cfg.checks and report.b_tilde > 0 \
            and report.regime not in (Regime.OFF_C, Regime.DEGENERATE_B):
        checks += fit_checks(cfg, report)
    result = {
        "name": cfg.name,
        "regime": report.regime.value,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
    return rounded(result)
