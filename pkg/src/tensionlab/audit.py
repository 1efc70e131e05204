"""Per-record audit: every applicable diagnostic, with optional refinement ratios."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

import numpy as np

from .analytic import DEFAULT_CONVENTION, family_coefficient
from .beltrami import construct_entire, evaluate_spline
from .errors import AllDegenerateError, NoValidInteriorError, TensionLabError
from .field import ComplexField, GridSpec
from .metric import FlatMetric
from .qc import (
    beltrami_coefficient,
    companion_map,
    coefficient_mismatch,
    distortion_mismatch,
    holomorphy_residual,
    hopf,
    lemma1_residual,
    lemma2_residual,
    lemma3_residual,
    max_principle_scan,
    pushforward_mu,
)
from .records import AuditCheck, AuditReport, MapRecord, json_number
from .tension import SolveParams, max_tension_residual, solve_dirichlet


@dataclass
class AuditTolerances:
    tension: float = 1e-2
    hopf: float = 1e-2
    lemma1: float = 1e-2
    lemma2: float = 1e-2
    lemma3: float = 1e-2
    companion: float = 1e-2
    max_principle: float = 0.0  # number of flagged extrema allowed
    mu_spread: float = 1e-2
    pushforward: float = 1e-2
    # harmonic-conjugate gate; the lemma2 check already measures harmonicity of log sigma
    conjugate: Optional[float] = float("inf")

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {k: json_number(v) for k, v in self.__dict__.items()}


@dataclass
class AuditOptions:
    window: float = 0.75
    convention: str = DEFAULT_CONVENTION
    curvature_scale: float = 1e-3
    tolerances: AuditTolerances = dc_field(default_factory=AuditTolerances)


def _measure(rec: MapRecord, opts: AuditOptions) -> Dict[str, tuple]:
    """``name -> (residual, applicable, note)`` for one record."""
    f, metric = rec.f, rec.metric
    flat = isinstance(metric, FlatMetric)
    where = f.grid.central_window(opts.window)
    thr = opts.tolerances.conjugate
    out: Dict[str, tuple] = {}

    def run(name, fn, needs_flat=False):
        if needs_flat and not flat:
            out[name] = (float("nan"), False, "metric not flat")
            return
        try:
            out[name] = (float(fn()), True, "")
        except AllDegenerateError as exc:
            out[name] = (float("nan"), False, str(exc))
        except (TensionLabError, FloatingPointError) as exc:
            out[name] = (float("inf"), True, str(exc))

    run("tension", lambda: max_tension_residual(f, metric, where))
    run("hopf_holomorphy", lambda: holomorphy_residual(hopf(f, metric).phi, where))
    run("lemma1", lambda: lemma1_residual(f, where=where), needs_flat=True)
    run("lemma2", lambda: lemma2_residual(f, metric, where), needs_flat=True)
    run("lemma3", lambda: lemma3_residual(f, metric, where, thr), needs_flat=True)

    def scan():
        rep = max_principle_scan(f, opts.curvature_scale)
        return len(rep.maxima) + len(rep.minima)

    run("max_principle", scan)

    def companion():
        hmap = companion_map(f, metric, threshold=thr)
        return distortion_mismatch(hmap, f, where)

    run("companion_distortion", companion, needs_flat=True)

    if rec.alpha is not None and flat:
        def spread():
            mu = beltrami_coefficient(f)
            keep = mu.valid & where
            if not keep.any():
                raise NoValidInteriorError("no valid node in the window")
            return np.std(np.abs(mu.values[keep]))

        def pushed():
            tg = rec.f.grid
            mu_g = pushforward_mu(f, tg)
            ref = family_coefficient(rec.alpha, metric, opts.convention)
            return coefficient_mismatch(mu_g, ref, tg.central_window(opts.window))

        run("mu_modulus_spread", spread)
        run("pushforward_family", pushed)
    return out


_TOL = {"tension": "tension", "hopf_holomorphy": "hopf", "lemma1": "lemma1", "lemma2": "lemma2",
        "lemma3": "lemma3", "max_principle": "max_principle", "companion_distortion": "companion",
        "mu_modulus_spread": "mu_spread", "pushforward_family": "pushforward"}


def refine_record(rec: MapRecord, convention: str = DEFAULT_CONVENTION) -> Optional[MapRecord]:
    """The same map at half the spacing, or ``None`` when it cannot be regenerated.

    Family members are rebuilt from their ``alpha``; other unmasked records
    are re-solved with boundary data interpolated by bicubic splines, which
    only makes sense when the record is itself a solution.
    """
    fine = rec.f.grid.refined()
    if rec.alpha is not None and isinstance(rec.metric, FlatMetric):
        m = construct_entire(rec.alpha, rec.metric, fine, convention=convention)
        return MapRecord(m.f, rec.metric, rec.alpha, m.g, rec.name + "@h/2")
    if rec.f.is_masked:
        return None
    bnd = evaluate_spline(rec.f, fine.points().reshape(-1)).reshape(fine.shape)
    f, report = solve_dirichlet(ComplexField(fine, bnd), rec.metric, params=SolveParams(method="newton"))
    if not report.converged:
        return None
    return MapRecord(f, rec.metric, None, None, rec.name + "@h/2")


def audit_record(rec: MapRecord, opts: Optional[AuditOptions] = None,
                 refine: bool = False) -> AuditReport:
    opts = opts or AuditOptions()
    coarse = _measure(rec, opts)
    fine = None
    note = ""
    skip = {"max_principle"}
    if refine:
        finer = refine_record(rec, opts.convention)
        if finer is None:
            note = "refined run unavailable"
        else:
            fine = _measure(finer, opts)
            if finer.alpha is None:
                # a re-solve drives the discrete tension residual to the solver tolerance
                skip.add("tension")
    checks: List[AuditCheck] = []
    tol = opts.tolerances
    for name, (res, applicable, msg) in coarse.items():
        ratio = None
        if fine is not None and name in fine and name not in skip:
            r2 = fine[name][0]
            if np.isfinite(res) and np.isfinite(r2) and r2 > 0 and max(res, r2) > 1e-10:
                ratio = res / r2
        checks.append(AuditCheck(name, res, getattr(tol, _TOL[name]), rec.f.grid.h, ratio,
                                 applicable, msg or (note if refine and ratio is None else "")))
    env = {"grid": rec.f.grid.to_dict(), "metric": rec.metric.descriptor(),
           "window": opts.window, "convention": opts.convention,
           "curvature_scale": opts.curvature_scale, "tolerances": tol.as_dict(), "refined": fine is not None}
    if rec.alpha is not None:
        env["alpha"] = [complex(rec.alpha).real, complex(rec.alpha).imag]
    return AuditReport(rec.name, checks, env)
