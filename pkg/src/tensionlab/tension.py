"""Tension residual and a Dirichlet solver for ``f_zzbar + lambda(f) f_z f_zbar = 0``."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DidNotConvergeError, MetricEvaluationError
from .field import ComplexField, GridSpec, mixed_zzbar, wirtinger_z, wirtinger_zbar
from .metric import FlatMetric, eval_lambda, eval_log_rho

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveParams:
    tol: float = 1e-10
    max_iters: int = 100_000
    damping: float = 0.8
    report_every: int = 1
    method: str = "picard"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.method not in ("picard", "newton", "gauss_seidel"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    history: List[float] = field(default_factory=list)
    threshold: float = float("nan")

    def summary(self) -> str:
        state = "converged" if self.converged else "NOT converged"
        return (f"{state} after {self.iterations} iterations, "
                f"max tension residual {self.residual:.3e} (threshold {self.threshold:.3e})")


def _lambda_at(metric, values):
    if isinstance(metric, FlatMetric):
        eval_log_rho(metric, values)  # overflow guard
    return eval_lambda(metric, values)


def tension_residual(f: ComplexField, metric) -> ComplexField:
    """``T[f] = f_zzbar + lambda(f) f_z f_zbar`` on interior nodes."""
    fzz = mixed_zzbar(f)
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    lam = _lambda_at(metric, f.values)
    T = fzz.values + lam * fz.values * fzb.values
    return ComplexField(f.grid, T, fzz.mask)


def max_tension_residual(f: ComplexField, metric, where=None) -> float:
    T = tension_residual(f, metric)
    keep = T.valid if where is None else (T.valid & where)
    return float(np.max(np.abs(T.values[keep])))


def _interior_operators(grid: GridSpec):
    """Sparse interior Laplacian (unscaled by h^2) and its index bookkeeping."""
    mx, my = grid.nx - 2, grid.ny - 2
    ex = sp.diags([np.ones(mx - 1), -2 * np.ones(mx), np.ones(mx - 1)], [-1, 0, 1])
    ey = sp.diags([np.ones(my - 1), -2 * np.ones(my), np.ones(my - 1)], [-1, 0, 1])
    L = sp.kron(sp.identity(my), ex) + sp.kron(ey, sp.identity(mx))
    return L.tocsc()


def _boundary_term(F: np.ndarray) -> np.ndarray:
    """Contribution of boundary nodes to the interior five-point sums."""
    B = np.zeros((F.shape[0] - 2, F.shape[1] - 2), dtype=complex)
    B[:, 0] += F[1:-1, 0]
    B[:, -1] += F[1:-1, -1]
    B[0, :] += F[0, 1:-1]
    B[-1, :] += F[-1, 1:-1]
    return B


def _nonlinear(F: np.ndarray, metric, h: float) -> np.ndarray:
    fz = ((F[1:-1, 2:] - F[1:-1, :-2]) - 1j * (F[2:, 1:-1] - F[:-2, 1:-1])) / (4 * h)
    fzb = ((F[1:-1, 2:] - F[1:-1, :-2]) + 1j * (F[2:, 1:-1] - F[:-2, 1:-1])) / (4 * h)
    return _lambda_at(metric, F[1:-1, 1:-1]) * fz * fzb


def _residual_max(F, metric, h):
    lap = (F[1:-1, 2:] + F[1:-1, :-2] + F[2:, 1:-1] + F[:-2, 1:-1] - 4 * F[1:-1, 1:-1]) / h ** 2
    return float(np.max(np.abs(lap / 4 + _nonlinear(F, metric, h))))


def harmonic_extension(boundary: ComplexField) -> ComplexField:
    """Discrete harmonic (lambda = 0) extension of the edge values."""
    g = boundary.grid
    F = np.array(boundary.values)
    L = _interior_operators(g)
    rhs = -_boundary_term(F).reshape(-1)
    F[1:-1, 1:-1] = spla.spsolve(L, rhs).reshape(g.ny - 2, g.nx - 2)
    return ComplexField(g, F)


def _newton_jacobian(F, metric, h, L):
    g_shape = (F.shape[0] - 2, F.shape[1] - 2)
    my, mx = g_shape
    n = mx * my
    fz = ((F[1:-1, 2:] - F[1:-1, :-2]) - 1j * (F[2:, 1:-1] - F[:-2, 1:-1])) / (4 * h)
    fzb = ((F[1:-1, 2:] - F[1:-1, :-2]) + 1j * (F[2:, 1:-1] - F[:-2, 1:-1])) / (4 * h)
    w = F[1:-1, 1:-1]
    lam = _lambda_at(metric, w)
    eps = 1e-7 * (1 + np.abs(w))
    dlam = (_lambda_at(metric, w + eps) - _lambda_at(metric, w - eps)) / (2 * eps)
    ix = sp.diags([-np.ones(mx - 1), np.ones(mx - 1)], [-1, 1])
    iy = sp.diags([-np.ones(my - 1), np.ones(my - 1)], [-1, 1])
    Dx = sp.kron(sp.identity(my), ix) / (2 * h)
    Dy = sp.kron(iy, sp.identity(mx)) / (2 * h)
    Dz = 0.5 * (Dx - 1j * Dy)
    Dzb = 0.5 * (Dx + 1j * Dy)
    J = (L / (4 * h ** 2)
         + sp.diags((dlam * fz * fzb).reshape(-1))
         + sp.diags((lam * fzb).reshape(-1)) @ Dz
         + sp.diags((lam * fz).reshape(-1)) @ Dzb)
    return J.tocsc(), n


def solve_dirichlet(boundary: ComplexField, metric, grid: GridSpec | None = None,
                    params: SolveParams | None = None, raise_on_failure: bool = False):
    """Solve the tension equation with the edge values of ``boundary`` held fixed.

    Returns ``(field, SolveReport)``.  Starts from the discrete harmonic
    extension.  ``picard`` lags the nonlinear term and solves the five-point
    system exactly before damping; ``gauss_seidel`` does the same update one
    red-black sweep at a time; ``newton`` uses the exact complex Jacobian of
    the discrete equations.
    """
    params = params or SolveParams()
    g = boundary.grid if grid is None else grid
    if boundary.is_masked:
        edge = np.ones(g.shape, dtype=bool)
        edge[1:-1, 1:-1] = False
        if not boundary.valid[edge].all():
            raise ValueError("boundary values must be finite on every edge node")
    h = g.h
    F = np.array(harmonic_extension(ComplexField(g, boundary.values)).values)
    L = _interior_operators(g)
    lu = spla.splu(L) if params.method == "picard" else None
    Bsum = _boundary_term(F)
    hist: List[float] = []
    theta = params.damping

    def threshold():
        return params.tol * (1.0 + float(np.max(np.abs(F))))

    res = _residual_max(F, metric, h)
    it = 0
    if params.method == "gauss_seidel":
        jj, ii = np.meshgrid(np.arange(1, g.ny - 1), np.arange(1, g.nx - 1), indexing="ij")
        colours = [((ii + jj) % 2 == c) for c in (0, 1)]
    while res > threshold() and it < params.max_iters:
        it += 1
        try:
            if params.method == "picard":
                N = _nonlinear(F, metric, h)
                rhs = (-4 * h ** 2 * N - Bsum).reshape(-1)
                new = (lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)).reshape(g.ny - 2, g.nx - 2)
                F[1:-1, 1:-1] = (1 - theta) * F[1:-1, 1:-1] + theta * new
            elif params.method == "newton":
                lap = (F[1:-1, 2:] + F[1:-1, :-2] + F[2:, 1:-1] + F[:-2, 1:-1]
                       - 4 * F[1:-1, 1:-1]) / h ** 2
                Tm = lap / 4 + _nonlinear(F, metric, h)
                J, _ = _newton_jacobian(F, metric, h, L)
                step = spla.spsolve(J, -Tm.reshape(-1)).reshape(g.ny - 2, g.nx - 2)
                F[1:-1, 1:-1] += theta * step
            else:
                for cmask in colours:
                    N = _nonlinear(F, metric, h)
                    avg = 0.25 * (F[1:-1, 2:] + F[1:-1, :-2] + F[2:, 1:-1] + F[:-2, 1:-1])
                    upd = avg + h ** 2 * N
                    inner = F[1:-1, 1:-1]
                    inner[cmask] = (1 - theta) * inner[cmask] + theta * upd[cmask]
        except (FloatingPointError, OverflowError) as exc:
            raise MetricEvaluationError(str(exc)) from exc
        if not np.all(np.isfinite(F)):
            raise MetricEvaluationError("iterate became non-finite")
        res = _residual_max(F, metric, h)
        if it % params.report_every == 0:
            hist.append(res)
    converged = res <= threshold()
    report = SolveReport(it, res, converged, hist, threshold())
    log.debug("solve_dirichlet: %s", report.summary())
    if raise_on_failure and not converged:
        raise DidNotConvergeError(report.summary())
    return ComplexField(g, F), report
