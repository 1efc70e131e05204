"""Linear Beltrami solver, map inversion and the inverse-map equation.

The inverse ``g = f^-1`` of a harmonic map ``f`` into a flat metric solves a
Beltrami equation ``g_wbar = mu g_w`` whose coefficient obeys

    mu_w - conj(mu) mu_wbar = s * mu (lam + conj(mu) conj(lam))

with ``s`` fixed by the convention (see ``analytic.CONVENTIONS``).  Every
function that depends on the sign takes ``convention=``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from .analytic import DEFAULT_CONVENTION, AnalyticCoefficient, convention_sign, family_coefficient
from .errors import (
    AlphaOutOfDiskError,
    ConstraintOutsideGridError,
    DegenerateJacobianError,
    EllipticityError,
    NotInjectiveError,
    SolverStagnationError,
)
from .field import ComplexField, GridSpec, bilinear_sample, wirtinger_z, wirtinger_zbar
from .metric import eval_lambda, require_flat

log = logging.getLogger(__name__)

ELLIPTICITY_LIMIT = 1.0 - 1e-6
Coefficient = Union[ComplexField, AnalyticCoefficient]


@dataclass(frozen=True)
class BeltramiProblem:
    """``g_wbar = mu g_w`` with two point constraints ``g(p) = value``."""

    mu: ComplexField
    normalization: Tuple[Tuple[complex, complex], ...] = ((0j, 0j), (1 + 0j, 1 + 0j))

    @property
    def k(self) -> float:
        inner = self.mu.valid & self.mu.grid.interior()
        return float(np.max(np.abs(self.mu.values[inner]))) if inner.any() else 0.0

    def check(self):
        if self.k >= ELLIPTICITY_LIMIT:
            raise EllipticityError(f"sup |mu| = {self.k} is not below {ELLIPTICITY_LIMIT}")


# --- sparse stencils -------------------------------------------------------

def _ordering(grid: GridSpec) -> np.ndarray:
    """Unknown index of node ``[j, i]``; the shorter side runs fastest to keep the band narrow."""
    j, i = np.indices(grid.shape)
    return j * grid.nx + i if grid.nx <= grid.ny else i * grid.ny + j


def _stencil(grid: GridSpec, rows: np.ndarray, offsets) -> sp.csr_matrix:
    """Matrix with one row per interior node in ``rows`` (a ``[j, i]`` index pair list)."""
    idx = _ordering(grid)
    jj, ii = rows
    r, c, d = [], [], []
    for (dj, di), w in offsets:
        r.append(np.arange(jj.size))
        c.append(idx[jj + dj, ii + di])
        d.append(np.full(jj.size, w, dtype=float))
    return sp.csr_matrix((np.concatenate(d), (np.concatenate(r), np.concatenate(c))),
                         shape=(jj.size, grid.size))


def _first_order(grid, rows):
    # unscaled: h * d/dx and h * d/dy
    Dx = _stencil(grid, rows, [((0, 1), 0.5), ((0, -1), -0.5)])
    Dy = _stencil(grid, rows, [((1, 0), 0.5), ((-1, 0), -0.5)])
    return Dx, Dy


def _second_order(grid, rows):
    # unscaled: h^2 times the second derivatives
    Dxx = _stencil(grid, rows, [((0, 1), 1.0), ((0, 0), -2.0), ((0, -1), 1.0)])
    Dyy = _stencil(grid, rows, [((1, 0), 1.0), ((0, 0), -2.0), ((-1, 0), 1.0)])
    Dxy = _stencil(grid, rows, [((1, 1), 0.25), ((-1, -1), 0.25), ((1, -1), -0.25), ((-1, 1), -0.25)])
    return sp.vstack([Dxx, Dyy, math.sqrt(2.0) * Dxy]).tocsr()


def _pin_rows(grid: GridSpec, normalization):
    idx = _ordering(grid)
    r, c, d, rhs = [], [], [], []
    for k, (p, val) in enumerate(normalization):
        p = complex(p)
        if not grid.contains(p):
            raise ConstraintOutsideGridError(f"constraint point {p} outside {grid.bounds}")
        s = min(max((p.real - grid.x0) / grid.h, 0.0), grid.nx - 1)
        t = min(max((p.imag - grid.y0) / grid.h, 0.0), grid.ny - 1)
        i = min(int(math.floor(s)), grid.nx - 2)
        j = min(int(math.floor(t)), grid.ny - 2)
        a, b = s - i, t - j
        for (dj, di), w in (((0, 0), (1 - a) * (1 - b)), ((0, 1), a * (1 - b)),
                            ((1, 0), (1 - a) * b), ((1, 1), a * b)):
            r.append(k)
            c.append(idx[j + dj, i + di])
            d.append(w)
        rhs.append(complex(val))
    P = sp.csr_matrix((d, (r, c)), shape=(len(normalization), grid.size))
    return P, np.array(rhs, dtype=complex)


class _BandedCholesky:
    """Factor of a sparse Hermitian positive definite matrix in upper banded storage."""

    def __init__(self, A: sp.spmatrix):
        U = sp.triu(A).tocoo()
        u = int(np.max(U.col - U.row))
        ab = np.zeros((u + 1, A.shape[0]), dtype=complex)
        ab[u + U.row - U.col, U.col] = U.data
        self.A = A
        self.cb = sla.cholesky_banded(ab, lower=False, check_finite=False)

    def solve(self, b: np.ndarray, refine: int = 1) -> np.ndarray:
        x = sla.cho_solve_banded((self.cb, False), b, check_finite=False)
        for _ in range(refine):
            x = x + sla.cho_solve_banded((self.cb, False), b - self.A @ x, check_finite=False)
        return x


def _box_first_order(grid: GridSpec):
    """Cell-centred ``h * d/dx`` and ``h * d/dy`` from the four corners of every cell."""
    cells = np.indices((grid.ny - 1, grid.nx - 1)).reshape(2, -1)
    Dx = _stencil(grid, cells, [((0, 1), 0.5), ((1, 1), 0.5), ((0, 0), -0.5), ((1, 0), -0.5)])
    Dy = _stencil(grid, cells, [((1, 0), 0.5), ((1, 1), 0.5), ((0, 0), -0.5), ((0, 1), -0.5)])
    return Dx, Dy


def _cell_average(mu: ComplexField):
    v, m = mu.values, mu.valid
    avg = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    ok = m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]
    return avg, ok


def _beltrami_rows(mu: ComplexField, grid: GridSpec, scheme: str):
    """Complex operator ``h (d/dwbar - mu d/dw)`` restricted to rows where ``mu`` is known."""
    if scheme == "box":
        Dx, Dy = _box_first_order(grid)
        coef, ok = _cell_average(mu)
    elif scheme == "central":
        Dx, Dy = _first_order(grid, np.nonzero(grid.interior()))
        coef, ok = mu.values[1:-1, 1:-1], mu.valid[1:-1, 1:-1]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    keep = ok.reshape(-1)
    M = 0.5 * (Dx + 1j * Dy) - sp.diags(coef.reshape(-1)) @ (0.5 * (Dx - 1j * Dy))
    return M.tocsr()[keep], keep


def solve_beltrami_ls(problem: BeltramiProblem, grid: Optional[GridSpec] = None,
                      weight: float = 1e3, solver: str = "banded", scheme: str = "box",
                      constraint_tol: float = 1e-12, constraint_iters: int = 400) -> ComplexField:
    """Least-squares solution of ``g_wbar = mu g_w``.

    The discrete equations do not determine ``g`` on a bounded box (any
    conformal post-composition of a solution is again a solution), so the
    solver minimises the discrete bending energy ``sum |D^2 g|^2`` subject to
    the Beltrami rows and the pins.  The constraints enter through an
    augmented Lagrangian: a penalty ``weight`` keeps the Hermitian positive
    definite system well conditioned, and the shifted constraint data that
    meet the constraints to ``constraint_tol`` come from conjugate gradients
    on the reduced Hermitian system, one back-substitution per step.  The
    system is banded and factorised once; ``solver="cg"`` runs conjugate
    gradients on it instead.

    ``scheme="box"`` imposes the equation at cell centres with corner-averaged
    ``mu``; ``scheme="central"`` imposes it at interior nodes with central
    differences, whose two decoupled sublattices leave oscillatory modes that
    limit accuracy to first order.  Finally ``g`` is post-composed with the
    complex affine map that meets both pins exactly.
    """
    grid = grid or problem.mu.grid
    problem.check()
    M, _ = _beltrami_rows(problem.mu, grid, scheme)
    P, d = _pin_rows(grid, problem.normalization)
    B = _second_order(grid, np.nonzero(grid.interior()))
    C = sp.vstack([M, P]).tocsr()
    rhs_c = np.concatenate([np.zeros(M.shape[0], dtype=complex), d])
    A = (B.T @ B + weight * (C.conj().T @ C)).tocsr()
    CH = C.conj().T.tocsr()
    if solver == "banded":
        chol = _BandedCholesky(A)
        solve = chol.solve
    elif solver == "cg":
        cap = 10 * grid.size

        def solve(rhs):
            x, info = spla.cg(A, rhs, rtol=1e-13, atol=0.0, maxiter=cap)
            if info != 0:
                raise SolverStagnationError(f"conjugate gradients hit the cap of {cap} iterations")
            return x
    else:
        raise ValueError(f"unknown solver {solver!r}")

    def constrained(target):
        # augmented Lagrangian: find the shifted constraint data s with C x(s) = target,
        # x(s) = A^-1 W C^H s.  The map is Hermitian positive definite, so run CG on it.
        tol = constraint_tol * max(1.0, float(np.max(np.abs(target))))
        K = spla.LinearOperator((C.shape[0], C.shape[0]), dtype=complex,
                                matvec=lambda s: C @ solve(weight * (CH @ s)))
        count = [0]

        def tick(_):
            count[0] += 1

        shifted, _ = spla.cg(K, target, x0=target.copy(), rtol=0.0, atol=0.1 * tol,
                             maxiter=constraint_iters, callback=tick)
        x = solve(weight * (CH @ shifted))
        miss = float(np.max(np.abs(target - C @ x)))
        log.debug("solve_beltrami_ls: %d constraint iterations, residual %.2e", count[0], miss)
        return x

    x = constrained(rhs_c)
    g = ComplexField(grid, x[_ordering(grid)])
    (p0, v0), (p1, v1) = problem.normalization[:2]
    a, b1 = bilinear_sample(g, p0), bilinear_sample(g, p1)
    scale = (complex(v1) - complex(v0)) / (b1 - a)
    return g.with_values(complex(v0) + scale * (g.values - a))


def beltrami_residual(g: ComplexField, mu: ComplexField, scheme: str = "central") -> ComplexField:
    """``g_wbar - mu g_w`` at interior nodes (``central``) or at cell centres (``box``).

    The box residual is returned on the grid of cell centres.
    """
    if scheme == "central":
        gw = wirtinger_z(g)
        gwb = wirtinger_zbar(g)
        return ComplexField(g.grid, gwb.values - mu.values * gw.values, gw.valid & mu.valid)
    if scheme != "box":
        raise ValueError(f"unknown scheme {scheme!r}")
    G = g.grid
    v = g.values
    gx = 0.5 * (v[:-1, 1:] + v[1:, 1:] - v[:-1, :-1] - v[1:, :-1]) / G.h
    gy = 0.5 * (v[1:, :-1] + v[1:, 1:] - v[:-1, :-1] - v[:-1, 1:]) / G.h
    coef, ok = _cell_average(mu)
    cells = GridSpec(G.x0 + G.h / 2, G.y0 + G.h / 2, G.nx - 1, G.ny - 1, G.h)
    r = 0.5 * (gx + 1j * gy) - coef * 0.5 * (gx - 1j * gy)
    return ComplexField(cells, r, ok)


# --- inversion -------------------------------------------------------------

class _Spline:
    """Bicubic interpolant of a complex node field with analytic first partials."""

    def __init__(self, field: ComplexField):
        g = field.grid
        self.grid = g
        v = field.values
        self.re = RectBivariateSpline(g.x, g.y, v.real.T, kx=3, ky=3)
        self.im = RectBivariateSpline(g.x, g.y, v.imag.T, kx=3, ky=3)

    def __call__(self, z, dx=0, dy=0):
        x, y = np.real(z), np.imag(z)
        return self.re.ev(x, y, dx=dx, dy=dy) + 1j * self.im.ev(x, y, dx=dx, dy=dy)


def largest_valid_rectangle(valid: np.ndarray) -> Tuple[int, int, int, int]:
    """``(i0, i1, j0, j1)`` of the largest all-True node rectangle (histogram sweep)."""
    ny, nx = valid.shape
    heights = np.zeros(nx, dtype=int)
    best = (0, (0, 0, 0, 0))
    for j in range(ny):
        heights = np.where(valid[j], heights + 1, 0)
        stack = []
        for i in range(nx + 1):
            hcur = heights[i] if i < nx else 0
            start = i
            while stack and stack[-1][1] >= hcur:
                s, hs = stack.pop()
                area = hs * (i - s)
                if area > best[0]:
                    best = (area, (s, i, j - hs + 1, j + 1))
                start = s
            stack.append((start, hcur))
    if best[0] == 0:
        raise NotInjectiveError("field has no valid nodes to invert")
    return best[1]


def _valid_block(f: ComplexField) -> ComplexField:
    if not f.is_masked:
        return f
    i0, i1, j0, j1 = largest_valid_rectangle(f.valid)
    if i1 - i0 < 4 or j1 - j0 < 4:
        raise NotInjectiveError("valid part of the field is too small to interpolate")
    return f.crop(i0, i1, j0, j1)


def check_sense_preserving(f: ComplexField):
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    jac = np.abs(fz.values) ** 2 - np.abs(fzb.values) ** 2
    bad = fz.valid & (jac <= 0)
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise DegenerateJacobianError(
            f"discrete Jacobian {jac[j, i]:.3e} <= 0 at node (i={i}, j={j}); {int(bad.sum())} such nodes")


def invert_points(f: ComplexField, targets, tol: float = 1e-9, max_iters: int = 60,
                  check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Solve ``f(z) = w`` for each target ``w``; returns ``(z, ok)``.

    Newton's method on a bicubic interpolant of ``f`` seeded from the nearest
    sample.  ``ok`` is False where ``w`` is not covered by ``f`` on its grid.
    """
    f = _valid_block(f)
    if check:
        check_sense_preserving(f)
    g = f.grid
    spl = _Spline(f)
    w = np.asarray(targets, dtype=complex).reshape(-1)
    fv = f.values.reshape(-1)
    tree = cKDTree(np.column_stack([fv.real, fv.imag]))
    _, near = tree.query(np.column_stack([w.real, w.imag]))
    z = g.points().reshape(-1)[near]
    jn, in_ = np.unravel_index(near, g.shape)
    edge_seed = (in_ == 0) | (in_ == g.nx - 1) | (jn == 0) | (jn == g.ny - 1)
    span = np.ptp(fv.real) + 1j * np.ptp(fv.imag)
    atol = tol * max(abs(span), 1e-300)

    def clip(zz):
        return np.clip(zz.real, g.x0, g.x1) + 1j * np.clip(zz.imag, g.y0, g.y1)

    r = spl(z) - w
    for _ in range(max_iters):
        act = np.abs(r) > 0.1 * atol
        if not act.any():
            break
        za = z[act]
        fx, fy = spl(za, dx=1), spl(za, dy=1)
        det = fx.real * fy.imag - fy.real * fx.imag
        det = np.where(det == 0, np.finfo(float).tiny, det)
        ra = r[act]
        sx = (fy.imag * ra.real - fy.real * ra.imag) / det
        sy = (-fx.imag * ra.real + fx.real * ra.imag) / det
        step = sx + 1j * sy
        t = np.ones(za.size)
        cand = clip(za - step)
        rc = spl(cand) - w[act]
        for _ in range(8):
            worse = np.abs(rc) > np.abs(ra)
            if not worse.any():
                break
            t = np.where(worse, 0.5 * t, t)
            cand = np.where(worse, clip(za - t * step), cand)
            rc = np.where(worse, spl(cand) - w[act], rc)
        z[act] = cand
        r[act] = rc
    ok = np.abs(r) <= atol
    covered = ~edge_seed
    failed = covered & ~ok
    if covered.any() and failed.sum() > 0.1 * covered.sum():
        raise NotInjectiveError(f"Newton failed for {int(failed.sum())} of {int(covered.sum())} covered targets")
    return z, ok


def invert_map(f: ComplexField, targets: GridSpec, tol: float = 1e-9) -> ComplexField:
    """Node field ``z(w)`` with ``f(z(w)) = w`` on the target grid; uncovered nodes masked."""
    z, ok = invert_points(f, targets.points(), tol=tol)
    return ComplexField(targets, z.reshape(targets.shape), ok.reshape(targets.shape))


def evaluate_spline(f: ComplexField, points) -> np.ndarray:
    """Bicubic interpolation of ``f`` at arbitrary points of its grid."""
    return _Spline(_valid_block(f))(np.asarray(points, dtype=complex))


# --- the inverse-map equation and the twist --------------------------------

def _coefficient_parts(mu: Coefficient, grid: Optional[GridSpec]):
    """``(grid, mu, mu_w, mu_wbar, mask)`` from either a sampled or a closed-form coefficient."""
    if isinstance(mu, AnalyticCoefficient):
        if grid is None:
            raise ValueError("a grid is required with a closed-form coefficient")
        W = grid.points()
        return grid, W, mu.value(W), mu.d_w(W), mu.d_wbar(W), np.ones(grid.shape, dtype=bool)
    mw = wirtinger_z(mu)
    mwb = wirtinger_zbar(mu)
    return mu.grid, mu.grid.points(), mu.values, mw.values, mwb.values, mw.valid


def inverse_beltrami_residual(mu: Coefficient, metric, convention: str = DEFAULT_CONVENTION,
                              grid: Optional[GridSpec] = None) -> ComplexField:
    """``R = mu_w - conj(mu) mu_wbar - s mu (lam + conj(mu) conj(lam))``.

    Sampled coefficients are differentiated with central differences (interior
    nodes only); closed-form ones use their exact derivatives at every node.
    """
    s = convention_sign(convention)
    g, W, m, mw, mwb, mask = _coefficient_parts(mu, grid)
    lam = eval_lambda(metric, W)
    R = mw - np.conj(m) * mwb - s * m * (lam + np.conj(m) * np.conj(lam))
    return ComplexField(g, R, mask)


def nu_twist(mu: Coefficient, metric, convention: str = DEFAULT_CONVENTION) -> Coefficient:
    """``nu = exp(s i v) conj(mu)``; ``|nu| = |mu|`` node for node."""
    require_flat(metric)
    s = convention_sign(convention)
    if isinstance(mu, AnalyticCoefficient):
        def rot(w):
            return np.exp(1j * s * metric.v(w))

        # d/dw rot = s lam rot, d/dwbar rot = -s conj(lam) rot
        return AnalyticCoefficient(
            lambda w: rot(w) * np.conj(mu.value(w)),
            lambda w: rot(w) * (s * metric.lam(w) * np.conj(mu.value(w)) + np.conj(mu.d_wbar(w))),
            lambda w: rot(w) * (-s * np.conj(metric.lam(w)) * np.conj(mu.value(w)) + np.conj(mu.d_w(w))),
            f"nu[{mu.name}]")
    W = mu.grid.points()
    return mu.with_values(np.exp(1j * s * metric.v(W)) * np.conj(mu.values))


def nu_quasiregular_field(mu: Coefficient, metric, convention: str = DEFAULT_CONVENTION,
                          grid: Optional[GridSpec] = None) -> ComplexField:
    """``nu_wbar - mu nu_w`` as a field."""
    nu = nu_twist(mu, metric, convention)
    g, W, m, _, _, mask = _coefficient_parts(mu, grid)
    if isinstance(nu, AnalyticCoefficient):
        Q = nu.d_wbar(W) - m * nu.d_w(W)
    else:
        nw, nwb = wirtinger_z(nu), wirtinger_zbar(nu)
        Q = nwb.values - m * nw.values
        mask = nw.valid
    return ComplexField(g, Q, mask)


def nu_quasiregular_residual(mu: Coefficient, metric, convention: str = DEFAULT_CONVENTION,
                             grid: Optional[GridSpec] = None, where: Optional[np.ndarray] = None) -> float:
    """``max |nu_wbar - mu nu_w|`` over valid nodes (restricted by ``where``)."""
    Q = nu_quasiregular_field(mu, metric, convention, grid)
    keep = Q.valid if where is None else Q.valid & where
    return float(np.max(np.abs(Q.values[keep])))


# --- entire family ---------------------------------------------------------

@dataclass(frozen=True)
class EntireFamilyMember:
    alpha: complex
    metric_id: str
    convention: str
    g: ComplexField  # on the padded target grid, normalised g(0)=0, g(1)=1
    f: ComplexField  # inverse of g on the requested domain grid

    def __post_init__(self):
        if not abs(self.alpha) < 1:
            raise AlphaOutOfDiskError(f"|alpha| = {abs(self.alpha)} >= 1")


def normalize_pair(g: ComplexField, points=(0j, 1 + 0j), values=(0j, 1 + 0j)) -> ComplexField:
    """Post-compose ``g`` with the complex affine map sending ``g(p0), g(p1)`` to the targets.

    Equivalent to pre-composing ``f = g^-1`` with an affine map, which keeps
    ``f`` harmonic.
    """
    a, b = evaluate_spline(g, np.array(points))
    if a == b:
        raise DegenerateJacobianError("g takes the same value at both normalisation points")
    scale = (values[1] - values[0]) / (b - a)
    return g.with_values(values[0] + scale * (g.values - a))


def construct_entire(alpha: complex, metric, grid: GridSpec, convention: str = DEFAULT_CONVENTION,
                     margin: float = 0.25, weight: float = 1e3, scheme: str = "box") -> EntireFamilyMember:
    """Member of the entire family with inverse coefficient ``alpha * exp(s i v)``.

    ``g`` is solved on ``grid`` padded by ``margin`` times its longer side so
    that its inverse covers the whole domain grid.
    """
    alpha = complex(alpha)
    if not abs(alpha) < 1:
        raise AlphaOutOfDiskError(f"|alpha| = {abs(alpha)} >= 1")
    require_flat(metric)
    for p in (0j, 1 + 0j):
        if not grid.contains(p):
            raise ConstraintOutsideGridError(f"grid {grid.bounds} must contain 0 and 1")
    pad = int(math.ceil(margin * (max(grid.nx, grid.ny) - 1)))
    target = grid.padded(pad)
    mu = family_coefficient(alpha, metric, convention).sample(target)
    g = solve_beltrami_ls(BeltramiProblem(mu), target, weight=weight, scheme=scheme)
    g = normalize_pair(g)
    f = invert_map(g, grid)
    return EntireFamilyMember(alpha, metric.id, convention, g, f)
