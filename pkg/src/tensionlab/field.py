"""Uniform grids, complex node fields and finite-difference Wirtinger calculus.

Fields are stored as ``(ny, nx)`` arrays indexed ``[j, i]`` so that the flat
row-major order runs over ``i`` fastest (j-then-i).  Derivative operators use
central stencils and are only defined on interior nodes; boundary nodes come
back masked.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import (
    GridMismatchError,
    GridTooSmallError,
    NoValidInteriorError,
    NotHarmonicError,
    OutOfDomainError,
)


@dataclass(frozen=True)
class GridSpec:
    """Square-cell rectangular grid, node ``(i, j)`` at ``(x0 + i h, y0 + j h)``."""

    x0: float
    y0: float
    nx: int
    ny: int
    h: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridTooSmallError("node counts must be integers")
        if self.nx < 3 or self.ny < 3:
            raise GridTooSmallError(f"need nx, ny >= 3, got nx={self.nx}, ny={self.ny}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"spacing must be positive, got h={self.h}")

    @classmethod
    def from_bounds(cls, xmin, xmax, ymin, ymax, h) -> "GridSpec":
        """Grid covering ``[xmin, xmax] x [ymin, ymax]``; both sides must be multiples of h."""
        nx = (xmax - xmin) / h
        ny = (ymax - ymin) / h
        if abs(nx - round(nx)) > 1e-9 * max(1.0, nx) or abs(ny - round(ny)) > 1e-9 * max(1.0, ny):
            raise ValueError("rectangle sides must be integer multiples of h (square cells only)")
        return cls(float(xmin), float(ymin), int(round(nx)) + 1, int(round(ny)) + 1, float(h))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @property
    def x1(self) -> float:
        return self.x0 + (self.nx - 1) * self.h

    @property
    def y1(self) -> float:
        return self.y0 + (self.ny - 1) * self.h

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)

    def points(self) -> np.ndarray:
        """Complex node coordinates, shape ``(ny, nx)``."""
        X, Y = np.meshgrid(self.x, self.y)
        return X + 1j * Y

    def node(self, i: int, j: int) -> complex:
        return complex(self.x0 + i * self.h, self.y0 + j * self.h)

    def contains(self, point, pad: float = 0.0) -> bool:
        p = complex(point)
        tol = 1e-12 * max(1.0, abs(p))
        return (self.x0 - pad - tol <= p.real <= self.x1 + pad + tol
                and self.y0 - pad - tol <= p.imag <= self.y1 + pad + tol)

    def nearest_node(self, point) -> Tuple[int, int]:
        p = complex(point)
        i = int(np.clip(round((p.real - self.x0) / self.h), 0, self.nx - 1))
        j = int(np.clip(round((p.imag - self.y0) / self.h), 0, self.ny - 1))
        return i, j

    def interior(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def central_window(self, fraction: float = 0.75) -> np.ndarray:
        """Mask of nodes within the centred sub-rectangle scaled by ``fraction``."""
        cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
        hx, hy = 0.5 * fraction * (self.x1 - self.x0), 0.5 * fraction * (self.y1 - self.y0)
        Z = self.points()
        eps = 1e-9 * self.h
        return (np.abs(Z.real - cx) <= hx + eps) & (np.abs(Z.imag - cy) <= hy + eps)

    def refined(self) -> "GridSpec":
        """Same rectangle at spacing h/2."""
        return GridSpec(self.x0, self.y0, 2 * self.nx - 1, 2 * self.ny - 1, self.h / 2)

    def padded(self, nodes: int) -> "GridSpec":
        return GridSpec(self.x0 - nodes * self.h, self.y0 - nodes * self.h,
                        self.nx + 2 * nodes, self.ny + 2 * nodes, self.h)

    def sub(self, i0: int, i1: int, j0: int, j1: int) -> "GridSpec":
        """Sub-grid of nodes ``i0 <= i < i1``, ``j0 <= j < j1``."""
        return GridSpec(self.x0 + i0 * self.h, self.y0 + j0 * self.h, i1 - i0, j1 - j0, self.h)

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "nx": self.nx, "ny": self.ny, "h": self.h}


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on a grid with an optional per-node validity mask."""

    grid: GridSpec
    values: np.ndarray
    mask: Optional[np.ndarray] = dc_field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise GridMismatchError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape)
        if self.mask is None:
            if not np.all(np.isfinite(vals)):
                raise ValueError("non-finite values in an unmasked field")
            mask = None
        else:
            mask = np.array(self.mask, dtype=bool).reshape(self.grid.shape)
            mask = mask & np.isfinite(vals)
            vals = np.where(mask, vals, 0.0)
            mask.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def sample(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "ComplexField":
        vals = np.asarray(fn(grid.points()), dtype=complex)
        vals = np.broadcast_to(vals, grid.shape)
        finite = np.isfinite(vals)
        return cls(grid, vals, None if finite.all() else finite)

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.mask

    @property
    def is_masked(self) -> bool:
        return self.mask is not None and not bool(self.mask.all())

    def with_values(self, values, mask=None) -> "ComplexField":
        """New field on the same grid; the mask is the conjunction of both masks."""
        m = self.valid if mask is None else (self.valid & np.asarray(mask, dtype=bool))
        return ComplexField(self.grid, values, None if m.all() else m)

    def restrict(self, keep: np.ndarray) -> "ComplexField":
        return self.with_values(self.values, keep)

    def conj(self) -> "ComplexField":
        return self.with_values(np.conj(self.values))

    def real(self) -> "ComplexField":
        return self.with_values(self.values.real)

    def abs(self) -> "ComplexField":
        return self.with_values(np.abs(self.values))

    def crop(self, i0: int, i1: int, j0: int, j1: int) -> "ComplexField":
        g = self.grid.sub(i0, i1, j0, j1)
        m = None if self.mask is None else self.mask[j0:j1, i0:i1]
        return ComplexField(g, self.values[j0:j1, i0:i1], m)

    def valid_values(self) -> np.ndarray:
        return self.values[self.valid]

    def max_abs(self) -> float:
        v = self.valid_values()
        return float(np.max(np.abs(v))) if v.size else 0.0

    def is_real(self, tol: float = 1e-12) -> bool:
        v = self.valid_values()
        return bool(np.all(np.abs(v.imag) <= tol * (1.0 + np.abs(v.real))))

    def flat_values(self) -> np.ndarray:
        return self.values.reshape(-1)


def _require_stencil(grid: GridSpec):
    if grid.nx < 3 or grid.ny < 3:
        raise GridTooSmallError()


def _stencil_mask(field: ComplexField) -> np.ndarray:
    """Interior nodes whose full 5-point stencil is valid."""
    v = field.valid
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[1:-1, 1:-1] & v[1:-1, 2:] & v[1:-1, :-2] & v[2:, 1:-1] & v[:-2, 1:-1])
    return out


def _central(field: ComplexField):
    f = field.values
    dx = np.zeros_like(f)
    dy = np.zeros_like(f)
    dx[1:-1, 1:-1] = f[1:-1, 2:] - f[1:-1, :-2]
    dy[1:-1, 1:-1] = f[2:, 1:-1] - f[:-2, 1:-1]
    return dx, dy


def wirtinger_z(field: ComplexField) -> ComplexField:
    """Central-difference ``df/dz = (f_x - i f_y) / 2`` on interior nodes."""
    _require_stencil(field.grid)
    dx, dy = _central(field)
    vals = (dx - 1j * dy) / (4 * field.grid.h)
    return ComplexField(field.grid, vals, _stencil_mask(field))


def wirtinger_zbar(field: ComplexField) -> ComplexField:
    """Central-difference ``df/dzbar = (f_x + i f_y) / 2`` on interior nodes."""
    _require_stencil(field.grid)
    dx, dy = _central(field)
    vals = (dx + 1j * dy) / (4 * field.grid.h)
    return ComplexField(field.grid, vals, _stencil_mask(field))


def partials(field: ComplexField) -> Tuple[ComplexField, ComplexField]:
    """Central ``(f_x, f_y)`` on interior nodes."""
    _require_stencil(field.grid)
    dx, dy = _central(field)
    m = _stencil_mask(field)
    h2 = 2 * field.grid.h
    return ComplexField(field.grid, dx / h2, m), ComplexField(field.grid, dy / h2, m)


def laplacian(field: ComplexField) -> ComplexField:
    """Five-point Laplacian on interior nodes."""
    _require_stencil(field.grid)
    f = field.values
    lap = np.zeros_like(f)
    lap[1:-1, 1:-1] = (f[1:-1, 2:] + f[1:-1, :-2] + f[2:, 1:-1] + f[:-2, 1:-1]
                       - 4 * f[1:-1, 1:-1]) / field.grid.h ** 2
    return ComplexField(field.grid, lap, _stencil_mask(field))


def mixed_zzbar(field: ComplexField) -> ComplexField:
    """``f_{z zbar}`` as a quarter of the five-point Laplacian."""
    lap = laplacian(field)
    return ComplexField(lap.grid, lap.values / 4, lap.mask)


def harmonic_residual(field: ComplexField, where: Optional[np.ndarray] = None) -> float:
    """Max of ``|Δ_h u|`` over valid interior nodes (optionally restricted by ``where``)."""
    lap = laplacian(field.real())
    keep = lap.valid if where is None else lap.valid & where
    if not keep.any():
        raise NoValidInteriorError("every interior node is masked")
    return float(np.max(np.abs(lap.values[keep])))


def bilinear_sample_many(field: ComplexField, points) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised bilinear interpolation.

    Returns ``(values, ok)``; ``ok`` is False for points outside the grid or
    touching a masked corner.
    """
    g = field.grid
    p = np.asarray(points, dtype=complex)
    s = (p.real - g.x0) / g.h
    t = (p.imag - g.y0) / g.h
    eps = 1e-9
    inside = (s >= -eps) & (s <= g.nx - 1 + eps) & (t >= -eps) & (t <= g.ny - 1 + eps)
    s = np.clip(np.nan_to_num(s), 0, g.nx - 1)
    t = np.clip(np.nan_to_num(t), 0, g.ny - 1)
    i = np.minimum(np.floor(s).astype(int), g.nx - 2)
    j = np.minimum(np.floor(t).astype(int), g.ny - 2)
    a = s - i
    b = t - j
    f = field.values
    v = field.valid
    out = ((1 - a) * (1 - b) * f[j, i] + a * (1 - b) * f[j, i + 1]
           + (1 - a) * b * f[j + 1, i] + a * b * f[j + 1, i + 1])
    ok = inside & v[j, i] & v[j, i + 1] & v[j + 1, i] & v[j + 1, i + 1]
    return out, ok


def bilinear_sample(field: ComplexField, point) -> complex:
    """Bilinear interpolation of ``field`` at one point of the grid rectangle."""
    if not field.grid.contains(point):
        raise OutOfDomainError(f"{point!r} lies outside {field.grid.bounds}")
    val, ok = bilinear_sample_many(field, np.array([point]))
    if not ok[0]:
        raise OutOfDomainError(f"{point!r} touches a masked node")
    return complex(val[0])


def default_conjugate_threshold(u: ComplexField) -> float:
    return 1e-3 * u.max_abs() + 1e-6


def harmonic_conjugate(u: ComplexField, basepoint: Tuple[int, int] = (0, 0),
                       threshold: Optional[float] = None, check: bool = True) -> ComplexField:
    """Real ``v`` with ``u + i v`` holomorphic and ``v(basepoint) = 0``.

    Integrates ``v_x = -u_y`` along the basepoint row, then ``v_y = u_x`` up and
    down every column (trapezoidal rule).  Nodes reached through a masked node
    are masked.
    """
    g = u.grid
    ur = u.values.real
    if check:
        thr = default_conjugate_threshold(u) if threshold is None else threshold
        res = harmonic_residual(u)
        if res > thr:
            raise NotHarmonicError(f"harmonic residual {res:.3e} exceeds {thr:.3e}")
    i0, j0 = basepoint
    if not (0 <= i0 < g.nx and 0 <= j0 < g.ny):
        raise OutOfDomainError(f"basepoint {basepoint} outside grid")
    valid = u.valid
    # one-sided second-order differences at the edges, central inside
    ux = np.gradient(ur, g.h, axis=1, edge_order=2)
    uy = np.gradient(ur, g.h, axis=0, edge_order=2)

    v = np.zeros(g.shape)
    ok = np.zeros(g.shape, dtype=bool)

    row = -uy[j0]
    rv = valid[j0]
    vrow = np.zeros(g.nx)
    okrow = np.zeros(g.nx, dtype=bool)
    okrow[i0] = rv[i0]
    for i in range(i0 + 1, g.nx):
        vrow[i] = vrow[i - 1] + 0.5 * g.h * (row[i - 1] + row[i])
        okrow[i] = okrow[i - 1] and rv[i]
    for i in range(i0 - 1, -1, -1):
        vrow[i] = vrow[i + 1] - 0.5 * g.h * (row[i + 1] + row[i])
        okrow[i] = okrow[i + 1] and rv[i]

    v[j0] = vrow
    ok[j0] = okrow
    incr = 0.5 * g.h * (ux[1:] + ux[:-1])  # between rows j and j+1
    for j in range(j0 + 1, g.ny):
        v[j] = v[j - 1] + incr[j - 1]
        ok[j] = ok[j - 1] & valid[j]
    for j in range(j0 - 1, -1, -1):
        v[j] = v[j + 1] - incr[j]
        ok[j] = ok[j + 1] & valid[j]
    return ComplexField(g, v, None if ok.all() else ok)


def same_grid(a: GridSpec, b: GridSpec, rtol: float = 1e-12) -> bool:
    return (a.nx == b.nx and a.ny == b.ny
            and np.isclose(a.h, b.h, rtol=rtol, atol=0)
            and np.isclose(a.x0, b.x0, rtol=0, atol=rtol * max(1.0, abs(a.x0)))
            and np.isclose(a.y0, b.y0, rtol=0, atol=rtol * max(1.0, abs(a.y0))))


def require_same_grid(a: ComplexField, b: ComplexField):
    if not same_grid(a.grid, b.grid):
        raise GridMismatchError(f"{a.grid} vs {b.grid}")
