"""Teichmueller distance between maps, the hyperbolic disk distance and the
isometry audit of the entire family.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .analytic import DEFAULT_CONVENTION
from .beltrami import construct_entire
from .errors import AlphaOutOfDiskError, DegenerateError
from .field import ComplexField, GridSpec, require_same_grid
from .metric import require_flat
from .qc import beltrami_coefficient, pushforward_mu
from .records import MapRecord

MapLike = Union[MapRecord, ComplexField]


def compose_mu(mu_f, mu_g, g_phase=1.0):
    """Coefficient of ``f o g^-1`` at ``g(z)``: ``(mu_f - mu_g) / (1 - conj(mu_g) mu_f) * phase``.

    ``g_phase`` is ``conj(g_z) / g_z`` conjugated appropriately; the modulus does
    not depend on it.
    """
    mu_f = np.asarray(mu_f, dtype=complex)
    mu_g = np.asarray(mu_g, dtype=complex)
    if np.any(np.abs(mu_g) >= 1):
        raise DegenerateError("|mu_g| must be below 1")
    den = 1 - np.conj(mu_g) * mu_f
    if np.any(np.abs(den) < 1e-12):
        raise DegenerateError("composition denominator vanishes")
    out = (mu_f - mu_g) / den * g_phase
    return complex(out) if out.ndim == 0 else out


def hyperbolic_distance(a: complex, b: complex) -> float:
    """``log((1 + t) / (1 - t))`` with ``t = |a - b| / |1 - conj(a) b|``."""
    a, b = complex(a), complex(b)
    if not (abs(a) < 1 and abs(b) < 1):
        raise AlphaOutOfDiskError(f"points must lie in the unit disk, got {a} and {b}")
    t = abs(a - b) / abs(1 - a.conjugate() * b)
    return float(np.log1p(t) - np.log1p(-t))


@dataclass
class DistanceReport:
    d_teich: float
    d_hyperbolic: Optional[float] = None
    sup_location: Optional[Tuple[int, int]] = None
    spread: float = 0.0
    side: str = "domain"

    @property
    def discrepancy(self) -> Optional[float]:
        return None if self.d_hyperbolic is None else abs(self.d_teich - self.d_hyperbolic)


def coefficient_distance(mu_a: ComplexField, mu_b: ComplexField,
                         where: Optional[np.ndarray] = None) -> DistanceReport:
    """``log sup K`` of the composed coefficient over nodes where both are valid."""
    require_same_grid(mu_a, mu_b)
    keep = mu_a.valid & mu_b.valid
    if where is not None:
        keep &= where
    if not keep.any():
        raise DegenerateError("no node where both coefficients are defined")
    m = np.zeros(mu_a.grid.shape)
    m[keep] = np.abs(compose_mu(mu_a.values[keep], mu_b.values[keep]))
    logk = np.full(m.shape, np.nan)
    logk[keep] = np.log1p(m[keep]) - np.log1p(-m[keep])
    j, i = np.unravel_index(np.nanargmax(logk), logk.shape)
    return DistanceReport(float(logk[j, i]), None, (int(i), int(j)),
                          float(np.nanmax(logk) - np.nanmin(logk)))


def _field(m: MapLike) -> ComplexField:
    return m.f if isinstance(m, MapRecord) else m


def _alpha(m: MapLike):
    return m.alpha if isinstance(m, MapRecord) else None


def teich_distance(f: MapLike, g: MapLike, side: str = "domain",
                   target_grid: Optional[GridSpec] = None,
                   where: Optional[np.ndarray] = None) -> DistanceReport:
    """Teichmueller distance from pointwise composition of Beltrami coefficients.

    ``side="domain"`` composes ``mu_f`` and ``mu_g`` on the common domain grid,
    giving ``log sup K(f o g^-1)``.  ``side="target"`` pushes both coefficients
    forward to ``target_grid`` and composes the coefficients of the inverse
    maps, giving ``log sup K(f^-1 o g)``; this form does not see the affine
    pre-composition used to normalise family members.
    """
    F, G = _field(f), _field(g)
    if side == "domain":
        require_same_grid(F, G)
        rep = coefficient_distance(beltrami_coefficient(F), beltrami_coefficient(G), where)
    elif side == "target":
        tg = target_grid or F.grid
        rep = coefficient_distance(pushforward_mu(F, tg), pushforward_mu(G, tg), where)
    else:
        raise ValueError(f"side must be 'domain' or 'target', got {side!r}")
    rep.side = side
    a, b = _alpha(f), _alpha(g)
    if a is not None and b is not None:
        rep.d_hyperbolic = hyperbolic_distance(a, b)
    return rep


@dataclass
class IsometryReport:
    alphas: List[complex]
    d_teich: np.ndarray
    d_hyperbolic: np.ndarray
    spread: np.ndarray
    members: list = dc_field(default_factory=list, repr=False)

    @property
    def max_discrepancy(self) -> float:
        if len(self.alphas) < 2:
            return 0.0
        return float(np.max(np.abs(self.d_teich - self.d_hyperbolic)))

    @property
    def max_spread(self) -> float:
        return float(np.max(self.spread)) if len(self.alphas) > 1 else 0.0


def isometry_audit(metric, alphas: Sequence[complex], grid: GridSpec, side: str = "target",
                   window: float = 0.75, convention: str = DEFAULT_CONVENTION,
                   members: Optional[list] = None) -> IsometryReport:
    """Pairwise Teichmueller versus hyperbolic distances for entire-family members.

    Distances are taken over the centred window covering ``window`` of each
    side of ``grid`` (the target grid is ``grid`` itself when ``side="target"``).
    """
    require_flat(metric)
    alphas = [complex(a) for a in alphas]
    for a in alphas:
        if not abs(a) < 1:
            raise AlphaOutOfDiskError(f"|alpha| = {abs(a)} >= 1")
    if members is None:
        members = [construct_entire(a, metric, grid, convention=convention) for a in alphas]
    where = grid.central_window(window)
    if side == "target":
        mus = [pushforward_mu(m.f, grid) for m in members]
    else:
        mus = [beltrami_coefficient(m.f) for m in members]
    n = len(alphas)
    dT = np.zeros((n, n))
    dH = np.zeros((n, n))
    spread = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        rep = coefficient_distance(mus[i], mus[j], where)
        dT[i, j] = dT[j, i] = rep.d_teich
        spread[i, j] = spread[j, i] = rep.spread
        dH[i, j] = dH[j, i] = hyperbolic_distance(alphas[i], alphas[j])
    return IsometryReport(alphas, dT, dH, spread, members)
