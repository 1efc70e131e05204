"""Per-map diagnostics: Beltrami coefficient, distortion, Hopf differential,
the harmonicity lemmas, the holomorphic Psi, the Euclidean companion map and
the pushforward of the coefficient to the inverse map.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import AllDegenerateError, DegenerateError, NoValidInteriorError
from .field import (
    ComplexField,
    bilinear_sample_many,
    harmonic_conjugate,
    harmonic_residual,
    wirtinger_z,
    wirtinger_zbar,
)
from .metric import eval_log_rho

DEGENERATE_FZ = 1e-12
ZERO_MU = 1e-8


def beltrami_coefficient(f: ComplexField) -> ComplexField:
    """``mu = f_zbar / f_z`` on interior nodes, masked where ``f_z`` vanishes numerically."""
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    scale = max(fz.max_abs(), fzb.max_abs(), 1e-300)
    ok = fz.valid & (np.abs(fz.values) > DEGENERATE_FZ * scale)
    if not ok.any():
        raise AllDegenerateError("f_z vanishes at every interior node")
    mu = np.where(ok, fzb.values / np.where(ok, fz.values, 1.0), 0.0)
    return ComplexField(f.grid, mu, ok)


def distortion(mu_value):
    """``K = (1 + |mu|) / (1 - |mu|)``; scalar in, scalar out."""
    a = np.abs(np.asarray(mu_value))
    if np.any(a >= 1) or not np.all(np.isfinite(a)):
        raise DegenerateError(f"|mu| = {np.max(a)} is not below 1")
    K = (1 + a) / (1 - a)
    return float(K) if K.ndim == 0 else K


def distortion_field(mu: ComplexField) -> ComplexField:
    return mu.with_values(distortion(np.where(mu.valid, mu.values, 0.0)))


# --- Hopf differential -----------------------------------------------------

@dataclass(frozen=True)
class HopfField:
    phi: ComplexField
    convention_power: int = 1


def hopf(f: ComplexField, metric, power: int = 1) -> HopfField:
    """``Phi = rho(f)^power f_z conj(f_zbar)``.  ``power=1`` matches the tension equation."""
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    rho = np.exp(power * eval_log_rho(metric, f.values))
    return HopfField(ComplexField(f.grid, rho * fz.values * np.conj(fzb.values), fz.valid), power)


def holomorphy_residual(phi: ComplexField, where: Optional[np.ndarray] = None) -> float:
    """``max |d phi / dzbar|`` over nodes where the stencil is valid."""
    d = wirtinger_zbar(phi)
    keep = d.valid if where is None else d.valid & where
    if not keep.any():
        raise NoValidInteriorError("no node with a valid stencil")
    return float(np.max(np.abs(d.values[keep])))


def hopf_argument_residual(f: ComplexField) -> float:
    """Harmonic residual of the unwrapped ``arg(f_z conj(f_zbar))``.

    Unwraps along the first column, then along every row, correcting 2 pi jumps.
    """
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    prod = ComplexField(f.grid, fz.values * np.conj(fzb.values), fz.valid)
    inner = prod.crop(1, f.grid.nx - 1, 1, f.grid.ny - 1)
    ang = np.angle(inner.values)
    ang[:, 0] = np.unwrap(ang[:, 0])
    ang = np.unwrap(ang, axis=1)
    return harmonic_residual(inner.with_values(ang))


# --- sigma and the lemmas --------------------------------------------------

@dataclass(frozen=True)
class SigmaField:
    sigma2: ComplexField  # real valued

    def log_sigma(self) -> ComplexField:
        return self.sigma2.with_values(0.5 * np.log(np.where(self.sigma2.valid, self.sigma2.values.real, 1.0)))


def sigma_field(f: ComplexField, metric) -> SigmaField:
    """``sigma^2 = rho(f) |f_z|^2``; nodes where it is not positive are masked."""
    fz = wirtinger_z(f)
    s2 = np.exp(eval_log_rho(metric, f.values)) * np.abs(fz.values) ** 2
    return SigmaField(ComplexField(f.grid, s2, fz.valid & (s2 > 0)))


def lemma2_residual(f: ComplexField, metric, where=None) -> float:
    """Harmonic residual of ``log sigma``."""
    return harmonic_residual(sigma_field(f, metric).log_sigma(), where)


def log_abs_mu(f: ComplexField, mu=None) -> ComplexField:
    """``log |mu|`` with near-zero nodes masked.

    ``mu`` may be a closed-form callable of ``z`` to replace the finite-difference
    coefficient.
    """
    if mu is None:
        m = beltrami_coefficient(f)
    else:
        m = ComplexField.sample(f.grid, mu)
    a = np.abs(m.values)
    ok = m.valid & (a > ZERO_MU)
    if not ok.any():
        raise AllDegenerateError("mu vanishes everywhere; lemma 1 is not applicable (f is conformal)")
    return ComplexField(f.grid, np.log(np.where(ok, a, 1.0)), ok)


def lemma1_residual(f: ComplexField, mu=None, where=None) -> float:
    """Harmonic residual of ``log |mu|`` away from the zeros of ``mu``."""
    return harmonic_residual(log_abs_mu(f, mu), where)


def reconstruct_psi(f: ComplexField, metric, threshold=None) -> ComplexField:
    """Holomorphic ``Psi`` with ``|Psi| = sigma^2``, real at the valid node nearest the centre."""
    s2 = sigma_field(f, metric).sigma2
    inner = s2.crop(1, f.grid.nx - 1, 1, f.grid.ny - 1)
    logs = inner.with_values(np.log(np.where(inner.valid, inner.values.real, 1.0)))
    v = harmonic_conjugate(logs, basepoint=_central_valid_node(logs), threshold=threshold)
    psi = np.exp(logs.values.real + 1j * v.values.real)
    out = np.zeros(f.grid.shape, dtype=complex)
    mask = np.zeros(f.grid.shape, dtype=bool)
    out[1:-1, 1:-1] = psi
    mask[1:-1, 1:-1] = v.valid
    return ComplexField(f.grid, out, mask)


@dataclass
class Lemma3Report:
    modulus_defect: float  # max | |mu| - |Phi|/|Psi| |
    holomorphy_defect: float  # max |Psi_zbar| / |Psi|

    @property
    def residual(self) -> float:
        return max(self.modulus_defect, self.holomorphy_defect)


def lemma3_report(f: ComplexField, metric, where=None, threshold=None) -> Lemma3Report:
    mu = beltrami_coefficient(f)
    phi = hopf(f, metric).phi
    psi = reconstruct_psi(f, metric, threshold)
    ok = mu.valid & phi.valid & psi.valid & (np.abs(psi.values) > 0)
    if where is not None:
        ok &= where
    ratio = np.abs(phi.values) / np.where(ok, np.abs(psi.values), 1.0)
    mod = float(np.max(np.abs(np.abs(mu.values) - ratio)[ok]))
    dpsi = wirtinger_zbar(psi)
    okh = dpsi.valid if where is None else dpsi.valid & where
    rel = np.abs(dpsi.values) / np.where(okh, np.abs(psi.values), 1.0)
    return Lemma3Report(mod, float(np.max(rel[okh])))


def lemma3_residual(f: ComplexField, metric, where=None, threshold=None) -> float:
    """Largest of the modulus identity defect and the relative holomorphy defect of ``Psi``."""
    return lemma3_report(f, metric, where, threshold).residual


# --- maximum principle -----------------------------------------------------

@dataclass
class MaxPrincipleReport:
    maxima: List[Tuple[int, int, float]] = dc_field(default_factory=list)
    minima: List[Tuple[int, int, float]] = dc_field(default_factory=list)
    guard: float = 0.0

    @property
    def clean(self) -> bool:
        return not self.maxima and not self.minima


def max_principle_scan(f: ComplexField, curvature_scale: float = 1e-3, mu=None) -> MaxPrincipleReport:
    """Strict interior extrema of ``|mu|`` over 8-neighbourhoods.

    A node counts only if it beats every neighbour by more than
    ``10 h^2 curvature_scale``, which absorbs discretisation ripple on
    nearly constant ``|mu|``.  Minima with ``|mu| <= 1e-6`` (zeros of mu) are
    allowed.
    """
    m = beltrami_coefficient(f) if mu is None else mu
    a = np.abs(m.values)
    v = m.valid
    guard = 10 * f.grid.h ** 2 * curvature_scale
    rep = MaxPrincipleReport(guard=guard)
    ny, nx = a.shape
    c = a[1:-1, 1:-1]
    ok = v[1:-1, 1:-1].copy()
    hi = np.full(c.shape, -np.inf)
    lo = np.full(c.shape, np.inf)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if dj == 0 and di == 0:
                continue
            nb = a[1 + dj:ny - 1 + dj, 1 + di:nx - 1 + di]
            ok &= v[1 + dj:ny - 1 + dj, 1 + di:nx - 1 + di]
            hi = np.maximum(hi, nb)
            lo = np.minimum(lo, nb)
    for j, i in np.argwhere(ok & (c > hi + guard)):
        rep.maxima.append((int(i) + 1, int(j) + 1, float(c[j, i])))
    for j, i in np.argwhere(ok & (c < lo - guard) & (c > 1e-6)):
        rep.minima.append((int(i) + 1, int(j) + 1, float(c[j, i])))
    return rep


# --- companion map and pushforward -----------------------------------------

def antiderivative(F: ComplexField, basepoint: Tuple[int, int]) -> ComplexField:
    """Holomorphic primitive of ``F`` by the trapezoidal rule.

    Runs along the basepoint row (``d/dx = F``), then up and down every column
    (``d/dy = i F``).  Nodes reached through a masked node are masked.
    """
    g = F.grid
    i0, j0 = basepoint
    vals, valid = F.values, F.valid
    out = np.zeros(g.shape, dtype=complex)
    ok = np.zeros(g.shape, dtype=bool)
    ok[j0, i0] = valid[j0, i0]
    for i in range(i0 + 1, g.nx):
        out[j0, i] = out[j0, i - 1] + 0.5 * g.h * (vals[j0, i - 1] + vals[j0, i])
        ok[j0, i] = ok[j0, i - 1] and valid[j0, i]
    for i in range(i0 - 1, -1, -1):
        out[j0, i] = out[j0, i + 1] - 0.5 * g.h * (vals[j0, i + 1] + vals[j0, i])
        ok[j0, i] = ok[j0, i + 1] and valid[j0, i]
    step = 0.5j * g.h * (vals[1:] + vals[:-1])
    for j in range(j0 + 1, g.ny):
        out[j] = out[j - 1] + step[j - 1]
        ok[j] = ok[j - 1] & valid[j]
    for j in range(j0 - 1, -1, -1):
        out[j] = out[j + 1] - step[j]
        ok[j] = ok[j + 1] & valid[j]
    return ComplexField(g, out, ok)


def _central_valid_node(field: ComplexField) -> Tuple[int, int]:
    g = field.grid
    idx = np.argwhere(field.valid)
    if idx.size == 0:
        raise NoValidInteriorError("no valid node")
    jc, ic = (g.ny - 1) / 2, (g.nx - 1) / 2
    j, i = idx[np.argmin((idx[:, 0] - jc) ** 2 + (idx[:, 1] - ic) ** 2)]
    return int(i), int(j)


def companion_map(f: ComplexField, metric, basepoint: Optional[Tuple[int, int]] = None,
                  threshold=None) -> ComplexField:
    """Euclidean-harmonic ``h = psi + conj(phi)`` with ``h_z = Psi`` and ``h_zbar = conj(Phi)``.

    So ``|mu_h| = |Phi| / |Psi| = |mu_f|``.  ``basepoint`` is a node index
    ``(i, j)``; the default is the valid node nearest the centre.
    """
    Psi = reconstruct_psi(f, metric, threshold)
    Phi = hopf(f, metric).phi.restrict(Psi.valid)
    bp = basepoint or _central_valid_node(Psi)
    psi = antiderivative(Psi, bp)
    phi = antiderivative(Phi, bp)
    return psi.with_values(psi.values + np.conj(phi.values), phi.valid)


def distortion_mismatch(a: ComplexField, b: ComplexField, where=None) -> float:
    """``max |K(., a) - K(., b)|`` over nodes where both coefficients are defined."""
    ma, mb = beltrami_coefficient(a), beltrami_coefficient(b)
    keep = ma.valid & mb.valid
    if where is not None:
        keep &= where
    if not keep.any():
        raise AllDegenerateError("no node where both coefficients are defined")
    return float(np.max(np.abs(distortion(ma.values[keep]) - distortion(mb.values[keep]))))


def pushforward_mu(f: ComplexField, target_grid, tol: float = 1e-9) -> ComplexField:
    """Coefficient of ``g = f^-1`` on ``target_grid``: ``-f_zbar / conj(f_z)`` at ``z = g(w)``."""
    from .beltrami import invert_map

    z = invert_map(f, target_grid, tol=tol)
    fz = wirtinger_z(f)
    fzb = wirtinger_zbar(f)
    a, oka = bilinear_sample_many(fz, z.values)
    b, okb = bilinear_sample_many(fzb, z.values)
    ok = z.valid & oka & okb & (np.abs(a) > 0)
    mu = -b / np.where(ok, np.conj(a), 1.0)
    return ComplexField(target_grid, mu, ok)


def coefficient_mismatch(mu: ComplexField, reference: Callable[[np.ndarray], np.ndarray],
                         where=None) -> float:
    """``max |mu - reference(w)|`` over valid nodes."""
    ref = reference(mu.grid.points())
    keep = mu.valid if where is None else mu.valid & where
    return float(np.max(np.abs(mu.values - ref)[keep]))
