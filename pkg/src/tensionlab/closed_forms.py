"""Exact fixtures: linear maps, the log-cosh strip map, the real-coefficient
example with its boundedness audit, the exp_y coefficient variants, and the
explicit entire family for metrics with linear potential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .analytic import DEFAULT_CONVENTION, AnalyticCoefficient, convention_sign, family_coefficient, real_profile
from .errors import (
    AlphaOutOfDiskError,
    DomainDegeneracyError,
    NotFlatError,
    OrientationError,
    QuadratureError,
)
from .field import ComplexField, GridSpec
from .metric import FlatMetric, builtin_metric, require_flat
from .records import MapRecord


# --- linear maps ---------------------------------------------------------------

@dataclass(frozen=True)
class LinearMap:
    """``f(z) = a z + b conj(z)``; the one-parameter family uses ``b = 1 - a``."""

    a: complex
    b: complex

    def __post_init__(self):
        if not abs(self.a) > abs(self.b):
            raise OrientationError(f"|a| = {abs(self.a)} must exceed |b| = {abs(self.b)}")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.a * z + self.b * np.conj(z)

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        det = abs(self.a) ** 2 - abs(self.b) ** 2
        return (np.conj(self.a) * w - self.b * np.conj(w)) / det

    @property
    def mu(self) -> complex:
        return self.b / self.a

    @property
    def K(self) -> float:
        return (abs(self.a) + abs(self.b)) / (abs(self.a) - abs(self.b))

    def sample(self, grid: GridSpec) -> ComplexField:
        return ComplexField.sample(grid, self)


def linear_map(a: complex) -> LinearMap:
    a = complex(a)
    return LinearMap(a, 1 - a)


def linear_pair_distance(a: complex, b: complex) -> float:
    """``log K(f_a o f_b^-1)`` for two members of the ``a z + (1 - a) conj(z)`` family."""
    a, b = complex(a), complex(b)
    p = abs(1 - a - b.conjugate())
    q = abs(a - b)
    return math.log((p + q) / (p - q))


# --- log-cosh strip map --------------------------------------------------------

@dataclass(frozen=True)
class TanhStripMap:
    """``f = log cosh(x - s) + i y``, harmonic into ``exp_x``.

    Its real part solves ``u'' = 1 - u'^2``, which is the tension equation for
    ``f = u(x) + i y`` with ``lambda = 1``.
    """

    x_shift: float = 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.log(np.cosh(z.real - self.x_shift)) + 1j * z.imag

    def mu(self, z):
        z = np.asarray(z, dtype=complex)
        return -np.exp(-2 * (z.real - self.x_shift)) + 0j

    def hopf(self, z):
        return np.full(np.shape(z), -0.25 + 0j)

    def sigma2(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(2 * (z.real - self.x_shift)) / 4

    def psi(self, z):
        return np.exp(2 * (np.asarray(z, dtype=complex) - self.x_shift)) / 4

    def companion(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(2 * (z - self.x_shift)) / 8 - np.conj(z) / 4

    def sample(self, grid: GridSpec) -> ComplexField:
        if grid.x0 <= self.x_shift:
            raise DomainDegeneracyError(f"grid reaches x = {grid.x0} <= {self.x_shift} where f_z = f_zbar")
        return ComplexField.sample(grid, self)


def tanh_strip_map(x_shift: float = 0.0) -> TanhStripMap:
    return TanhStripMap(float(x_shift))


# --- real-coefficient example ----------------------------------------------------

QUAD_TOL = 1e-10
VARIANTS = ("paper_literal", "corrected", "corrected_tension")
_RATE = {"paper_literal": -1.0, "corrected": -2.0, "corrected_tension": 2.0}


@dataclass(frozen=True)
class Example51Params:
    """``mu = sqrt(A^2 - 1) - A`` with ``A = 1 + c exp(k x)``.

    ``paper_literal`` has ``k = -1``.  ``corrected`` (``k = -2``) solves the
    inverse-map equation with the printed sign; ``corrected_tension``
    (``k = +2``) solves it with the sign implied by the tension equation.
    With ``lambda = 1`` the equation reduces to
    ``mu' (1 - mu) = 2 s mu (1 + mu)``, and for ``k = -1`` its residual is
    ``|1 - s / 2| |mu (1 + mu)|``: one half with the printed sign, three
    halves with the tension sign.
    """

    c: float = 1.0
    variant: str = "paper_literal"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def rate(self) -> float:
        return _RATE[self.variant]


def _t_s(x, p: Example51Params):
    t = p.c * np.exp(p.rate * np.asarray(x, dtype=float))
    return t, np.sqrt(t * (2 + t))


def example51_mu(x, p: Example51Params = Example51Params()):
    """``sqrt(A^2 - 1) - A`` evaluated as ``-1 / (s + 1 + t)`` to avoid cancellation."""
    t, s = _t_s(x, p)
    return -1.0 / (s + 1 + t)


def example51_dmu(x, p: Example51Params = Example51Params()):
    """``d mu / dx = -k t mu / s``, from ``A - s = -mu``."""
    t, s = _t_s(x, p)
    return p.rate * t / (s + 1 + t) / s


def example51_uprime(x, p: Example51Params = Example51Params()):
    """``u' = (1 + mu) / (1 - mu) = (s + t) / (s + t + 2)``, same as ``-1 + 2 / (2 + t - s)``."""
    t, s = _t_s(x, p)
    return (s + t) / (s + t + 2)


def example51_u(x, p: Example51Params = Example51Params(), tol: float = 1e-10):
    """``u(x) = integral_0^x u'`` by adaptive quadrature."""
    def one(xx):
        val, err = quad(lambda s: float(example51_uprime(s, p)), 0.0, float(xx),
                        epsabs=tol, epsrel=tol, limit=200)
        if not np.isfinite(val) or err > 10 * tol * max(1.0, abs(val)):
            raise QuadratureError(f"quadrature to x={xx} reported error {err:.2e}")
        return val

    xs = np.asarray(x, dtype=float)
    if xs.ndim == 0:
        return one(xs)
    return np.array([one(v) for v in xs.reshape(-1)]).reshape(xs.shape)


def example51_u_cumulative(xs, p: Example51Params = Example51Params(), tol: float = 1e-10) -> np.ndarray:
    """``u`` at sorted abscissae, integrating between neighbours and anchoring at 0."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs)
    pts = np.concatenate([[0.0], xs[order]])
    pts_sorted = np.sort(pts)
    vals = np.zeros(pts_sorted.size)
    for k in range(1, pts_sorted.size):
        seg, err = quad(lambda s: float(example51_uprime(s, p)), pts_sorted[k - 1], pts_sorted[k],
                        epsabs=tol, epsrel=tol)
        if not np.isfinite(seg):
            raise QuadratureError("non-finite quadrature segment")
        vals[k] = vals[k - 1] + seg
    zero = np.searchsorted(pts_sorted, 0.0)
    vals -= vals[zero]
    lookup = dict(zip(pts_sorted.tolist(), vals.tolist()))
    out = np.empty(xs.size)
    out[order] = [lookup[v] for v in xs[order].tolist()]
    return out


def example51_tail_bound(X: float, p: Example51Params = Example51Params()) -> float:
    """Upper bound for ``integral_X^inf u'`` (decaying variants only).

    From ``u' <= (s + t) / 2`` and ``s <= sqrt(2 t) (1 + t / 4)``: for ``t <= 8``,
    ``u' <= sqrt(t / 2) + t``; integrate with ``t = c exp(k x)``, ``k < 0``.
    """
    k = p.rate
    if k >= 0:
        raise ValueError("u' does not decay at +infinity for this variant")
    t = p.c * math.exp(k * X)
    if t > 8:
        raise ValueError(f"tail bound needs c exp(k X) <= 8, got {t}")
    a = -k
    return 2 * math.sqrt(t / 2) / a + t / a


def example51_coefficient(p: Example51Params = Example51Params()) -> AnalyticCoefficient:
    """The coefficient as a function of ``w`` through ``Re w``."""
    return real_profile(lambda x: example51_mu(x, p), lambda x: example51_dmu(x, p),
                        f"example51[{p.variant}, c={p.c}]")


@dataclass
class Example51Audit:
    params: Example51Params
    sup_u_bound: float
    u_at_X: float
    tail_bound: float
    uprime_left: float
    asymptotic_ratio_right: float
    tension_residual: float
    inverse_residual: dict
    nu_residual: dict


def example51_map(grid: GridSpec, p: Example51Params = Example51Params(), X: float = 40.0,
                  left: float = -20.0, right: float = 20.0,
                  convention: str = DEFAULT_CONVENTION):
    """Sample ``f = u(x) + i y`` and attach the audit bundle; returns ``(MapRecord, Example51Audit)``.

    Residuals are reported for every variant under ``convention``.
    """
    from .beltrami import inverse_beltrami_residual, nu_quasiregular_residual
    from .tension import max_tension_residual

    metric = builtin_metric("exp_x")
    u = example51_u_cumulative(grid.x, p)
    f = ComplexField(grid, u[None, :] + 1j * grid.y[:, None])
    uX = example51_u(X, p, QUAD_TOL)
    tail = example51_tail_bound(X, p)
    k = abs(p.rate)
    ratio = float(example51_uprime(right, p) / (math.sqrt(p.c / 2) * math.exp(-k * right / 2)))
    inv, nu = {}, {}
    for variant in VARIANTS:
        mu = example51_coefficient(Example51Params(p.c, variant))
        inv[variant] = float(np.max(np.abs(inverse_beltrami_residual(mu, metric, convention, grid).values)))
        nu[variant] = nu_quasiregular_residual(mu, metric, convention, grid)
    # quadrature tolerance keeps the bound certified in floating point
    bound = uX + tail + QUAD_TOL * max(1.0, abs(uX))
    audit = Example51Audit(p, bound, uX, tail, float(example51_uprime(left, p)), ratio,
                           max_tension_residual(f, metric), inv, nu)
    return MapRecord(f, metric, None, None, f"example51[{p.variant}]"), audit


# --- exp_y coefficient -----------------------------------------------------------

def exp_y_example_mu(alpha: complex, variant: str = "derived",
                     convention: str = DEFAULT_CONVENTION) -> AnalyticCoefficient:
    """``paper_literal``: ``alpha exp(i Re w / 2)``; ``derived``: the family coefficient for exp_y.

    For exp_y, ``H = -i w``, so ``lambda = -i/2`` and ``v = -Re w``; the derived
    coefficient is ``alpha exp(-i Re w)`` with the printed sign and
    ``alpha exp(+i Re w)`` with the tension sign.
    """
    alpha = complex(alpha)
    if not abs(alpha) < 1:
        raise AlphaOutOfDiskError(f"|alpha| = {abs(alpha)} >= 1")
    if variant == "derived":
        return family_coefficient(alpha, builtin_metric("exp_y"), convention)
    if variant != "paper_literal":
        raise ValueError(f"variant must be 'paper_literal' or 'derived', got {variant!r}")

    def val(w):
        return alpha * np.exp(0.5j * np.real(w))

    # depends on x only: d/dw = d/dwbar = (1/2) d/dx
    return AnalyticCoefficient(val, lambda w: 0.25j * val(w), lambda w: 0.25j * val(w),
                               f"{alpha}*exp(i Re w / 2)")


# --- explicit entire family --------------------------------------------------------

@dataclass(frozen=True)
class ExactMember:
    """Closed-form entire-family member for a metric with ``H = c0 + kappa w``.

    ``g(w) = w - (2 / (s kappa)) log(1 + beta exp(s i v))`` with
    ``beta = (kappa / conj(kappa)) alpha`` has ``g_wbar / g_w = alpha exp(s i v)``;
    for ``kappa = 0`` it is ``w + alpha conj(w)``.  ``g`` is normalised so that
    ``g(0) = 0`` and ``g(1) = 1``, and ``f = g^-1`` is found by Newton's method
    on the closed form.
    """

    alpha: complex
    metric: FlatMetric
    convention: str = DEFAULT_CONVENTION

    def __post_init__(self):
        require_flat(self.metric)
        if not abs(self.alpha) < 1:
            raise AlphaOutOfDiskError(f"|alpha| = {abs(self.alpha)} >= 1")
        if len(self.metric.coeffs) > 2:
            raise NotFlatError("closed-form members need a potential of degree <= 1")

    @property
    def kappa(self) -> complex:
        c = self.metric.coeffs
        return c[1] if len(c) > 1 else 0j

    def _raw(self, w):
        w = np.asarray(w, dtype=complex)
        a, k = complex(self.alpha), self.kappa
        if k == 0:
            return w + a * np.conj(w), np.ones_like(w), np.full_like(w, a)
        s = convention_sign(self.convention)
        beta = k / k.conjugate() * a
        E = beta * np.exp(1j * s * self.metric.v(w))
        g = w - 2 / (s * k) * np.log1p(E)
        return g, 1 / (1 + E), (k.conjugate() / k) * E / (1 + E)

    def _affine(self):
        g0 = self._raw(np.array(0j))[0]
        g1 = self._raw(np.array(1 + 0j))[0]
        return complex(g0), complex(g1 - g0)

    def g(self, w):
        g0, scale = self._affine()
        return (self._raw(w)[0] - g0) / scale

    def g_derivatives(self, w):
        _, scale = self._affine()
        _, gw, gwb = self._raw(w)
        return gw / scale, gwb / scale

    def mu_inverse(self, w):
        return family_coefficient(self.alpha, self.metric, self.convention)(w)

    def f(self, z, tol: float = 1e-14, max_iters: int = 100):
        """Solve ``g(w) = z`` by Newton's method on the closed form."""
        z = np.asarray(z, dtype=complex)
        g0, scale = self._affine()
        w = np.array(z, dtype=complex)
        for _ in range(max_iters):
            r = self.g(w) - z
            if np.max(np.abs(r)) <= tol * max(1.0, float(np.max(np.abs(z)))):
                break
            gw, gwb = self.g_derivatives(w)
            det = np.abs(gw) ** 2 - np.abs(gwb) ** 2
            w = w - (np.conj(gw) * r - gwb * np.conj(r)) / det
        return w

    def sample_f(self, grid: GridSpec) -> ComplexField:
        return ComplexField.sample(grid, self.f)

    def record(self, grid: GridSpec) -> MapRecord:
        return MapRecord(self.sample_f(grid), self.metric, complex(self.alpha), None,
                         f"exact[{self.metric.id}, alpha={complex(self.alpha)}]")


def exact_member(alpha: complex, metric, convention: str = DEFAULT_CONVENTION) -> ExactMember:
    return ExactMember(complex(alpha), metric, convention)
