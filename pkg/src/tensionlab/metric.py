"""Conformal metric densities ``rho(w)|dw|``.

A flat metric is stored through a holomorphic potential ``H`` (finite power
series) with ``log rho = Re H``.  Then ``lambda = (log rho)_w = H'/2`` and
``v = Im H`` is the harmonic conjugate of ``log rho``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import MetricEvaluationError, NotFlatError, UnknownMetricError
from .field import ComplexField, GridSpec, laplacian

EXP_LIMIT = 700.0


@dataclass(frozen=True)
class FlatMetric:
    id: str
    coeffs: Tuple[complex, ...]
    flat: bool = True

    def __post_init__(self):
        c = tuple(complex(a) for a in self.coeffs) or (0j,)
        object.__setattr__(self, "coeffs", c)

    @property
    def _c(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    def potential(self, w) -> np.ndarray:
        return P.polyval(np.asarray(w, dtype=complex), self._c)

    def potential_prime(self, w) -> np.ndarray:
        return P.polyval(np.asarray(w, dtype=complex), P.polyder(self._c)) if len(self.coeffs) > 1 \
            else np.zeros_like(np.asarray(w, dtype=complex))

    def log_rho(self, w) -> np.ndarray:
        return np.real(self.potential(w))

    def lam(self, w) -> np.ndarray:
        return 0.5 * self.potential_prime(w)

    def v(self, w) -> np.ndarray:
        return np.imag(self.potential(w))

    def descriptor(self) -> dict:
        return {"id": self.id, "coefficients": [[c.real, c.imag] for c in self.coeffs], "flat": True}


@dataclass(frozen=True)
class TestMetric:
    """Metric with an arbitrary smooth ``log rho``; may be curved."""

    __test__ = False  # keep pytest from collecting this class

    id: str
    log_rho_xy: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lam_xy: Callable[[np.ndarray, np.ndarray], np.ndarray]
    flat: bool = False

    def log_rho(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        return np.asarray(self.log_rho_xy(w.real, w.imag), dtype=float)

    def lam(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        return np.asarray(self.lam_xy(w.real, w.imag), dtype=complex)

    def v(self, w):
        raise NotFlatError(f"metric {self.id!r} is not flat; no global harmonic conjugate")

    def descriptor(self) -> dict:
        return {"id": self.id, "coefficients": [], "flat": False}


def _gauss_nonflat() -> TestMetric:
    # log rho = x^2, so (log rho)_w = x
    return TestMetric("gauss_nonflat", lambda x, y: x ** 2, lambda x, y: x + 0j)


BUILTIN = {
    "euclid": lambda: FlatMetric("euclid", (0j,)),
    "exp_x": lambda: FlatMetric("exp_x", (0j, 2 + 0j)),
    "exp_y": lambda: FlatMetric("exp_y", (0j, -1j)),
    "gauss_nonflat": _gauss_nonflat,
}


def builtin_metric(name: str):
    try:
        return BUILTIN[name]()
    except KeyError:
        raise UnknownMetricError(f"unknown metric {name!r}; choose from {sorted(BUILTIN)}") from None


def metric_from_theta(coeffs: Sequence[complex], id: str | None = None) -> FlatMetric:
    """Flat metric whose ``lambda`` equals the entire function ``Theta`` exactly.

    ``H = 2 * integral(Theta)``, so ``(log rho)_w = H'/2 = Theta``.
    """
    theta = [complex(c) for c in coeffs]
    if not any(theta):
        return FlatMetric(id or "euclid", (0j,))
    H = [0j] + [2 * c / (k + 1) for k, c in enumerate(theta)]
    while len(H) > 1 and H[-1] == 0:
        H.pop()
    if id is None:
        id = "theta:" + ",".join(f"{c.real:g}{c.imag:+g}j" for c in theta)
    return FlatMetric(id, tuple(H))


def metric_from_descriptor(d: dict):
    if not d.get("flat", True):
        return builtin_metric(d["id"])
    coeffs = tuple(complex(re, im) for re, im in d.get("coefficients", [[0.0, 0.0]]))
    return FlatMetric(d["id"], coeffs)


def _guard(metric, w):
    if isinstance(metric, FlatMetric):
        lr = metric.log_rho(w)
        if np.any(np.abs(lr) > EXP_LIMIT) or not np.all(np.isfinite(lr)):
            raise MetricEvaluationError(f"|Re H| exceeds {EXP_LIMIT} for metric {metric.id!r}")
        return lr
    return metric.log_rho(w)


def eval_rho(metric, point):
    return np.exp(_guard(metric, point))


def eval_log_rho(metric, point):
    return _guard(metric, point)


def eval_lambda(metric, point):
    lam = metric.lam(point)
    if not np.all(np.isfinite(lam)):
        raise MetricEvaluationError(f"lambda overflow for metric {metric.id!r}")
    return lam


def eval_v(metric, point):
    if not getattr(metric, "flat", False):
        raise NotFlatError(f"metric {metric.id!r} is not flat")
    return metric.v(point)


def require_flat(metric):
    if not getattr(metric, "flat", False):
        raise NotFlatError(f"metric {metric.id!r} is not flat")
    return metric


def gaussian_curvature(metric, grid: GridSpec) -> ComplexField:
    """``K = -rho^-2 * Laplacian(log rho)`` from the five-point stencil, interior only."""
    W = grid.points()
    lr = ComplexField(grid, metric.log_rho(W))
    lap = laplacian(lr)
    K = -np.exp(-2 * lr.values.real) * lap.values.real
    return ComplexField(grid, K, lap.mask)
