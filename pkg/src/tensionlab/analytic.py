"""Closed-form coefficient fields with exact Wirtinger derivatives.

Audits accept these in place of sampled grids so that modelling error can be
told apart from discretisation error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .field import ComplexField, GridSpec
from .metric import require_flat

# Sign s of the inverse-map equation  mu_w - conj(mu) mu_wbar = s * mu (lam + conj(mu) conj(lam)).
# "printed" is the sign as typeset with the theorem; "tension" is the sign obtained
# by differentiating f_zbar = -mu(f) conj(f_z) against f_zzbar + lam(f) f_z f_zbar = 0.
# The family exponent and the twist exponent are e^{s i v} in both conventions.
CONVENTIONS = {"printed": 1, "tension": -1}
DEFAULT_CONVENTION = "tension"


def convention_sign(convention: str) -> int:
    try:
        return CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"convention must be one of {sorted(CONVENTIONS)}, got {convention!r}") from None


Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AnalyticCoefficient:
    """A function of ``w`` with exact ``d/dw`` and ``d/dwbar``."""

    value: Fn
    d_w: Fn
    d_wbar: Fn
    name: str = "analytic"

    def __call__(self, w):
        return self.value(np.asarray(w, dtype=complex))

    def sample(self, grid: GridSpec) -> ComplexField:
        return ComplexField.sample(grid, self.value)

    def conj(self) -> "AnalyticCoefficient":
        return AnalyticCoefficient(lambda w: np.conj(self.value(w)),
                                   lambda w: np.conj(self.d_wbar(w)),
                                   lambda w: np.conj(self.d_w(w)),
                                   f"conj({self.name})")


def constant(c: complex) -> AnalyticCoefficient:
    c = complex(c)
    zero = lambda w: np.zeros_like(np.asarray(w, dtype=complex))
    return AnalyticCoefficient(lambda w: np.full_like(np.asarray(w, dtype=complex), c), zero, zero,
                               f"const({c})")


def family_coefficient(alpha: complex, metric, convention: str = DEFAULT_CONVENTION) -> AnalyticCoefficient:
    """``alpha * exp(s i v)``, the inverse-map coefficient of the entire family.

    Uses ``i v_w = lam`` and ``i v_wbar = -conj(lam)``, both consequences of
    ``log rho + i v`` being holomorphic.
    """
    require_flat(metric)
    s = convention_sign(convention)
    a = complex(alpha)

    def val(w):
        return a * np.exp(1j * s * metric.v(w))

    return AnalyticCoefficient(val,
                               lambda w: s * metric.lam(w) * val(w),
                               lambda w: -s * np.conj(metric.lam(w)) * val(w),
                               f"{a}*exp({'+' if s > 0 else '-'}iv)[{metric.id}]")


def real_profile(mu_x: Fn, dmu_x: Fn, name: str = "mu(x)") -> AnalyticCoefficient:
    """Coefficient depending on ``Re w`` only; ``d/dw = d/dwbar = mu'/2``."""
    return AnalyticCoefficient(lambda w: mu_x(np.real(w)) + 0j,
                               lambda w: 0.5 * dmu_x(np.real(w)) + 0j,
                               lambda w: 0.5 * dmu_x(np.real(w)) + 0j,
                               name)
