"""Gamma function and the singular power kernels used by every fractional
formula in the package.

The gamma function is a Lanczos approximation (g = 7, 9 coefficients), good
to about 15 significant digits for positive real arguments, so there is no
special-function dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import FractionalParams
from .errors import KernelSingularity, NonPositiveArgument

# Lanczos coefficients, g = 7.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


def gamma(x: float) -> float:
    """Euler gamma function for positive real x."""
    if not x > 0.0:
        raise NonPositiveArgument(f"gamma requires x > 0, got {x}")
    if x < 0.5:
        # Reflection keeps the Lanczos series in its accurate range.
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_C[0]
    for i, c in enumerate(_LANCZOS_C[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_TWO_PI * t ** (z + 0.5) * math.exp(-t) * acc


def power_kernel(t: float, s: float, exponent: float):
    """(t - s)^exponent; t and s may be floats or numpy arrays.

    Raises KernelSingularity when any t - s <= 0.
    """
    import numpy as np

    dt = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    if np.any(dt <= 0.0):
        raise KernelSingularity(f"t - s = {dt} not positive")
    out = np.exp(exponent * np.log(dt))
    return float(out) if out.ndim == 0 else out


def hp_noise_coefficient(params: FractionalParams, s) -> float:
    """Noise coefficient (Gamma(alpha)/Gamma(beta)) (t_eval - s)^(beta - alpha).

    Short-circuits to exactly 1.0 when alpha == beta bitwise, so the
    alpha = beta specialization of the momentum equation is exact rather
    than a rounding artifact.
    """
    if params.alpha == params.beta:
        return 1.0
    ratio = gamma(params.alpha) / gamma(params.beta)
    return ratio * power_kernel(params.t_eval, s, params.beta - params.alpha)


@dataclass(frozen=True)
class KernelSpec:
    """A power kernel prefactor * (t - s)^exponent."""

    exponent: float
    prefactor: float

    def __post_init__(self):
        if not (math.isfinite(self.prefactor) and self.prefactor > 0.0):
            raise ValueError(f"bad kernel prefactor {self.prefactor}")

    def __call__(self, t: float, s) -> float:
        return self.prefactor * power_kernel(t, s, self.exponent)

    @classmethod
    def momentum_noise(cls, params: FractionalParams) -> "KernelSpec":
        return cls(params.beta - params.alpha,
                   gamma(params.alpha) / gamma(params.beta))

    @classmethod
    def riemann_liouville(cls, beta: float) -> "KernelSpec":
        return cls(beta - 1.0, 1.0 / gamma(beta))

    @classmethod
    def wiener(cls, beta: float) -> "KernelSpec":
        return cls((beta - 1.0) / 2.0, 1.0 / gamma((beta + 1.0) / 2.0))
