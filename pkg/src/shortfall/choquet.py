"""Distortion functions and two routes to expected shortfall.

``choquet_expected_loss`` integrates the distorted survival function over the
loss axis; ``cvar_quantile_integral`` averages the upper quantile function.
For the CVaR distortion the two agree, which the test-suite exploits.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .distributions import AffineLaw, ContinuousDistribution
from .errors import DivergentIntegralError, DomainError
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate
from .report import RiskReport

__all__ = [
    "DistortionFunction",
    "CvarDistortion",
    "IdentityDistortion",
    "FunctionDistortion",
    "QuadratureConfig",
    "RiskReport",
    "CoherenceReport",
    "choquet_expected_loss",
    "cvar_quantile_integral",
    "coherence_probe",
]


GEOMETRIC_DEPTH = 16


class DistortionFunction(ABC):
    """Nondecreasing map of [0, 1] onto itself with phi(0) = 0 and phi(1) = 1."""

    label: str = "distortion"

    @abstractmethod
    def __call__(self, t): ...

    def params(self) -> dict:
        return {}

    def kinks(self) -> tuple[float, ...]:
        """Arguments in (0, 1) where the function is not smooth."""
        return ()

    def slope_near_zero(self, width: float) -> Optional[float]:
        """Slope if the function is linear on [0, width], else None."""
        return None

    def slope_near_one(self, width: float) -> Optional[float]:
        """Slope if the function is linear on [1 - width, 1], else None."""
        return None


@dataclass(frozen=True)
class CvarDistortion(DistortionFunction):
    alpha: float
    label = "cvar"

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")

    def __call__(self, t):
        return np.minimum(np.asarray(t, dtype=float) / (1.0 - self.alpha), 1.0)

    def params(self) -> dict:
        return {"alpha": self.alpha}

    def kinks(self):
        return (1.0 - self.alpha,) if self.alpha > 0 else ()

    def slope_near_zero(self, width):
        return 1.0 / (1.0 - self.alpha) if width <= 1.0 - self.alpha else None

    def slope_near_one(self, width):
        if self.alpha == 0:
            return 1.0
        return 0.0 if width <= self.alpha else None


@dataclass(frozen=True)
class IdentityDistortion(DistortionFunction):
    label = "identity"

    def __call__(self, t):
        return np.asarray(t, dtype=float)

    def slope_near_zero(self, width):
        return 1.0

    def slope_near_one(self, width):
        return 1.0


@dataclass(frozen=True)
class FunctionDistortion(DistortionFunction):
    """Wraps an arbitrary vectorised distortion; no tail corrections applied."""

    func: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))


def _check_tail(dist: ContinuousDistribution, what: str):
    gamma = dist.tail_index
    if gamma is not None and gamma <= 1.0:
        raise DivergentIntegralError(f"{what} diverges: right-tail Pareto index {gamma} <= 1")


def choquet_expected_loss(
    dist: ContinuousDistribution,
    phi: DistortionFunction,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> RiskReport:
    """Choquet integral int_0^inf phi(1-F) dx + int_-inf^0 [phi(1-F) - 1] dx.

    Infinite ends are cut at the ``tail_truncation_probability`` quantiles.
    Beyond the cuts the distorted survival is linear in 1-F (or in F), so the
    remainder is the law's stop-loss / lower partial moment times that slope
    whenever both are available; otherwise it is dropped and recorded.
    """
    if phi.slope_near_zero(1.0) != 0:
        _check_tail(dist, "Choquet expected loss")
    eps = cfg.tail_truncation_probability
    s_lo, s_hi = dist.support
    lo = float(dist.quantile(eps)) if math.isinf(s_lo) else float(s_lo)
    hi = float(dist.upper_quantile(eps)) if math.isinf(s_hi) else float(s_hi)

    def integrand(x):
        return phi(1.0 - dist.cdf(x)) - (x < 0)

    breaks = [0.0]
    for k in phi.kinks():
        if 0.0 < k < 1.0:
            breaks.append(float(dist.upper_quantile(k)))
    core = integrate(integrand, lo, hi, cfg, breakpoints=breaks)

    dropped = []
    # right remainder: phi(S) = slope * S for S <= eps
    right = -max(0.0, -hi)
    if math.isinf(s_hi):
        slope = phi.slope_near_zero(eps)
        tail = dist.stop_loss(hi)
        if slope is None or tail is None:
            dropped.append("right")
        else:
            right += slope * float(tail)
    # left remainder: phi(S) = 1 - slope * F for F <= eps
    left = max(0.0, lo)
    if math.isinf(s_lo):
        slope = phi.slope_near_one(eps)
        tail = dist.lower_partial(lo)
        if slope is None or tail is None:
            dropped.append("left")
        else:
            left -= slope * float(tail)

    value = core.value + right + left
    return RiskReport(
        value=value,
        method="choquet_expected_loss",
        alpha=phi.params().get("alpha"),
        inputs={"law": dist.describe(), "distortion": phi.label, **phi.params()},
        tolerance_used=cfg.tolerance_for(value),
        diagnostics={
            "quadrature_error": core.error,
            "truncation": (lo, hi),
            "remainder": right + left,
            "dropped_remainders": tuple(dropped),
        },
    )


def cvar_quantile_integral(
    dist: ContinuousDistribution,
    alpha: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> RiskReport:
    """(1-alpha)^-1 int_alpha^1 F^-1(t) dt, integrated in u = 1 - t.

    The upper-tail quantile ``dist.upper_quantile(u)`` is integrated over
    (0, 1-alpha) so a singularity at u = 0 is met by adaptive refinement.
    ``alpha = 0`` returns the mean when the law knows it.
    """
    if not (0.0 <= alpha < 1.0):
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    _check_tail(dist, "expected shortfall")
    inputs = {"law": dist.describe(), "alpha": alpha}
    if alpha == 0.0 and dist.mean is not None:
        return RiskReport(float(dist.mean), "cvar_quantile_integral", alpha, inputs, 0.0)
    mass = 1.0 - alpha
    # geometric initial panels towards the tail end save refinement rounds
    breaks = mass * np.logspace(-1, -GEOMETRIC_DEPTH, GEOMETRIC_DEPTH)
    res = integrate(lambda u: dist.upper_quantile(u), 0.0, mass, cfg, breakpoints=breaks)
    value = res.value / mass
    return RiskReport(
        value=value,
        method="cvar_quantile_integral",
        alpha=alpha,
        inputs=inputs,
        tolerance_used=cfg.tolerance_for(res.value) / mass,
        diagnostics={"quadrature_error": res.error / mass, "panels": res.panels},
    )


@dataclass(frozen=True)
class CoherenceReport:
    base: float
    shifted: float
    scaled: float
    combined: float
    shift: float
    scale: float
    tolerance: float

    @property
    def translation_residual(self) -> float:
        return abs(self.shifted - (self.base + self.shift))

    @property
    def homogeneity_residual(self) -> float:
        return abs(self.scaled - self.scale * self.base)

    @property
    def combined_residual(self) -> float:
        return abs(self.combined - (self.scale * self.base + self.shift))

    @property
    def ok(self) -> bool:
        return max(self.translation_residual, self.homogeneity_residual,
                   self.combined_residual) <= self.tolerance


def coherence_probe(
    dist: ContinuousDistribution,
    alpha: float,
    shift: float = 0.0,
    scale: float = 1.0,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> CoherenceReport:
    """CVaR of X, X + shift, scale * X and shift + scale * X.

    Raises ``AssertionError`` if translation invariance or positive
    homogeneity fails by more than ten times the quadrature tolerance.
    """
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    base = cvar_quantile_integral(dist, alpha, cfg)
    shifted = cvar_quantile_integral(AffineLaw(dist, shift, 1.0), alpha, cfg)
    scaled = cvar_quantile_integral(AffineLaw(dist, 0.0, scale), alpha, cfg)
    combined = cvar_quantile_integral(AffineLaw(dist, shift, scale), alpha, cfg)
    tol = 10.0 * (1.0 + scale) * max(base.tolerance_used, shifted.tolerance_used,
                                      scaled.tolerance_used, combined.tolerance_used)
    report = CoherenceReport(base.value, shifted.value, scaled.value, combined.value,
                             shift, scale, tol)
    assert report.ok, f"coherence violated: {report}"
    return report
