"""Nonparametric expected shortfall from a loss sample.

The estimator averages the upper block of order statistics.  Index
arithmetic uses a small guard so that e.g. ``10 * (1 - 0.9)`` counts as 1
rather than ``floor(0.9999999999999998) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .report import RiskReport

_INDEX_GUARD = 1e-9

MODES = ("default", "literal")


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    sorted_view: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DomainError("empirical sample is empty")
        if not np.all(np.isfinite(values)):
            raise DomainError("empirical sample contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        ordered = np.sort(values, kind="stable")
        ordered.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sorted_view", ordered)

    @property
    def n(self) -> int:
        return self.values.size

    def order_statistic(self, i: int) -> float:
        """X_{n:i} with 1-based ``i``."""
        if not 1 <= i <= self.n:
            raise DomainError(f"order statistic index {i} outside 1..{self.n}")
        return float(self.sorted_view[i - 1])


def _as_sample(sample) -> EmpiricalSample:
    return sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(sample)


def _check_alpha(alpha: float):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def tail_count(n: int, alpha: float) -> int:
    """floor(n (1 - alpha)), the number of retained upper order statistics."""
    return math.floor(n * (1.0 - alpha) + _INDEX_GUARD)


def quantile_index(n: int, alpha: float) -> int:
    """ceil(n alpha), the 1-based index of the empirical alpha-quantile."""
    return math.ceil(n * alpha - _INDEX_GUARD)


def rho_alpha(x, alpha: float):
    """Check loss x (alpha - 1[x < 0])."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    return x * (alpha - (x < 0))


@dataclass(frozen=True)
class MinimizerResult:
    xi: float
    objective: float
    verified: bool = False


def quantile_loss_minimizer(sample, alpha: float, verify: bool = False) -> MinimizerResult:
    """xi = X_{n:ceil(n alpha)} and the summed check loss at xi.

    With ``verify`` the objective is evaluated at every sample point (O(n^2)
    memory in blocks) and minimality of xi among them is asserted.
    """
    s = _as_sample(sample)
    _check_alpha(alpha)
    k = quantile_index(s.n, alpha)
    if not 1 <= k <= s.n:
        raise DomainError(f"ceil(n alpha) = {k} outside 1..{s.n}")
    xi = s.order_statistic(k)
    objective = float(rho_alpha(s.values - xi, alpha).sum())
    if not verify:
        return MinimizerResult(xi, objective)
    best = math.inf
    for start in range(0, s.n, 512):
        cand = s.sorted_view[start:start + 512]
        obj = rho_alpha(s.values[None, :] - cand[:, None], alpha).sum(axis=1)
        best = min(best, float(obj.min()))
    scale = max(1.0, abs(objective))
    if objective > best + 1e-12 * scale * s.n:
        raise AssertionError(f"xi={xi} gives {objective}, but a sample point gives {best}")
    return MinimizerResult(xi, objective, verified=True)


def empirical_cvar(sample, alpha: float, mode: str = "default") -> RiskReport:
    """Upper-block trimmed mean with m = floor(n (1 - alpha)).

    ``default`` averages the m largest observations.  ``literal`` sums the
    order statistics from index m to n and divides by m, which keeps
    n - m + 1 terms; it is provided only for side-by-side comparison.
    A zero m is clamped to 1 and flagged in the diagnostics.
    """
    s = _as_sample(sample)
    _check_alpha(alpha)
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    m = tail_count(s.n, alpha)
    clamped = m < 1
    m = max(m, 1)
    if mode == "default":
        value = float(s.sorted_view[s.n - m:].mean())
    else:
        value = float(s.sorted_view[m - 1:].sum() / m)
    return RiskReport(
        value=value,
        method=f"empirical_cvar[{mode}]",
        alpha=alpha,
        inputs={"n": s.n, "m": m, "mode": mode},
        tolerance_used=0.0,
        diagnostics={"clamped": clamped},
    )


def bassett_identity_check(sample, alpha: float, mode: str = "default") -> float:
    """|(m^-1 min_xi sum rho(X_i - xi) + mean) - empirical_cvar(mode)|.

    With xi at X_{n:ceil(n alpha)} the left side equals the default
    estimator plus (mean - xi)(1 - n (1 - alpha) / m), so the residual is
    zero up to rounding exactly when n (1 - alpha) is an integer.
    """
    s = _as_sample(sample)
    _check_alpha(alpha)
    m = tail_count(s.n, alpha)
    if m < 1:
        raise DomainError(f"floor(n (1 - alpha)) = 0 for n={s.n}, alpha={alpha}")
    mini = quantile_loss_minimizer(s, alpha)
    rhs = mini.objective / m + float(s.values.mean())
    return abs(rhs - empirical_cvar(s, alpha, mode).value)
