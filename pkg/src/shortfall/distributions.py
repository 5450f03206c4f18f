"""Univariate laws with closed-form density derivatives and robust quantile inversion.

All methods are vectorised over their real argument and return numpy scalars
for scalar input.  Laws are frozen dataclasses, so they can be shared freely.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError, UnsupportedDerivativeError

INVERSION_TOL = 1e-12
_SQRT2PI = math.sqrt(2.0 * math.pi)

Seed = Union[int, Sequence[int], np.random.SeedSequence]


def _check_probability(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~((t > 0.0) & (t < 1.0))):
        raise DomainError("probability arguments must lie strictly inside (0, 1)")
    return t


def invert_cdf(
    cdf: Callable[[np.ndarray], np.ndarray],
    t,
    *,
    pdf: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    sf: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    guess=0.0,
    support: tuple[float, float] = (-math.inf, math.inf),
    step: float = 1.0,
    tol: float = INVERSION_TOL,
    max_iter: int = 200,
    upper_tail=None,
):
    """Generalised inverse ``inf{z : cdf(z) >= t}`` of a continuous CDF.

    The bracket starts at ``guess -/+ max(step, 1e-6 |guess|)`` and doubles its distance from
    ``guess`` until it straddles ``t``; it is then shrunk by safeguarded Newton
    steps (when ``pdf`` is given) or secant steps, falling back to bisection
    whenever a step leaves the bracket or fails to halve the residual.
    Iteration stops once ``|cdf(z) - t| <= min(tol, 1e-10 min(t, 1 - t))`` or
    the bracket collapses to a few ulps.  With ``sf`` the residual for
    ``t > 1/2`` is computed on the survival scale; passing ``upper_tail``
    (``1 - t``, with ``t`` ignored) then reaches tail masses below 2^-53.
    """
    if upper_tail is not None:
        if sf is None:
            raise DomainError("upper_tail inversion needs a survival function")
        ut = np.atleast_1d(_check_probability(upper_tail))
        scalar = np.ndim(upper_tail) == 0
        t = 1.0 - ut
    else:
        t = _check_probability(t)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        ut = 1.0 - t
    upper = (ut < 0.5) if sf is not None else np.zeros(t.shape, dtype=bool)

    def resid(xv, ix):
        r = np.empty_like(xv)
        up = upper[ix]
        if (~up).any():
            r[~up] = cdf(xv[~up]) - t[ix][~up]
        if up.any():
            r[up] = ut[ix][up] - sf(xv[up])
        return r

    s_lo, s_hi = support
    everything = np.arange(t.size)
    x0 = np.broadcast_to(np.asarray(guess, dtype=float), t.shape).copy()
    x0 = np.clip(x0, s_lo, s_hi)

    # a fixed step is below one ulp of a far-tail guess, so scale it
    width = np.maximum(step, 1e-6 * np.abs(x0))
    lo = np.maximum(x0 - width, s_lo)
    hi = np.minimum(x0 + width, s_hi)
    f_lo = resid(lo, everything)
    f_hi = resid(hi, everything)
    for _ in range(1100):
        grow_lo = np.flatnonzero((f_lo >= 0) & (lo > s_lo))
        grow_hi = np.flatnonzero((f_hi < 0) & (hi < s_hi))
        if grow_lo.size == 0 and grow_hi.size == 0:
            break
        if grow_lo.size:
            lo[grow_lo] = np.maximum(x0[grow_lo] - 2.0 * (x0[grow_lo] - lo[grow_lo]), s_lo)
            f_lo[grow_lo] = resid(lo[grow_lo], grow_lo)
        if grow_hi.size:
            hi[grow_hi] = np.minimum(x0[grow_hi] + 2.0 * (hi[grow_hi] - x0[grow_hi]), s_hi)
            f_hi[grow_hi] = resid(hi[grow_hi], grow_hi)
    # at a finite lower support end the CDF itself may already reach t
    at_lo = f_lo >= 0
    unbracketed = (f_hi < 0) | (at_lo & (lo > s_lo))
    if unbracketed.any():
        i = int(np.flatnonzero(unbracketed)[0])
        raise NumericalError(
            f"could not bracket quantile t={t[i]!r}",
            bracket=(float(lo[i]), float(hi[i])),
        )

    x = np.where((x0 > lo) & (x0 < hi), x0, 0.5 * (lo + hi))
    fx = resid(x, everything)
    x = np.where(at_lo, lo, x)
    fx = np.where(at_lo, 0.0, fx)
    eps4 = 4.0 * np.finfo(float).eps
    # absolute tolerance, tightened in the tails so extreme quantiles keep relative accuracy
    tol = np.minimum(tol, 1e-10 * np.minimum(t, ut))
    active = np.flatnonzero(~at_lo)
    for _ in range(max_iter):
        xa, fa, la, ha = x[active], fx[active], lo[active], hi[active]
        done = (np.abs(fa) <= tol[active]) | (ha - la <= eps4 * np.maximum(np.abs(la), np.abs(ha)))
        active, xa, fa, la, ha = active[~done], xa[~done], fa[~done], la[~done], ha[~done]
        if active.size == 0:
            break
        neg = fa < 0
        la = np.where(neg, xa, la)
        ha = np.where(neg, ha, xa)
        f_lo[active] = np.where(neg, fa, f_lo[active])
        f_hi[active] = np.where(neg, f_hi[active], fa)

        with np.errstate(divide="ignore", invalid="ignore"):
            if pdf is not None:
                cand = xa - fa / pdf(xa)
            else:
                fl, fh = f_lo[active], f_hi[active]
                cand = la - fl * (ha - la) / (fh - fl)
        bad = ~np.isfinite(cand) | (cand <= la) | (cand >= ha)
        cand = np.where(bad, 0.5 * (la + ha), cand)
        f_cand = resid(cand, active)
        # keep the fast step only if it at least halved the residual
        slow = ~bad & (np.abs(f_cand) > 0.5 * np.abs(fa))
        if slow.any():
            la = np.where(slow & (f_cand < 0), cand, la)
            ha = np.where(slow & (f_cand >= 0), cand, ha)
            mid = 0.5 * (la[slow] + ha[slow])
            cand[slow] = mid
            f_cand[slow] = resid(mid, active[slow])
        x[active], fx[active], lo[active], hi[active] = cand, f_cand, la, ha
    else:
        pending = (np.abs(fx) > tol) & (hi - lo > eps4 * np.maximum(np.abs(lo), np.abs(hi)))
        if pending.any():
            i = int(np.flatnonzero(pending)[0])
            raise NumericalError(
                f"quantile inversion did not converge for t={t[i]!r}",
                bracket=(float(lo[i]), float(hi[i])),
            )
    return x[0] if scalar else x


class ContinuousDistribution(ABC):
    """Capability set of a univariate law.

    Subclasses provide ``cdf`` and ``pdf``; ``quantile`` falls back to
    bracketed inversion and ``pdf_derivative`` rejects unless overridden.
    ``stop_loss(h) = int_h^inf (1 - F)`` and ``lower_partial(h) = int_-inf^h F``
    are optional and return ``None`` when no closed form is known.
    """

    support: tuple[float, float] = (-math.inf, math.inf)
    # Pareto index of the right tail, None for laws with all moments
    tail_index: Optional[float] = None

    @abstractmethod
    def cdf(self, z): ...

    @abstractmethod
    def pdf(self, z): ...

    @property
    @abstractmethod
    def mean(self) -> Optional[float]: ...

    def pdf_derivative(self, z, order: int):
        raise UnsupportedDerivativeError(
            f"{type(self).__name__} has no closed-form density derivatives"
        )

    def quantile(self, t):
        guess = self.mean if self.mean is not None and math.isfinite(self.mean) else 0.0
        return invert_cdf(self.cdf, t, guess=guess, support=self.support)

    def survival(self, z):
        return 1.0 - self.cdf(z)

    def upper_quantile(self, u):
        """Quantile at upper-tail mass ``u``, i.e. ``quantile(1 - u)``.

        The generic version floors ``u`` at 2^-53 so that ``1 - u < 1``;
        laws whose tail matters below that level override it.
        """
        u = _check_probability(u)
        return self.quantile(1.0 - np.maximum(u, 2.0**-53))

    def stop_loss(self, h) -> Optional[float]:
        return None

    def lower_partial(self, h) -> Optional[float]:
        return None

    def describe(self) -> str:
        return repr(self)


def hermite_he(n: int, u):
    """Probabilists' Hermite polynomial He_n(u) by the three-term recursion."""
    u = np.asarray(u, dtype=float)
    prev, cur = np.ones_like(u), u
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, u * cur - k * prev
    return cur


@dataclass(frozen=True)
class NormalLaw(ContinuousDistribution):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def _u(self, z):
        return (np.asarray(z, dtype=float) - self.mu) / self.sigma

    def cdf(self, z):
        return special.ndtr(self._u(z))

    def survival(self, z):
        return special.ndtr(-self._u(z))

    def pdf(self, z):
        u = self._u(z)
        return np.exp(-0.5 * u * u) / (_SQRT2PI * self.sigma)

    def pdf_derivative(self, z, order: int):
        """n-th derivative (-1)^n He_n(u) pdf(z) / sigma^n, u standardised."""
        if order not in (1, 2, 3, 4):
            raise DomainError(f"derivative order must be 1..4, got {order}")
        u = self._u(z)
        sign = -1.0 if order % 2 else 1.0
        return sign * hermite_he(order, u) * self.pdf(z) / self.sigma**order

    def quantile(self, t):
        return self.mu + self.sigma * special.ndtri(_check_probability(t))

    def upper_quantile(self, u):
        return self.mu - self.sigma * special.ndtri(_check_probability(u))

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.sigma**2

    def fourth_moment(self) -> float:
        m, s2 = self.mu, self.sigma**2
        return m**4 + 6 * m * m * s2 + 3 * s2 * s2

    def stop_loss(self, h):
        u = self._u(h)
        return self.sigma * (np.exp(-0.5 * u * u) / _SQRT2PI - u * special.ndtr(-u))

    def lower_partial(self, h):
        u = self._u(h)
        return self.sigma * (u * special.ndtr(u) + np.exp(-0.5 * u * u) / _SQRT2PI)


@dataclass(frozen=True)
class ChiSquareLaw(ContinuousDistribution):
    k: int = 1
    support = (0.0, math.inf)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"degrees of freedom must be a positive integer, got {self.k}")

    def cdf(self, z):
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        if self.k == 1:
            # P(1/2, x) = erf(sqrt(x)); much faster than the generic routine
            return special.erf(np.sqrt(0.5 * z))
        return special.gammainc(0.5 * self.k, 0.5 * z)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        h = 0.5 * self.k
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (h - 1.0) * np.log(z) - 0.5 * z - h * math.log(2.0) - special.gammaln(h)
            out = np.where(z > 0, np.exp(logp), 0.0)
        if self.k == 2:
            out = np.where(z == 0, 0.5, out)
        elif self.k == 1:
            out = np.where(z == 0, np.inf, out)
        return out

    def _guess(self, t):
        # small-t power law below the Wilson-Hilferty range
        k = self.k
        z = special.ndtri(t)
        wh = k * (1.0 - 2.0 / (9.0 * k) + z * math.sqrt(2.0 / (9.0 * k))) ** 3
        low = 2.0 * (t * math.gamma(0.5 * k + 1.0)) ** (2.0 / k)
        return np.where((t < 0.1) | (wh <= 0), low, wh)

    def quantile(self, t):
        t = _check_probability(t)
        return invert_cdf(
            self.cdf, t, pdf=self.pdf, sf=self.survival, guess=self._guess(t), support=self.support
        )

    def upper_quantile(self, u):
        u = _check_probability(u)
        return invert_cdf(
            self.cdf, None, pdf=self.pdf, sf=self.survival, upper_tail=u,
            guess=self._guess(np.minimum(1.0 - u, 0.5)) + 2.0 * np.log1p(1.0 / u), support=self.support,
        )

    @property
    def mean(self) -> float:
        return float(self.k)

    def survival(self, z):
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        if self.k == 1:
            return special.erfc(np.sqrt(0.5 * z))
        return special.gammaincc(0.5 * self.k, 0.5 * z)

    def stop_loss(self, h):
        # E(X - h)+ using x f_k(x) = k f_{k+2}(x)
        h = np.asarray(h, dtype=float)
        tail_mean = self.k * ChiSquareLaw(self.k + 2).survival(h)
        return np.where(h > 0, tail_mean - h * self.survival(h), self.k - h)

    def lower_partial(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h > 0, h - self.k + self.stop_loss(h), 0.0)


@dataclass(frozen=True)
class UniformLaw(ContinuousDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DomainError("UniformLaw needs hi > lo")

    @property
    def support(self):
        return (self.lo, self.hi)

    def cdf(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.where((z >= self.lo) & (z <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def quantile(self, t):
        return self.lo + (self.hi - self.lo) * _check_probability(t)

    def upper_quantile(self, u):
        return self.hi - (self.hi - self.lo) * _check_probability(u)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def fourth_moment(self) -> float:
        a, b = self.lo, self.hi
        return (b**5 - a**5) / (5.0 * (b - a))

    def stop_loss(self, h):
        h = np.clip(np.asarray(h, dtype=float), None, self.hi)
        inside = (self.hi - np.maximum(h, self.lo)) ** 2 / (2.0 * (self.hi - self.lo))
        return inside + np.maximum(self.lo - h, 0.0)

    def lower_partial(self, h):
        h = np.clip(np.asarray(h, dtype=float), self.lo, None)
        inside = (np.minimum(h, self.hi) - self.lo) ** 2 / (2.0 * (self.hi - self.lo))
        return inside + np.maximum(h - self.hi, 0.0)


@dataclass(frozen=True)
class PointMass(ContinuousDistribution):
    """Degenerate law at ``c``; a probe for estimators, not a continuous law."""

    c: float = 0.0

    @property
    def support(self):
        return (self.c, self.c)

    def cdf(self, z):
        return np.where(np.asarray(z, dtype=float) >= self.c, 1.0, 0.0)

    def pdf(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def quantile(self, t):
        return np.full_like(_check_probability(t), self.c)[()]

    @property
    def mean(self) -> float:
        return self.c

    @property
    def variance(self) -> float:
        return 0.0

    def stop_loss(self, h):
        return np.maximum(self.c - np.asarray(h, dtype=float), 0.0)

    def lower_partial(self, h):
        return np.maximum(np.asarray(h, dtype=float) - self.c, 0.0)


@dataclass(frozen=True)
class SmoothedRademacherLaw(ContinuousDistribution):
    """sqrt(1 - s) R + sqrt(s) W with R = +-1 fair and W standard normal.

    Mean 0, variance 1, E V^4 = (1-s)^2 + 6 s (1-s) + 3 s^2.
    """

    noise_share: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.noise_share <= 1.0):
            raise DomainError("noise_share must lie in (0, 1]")

    @property
    def _a(self):
        return math.sqrt(1.0 - self.noise_share)

    @property
    def _b(self):
        return math.sqrt(self.noise_share)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        a, b = self._a, self._b
        return 0.5 * (special.ndtr((z - a) / b) + special.ndtr((z + a) / b))

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        a, b = self._a, self._b
        return 0.5 * (np.exp(-0.5 * ((z - a) / b) ** 2) + np.exp(-0.5 * ((z + a) / b) ** 2)) / (_SQRT2PI * b)

    def quantile(self, t):
        return invert_cdf(self.cdf, t, pdf=self.pdf, guess=0.0)

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return 1.0

    def fourth_moment(self) -> float:
        a2, b2 = 1.0 - self.noise_share, self.noise_share
        return a2 * a2 + 6.0 * a2 * b2 + 3.0 * b2 * b2


@dataclass(frozen=True)
class AffineLaw(ContinuousDistribution):
    """Law of ``shift + scale * X`` for ``scale > 0``."""

    base: ContinuousDistribution
    shift: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("AffineLaw needs a positive scale")

    @property
    def support(self):
        lo, hi = self.base.support
        return (self.shift + self.scale * lo, self.shift + self.scale * hi)

    @property
    def tail_index(self):
        return self.base.tail_index

    def _x(self, z):
        return (np.asarray(z, dtype=float) - self.shift) / self.scale

    def cdf(self, z):
        return self.base.cdf(self._x(z))

    def pdf(self, z):
        return self.base.pdf(self._x(z)) / self.scale

    def quantile(self, t):
        return self.shift + self.scale * self.base.quantile(t)

    def upper_quantile(self, u):
        return self.shift + self.scale * self.base.upper_quantile(u)

    @property
    def mean(self):
        m = self.base.mean
        return None if m is None else self.shift + self.scale * m

    def stop_loss(self, h):
        sl = self.base.stop_loss(self._x(h))
        return None if sl is None else self.scale * sl

    def lower_partial(self, h):
        lp = self.base.lower_partial(self._x(h))
        return None if lp is None else self.scale * lp


def quantile(dist: ContinuousDistribution, t):
    return dist.quantile(t)


def uniform_draws(n: int, seed: Seed) -> np.ndarray:
    """n uniforms strictly inside (0, 1) on the 2^-52 midpoint lattice."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 2**52, size=n, dtype=np.int64) + 0.5) / 2.0**52


def sample(dist: ContinuousDistribution, n: int, seed: Seed) -> np.ndarray:
    """Inverse-transform draws; identical ``seed`` gives identical output."""
    return np.asarray(dist.quantile(uniform_draws(n, seed)), dtype=float)
