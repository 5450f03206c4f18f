"""Second-order expansion family for additive measurement error.

Observing Z = X + sqrt(delta) V instead of X perturbs the law of X to

    F*(z) = F0(z) + (delta / 2) f0'(z) + kappa (delta^2 / 24) f0'''(z)

with kappa = E V^4.  Sweeping (delta, kappa) over [0, Delta] x [1, K] gives a
family whose pointwise upper envelope is a capacity; the largest member CVaR
bounds the expected shortfall from above and the envelope CVaR from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .choquet import cvar_quantile_integral
from .distributions import ContinuousDistribution, NormalLaw, SmoothedRademacherLaw, invert_cdf
from .errors import DomainError, NumericalError, UnsupportedDerivativeError
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .report import RiskReport

V_LAWS = ("gaussian", "uniform", "rademacher-smoothed")
# share of Gaussian noise in the smoothed Rademacher error law
SMOOTHED_RADEMACHER_SHARE = 0.5


@dataclass(frozen=True)
class FamilyMember:
    delta: float
    kappa: float


@dataclass(frozen=True)
class ExpansionFamily:
    base: ContinuousDistribution
    Delta: float
    K: float

    def __post_init__(self):
        if not (math.isfinite(self.Delta) and self.Delta >= 0):
            raise DomainError(f"Delta must be finite and >= 0, got {self.Delta}")
        if not (math.isfinite(self.K) and self.K >= 1):
            raise DomainError(f"K must be finite and >= 1, got {self.K}")
        probe = self.base.mean if self.base.mean is not None else 0.0
        try:
            for order in (1, 2, 3, 4):
                self.base.pdf_derivative(probe, order)
        except UnsupportedDerivativeError as exc:
            raise DomainError(f"expansion family needs density derivatives 1..4: {exc}") from None

    def member(self, delta: float, kappa: float) -> FamilyMember:
        tiny = 1e-12 * max(1.0, self.Delta, self.K)
        if not (-tiny <= delta <= self.Delta + tiny and 1.0 - tiny <= kappa <= self.K + tiny):
            raise DomainError(
                f"member (delta={delta}, kappa={kappa}) outside [0, {self.Delta}] x [1, {self.K}]"
            )
        return FamilyMember(float(min(max(delta, 0.0), self.Delta)),
                            float(min(max(kappa, 1.0), self.K)))

    def corners(self) -> list[FamilyMember]:
        return [FamilyMember(d, k) for d in sorted({0.0, self.Delta}) for k in sorted({1.0, self.K})]

    def describe(self) -> str:
        return f"ExpansionFamily({self.base.describe()}, Delta={self.Delta}, K={self.K})"


@dataclass(frozen=True)
class GridSpec:
    delta_points: int = 41
    kappa_points: int = 11
    z_lo: Optional[float] = None
    z_hi: Optional[float] = None
    z_points: int = 2001

    def __post_init__(self):
        if min(self.delta_points, self.kappa_points, self.z_points) < 2:
            raise DomainError("every grid axis needs at least 2 points")

    def deltas(self, family: ExpansionFamily) -> np.ndarray:
        if family.Delta == 0:
            return np.zeros(1)
        return np.linspace(0.0, family.Delta, self.delta_points)

    def kappas(self, family: ExpansionFamily) -> np.ndarray:
        if family.K == 1:
            return np.ones(1)
        return np.linspace(1.0, family.K, self.kappa_points)

    def z(self, family: ExpansionFamily) -> np.ndarray:
        lo = self.z_lo if self.z_lo is not None else float(family.base.quantile(1e-10))
        hi = self.z_hi if self.z_hi is not None else float(family.base.quantile(1 - 1e-10))
        return np.linspace(lo, hi, self.z_points)


def _terms(family: ExpansionFamily, z, orders):
    return [family.base.pdf_derivative(z, o) for o in orders]


def expansion_cdf(member: FamilyMember, family: ExpansionFamily, z):
    """Raw (unclamped) F0 + (delta/2) f0' + kappa (delta^2/24) f0'''."""
    d1, d3 = _terms(family, z, (1, 3))
    d = member.delta
    return family.base.cdf(z) + 0.5 * d * d1 + member.kappa * d * d / 24.0 * d3


def expansion_survival(member: FamilyMember, family: ExpansionFamily, z):
    d1, d3 = _terms(family, z, (1, 3))
    d = member.delta
    return family.base.survival(z) - 0.5 * d * d1 - member.kappa * d * d / 24.0 * d3


def expansion_pdf(member: FamilyMember, family: ExpansionFamily, z):
    """Raw f0 + (delta/2) f0'' + kappa (delta^2/24) f0''''."""
    d2, d4 = _terms(family, z, (2, 4))
    d = member.delta
    return family.base.pdf(z) + 0.5 * d * d2 + member.kappa * d * d / 24.0 * d4


def clamp_probability(p):
    """Display-only clamp; root finding always uses the raw values."""
    return np.clip(p, 0.0, 1.0)


class ExpansionLaw(ContinuousDistribution):
    """One family member viewed as a distribution (for inversion and CVaR)."""

    def __init__(self, member: FamilyMember, family: ExpansionFamily):
        self.member = member
        self.family = family
        self.support = family.base.support

    def cdf(self, z):
        return expansion_cdf(self.member, self.family, z)

    def survival(self, z):
        return expansion_survival(self.member, self.family, z)

    def pdf(self, z):
        return expansion_pdf(self.member, self.family, z)

    @property
    def mean(self):
        return self.family.base.mean

    def _checked(self, x):
        if np.any(self.pdf(x) <= 0):
            raise NumericalError(
                f"{self.describe()} is not strictly increasing near its quantiles; "
                "run validity_check first"
            )
        return x

    def quantile(self, t):
        guess = self.family.base.quantile(t)
        return self._checked(invert_cdf(self.cdf, t, pdf=self.pdf, sf=self.survival,
                                        guess=guess, support=self.support))

    def upper_quantile(self, u):
        guess = self.family.base.upper_quantile(u)
        return self._checked(invert_cdf(self.cdf, None, pdf=self.pdf, sf=self.survival,
                                        upper_tail=u, guess=guess, support=self.support))

    def describe(self) -> str:
        return (f"ExpansionLaw({self.family.base.describe()}, delta={self.member.delta}, "
                f"kappa={self.member.kappa})")


@dataclass
class ValidityReport:
    valid: bool
    Delta: float
    K: float
    violations: list = field(default_factory=list)
    max_valid_Delta: Optional[float] = None
    max_valid_K: Optional[float] = None

    def first_violation(self):
        return self.violations[0] if self.violations else None


def _member_violations(family, delta, kappa, z, tol):
    member = FamilyMember(delta, kappa)
    out = []
    pdf = expansion_pdf(member, family, z)
    cdf = expansion_cdf(member, family, z)
    if pdf.min() < -tol:
        i = int(np.argmin(pdf))
        out.append(("negative_density", delta, kappa, float(z[i]), float(pdf[i])))
    step = np.diff(cdf)
    if step.size and step.min() < -tol:
        i = int(np.argmin(step))
        out.append(("decreasing_cdf", delta, kappa, float(z[i]), float(step[i])))
    if cdf.min() < -tol or cdf.max() > 1 + tol:
        i = int(np.argmax(np.maximum(-cdf, cdf - 1)))
        out.append(("cdf_out_of_range", delta, kappa, float(z[i]), float(cdf[i])))
    return out


def validity_check(family: ExpansionFamily, grid: GridSpec = GridSpec(), tol: float = 1e-12) -> ValidityReport:
    """Check density >= 0 and a monotone CDF in [0, 1] across the family.

    Every member is affine in kappa, so kappa in {1, K} suffices; delta runs
    over the full delta grid because members are quadratic in delta.  When
    the box fails, the largest grid Delta (at K) and grid K (at Delta) whose
    sub-boxes pass are reported.
    """
    z = grid.z(family)
    deltas = grid.deltas(family)
    kappas = grid.kappas(family)
    # bad[i, j]: member (deltas[i], kappas[j]) violates something
    bad = np.zeros((deltas.size, kappas.size), dtype=bool)
    violations = []
    ends = sorted({0, kappas.size - 1})
    for i, d in enumerate(deltas):
        for j in ends:
            found = _member_violations(family, float(d), float(kappas[j]), z, tol)
            bad[i, j] = bool(found)
            violations.extend(found)
        if not bad[i, ends].any():
            continue  # interior kappa members are convex combinations of the ends
        for j in range(1, kappas.size - 1):
            found = _member_violations(family, float(d), float(kappas[j]), z, tol)
            bad[i, j] = bool(found)
            violations.extend(found)
    valid = not bad.any()
    report = ValidityReport(valid, family.Delta, family.K, violations)
    if not valid:
        ok_rows = ~bad[:, -1]
        prefix = np.cumprod(ok_rows).astype(bool)
        report.max_valid_Delta = float(deltas[prefix][-1]) if prefix.any() else None
        ok_cols = ~bad.any(axis=0)
        prefix = np.cumprod(ok_cols).astype(bool)
        report.max_valid_K = float(kappas[prefix][-1]) if prefix.any() else None
    return report


def _best_delta(a, b, Delta):
    """argmax over delta in [0, Delta] of a delta + b delta^2, elementwise."""
    cand = [np.zeros_like(a), np.full_like(a, Delta)]
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.where(b < 0, -a / (2.0 * b), 0.0)
    cand.append(np.clip(np.nan_to_num(vertex), 0.0, Delta))
    vals = np.stack([a * c + b * c * c for c in cand])
    idx = np.argmax(vals, axis=0)
    return np.choose(idx, cand), vals.max(axis=0)


@dataclass(frozen=True)
class DeviationReport:
    value: float
    delta: float
    kappa: float
    z: float
    reference_bound: float
    bound_constant: float
    bound_constant_label: str = "C := sup_z |f0''''(z)| (stand-in constant)"


def sup_density_deviation(family: ExpansionFamily, grid: GridSpec = GridSpec()) -> DeviationReport:
    """max over the z grid and the (delta, kappa) box of |f*_{delta,kappa} - f0|.

    At fixed z the deviation is a delta + b delta^2 with b linear in kappa,
    so the sup over the box is found exactly from the kappa ends and the
    interior stationary delta.  The report also evaluates C K Delta^2 / 12
    with C = sup |f0''''| for comparison only.
    """
    z = grid.z(family)
    d2, d4 = _terms(family, z, (2, 4))
    best = (-1.0, 0.0, 1.0, float(z[0]))
    for kappa in sorted({1.0, family.K}):
        a = 0.5 * d2
        b = kappa * d4 / 24.0
        for sign in (1.0, -1.0):
            delta, val = _best_delta(sign * a, sign * b, family.Delta)
            i = int(np.argmax(val))
            if val[i] > best[0]:
                best = (float(val[i]), float(delta[i]), kappa, float(z[i]))
    c = float(np.max(np.abs(d4)))
    value = max(best[0], 0.0)
    return DeviationReport(value, best[1], best[2], best[3], c * family.K / 12.0 * family.Delta**2, c)


def member_cvar(
    member: FamilyMember,
    family: ExpansionFamily,
    alpha: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> RiskReport:
    law = ExpansionLaw(member, family)
    rep = cvar_quantile_integral(law, alpha, cfg)
    return RiskReport(
        value=rep.value,
        method="member_cvar",
        alpha=alpha,
        inputs={"family": family.describe(), "delta": member.delta, "kappa": member.kappa},
        tolerance_used=rep.tolerance_used,
        diagnostics=rep.diagnostics,
    )


def capacity_upper_bound(
    family: ExpansionFamily,
    alpha: float,
    grid: GridSpec = GridSpec(),
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    check: bool = True,
) -> RiskReport:
    """sup of member CVaR over [0, Delta] x [1, K].

    Exhaustive grid search followed by two passes of local refinement at half
    and then quarter grid spacing around the incumbent.  Ties go to the
    smaller delta, then the smaller kappa.
    """
    if check:
        validity = validity_check(family, grid)
        if not validity.valid:
            raise DomainError(f"family is not a valid distribution family: {validity.first_violation()}")
    cache: dict[tuple[float, float], float] = {}

    def value(d, k):
        d, k = float(d), float(k)
        if d == 0.0:
            k = 1.0  # kappa is inert without perturbation
        key = (d, k)
        if key not in cache:
            cache[key] = member_cvar(family.member(d, k), family, alpha, cfg).value
        return cache[key]

    deltas, kappas = grid.deltas(family), grid.kappas(family)
    best = (-math.inf, 0.0, 1.0)
    for d in deltas:
        for k in kappas:
            v = value(d, k)
            if v > best[0]:
                best = (v, float(d), float(k))

    h_d = deltas[1] - deltas[0] if deltas.size > 1 else 0.0
    h_k = kappas[1] - kappas[0] if kappas.size > 1 else 0.0
    for level in (0.5, 0.25):
        _, d0, k0 = best
        local = []
        for dd in (-1, 0, 1):
            for dk in (-1, 0, 1):
                d = min(max(d0 + dd * level * h_d, 0.0), family.Delta)
                k = min(max(k0 + dk * level * h_k, 1.0), family.K)
                local.append((d, k))
        for d, k in sorted(set(local)):
            v = value(d, k)
            if v > best[0]:
                best = (v, d, k)

    v, d_star, k_star = best
    return RiskReport(
        value=v,
        method="capacity_upper_bound",
        alpha=alpha,
        inputs={"family": family.describe(), "Delta": family.Delta, "K": family.K},
        tolerance_used=cfg.tolerance_for(v) / (1.0 - alpha),
        diagnostics={"argmax_delta": d_star, "argmax_kappa": k_star, "evaluations": len(cache)},
    )


def _envelope_parts(family, z):
    """Coefficients of the member CDF as F0 + a delta + kappa c delta^2."""
    d1, d3 = _terms(family, z, (1, 3))
    return 0.5 * d1, d3 / 24.0


def envelope_argmax(family: ExpansionFamily, z):
    """(delta, kappa) maximising the member CDF at each z, exactly."""
    z = np.asarray(z, dtype=float)
    a, c = _envelope_parts(family, z)
    best_val = np.full(z.shape, -np.inf)
    best_d = np.zeros(z.shape)
    best_k = np.ones(z.shape)
    for kappa in sorted({1.0, family.K}):
        d, val = _best_delta(a, kappa * c, family.Delta)
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_d = np.where(better, d, best_d)
        best_k = np.where(better, kappa, best_k)
    return best_d, best_k, best_val


def envelope_cdf(family: ExpansionFamily, z):
    """Capacity of (-inf, z]: the sup of member CDFs over the whole box."""
    _, _, gain = envelope_argmax(family, z)
    return family.base.cdf(z) + gain


class EnvelopeLaw(ContinuousDistribution):
    """The pointwise-sup CDF treated as a distribution function."""

    def __init__(self, family: ExpansionFamily):
        self.family = family
        self.support = family.base.support

    def cdf(self, z):
        return envelope_cdf(self.family, z)

    def survival(self, z):
        _, _, gain = envelope_argmax(self.family, z)
        return self.family.base.survival(z) - gain

    def pdf(self, z):
        # envelope theorem: derivative of the active member
        d, k, _ = envelope_argmax(self.family, z)
        d2, d4 = _terms(self.family, z, (2, 4))
        return self.family.base.pdf(z) + 0.5 * d * d2 + k * d * d / 24.0 * d4

    @property
    def mean(self):
        return None

    def quantile(self, t):
        return invert_cdf(self.cdf, t, pdf=self.pdf, sf=self.survival,
                          guess=self.family.base.quantile(t), support=self.support)

    def upper_quantile(self, u):
        return invert_cdf(self.cdf, None, pdf=self.pdf, sf=self.survival, upper_tail=u,
                          guess=self.family.base.upper_quantile(u), support=self.support)

    def describe(self) -> str:
        return f"EnvelopeLaw({self.family.describe()})"


def envelope_cvar(
    family: ExpansionFamily,
    alpha: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> RiskReport:
    rep = cvar_quantile_integral(EnvelopeLaw(family), alpha, cfg)
    return RiskReport(
        value=rep.value,
        method="envelope_cvar",
        alpha=alpha,
        inputs={"family": family.describe(), "Delta": family.Delta, "K": family.K},
        tolerance_used=rep.tolerance_used,
        diagnostics=rep.diagnostics,
    )


def error_law_kurtosis(v_law: str) -> float:
    if v_law == "gaussian":
        return 3.0
    if v_law == "uniform":
        return 9.0 / 5.0
    if v_law == "rademacher-smoothed":
        return SmoothedRademacherLaw(SMOOTHED_RADEMACHER_SHARE).fourth_moment()
    raise DomainError(f"unknown error law {v_law!r}; expected one of {V_LAWS}")


def contaminated_cdf(base: NormalLaw, v_law: str, delta: float, z):
    """Exact CDF of X + sqrt(delta) V for a normal X."""
    z = np.asarray(z, dtype=float)
    if delta == 0:
        return base.cdf(z)
    if v_law == "gaussian":
        return NormalLaw(base.mu, math.sqrt(base.sigma**2 + delta)).cdf(z)
    if v_law == "uniform":
        # average of F over a window of half-width sqrt(3 delta)
        a = math.sqrt(3.0 * delta)
        return (base.lower_partial(z + a) - base.lower_partial(z - a)) / (2.0 * a)
    if v_law == "rademacher-smoothed":
        s = SMOOTHED_RADEMACHER_SHARE
        shift = math.sqrt(delta * (1.0 - s))
        widened = NormalLaw(base.mu, math.sqrt(base.sigma**2 + delta * s))
        return 0.5 * (widened.cdf(z - shift) + widened.cdf(z + shift))
    raise DomainError(f"unknown error law {v_law!r}; expected one of {V_LAWS}")


@dataclass(frozen=True)
class LemmaErrorRow:
    delta: float
    kappa: float
    max_error: float
    z_at_max: float


def lemma_expansion_error(
    base: NormalLaw,
    v_law: str,
    deltas: float | Iterable[float],
    z_set: Sequence[float],
) -> list[LemmaErrorRow]:
    """Max |expansion CDF - exact contaminated CDF| over ``z_set``, per delta."""
    kappa = error_law_kurtosis(v_law)
    z = np.asarray(z_set, dtype=float)
    rows = []
    for delta in np.atleast_1d(np.asarray(deltas, dtype=float)):
        family = ExpansionFamily(base, float(delta), max(kappa, 1.0))
        approx = expansion_cdf(FamilyMember(float(delta), kappa), family, z)
        err = np.abs(approx - contaminated_cdf(base, v_law, float(delta), z))
        i = int(np.argmax(err))
        rows.append(LemmaErrorRow(float(delta), kappa, float(err[i]), float(z[i])))
    return rows


TABLE1_DELTAS = (0.0, 0.05, 0.10, 0.15, 0.20)
TABLE1_KS = (1.0, 1.1, 1.2)


def table1(
    alpha: float = 0.96,
    deltas: Sequence[float] = TABLE1_DELTAS,
    Ks: Sequence[float] = TABLE1_KS,
    base: ContinuousDistribution = NormalLaw(),
    grid: GridSpec = GridSpec(),
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> list[RiskReport]:
    """Upper CVaR bounds on the Delta x K grid, row-major in Delta."""
    return [
        capacity_upper_bound(ExpansionFamily(base, d, k), alpha, grid, cfg)
        for d in deltas
        for k in Ks
    ]
