"""Seeded simulation of the contamination model Z = X + sqrt(delta) V.

Every scenario seed is split into two sub-streams, one for X and one for V,
by appending a fixed offset to the seed entropy.  X draws therefore do not
depend on whether V is drawn at all, and reruns are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .choquet import cvar_quantile_integral
from .distributions import (
    ContinuousDistribution,
    NormalLaw,
    SmoothedRademacherLaw,
    UniformLaw,
    sample,
)
from .empirical import EmpiricalSample, empirical_cvar
from .errors import DomainError, UnsupportedDerivativeError
from .measurement_error import SMOOTHED_RADEMACHER_SHARE, V_LAWS, ExpansionFamily, member_cvar
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate

X_STREAM = 0
V_STREAM = 1

SeedLike = Union[int, Sequence[int]]

_SYMMETRY_GRID = np.linspace(0.01, 0.49, 25)


def error_law(name: str) -> ContinuousDistribution:
    """Standardised error law by name."""
    if name == "gaussian":
        return NormalLaw(0.0, 1.0)
    if name == "uniform":
        r = math.sqrt(3.0)
        return UniformLaw(-r, r)
    if name == "rademacher-smoothed":
        return SmoothedRademacherLaw(SMOOTHED_RADEMACHER_SHARE)
    raise DomainError(f"unknown error law {name!r}; expected one of {V_LAWS}")


def _entropy(seed: SeedLike) -> list[int]:
    parts = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    if not parts or any(int(p) < 0 for p in parts):
        raise DomainError(f"seed must be a non-negative integer or tuple of them, got {seed!r}")
    return [int(p) for p in parts]


def stream_seeds(seed: SeedLike) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """(X stream, V stream) derived from ``seed`` by the offsets X_STREAM, V_STREAM."""
    base = _entropy(seed)
    return (np.random.SeedSequence(base + [X_STREAM]), np.random.SeedSequence(base + [V_STREAM]))


def second_moment(law: ContinuousDistribution, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """E V^2 = int_0^inf 2x (S(x) + F(-x)) dx by quadrature."""
    eps = cfg.tail_truncation_probability
    hi = float(law.support[1]) if math.isfinite(law.support[1]) else float(law.upper_quantile(eps))
    lo = -float(law.support[0]) if math.isfinite(law.support[0]) else -float(law.quantile(eps))
    top = max(hi, lo, 0.0)
    if top == 0.0:
        return 0.0
    res = integrate(lambda x: 2.0 * x * (law.survival(x) + law.cdf(-x)), 0.0, top, cfg)
    return res.value


@dataclass(frozen=True)
class ContaminationScenario:
    x_law: ContinuousDistribution
    v_law: ContinuousDistribution
    delta: float
    n: int
    seed: SeedLike = 0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise DomainError(f"delta must be finite and >= 0, got {self.delta}")
        if int(self.n) < 1:
            raise DomainError(f"sample size must be >= 1, got {self.n}")
        _entropy(self.seed)
        lo = np.asarray(self.v_law.quantile(_SYMMETRY_GRID))
        hi = np.asarray(self.v_law.quantile(1.0 - _SYMMETRY_GRID))
        if np.max(np.abs(lo + hi) - 1e-8 * (1.0 + np.abs(hi))) > 0:
            raise DomainError(f"error law {self.v_law.describe()} is not symmetric about 0")
        var = second_moment(self.v_law)
        if abs(var - 1.0) > 1e-6:
            raise DomainError(f"error law must have unit variance, got {var:.9g}")

    def with_(self, **changes) -> "ContaminationScenario":
        fields = dict(x_law=self.x_law, v_law=self.v_law, delta=self.delta, n=self.n, seed=self.seed)
        fields.update(changes)
        return ContaminationScenario(**fields)


def sample_contaminated(scn: ContaminationScenario) -> EmpiricalSample:
    x_seed, v_seed = stream_seeds(scn.seed)
    z = sample(scn.x_law, scn.n, x_seed)
    if scn.delta > 0:
        z = z + math.sqrt(scn.delta) * sample(scn.v_law, scn.n, v_seed)
    return EmpiricalSample(z)


def reference_cvar(scn: ContaminationScenario, alpha: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """CVaR of the law of Z when it is available in closed form or by quadrature."""
    if scn.delta == 0:
        return cvar_quantile_integral(scn.x_law, alpha, cfg).value
    if isinstance(scn.x_law, NormalLaw) and isinstance(scn.v_law, NormalLaw):
        widened = NormalLaw(scn.x_law.mu, math.sqrt(scn.x_law.sigma**2 + scn.delta))
        return cvar_quantile_integral(widened, alpha, cfg).value
    raise DomainError("no reference CVaR for this contaminated law; pass one explicitly")


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    median_abs_error: float
    errors: tuple[float, ...] = field(repr=False)


@dataclass(frozen=True)
class ConsistencyTable:
    alpha: float
    reference: float
    rows: tuple[ConsistencyRow, ...]

    @property
    def nonincreasing(self) -> bool:
        med = [r.median_abs_error for r in self.rows]
        return all(b <= a for a, b in zip(med, med[1:]))


def replicate_seed(seed: SeedLike, n: int, rep: int) -> tuple[int, ...]:
    return tuple(_entropy(seed)) + (int(n), int(rep))


def consistency_experiment(
    scn: ContaminationScenario,
    alpha: float,
    n_grid: Sequence[int],
    repetitions: int,
    reference: Optional[float] = None,
) -> ConsistencyTable:
    """Median over seeded replicates of |empirical CVaR - reference| per n.

    Replicate r at size n uses seed (scn.seed..., n, r).  The reference
    defaults to the quadrature CVaR of the law of Z.
    """
    if repetitions < 1:
        raise DomainError(f"repetitions must be >= 1, got {repetitions}")
    ref = reference_cvar(scn, alpha) if reference is None else float(reference)
    rows = []
    for n in n_grid:
        errs = [
            abs(empirical_cvar(sample_contaminated(scn.with_(n=int(n), seed=replicate_seed(scn.seed, n, r))),
                               alpha).value - ref)
            for r in range(repetitions)
        ]
        rows.append(ConsistencyRow(int(n), float(np.median(errs)), tuple(errs)))
    return ConsistencyTable(alpha, ref, tuple(rows))


@dataclass(frozen=True)
class SweepRow:
    delta: float
    replicate: int
    empirical: float
    member: Optional[float]


def error_sensitivity_sweep(
    x_law: ContinuousDistribution,
    v_law: ContinuousDistribution,
    delta_grid: Sequence[float],
    alpha: float,
    n: int,
    seed: SeedLike = 0,
    repetitions: int = 1,
) -> list[SweepRow]:
    """Empirical CVaR of contaminated samples for each delta and replicate.

    ``member`` holds the expansion-member CVaR at (delta, E V^4) when the
    base law has density derivatives, else None.
    """
    deltas = [float(d) for d in delta_grid]
    kappa = float(v_law.fourth_moment()) if hasattr(v_law, "fourth_moment") else None
    companions = {}
    if kappa is not None and deltas:
        try:
            family = ExpansionFamily(x_law, max(deltas), max(kappa, 1.0))
            for d in deltas:
                companions[d] = member_cvar(family.member(d, kappa), family, alpha).value
        except (DomainError, UnsupportedDerivativeError):
            companions = {}
    rows = []
    for d in deltas:
        for r in range(repetitions):
            scn = ContaminationScenario(x_law, v_law, d, n, replicate_seed(seed, n, r))
            emp = empirical_cvar(sample_contaminated(scn), alpha).value
            rows.append(SweepRow(d, r, emp, companions.get(d)))
    return rows


def sweep_medians(rows: Sequence[SweepRow]) -> dict[float, float]:
    """Median empirical CVaR per delta."""
    by_delta: dict[float, list[float]] = {}
    for row in rows:
        by_delta.setdefault(row.delta, []).append(row.empirical)
    return {d: float(np.median(v)) for d, v in by_delta.items()}
