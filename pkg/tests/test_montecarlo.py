import math

import numpy as np
import pytest

from shortfall.distributions import ChiSquareLaw, NormalLaw, PointMass, UniformLaw, sample
from shortfall.errors import DomainError
from shortfall.montecarlo import (
    ContaminationScenario,
    consistency_experiment,
    error_law,
    error_sensitivity_sweep,
    sample_contaminated,
    second_moment,
    stream_seeds,
    sweep_medians,
)

GAUSS = error_law("gaussian")


def scenario(**kw):
    base = dict(x_law=NormalLaw(), v_law=GAUSS, delta=0.0, n=1000, seed=1)
    base.update(kw)
    return ContaminationScenario(**base)


@pytest.mark.parametrize("name", ["gaussian", "uniform", "rademacher-smoothed"])
def test_error_laws_are_standardised(name):
    law = error_law(name)
    assert second_moment(law) == pytest.approx(1.0, abs=1e-6)
    t = np.linspace(0.01, 0.49, 25)
    assert np.allclose(law.quantile(t), -law.quantile(1 - t), atol=1e-10)


def test_scenario_validation():
    with pytest.raises(DomainError):
        scenario(v_law=UniformLaw(-1, 1))  # variance 1/3
    with pytest.raises(DomainError):
        scenario(v_law=ChiSquareLaw(1))  # not symmetric
    with pytest.raises(DomainError):
        scenario(delta=-0.1)
    with pytest.raises(DomainError):
        scenario(n=0)
    with pytest.raises(DomainError):
        scenario(seed=-3)


def test_zero_delta_is_x_stream():
    x_seed, _ = stream_seeds(1)
    assert np.array_equal(sample_contaminated(scenario()).values, sample(NormalLaw(), 1000, x_seed))


def test_variance_inflation():
    z = sample_contaminated(scenario(delta=0.21, n=10**6, seed=9)).values
    assert abs(z.var() - 1.21) <= 0.01


def test_reproducible():
    a = sample_contaminated(scenario(delta=0.3, seed=(4, 2)))
    b = sample_contaminated(scenario(delta=0.3, seed=(4, 2)))
    assert np.array_equal(a.values, b.values)
    c = sample_contaminated(scenario(delta=0.3, seed=(4, 3)))
    assert not np.array_equal(a.values, c.values)


def test_streams_independent():
    n = 10**5
    xs, vs = stream_seeds(17)
    x, v = sample(NormalLaw(), n, xs), sample(GAUSS, n, vs)
    assert abs(np.corrcoef(x, v)[0, 1]) <= 3 / math.sqrt(n)


def test_consistency_normal():
    tab = consistency_experiment(scenario(), 0.96, [10**3, 10**4, 10**5, 10**6], 20)
    assert tab.reference == pytest.approx(2.1543, abs=1e-4)
    assert tab.rows[-1].median_abs_error <= 0.01
    assert tab.nonincreasing


def test_consistency_chi_square():
    tab = consistency_experiment(scenario(x_law=ChiSquareLaw(1)), 0.9, [10**6], 5)
    assert tab.reference == pytest.approx(4.39, abs=0.005)
    assert tab.rows[0].median_abs_error <= 0.02


def test_consistency_constant_probe():
    tab = consistency_experiment(scenario(x_law=PointMass(3.0)), 0.9, [10, 100, 1000], 3)
    assert all(r.median_abs_error == 0.0 for r in tab.rows)


def test_sweep_baseline_and_growth():
    rows = error_sensitivity_sweep(NormalLaw(), GAUSS, [0.0, 0.05, 0.1, 0.2], 0.96, 10**6, seed=3,
                                   repetitions=3)
    med = sweep_medians(rows)
    base = consistency_experiment(scenario(seed=3), 0.96, [10**6], 3)
    base_values = sorted(abs(e) for e in base.rows[0].errors)
    assert abs(med[0.0] - base.reference) == pytest.approx(base_values[1], abs=1e-12)
    assert abs(med[0.05] - 2.207) <= 0.02
    assert abs(med[0.05] - 2.1543443506 * math.sqrt(1.05)) <= 0.02
    values = [med[d] for d in (0.0, 0.05, 0.1, 0.2)]
    assert values == sorted(values)
    companion = {r.delta: r.member for r in rows}
    assert companion[0.0] == pytest.approx(2.1543443506, rel=1e-9)


def test_sweep_without_derivatives_has_no_companion():
    rows = error_sensitivity_sweep(ChiSquareLaw(1), GAUSS, [0.0, 0.1], 0.9, 1000)
    assert all(r.member is None for r in rows)
