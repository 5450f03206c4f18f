import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sci
from scipy import stats

from shortfall.choquet import (
    CvarDistortion,
    FunctionDistortion,
    IdentityDistortion,
    choquet_expected_loss,
    coherence_probe,
    cvar_quantile_integral,
)
from shortfall.distributions import AffineLaw, ChiSquareLaw, NormalLaw, UniformLaw
from shortfall.errors import DivergentIntegralError, DomainError
from shortfall.heavy_tail import HuberMixtureModel, SplicedParetoModel
from shortfall.quadrature import QuadratureConfig

NORMAL_CVAR_96 = stats.norm.pdf(stats.norm.ppf(0.96)) / 0.04

LAWS = {
    "N01": NormalLaw(),
    "N(2,3)": NormalLaw(2.0, 3.0),
    "chi2_1": ChiSquareLaw(1),
    "chi2_3": ChiSquareLaw(3),
    "U(0,1)": UniformLaw(0.0, 1.0),
    "U(-2,1)": UniformLaw(-2.0, 1.0),
    "spliced": SplicedParetoModel(ChiSquareLaw(1), 3.0, 0.9),
    "mixture": HuberMixtureModel(SplicedParetoModel(ChiSquareLaw(1), 2.5, 0.9), 0.2),
}


def scipy_cvar(law, alpha):
    """Independent oracle: average of quantiles by scipy quad over t."""
    val, _ = sci.quad(lambda t: float(law.quantile(t)), alpha, 1.0, limit=500, epsabs=1e-13, epsrel=1e-11)
    return val / (1.0 - alpha)


def test_distortion_axioms():
    t = np.linspace(0, 1, 1001)
    for phi in (CvarDistortion(0.0), CvarDistortion(0.96), IdentityDistortion(),
                FunctionDistortion(np.sqrt, "sqrt")):
        v = phi(t)
        assert v[0] == 0 and v[-1] == 1
        assert np.all(np.diff(v) >= 0)


def test_cvar_distortion_is_concave_min():
    phi = CvarDistortion(0.9)
    t = np.linspace(0, 1, 1001)
    assert np.allclose(phi(t), np.minimum(t / 0.1, 1.0))
    assert np.all(np.diff(phi(t), 2) <= 1e-12)
    with pytest.raises(DomainError):
        CvarDistortion(1.0)


def test_choquet_examples():
    assert choquet_expected_loss(NormalLaw(), IdentityDistortion()).value == pytest.approx(0.0, abs=1e-9)
    assert choquet_expected_loss(NormalLaw(), CvarDistortion(0.96)).value == pytest.approx(2.154, abs=5e-4)
    assert choquet_expected_loss(UniformLaw(0, 1), CvarDistortion(0.5)).value == pytest.approx(0.75, abs=1e-12)


def test_quantile_integral_examples():
    assert cvar_quantile_integral(NormalLaw(), 0.96).value == pytest.approx(NORMAL_CVAR_96, rel=1e-10)
    assert cvar_quantile_integral(ChiSquareLaw(1), 0.9).value == pytest.approx(4.39, abs=0.005)
    for a in (0.1, 0.5, 0.9):
        assert cvar_quantile_integral(UniformLaw(0, 1), a).value == pytest.approx((1 + a) / 2, abs=1e-12)


def test_alpha_zero_is_mean():
    assert cvar_quantile_integral(ChiSquareLaw(3), 0.0).value == 3.0
    assert choquet_expected_loss(ChiSquareLaw(3), CvarDistortion(0.0)).value == pytest.approx(3.0, rel=1e-9)


@pytest.mark.parametrize("name", list(LAWS))
@pytest.mark.parametrize("alpha", [0.9, 0.95, 0.96, 0.99])
def test_two_routes_agree(name, alpha):
    law = LAWS[name]
    a = choquet_expected_loss(law, CvarDistortion(alpha))
    b = cvar_quantile_integral(law, alpha)
    assert abs(a.value - b.value) <= 10 * (a.tolerance_used + b.tolerance_used)


@pytest.mark.parametrize("name", ["N01", "chi2_1", "U(-2,1)"])
@pytest.mark.parametrize("alpha", [0.5, 0.96])
def test_against_scipy_oracle(name, alpha):
    law = LAWS[name]
    assert cvar_quantile_integral(law, alpha).value == pytest.approx(scipy_cvar(law, alpha), rel=1e-8)


@pytest.mark.parametrize("name", list(LAWS))
def test_dominates_mean(name):
    law = LAWS[name]
    rep = choquet_expected_loss(law, CvarDistortion(0.7))
    assert rep.value >= law.mean - 10 * rep.tolerance_used


@pytest.mark.parametrize("name", ["N01", "chi2_1", "spliced"])
def test_monotone_in_alpha(name):
    vals = [cvar_quantile_integral(LAWS[name], a).value for a in np.linspace(0.0, 0.995, 25)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_coherence_examples():
    base = cvar_quantile_integral(NormalLaw(), 0.96).value
    assert coherence_probe(NormalLaw(), 0.96, shift=1.0).shifted == pytest.approx(base + 1, abs=1e-8)
    assert coherence_probe(NormalLaw(), 0.96, scale=2.0).scaled == pytest.approx(2 * base, rel=1e-9)
    rep = coherence_probe(ChiSquareLaw(1), 0.9, shift=-1.0, scale=3.0)
    assert rep.combined == pytest.approx(3 * 4.39286064 - 1, abs=1e-6)
    assert rep.ok


@given(st.floats(-10, 10), st.floats(0.1, 10), st.sampled_from([0.5, 0.9, 0.96, 0.99]))
def test_equivariance_property(shift, scale, alpha):
    rep = coherence_probe(NormalLaw(0.5, 1.5), alpha, shift=shift, scale=scale)
    assert rep.ok


def test_divergent_tail_rejected():
    class HeavyLaw(NormalLaw):
        tail_index = 0.9

    with pytest.raises(DivergentIntegralError):
        cvar_quantile_integral(HeavyLaw(), 0.9)
    with pytest.raises(DivergentIntegralError):
        choquet_expected_loss(HeavyLaw(), IdentityDistortion())


def test_report_record_is_flat():
    rec = cvar_quantile_integral(NormalLaw(), 0.96).to_record()
    assert list(rec)[:4] == ["value", "method", "alpha", "tolerance_used"]
    assert rec["law"].startswith("NormalLaw")


def test_custom_config_changes_tolerance():
    loose = QuadratureConfig(rel_tol=1e-5)
    rep = cvar_quantile_integral(NormalLaw(), 0.96, loose)
    assert rep.tolerance_used > cvar_quantile_integral(NormalLaw(), 0.96).tolerance_used
    assert rep.value == pytest.approx(NORMAL_CVAR_96, rel=1e-5)
