import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sci
from scipy import stats

from shortfall.distributions import ChiSquareLaw, NormalLaw
from shortfall.errors import DomainError
from shortfall.measurement_error import (
    TABLE1_DELTAS,
    TABLE1_KS,
    ExpansionFamily,
    FamilyMember,
    GridSpec,
    capacity_upper_bound,
    clamp_probability,
    contaminated_cdf,
    envelope_cdf,
    envelope_cvar,
    error_law_kurtosis,
    expansion_cdf,
    expansion_pdf,
    lemma_expansion_error,
    member_cvar,
    sup_density_deviation,
    validity_check,
)

N01 = NormalLaw()
PSI0 = 1 / math.sqrt(2 * math.pi)
BOX = ExpansionFamily(N01, 0.2, 1.2)


def fam(Delta, K=1.0):
    return ExpansionFamily(N01, Delta, K)


def test_family_validation():
    with pytest.raises(DomainError):
        ExpansionFamily(N01, -0.1, 1.0)
    with pytest.raises(DomainError):
        ExpansionFamily(N01, 0.1, 0.5)
    with pytest.raises(DomainError):
        ExpansionFamily(ChiSquareLaw(1), 0.1, 1.0)
    with pytest.raises(DomainError):
        BOX.member(0.3, 1.0)


def test_cdf_examples():
    for d, k in [(0.1, 1.0), (0.2, 1.2), (0.05, 3.0)]:
        assert expansion_cdf(FamilyMember(d, k), fam(0.2, 3.0), 0.0) == pytest.approx(0.5, abs=1e-15)
    z = np.linspace(-4, 4, 17)
    assert np.array_equal(expansion_cdf(FamilyMember(0.0, 1.1), BOX, z), N01.cdf(z))
    approx = expansion_cdf(FamilyMember(0.1, 3.0), fam(0.1, 3.0), 1.75)
    assert abs(approx - stats.norm.cdf(1.75 / math.sqrt(1.1))) <= 2e-4


def test_pdf_examples():
    z = np.linspace(-4, 4, 17)
    assert np.array_equal(expansion_pdf(FamilyMember(0.0, 1.0), BOX, z), N01.pdf(z))
    # kappa delta^2 / 24 = 3 * 0.01 / 24 = 0.00125
    expected = PSI0 + 0.05 * (-PSI0) + 0.00125 * 3 * PSI0
    assert expansion_pdf(FamilyMember(0.1, 3.0), fam(0.1, 3.0), 0.0) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("member", BOX.corners(), ids=str)
def test_normalisation(member):
    total, _ = sci.quad(lambda z: float(expansion_pdf(member, BOX, z)), -np.inf, np.inf, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0, 0.2), st.floats(1, 1.2), st.floats(-8, 8))
def test_symmetry(delta, kappa, z):
    m = FamilyMember(delta, kappa)
    assert expansion_pdf(m, BOX, z) == expansion_pdf(m, BOX, -z)
    assert expansion_cdf(m, BOX, z) + expansion_cdf(m, BOX, -z) == pytest.approx(1.0, abs=1e-12)


def test_clamp_is_display_only():
    assert clamp_probability(np.array([-0.1, 0.5, 1.2])).tolist() == [0.0, 0.5, 1.0]


def test_validity_examples():
    assert validity_check(BOX).valid
    assert validity_check(fam(0.0)).valid
    rep = validity_check(fam(10.0))
    assert not rep.valid
    kind, d, k, z, val = next(v for v in rep.violations if v[0] == "negative_density")
    assert val < 0
    assert expansion_pdf(FamilyMember(d, k), fam(10.0), z) < 0
    assert rep.max_valid_Delta is not None and rep.max_valid_Delta < 10.0
    assert validity_check(fam(rep.max_valid_Delta)).valid


def test_deviation_examples():
    assert sup_density_deviation(fam(0.0)).value == 0.0
    devs = [sup_density_deviation(fam(d, 1.2)).value for d in (0.05, 0.1, 0.2)]
    assert devs == sorted(devs)


def test_deviation_matches_brute_force():
    family = fam(0.1)
    rep = sup_density_deviation(family, GridSpec(z_lo=-6, z_hi=6, z_points=4001))
    z = np.linspace(-6, 6, 4001)
    brute = max(np.abs(expansion_pdf(FamilyMember(d, 1.0), family, z) - N01.pdf(z)).max()
                for d in np.linspace(0, 0.1, 201))
    assert rep.value == pytest.approx(brute, rel=1e-6)
    assert rep.delta == pytest.approx(0.1)
    z0 = rep.z
    corner = abs(0.05 * N01.pdf_derivative(z0, 2) + 0.01 / 24 * N01.pdf_derivative(z0, 4))
    assert rep.value == pytest.approx(corner, rel=1e-12)


@pytest.mark.parametrize("delta, kappa, expected", [(0.0, 1.0, 2.154), (0.05, 1.0, 2.206), (0.2, 1.2, 2.347)])
def test_member_cvar_examples(delta, kappa, expected):
    assert member_cvar(FamilyMember(delta, kappa), BOX, 0.96).value == pytest.approx(expected, abs=0.01)


def test_member_cvar_against_scipy_oracle():
    m = FamilyMember(0.15, 1.1)
    from scipy.optimize import brentq

    def q(t):
        return brentq(lambda z: float(expansion_cdf(m, BOX, z)) - t, -20, 20, xtol=1e-14)

    ref = sci.quad(q, 0.96, 1 - 1e-13, limit=200)[0] / 0.04
    assert member_cvar(m, BOX, 0.96).value == pytest.approx(ref, abs=1e-7)


def test_capacity_examples():
    rep = capacity_upper_bound(fam(0.1, 1.1), 0.96)
    assert rep.value == pytest.approx(2.256, abs=0.01)
    rep0 = capacity_upper_bound(fam(0.0, 1.2), 0.96)
    assert rep0.value == pytest.approx(2.154, abs=0.01)
    assert rep0.diagnostics["argmax_delta"] == 0.0


def test_capacity_rejects_invalid_family():
    with pytest.raises(DomainError):
        capacity_upper_bound(fam(10.0), 0.96, GridSpec(delta_points=3, kappa_points=2))


def test_table1_argmax_and_monotonicity(table1_run):
    reports, _ = table1_run
    grid = np.array([r.value for r in reports]).reshape(len(TABLE1_DELTAS), len(TABLE1_KS))
    for r, d in zip(reports, np.repeat(TABLE1_DELTAS, len(TABLE1_KS))):
        assert r.diagnostics["argmax_delta"] == pytest.approx(d)
    assert np.all(np.diff(grid, axis=0) > 0)
    assert np.all(np.diff(grid, axis=1) >= -1e-9)


def test_envelope_examples():
    assert envelope_cvar(fam(0.0), 0.96).value == pytest.approx(2.154, abs=0.01)
    env = envelope_cvar(fam(0.1, 1.1), 0.96).value
    assert env <= 2.1543443506 + 1e-8 <= 2.256


@given(st.floats(0, 0.2), st.floats(1, 1.2))
def test_envelope_dominates_members(delta, kappa):
    z = np.linspace(-6, 6, 601)
    assert np.all(envelope_cdf(BOX, z) >= expansion_cdf(FamilyMember(delta, kappa), BOX, z) - 1e-15)


def test_bound_chain():
    env = envelope_cvar(BOX, 0.96)
    members = [member_cvar(FamilyMember(d, k), BOX, 0.96).value
               for d in np.linspace(0, 0.2, 5) for k in (1.0, 1.1, 1.2)]
    upper = capacity_upper_bound(BOX, 0.96, GridSpec(delta_points=5, kappa_points=3))
    tol = 10 * (env.tolerance_used + upper.tolerance_used)
    assert env.value <= min(members) + tol
    assert min(members) <= max(members) <= upper.value + tol


def test_kurtosis_values():
    assert error_law_kurtosis("gaussian") == 3.0
    assert error_law_kurtosis("uniform") == pytest.approx(1.8)
    with pytest.raises(DomainError):
        error_law_kurtosis("cauchy")


@pytest.mark.parametrize("v_law", ["uniform", "rademacher-smoothed"])
def test_contaminated_cdf_against_convolution(v_law):
    from shortfall.montecarlo import error_law

    v, delta, z = error_law(v_law), 0.3, 0.7
    r = math.sqrt(3.0)
    lo, hi = (-r, r) if v_law == "uniform" else (-9.0, 9.0)
    exact, _ = sci.quad(lambda x: float(N01.cdf(z - math.sqrt(delta) * x) * v.pdf(x)),
                        lo, hi, points=[-0.7, 0.0, 0.7], limit=400, epsabs=1e-14, epsrel=1e-13)
    assert contaminated_cdf(N01, v_law, delta, z) == pytest.approx(exact, abs=1e-12)


def test_lemma_examples():
    z = np.linspace(-2, 2, 401)
    r1, r2 = lemma_expansion_error(N01, "gaussian", [0.01, 0.02], z)
    assert r1.max_error <= 1e-5
    assert 6 <= r2.max_error / r1.max_error <= 10
    for v in ("gaussian", "uniform", "rademacher-smoothed"):
        assert lemma_expansion_error(N01, v, 0.0, z)[0].max_error == 0.0


@pytest.mark.parametrize("v_law", ["uniform", "rademacher-smoothed"])
def test_lemma_error_is_cubic_for_other_laws(v_law):
    z = np.linspace(-3, 3, 601)
    r1, r2 = lemma_expansion_error(N01, v_law, [0.01, 0.02], z)
    assert r1.max_error <= 1e-5
    assert 6 <= r2.max_error / r1.max_error <= 10
