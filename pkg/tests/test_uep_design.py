import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uep_fountain.errors import ConfigError, InfeasibleError
from uep_fountain.source_model import BitBlock, PriorVector, generate_synthetic
from uep_fountain.uep_design import (STABILITY_OMEGA2, DegreeDistribution, ExactPsi, PsiEstimator,
                                     SelectionWeights, design_lambda, design_report, dkl_upper_bound,
                                     elementary_symmetric, exact_symbol_kl, init_constraint,
                                     pinsker_from_psi, pinsker_mi_bound, psi, psi_exact, reliability,
                                     selection_weights, tune_lambda)

finite_mu = st.floats(-40, 40, allow_nan=False)


# ---------------------------------------------------------------- degree laws

def test_degree_distribution_validation():
    with pytest.raises(ConfigError):
        DegreeDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ConfigError):
        DegreeDistribution(np.array([-0.1, 1.1]))
    with pytest.raises(ConfigError):
        DegreeDistribution.from_dict({1: 0.5, 2: 0.3, 3: 0.2}, stability=True)
    om = DegreeDistribution(np.array([0.2, 0.8, 0.0, 0.0]))
    assert om.d_max == 2
    with pytest.raises(ConfigError):
        om.check_k(1)


def test_raptor_default():
    om = DegreeDistribution.raptor()
    assert om.d_max <= 16
    assert om.omega.sum() == pytest.approx(1.0, abs=1e-12)
    assert om.omega[1] > STABILITY_OMEGA2


def test_edge_degree():
    om = DegreeDistribution.from_dict({1: 0.5, 3: 0.5})
    assert om.edge_degree().tolist() == pytest.approx([0.25, 0.0, 0.75])
    assert om.mean_degree() == 2.0


# ---------------------------------------------------------------- reliability and weights

def test_reliability_examples():
    assert reliability(np.array([0.0]))[0] == 0.0
    assert reliability(np.array([800.0]))[0] == 1.0
    assert reliability(np.array([-800.0]))[0] == 1.0
    ref = (2 / (1 + math.exp(-2)) - 1) * math.tanh(1.0)
    assert reliability(np.array([2.0]))[0] == pytest.approx(ref, abs=1e-15)
    assert ref == pytest.approx(0.58002, abs=1e-5)


@given(st.lists(finite_mu, min_size=1, max_size=20))
def test_reliability_even_and_positive(mu):
    mu = np.array(mu)
    u = reliability(mu)
    assert np.array_equal(u, reliability(-mu))
    assert np.all(u[np.abs(mu) >= 1e-3] > 0)


def test_selection_weights_examples():
    w = selection_weights(np.array([0.3, 0.9, 0.1]), 0.0)
    assert np.allclose(w.rho, 1 / 3, atol=1e-15)
    w = selection_weights(np.array([0.0, 1.0]), math.log(2))
    assert w.rho.tolist() == pytest.approx([1 / 3, 2 / 3], abs=1e-15)
    w = selection_weights(np.full(5, 0.4), 7.0)
    assert np.allclose(w.rho, 0.2, atol=1e-15)
    with pytest.raises(ConfigError):
        SelectionWeights(np.array([1.0, 0.0]))


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.floats(-30, 30), st.floats(-5, 5))
def test_selection_weights_shift_invariant(u, lam, c):
    u = np.array(u)
    a, b = selection_weights(u, lam).rho, selection_weights(u + c, lam).rho
    assert np.allclose(a, b, rtol=1e-9, atol=1e-300)
    assert a.sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- Psi

def test_psi_constant_u():
    om = DegreeDistribution.from_dict({1: 0.2, 2: 0.5, 4: 0.3})
    u = np.full(10, 0.7)
    exact = float(np.dot(om.edge_degree(), 0.7 ** om.degrees))
    for lam in (-3.0, 0.0, 5.0):
        # only the degree draw is random
        est = PsiEstimator(u, om, 4096, seed=1)
        assert abs(est(lam) - exact) < 3 * est.stderr(lam)
        assert psi_exact(lam, u, om) == pytest.approx(exact, abs=1e-12)


def test_psi_degree_one_is_weighted_mean():
    rng = np.random.default_rng(0)
    u = rng.uniform(0.05, 0.95, 12)
    om = DegreeDistribution.from_dict({1: 1.0})
    for lam in (0.0, 2.0):
        rho = selection_weights(u, lam).rho
        est = PsiEstimator(u, om, 20_000, seed=3)
        assert abs(est(lam) - rho @ u) < 3 * est.stderr(lam)
        assert psi_exact(lam, u, om) == pytest.approx(rho @ u, abs=1e-12)


def test_psi_all_ones():
    assert psi(1.0, np.ones(8), DegreeDistribution.uniform(4)) == 1.0
    assert psi_exact(1.0, np.ones(8), DegreeDistribution.uniform(4)) == pytest.approx(1.0, abs=1e-12)


def test_elementary_symmetric_matches_polynomial():
    x = np.array([0.5, 2.0, 3.0, 0.1])
    e = elementary_symmetric(x, 4)
    coeffs = np.poly(-x)  # prod (t + x_i)
    assert e.tolist() == pytest.approx(coeffs.tolist(), rel=1e-12)


@given(st.integers(3, 9), st.integers(0, 2**32), st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_psi_exact_matches_enumeration(k, seed, lam):
    import itertools
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.01, 1.0, k)
    om = DegreeDistribution.uniform(min(k, 3))
    rho = selection_weights(u, lam).rho
    total = 0.0
    for d, wd in zip(om.degrees, om.edge_degree()):
        subs = list(itertools.combinations(range(k), d))
        p = np.array([np.prod(rho[list(s)]) for s in subs])
        v = np.array([np.prod(u[list(s)]) for s in subs])
        total += wd * (p @ v) / p.sum()
    assert psi_exact(lam, u, om) == pytest.approx(total, rel=1e-10)


@given(st.integers(4, 40), st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_psi_crn_monotone(k, seed):
    u = np.random.default_rng(seed).uniform(0.0, 1.0, k)
    est = PsiEstimator(u, DegreeDistribution.uniform(min(k, 4)), 512, seed)
    vals = [est(l) for l in np.linspace(-10, 10, 10)]
    assert np.all(np.diff(vals) >= 0)
    ex = ExactPsi(u, DegreeDistribution.uniform(min(k, 4)))
    vals = [ex(l) for l in np.linspace(-10, 10, 10)]
    assert np.all(np.diff(vals) >= -1e-12)


# ---------------------------------------------------------------- tuning

def _skewed(k=16):
    return np.r_[np.full(k // 2, 0.1), np.full(k - k // 2, 0.9)]


def test_tune_target_at_zero():
    u = _skewed()
    om = DegreeDistribution.uniform(3)
    est = PsiEstimator(u, om, 4096, 0)
    assert tune_lambda(u, om, est(0.0), estimator=est) == 0.0


def test_tune_constant_u_returns_zero():
    u = np.full(10, 0.5)
    om = DegreeDistribution.uniform(3)
    assert tune_lambda(u, om, psi(0.0, u, om)) == 0.0


def test_tune_skewed_midway_fresh_seed():
    u = _skewed()
    om = DegreeDistribution.uniform(3)
    est = PsiEstimator(u, om, 4096, seed=5)
    target = 0.5 * (est(0.0) + est(50.0))
    lam = tune_lambda(u, om, target, tol=1e-3, lambda_max=50.0, lambda_min=0.0, estimator=est)
    assert 0 < lam < 50
    assert abs(est(lam) - target) < 1e-3
    fresh = PsiEstimator(u, om, 200_000, seed=99)
    se = math.hypot(fresh.stderr(lam), est.stderr(lam))
    assert abs(fresh(lam) - target) < 1e-3 + 3 * se


def test_tune_infeasible_reports_interval():
    u = _skewed()
    om = DegreeDistribution.uniform(3)
    with pytest.raises(InfeasibleError) as ei:
        tune_lambda(u, om, 0.95, lambda_min=0.0)
    lo, hi = ei.value.interval
    assert lo < hi < 0.95
    assert "infeasible target" in str(ei.value)


# ---------------------------------------------------------------- constraints and bounds

def test_init_constraint_examples():
    om = DegreeDistribution.uniform(3)
    assert init_constraint(_skewed(), om, 1.0, 0.0) == 0.0
    assert init_constraint(np.ones(6), om, 1.0, 0.8) == 0.8
    u = _skewed()
    assert init_constraint(u, om, 2.0, 0.6, seed=4) == pytest.approx(0.6 * psi(2.0, u, om, seed=4))


def test_pinsker_examples():
    om = DegreeDistribution.uniform(3)
    assert pinsker_mi_bound(np.ones(5), om, 0.0) == 0.0
    assert pinsker_mi_bound(np.zeros(5), om, 0.0) == 0.5


def test_dkl_examples():
    assert dkl_upper_bound(np.ones(4), DegreeDistribution.uniform(2)) == 0.0
    om1 = DegreeDistribution.from_dict({1: 1.0})
    assert dkl_upper_bound(np.array([0.2, 0.8]), om1) == pytest.approx(2.56, abs=1e-12)


@given(st.lists(st.floats(0, 1), min_size=4, max_size=12), st.integers(1, 4))
def test_dkl_dominates_pinsker_form(u, d):
    u = np.array(u)
    om = DegreeDistribution.uniform(d)
    x = float(np.dot(om.edge_degree(), np.cumprod(np.sort(u))[:d]))
    assert dkl_upper_bound(u, om) >= 8 * pinsker_from_psi(x) - 1e-15


def test_exact_kl_deterministic_limit():
    b = BitBlock(np.array([0, 1, 0, 1]), PriorVector(np.array([30.0, -30.0, 30.0, -30.0])))
    om = DegreeDistribution.uniform(2)
    kl = exact_symbol_kl(b, om, SelectionWeights.uniform(4))
    assert 0 <= kl < 1e-10


def test_exact_kl_single_bit_ln2():
    b = BitBlock(np.array([0]), PriorVector(np.array([1e-300]), mu_floor=0.0))
    om = DegreeDistribution.from_dict({1: 1.0})
    assert exact_symbol_kl(b, om, SelectionWeights.uniform(1)) == pytest.approx(math.log(2), abs=1e-12)
    assert exact_symbol_kl(b, om, SelectionWeights.uniform(1), average_flips=False) == pytest.approx(math.log(2))


def test_exact_kl_refuses_large_k():
    b = generate_synthetic(20, 0.5, 4.0, 1)
    with pytest.raises(ConfigError):
        exact_symbol_kl(b, DegreeDistribution.uniform(2), SelectionWeights.uniform(20))


@pytest.mark.parametrize("seed", range(10))
def test_pinsker_below_exact_kl_k6(seed):
    b = generate_synthetic(6, 0.5, 4.0, seed)
    u = reliability(b.prior)
    om = DegreeDistribution.from_dict({2: 1.0})
    kl = exact_symbol_kl(b, om, SelectionWeights.uniform(6))
    # uniform selection: both subset laws coincide, so the estimator and the exact value agree
    assert pinsker_from_psi(psi_exact(0.0, u, om)) <= kl
    est = PsiEstimator(u, om, 20_000, seed)
    assert pinsker_from_psi(est(0.0) + 3 * est.stderr(0.0)) <= kl
    lam = float(np.random.default_rng(seed).uniform(0, 5))
    w = selection_weights(u, lam)
    assert pinsker_from_psi(psi_exact(lam, u, om)) <= exact_symbol_kl(b, om, w)


# ---------------------------------------------------------------- design flow

def test_design_uniform_source_picks_zero():
    u = np.full(32, 0.6)
    d = design_lambda(u, DegreeDistribution.raptor(), 0.8, exact=True)
    assert d.lam == 0.0
    assert d.feasible


def test_design_skewed_feasible():
    u = _skewed(32)
    om = DegreeDistribution.raptor()
    d = design_lambda(u, om, 0.77, eps1=0.05, eps2=1e-4, mc_samples=4096, seed=2)
    assert d.feasible_eps1 and d.feasible_eps2
    # end-to-end rerun: the chosen lambda reproduces both constraints on a fresh estimate
    again = PsiEstimator(u, om, 50_000, seed=77)(d.lam)
    assert 0.77 * again > 0.05 and pinsker_from_psi(again) > 1e-4


def test_design_noisy_channel_infeasible():
    d = design_lambda(_skewed(32), DegreeDistribution.raptor(), 0.01, eps1=0.05, exact=True)
    assert not d.feasible_eps1


def test_design_report_rows():
    rows = design_report(_skewed(32), DegreeDistribution.raptor(), [0.0, 1.0], 0.7)
    assert [r["lambda"] for r in rows] == [0.0, 1.0]
    assert rows[0]["psi"] <= rows[1]["psi"]
    assert set(rows[0]) == {"lambda", "psi", "init_constraint", "pinsker_bound", "dkl_upper",
                            "feasible_eps1", "feasible_eps2"}


def test_dkl_upper_bound_fails_for_confident_priors():
    # With every prior confident the symbol KL decays like m exp(-m) but the
    # surrogate like exp(-2m), so the surrogate is not an upper bound there.
    om = DegreeDistribution.from_dict({1: 1.0})
    confident = BitBlock(np.array([0, 0]), PriorVector(np.array([3.8, 4.0])))
    kl = exact_symbol_kl(confident, om, SelectionWeights.uniform(2))
    assert kl > dkl_upper_bound(reliability(confident.prior), om)
    moderate = BitBlock(np.array([0, 0]), PriorVector(np.array([1.0, 1.5])))
    assert exact_symbol_kl(moderate, om, SelectionWeights.uniform(2)) <= dkl_upper_bound(
        reliability(moderate.prior), om)
