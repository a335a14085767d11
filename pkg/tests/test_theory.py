import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import NoInnerNoise
from mlsa_risk import swap, theory
from mlsa_risk.core_sa import LearningRate
from mlsa_risk.swap import PAPER_SWAP, SwapLossModel
from mlsa_risk.theory import (ModelQuantities, bias_limit, check_cov2, mc_abs_g_density,
                              mc_g_quantities, mc_var_pos_part, sigma_amlsa, sigma_ansa,
                              sigma_mlsa, sigma_nsa, swap_g_closed_form, swap_quantities)

ALPHA = 0.85
# 40-digit oracle values for the swap case study.
F = 0.11023504747748461
XI, CHI = 2.1921661509308291, 3.2877030020118729
MEAN_POS, VAR_POS = 0.16433052766215658, 0.28380646415332567
E_ABS_G_FG, VAR_IND_G = 0.80492408572088746, 12.562659682181237
VAR_POS_H0 = 0.44984102464855901
S2 = 83.751064547874912


@pytest.fixture(scope="module")
def q():
    return swap_quantities(PAPER_SWAP, h0=1 / 32, m=2)


def test_quantities_match_oracle(q):
    assert q.f_at_xistar == pytest.approx(F, rel=1e-12)
    assert (q.xi_star, q.chi_star) == pytest.approx((XI, CHI), rel=1e-12)
    assert q.mean_pos_part == pytest.approx(MEAN_POS, rel=1e-12)
    assert q.var_pos_part == pytest.approx(VAR_POS, rel=1e-12)
    assert q.var_pos_part_h0 == pytest.approx(VAR_POS_H0, rel=1e-10)
    assert q.e_absG_fG == pytest.approx(E_ABS_G_FG, rel=1e-12)
    assert q.var_indG == pytest.approx(VAR_IND_G, rel=1e-12)
    assert q.provenance["alpha"] == ALPHA


def test_quantities_validation(q):
    d = q.to_dict()
    for key, bad in (("f_at_xistar", 0.0), ("var_pos_part", -1.0), ("var_indG", -0.1)):
        with pytest.raises(ValueError):
            ModelQuantities(**{**d, key: bad})


def test_sigma_nsa(q):
    s = sigma_nsa(0.9, 1.0, q, ALPHA)
    assert s[0, 1] == s[1, 0] == 0.0
    assert s[0, 0] == pytest.approx(3.8553981671464858, rel=1e-12)
    assert s[1, 1] == pytest.approx(12.613620629036696, rel=1e-12)
    g1 = (1 - ALPHA) / F
    s1 = sigma_nsa(1.0, g1, q, ALPHA)
    assert s1[0, 0] == pytest.approx(ALPHA * (1 - ALPHA) / F ** 2, rel=1e-12)
    assert s1[0, 1] == pytest.approx(ALPHA * (CHI - XI) / F, rel=1e-12)
    check_cov2(s1)


def test_sigma_nsa_instability_region(q):
    with pytest.raises(ValueError):
        sigma_nsa(1.0, (1 - ALPHA) / (2 * F), q, ALPHA)
    with pytest.raises(ValueError):
        sigma_nsa(1.0, 0.5 * (1 - ALPHA) / (2 * F), q, ALPHA)
    with pytest.raises(ValueError):
        sigma_nsa(0.5, 1.0, q, ALPHA)
    crit = (1 - ALPHA) / (2 * F)
    grid = crit * (1 + np.logspace(0, -9, 10))
    vals = [sigma_nsa(1.0, g, q, ALPHA)[0, 0] for g in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1e8


def test_sigma_ansa(q):
    assert set(inspect.signature(sigma_ansa).parameters) == {"q", "alpha"}
    s = sigma_ansa(q, ALPHA)
    np.testing.assert_allclose(s, [[10.492302372166929, 8.447461535398578],
                                   [8.447461535398578, 12.613620629036696]], rtol=1e-12)
    assert s[0, 0] == pytest.approx(sigma_nsa(1.0, (1 - ALPHA) / F, q, ALPHA)[0, 0], rel=1e-12)


def test_multilevel_sigmas(q):
    s = sigma_mlsa(0.9, 0.1, 1 / 32, 2, q, ALPHA)
    a = sigma_amlsa(1 / 32, 2, q, ALPHA)
    for mat in (s, a):
        assert mat[0, 1] == mat[1, 0] == 0.0
        check_cov2(mat)
    # Hand evaluation of the two formulas.
    beta, aa = 0.9, 0.8 / 3.8
    es = (1 / 32) ** aa * (2 ** aa - 1) ** (1 / beta) / 0.15 ** 2 * (
        VAR_POS_H0 * 32 / 2 ** (aa / beta) + VAR_IND_G / (2 ** aa - 1))
    assert s[1, 1] == pytest.approx(es, rel=1e-12)
    assert s[0, 0] == pytest.approx(0.1 * E_ABS_G_FG / (0.15 * 2 * F), rel=1e-12)
    assert a[0, 0] == pytest.approx(E_ABS_G_FG / (0.15 ** 2 * (1 - 2 ** -0.25)), rel=1e-12)
    with pytest.raises(ValueError):
        sigma_mlsa(1.0, 0.1, 1 / 32, 2, q, ALPHA)


def test_amlsa_second_term_vanishes_for_large_m(q):
    d = q.to_dict()
    only_g = ModelQuantities(**{**d, "var_pos_part_h0": 0.0})
    vals = [sigma_amlsa(1 / 32, m, only_g, ALPHA)[1, 1] for m in (2, 16, 256, 2 ** 20)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < vals[0] / 20


def test_mlsa_es_minimal_at_beta_one(q):
    grid = [0.6, 0.7, 0.8, 0.9, 1.0]
    es = [theory.es_variance_mlsa(b, 1 / 32, 2, VAR_POS_H0, VAR_IND_G, ALPHA) for b in grid]
    # Literal property; the displayed ES factor increases with beta for these inputs.
    assert int(np.argmin(es)) == len(grid) - 1, f"ES factor over beta grid: {np.round(es, 2)}"


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(-0.3, 0.3), st.floats(0.0, 0.08), st.floats(0.01, 0.99),
       st.floats(0.51, 1.0), st.floats(0.05, 20.0), st.sampled_from([2, 3, 4, 8]),
       st.sampled_from([1 / 4, 1 / 16, 1 / 32]))
def test_all_covariances_psd(sigma, kappa, r, alpha, beta, g1, m, h0):
    # Quantities drawn from genuine loss laws, so the matrices must be covariances.
    p = swap.SwapParams(sigma=sigma, kappa=kappa, r=r, alpha=alpha)
    q = swap_quantities(p, h0=h0, m=m)
    mats = [sigma_ansa(q, alpha), sigma_amlsa(h0, m, q, alpha)]
    if beta < 1 or 2 * q.f_at_xistar * g1 > 1 - alpha:
        mats += [sigma_nsa(beta, g1, q, alpha), sigma_mlsa(beta, g1, h0, m, q, alpha)]
    for mat in mats:
        check_cov2(mat)


def test_ansa_psd_with_consistent_moments():
    # The ANSA matrix is a genuine covariance when its inputs come from one law.
    for alpha in (0.5, 0.85, 0.99):
        p = swap.SwapParams(alpha=alpha)
        check_cov2(sigma_ansa(swap_quantities(p), alpha))


def test_check_cov2_rejects():
    with pytest.raises(ValueError):
        check_cov2([[1, 2], [0, 1]])
    with pytest.raises(ValueError):
        check_cov2([[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        check_cov2(np.eye(3))


def test_mc_var_pos_part_frozen_at_var():
    rng = np.random.default_rng(12)
    x = swap.sample_exact(PAPER_SWAP, rng, 10**6)
    est = mc_var_pos_part(np.full(len(x), XI), x)
    pos = np.maximum(x - XI, 0)
    se = np.std((pos - pos.mean()) ** 2) / np.sqrt(len(x))
    assert abs(est - VAR_POS) < 3 * se


def test_mc_g_quantities_zero_inner():
    g = mc_g_quantities(NoInnerNoise(), 16, 2, 1000, np.random.default_rng(0), ALPHA)
    assert g.var_indG == 0.0 and g.g_scale2 == 0.0
    with pytest.raises(ValueError):
        mc_g_quantities(NoInnerNoise(), 16, 2, 1, np.random.default_rng(0), ALPHA)


def test_mc_g_quantities_swap():
    model = SwapLossModel(PAPER_SWAP)
    g = mc_g_quantities(model, 256, 2, 10**5, np.random.default_rng(3), ALPHA, xi0=XI)
    assert g.g_scale2 == pytest.approx(S2, rel=0.02)
    est = []
    for k in (64, 128, 256):
        g = mc_g_quantities(model, k, 2, 10**5, np.random.default_rng(k), ALPHA, xi0=XI)
        se = g.var_indG * math.sqrt(2 / 10**5) * 3  # conservative for a heavy-tailed square
        est.append((g.var_indG, se))
    for (a, sa), (b, sb) in zip(est, est[1:]):
        assert abs(a - b) < 3 * math.hypot(sa, sb)
    assert est[-1][0] == pytest.approx(VAR_IND_G, rel=0.05)


def test_abs_g_density_estimator():
    model = SwapLossModel(PAPER_SWAP)
    for level in (2, 5):
        exact, _ = swap_g_closed_form(PAPER_SWAP, 2, XI, k0=32, level=level)
        h = 1 / (32 * 2 ** level)
        n = 10**6
        est = mc_abs_g_density(model, 32, 2, level, XI, n, np.random.default_rng(level))
        p = est * math.sqrt(h)
        se = math.sqrt(p * (1 - p) / n) / math.sqrt(h)
        assert abs(est - exact) < 4 * se
    limit, _ = swap_g_closed_form(PAPER_SWAP, 2, XI)
    near, _ = swap_g_closed_form(PAPER_SWAP, 2, XI, k0=32, level=12)
    assert near == pytest.approx(limit, rel=1e-3)


def test_bias_limit(q):
    d = q.to_dict()
    zero = ModelQuantities(**{**d, "v_at_xistar": 0.0, "v_integral": 0.0})
    assert bias_limit(zero) == (0.0, 0.0)
    var_c, es_c = bias_limit(q)
    h = 1 / 1024
    xi_h, chi_h = swap.biased_var_es(PAPER_SWAP, h)
    assert var_c == pytest.approx((xi_h - XI) / h, rel=0.01)
    assert es_c == pytest.approx((chi_h - CHI) / h, rel=0.01)
    assert var_c == pytest.approx(XI * S2 / (2 * 2.1151056818050966 ** 2), rel=1e-12)
    with pytest.raises(ValueError):
        bias_limit(ModelQuantities(**{**d, "provenance": {}}))
