import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from marketflow.exceptions import InsufficientSamples, RankDeficient, UnknownLabel
from marketflow.synthetic import VarSpec, chain_spec, generate_var
from marketflow.var_granger import (build_lag_design, causality_matrix, conditional_gc,
                                    f_test_pvalue, gc_significance, ols_fit, select_lag_bic)

from conftest import make_panel


def normal_equations(design):
    X, y = design.predictors, design.target
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    r = y - X @ beta
    return beta, float(r @ r) / len(y)


# --- designs -----------------------------------------------------------------

def test_design_counts_single_series():
    d = build_lag_design(make_panel(np.arange(5.0)), "A", ["A"], 2)
    assert d.target.shape == (3,)
    assert d.predictors.shape == (3, 3)
    assert d.column_names == ["intercept", "A.L1", "A.L2"]


def test_design_rows_use_only_the_past():
    x = np.arange(10.0) ** 2
    d = build_lag_design(make_panel(x), "A", ["A"], 2)
    assert d.target.tolist() == x[2:].tolist()
    assert d.predictors[:, 1].tolist() == x[1:-1].tolist()
    assert d.predictors[:, 2].tolist() == x[:-2].tolist()


def test_design_three_series(white_noise):
    d = build_lag_design(white_noise(50, 3, 0), "B", ["B", "A", "C"], 2)
    assert d.n_params == 7
    assert d.included_sources == ["B", "A", "C"]


def test_design_guards(white_noise):
    panel = white_noise(20, 2, 0)
    with pytest.raises(ValueError):
        build_lag_design(panel, "A", ["A"], 0)
    with pytest.raises(UnknownLabel):
        build_lag_design(panel, "Q", ["A"], 1)
    with pytest.raises(InsufficientSamples):
        build_lag_design(white_noise(8, 2, 0), "A", ["A", "B"], 3)


def test_common_window_start(white_noise):
    panel = white_noise(40, 1, 0)
    d1 = build_lag_design(panel, "A", ["A"], 1, start=5)
    d5 = build_lag_design(panel, "A", ["A"], 5)
    assert np.array_equal(d1.target, d5.target)


# --- OLS -------------------------------------------------------------------

def test_exact_fit():
    x = 1e-3 * 2.0 ** np.arange(12)
    fit = ols_fit(build_lag_design(make_panel(x), "A", ["A"], 1))
    assert fit.residual_variance <= 1e-18
    assert fit.coefficients[1] == pytest.approx(2.0, rel=1e-12)


def test_white_noise_residual_variance():
    e = np.random.default_rng(0).standard_normal(10 ** 5)
    d = build_lag_design(make_panel(e), "A", ["A"], 1)
    fit = ols_fit(d)
    assert 0.99 <= fit.residual_variance <= 1.01
    assert fit.residual_variance <= d.target.var() * (1 + 1e-12)
    assert fit.residual_variance == pytest.approx(d.target.var(), rel=1e-3)


def test_duplicate_column_is_rank_deficient(white_noise):
    panel = white_noise(100, 2, 0)
    d = build_lag_design(panel, "A", ["A", "B", "B"], 1)
    with pytest.raises(RankDeficient) as err:
        ols_fit(d)
    assert err.value.columns == ["B.L1"]


def test_ols_against_normal_equations():
    rs = np.random.default_rng(1)
    for _ in range(100):
        T, n, p = int(rs.integers(60, 300)), int(rs.integers(1, 4)), int(rs.integers(1, 4))
        panel = make_panel(rs.standard_normal((T, n)) * rs.uniform(0.1, 10, n))
        d = build_lag_design(panel, "A", panel.labels, p)
        fit = ols_fit(d)
        beta, s2 = normal_equations(d)
        assert fit.residual_variance == pytest.approx(s2, rel=1e-8)
        assert np.allclose(fit.coefficients, beta, rtol=1e-7, atol=1e-9)
        ortho = np.abs(d.predictors.T @ fit.residuals).max()
        assert ortho <= 1e-8 * np.linalg.norm(d.target)
        assert fit.rss == pytest.approx(fit.residual_variance * d.n_obs)
        assert fit.dof == d.n_obs - d.n_params


# --- Granger causality ---------------------------------------------------------

def bivariate_spec(T, seed):
    return VarSpec(n=2, p=1, coupling=[[[0.5, 0.4], [0.0, 0.5]]], T=T, seed=seed)


def analytic_gc_y_to_x():
    """ln of the lag-1 restricted residual variance of X (full-model variance is 1)."""
    A = np.array([[0.5, 0.4], [0.0, 0.5]])
    S = linalg.solve_discrete_lyapunov(A, np.eye(2))
    lag1 = (A @ S)[0, 0]
    return math.log(S[0, 0] - lag1 ** 2 / S[0, 0])


def test_analytic_oracle_value():
    assert analytic_gc_y_to_x() == pytest.approx(0.184105029, abs=1e-9)


@pytest.mark.slow
def test_bivariate_var_gc_matches_analytic():
    panel = generate_var(bivariate_spec(10 ** 6, 5))
    forward = conditional_gc(panel, "B", "A", 1)
    backward = conditional_gc(panel, "A", "B", 1)
    assert forward.gc == pytest.approx(analytic_gc_y_to_x(), rel=0.02)
    assert backward.gc <= 0.005
    assert forward.te == forward.gc / 2


def test_independent_noise_gc_small(white_noise):
    panel = white_noise(10 ** 4, 2, 3)
    res = conditional_gc(panel, "A", "B", 1)
    assert res.gc <= 0.01
    rs = np.random.default_rng(9)
    surr = []
    for _ in range(500):
        shuffled = panel.values.copy()
        shuffled[:, 0] = rs.permutation(shuffled[:, 0])
        surr.append(conditional_gc(make_panel(shuffled), "A", "B", 1).gc)
    assert np.quantile(surr, 0.99) < 0.01
    assert res.gc <= max(surr) + 1e-3


def test_te_is_half_gc(white_noise):
    res = conditional_gc(white_noise(300, 3, 1), "A", "C", 2)
    assert res.te == res.gc / 2
    assert res.conditioned_on == ["B"]


def test_zero_full_residual_gives_infinite_sentinel():
    rs = np.random.default_rng(0)
    y = rs.standard_normal(200)
    x = np.concatenate([[0.0], y[:-1]])
    panel = make_panel(np.column_stack([x, y]))
    res = conditional_gc(panel, "B", "A", 1)
    assert res.gc == math.inf and res.p_value == 0.0 and res.te == math.inf
    assert res.gc > 1e308


def test_same_source_and_target(white_noise):
    with pytest.raises(ValueError):
        conditional_gc(white_noise(50, 2, 0), "A", "A", 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 4), st.integers(1, 3))
def test_nesting_gives_nonnegative_gc(seed, n, p):
    rs = np.random.default_rng(seed)
    panel = make_panel(rs.standard_normal((120, n)) * rs.uniform(1e-3, 1e3, n))
    for src in panel.labels[1:]:
        assert conditional_gc(panel, src, "A", p).gc >= -1e-12


def test_scale_equivariance():
    panel = generate_var(chain_spec(T=800, seed=4))
    scaled = make_panel(panel.values * 37.5)
    for s, t in [("A", "B"), ("B", "C"), ("C", "A")]:
        assert conditional_gc(scaled, s, t, 2).gc == pytest.approx(
            conditional_gc(panel, s, t, 2).gc, abs=1e-10)


# --- significance --------------------------------------------------------------

def test_f_test_edge_cases():
    assert f_test_pvalue(5.0, 5.0, 2, 100) == (1.0, 0.0)
    p_small, _ = f_test_pvalue(5.0, 1e-12, 2, 100)
    assert p_small < 1e-100
    assert f_test_pvalue(5.0, 0.0, 2, 100)[0] == 0.0


@pytest.mark.parametrize("rss1, rss2, p, dof", [
    (10.0, 9.0, 1, 50), (10.0, 9.9, 3, 200), (4.0, 1.0, 2, 30), (1.0001, 1.0, 5, 1000),
])
def test_f_pvalue_against_incomplete_beta(rss1, rss2, p, dof):
    got, f = f_test_pvalue(rss1, rss2, p, dof)
    x = dof / (dof + p * f)
    mpmath.mp.dps = 30
    ref = float(mpmath.betainc(dof / 2, p / 2, 0, x, regularized=True))
    assert got == pytest.approx(ref, abs=1e-10)


def test_surrogate_pvalue_detects_coupling():
    panel = generate_var(chain_spec(T=600, seed=1))
    p = gc_significance(panel, "A", "B", 2, method="surrogate", n_surrogates=49, seed=3)
    assert p == pytest.approx(1 / 50)


def test_surrogate_pvalue_null_and_determinism(white_noise):
    panel = white_noise(400, 2, 8)
    a = gc_significance(panel, "A", "B", 1, method="surrogate", n_surrogates=99, seed=5)
    b = gc_significance(panel, "A", "B", 1, method="surrogate", n_surrogates=99, seed=5)
    assert a == b
    assert 0.01 < a <= 1.0
    assert (a * 100) == pytest.approx(round(a * 100))


def test_surrogate_needs_enough_offsets(white_noise):
    with pytest.raises(InsufficientSamples):
        gc_significance(white_noise(30, 2, 0), "A", "B", 2, method="surrogate",
                        n_surrogates=100)


# --- lag selection ---------------------------------------------------------------

def ar1(T, seed, phi=0.5):
    return generate_var(VarSpec(n=1, p=1, coupling=[[[phi]]], T=T, seed=seed))


@pytest.mark.slow
def test_bic_recovers_ar1():
    hits = sum(select_lag_bic(ar1(10 ** 4, s), "A", 6) == 1 for s in range(100))
    assert hits >= 95


def test_bic_white_noise_prefers_smallest(white_noise):
    hits = sum(select_lag_bic(white_noise(2000, 1, s), "A", 4) == 1 for s in range(100))
    assert hits >= 90


def test_bic_single_candidate(white_noise):
    assert select_lag_bic(white_noise(100, 2, 0), "A", 1) == 1


def test_bic_detects_second_order():
    spec = VarSpec(n=1, p=2, coupling=[[[0.2]], [[0.5]]], T=5000, seed=2)
    assert select_lag_bic(generate_var(spec), "A", 6) == 2


# --- matrix ------------------------------------------------------------------------

def test_matrix_null(white_noise):
    m = causality_matrix(white_noise(10 ** 4, 2, 11), p=1)
    assert m.gc[0, 1] <= 0.01 and m.gc[1, 0] <= 0.01
    assert np.all(np.diag(m.gc) == 0)


def test_matrix_chain_conditioning_removes_indirect_path():
    indirect = direct = 0
    for seed in range(50):
        m = causality_matrix(generate_var(chain_spec(T=2000, seed=100 + seed)), p=2)
        direct += (m.p_values[0, 1] <= 0.01) and (m.p_values[1, 2] <= 0.01)
        indirect += m.p_values[0, 2] <= 0.01
    assert direct == 50
    assert indirect <= 5


def test_pairwise_gc_sees_indirect_path():
    panel = generate_var(chain_spec(T=4000, seed=7, coupling=0.6))
    cond = conditional_gc(panel, "A", "C", 2)
    pair = conditional_gc(panel, "A", "C", 2, conditioning=[])
    assert pair.p_value < 0.01 < cond.p_value


def test_matrix_permutation_equivariance():
    panel = generate_var(chain_spec(T=500, seed=2))
    perm = [2, 0, 1]
    permuted = panel.select([panel.labels[k] for k in perm])
    m1 = causality_matrix(panel, p=2)
    m2 = causality_matrix(permuted, p=2)
    assert np.allclose(m1.gc[np.ix_(perm, perm)], m2.gc, rtol=1e-10, atol=1e-14)
    assert m2.labels == ["C", "A", "B"]


def test_matrix_determinism_with_surrogates():
    panel = generate_var(chain_spec(T=300, seed=2))
    a = causality_matrix(panel, p=1, method="surrogate", n_surrogates=20, seed=9)
    b = causality_matrix(panel, p=1, method="surrogate", n_surrogates=20, seed=9)
    assert np.array_equal(a.gc, b.gc) and np.array_equal(a.p_values, b.p_values)
    assert a.to_dict() == b.to_dict()


def test_matrix_auto_lag():
    m = causality_matrix(generate_var(chain_spec(T=3000, seed=1)))
    assert m.lag == 2


def test_rank_deficient_pairs_fall_back_or_fail(white_noise):
    panel = white_noise(300, 2, 0)
    dup = make_panel(np.column_stack([panel.values, panel.values[:, 1]]))
    m = causality_matrix(dup, p=1)
    assert m.fallback[0, 1] and m.fallback[0, 2]
    assert np.isfinite(m.gc[0, 1])
    assert ("B", "C") in m.failures and math.isnan(m.gc[1, 2])
    assert "RankDeficient" in m.failures[("B", "C")]


def test_matrix_dict_round_trip():
    m = causality_matrix(generate_var(chain_spec(T=300, seed=2)), p=1)
    from marketflow.var_granger import CausalityMatrix
    back = CausalityMatrix.from_dict(m.to_dict())
    assert np.array_equal(back.gc, m.gc) and np.array_equal(back.p_values, m.p_values)
    assert back.to_dict() == m.to_dict()
