import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcissa import (
    Decomposition,
    GroupingError,
    GroupingSpec,
    ParameterError,
    TimeSeriesPanel,
    decompose,
    decompose_univariate,
    demean,
    elementary_projection,
    embed,
    group_matrices,
    hankelize,
    uniqueness_check,
)
from mcissa.decomposition import pair_columns, period_to_frequency

from .conftest import random_panel


def brute_embed(x, L):
    M, T = x.shape
    N = T - L + 1
    X = np.empty((L * M, N))
    for r in range(L):
        for i in range(M):
            for c in range(N):
                X[r * M + i, c] = x[i, r + c]
    return X


def brute_hankelize(A):
    L, N = A.shape
    T = L + N - 1
    out = np.empty(T)
    for t in range(T):
        vals = [A[r, t - r] for r in range(L) if 0 <= t - r < N]
        out[t] = sum(vals) / len(vals)
    return out


def test_embed_small_example():
    X = embed(np.array([[1.0, 2, 3, 4], [5, 6, 7, 8]]), 2)
    np.testing.assert_array_equal(X.data, [[1, 2, 3], [5, 6, 7], [2, 3, 4], [6, 7, 8]])
    assert (X.L, X.M, X.N) == (2, 2, 3)


def test_embed_matches_brute_force():
    x = random_panel(1, 3, 30).values
    X = embed(x, 7)
    np.testing.assert_array_equal(X.data, brute_embed(x, 7))
    # each series block is Hankel
    S = X.series(1)
    for r in range(6):
        np.testing.assert_array_equal(S[r + 1, :-1], S[r, 1:])


def test_hankelize_two_row_example():
    a, b, c, d, e, f = 1.0, 2.0, 3.0, 4.0, 5.0, 6.0
    np.testing.assert_allclose(hankelize([[a, b, c], [d, e, f]]), [a, (b + d) / 2, (c + e) / 2, f])


def test_hankelize_matches_brute_force():
    A = np.random.default_rng(2).standard_normal((5, 9))
    np.testing.assert_allclose(hankelize(A), brute_hankelize(A), atol=1e-15)


def test_hankelize_vector_entries():
    A = np.random.default_rng(3).standard_normal((4, 6, 2))
    out = hankelize(A)
    assert out.shape == (9, 2)
    np.testing.assert_allclose(out[:, 1], brute_hankelize(A[:, :, 1]), atol=1e-15)


def test_hankelize_rejects_tall():
    with pytest.raises(ParameterError):
        hankelize(np.zeros((5, 3)))


def test_hankelize_inverts_embed():
    x = random_panel(4, 3, 25).values
    X = embed(x, 6)
    for i in range(3):
        np.testing.assert_allclose(hankelize(X.series(i)), x[i], rtol=0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, (3, 5), elements=st.floats(-1e3, 1e3)),
       st.floats(-10, 10))
def test_hankelize_linear(A, B, c):
    np.testing.assert_allclose(hankelize(A + c * B), hankelize(A) + c * hankelize(B), atol=1e-9)


def test_pair_columns():
    assert pair_columns(6, 2, 1) == [0, 1]
    assert pair_columns(6, 2, 2, 1) == [2, 10]
    assert pair_columns(6, 2, 4) == [6, 7]
    assert pair_columns(7, 1, 4) == [3, 4]
    with pytest.raises(ParameterError):
        pair_columns(6, 2, 5)


def test_elementary_completeness_and_rank_one():
    fit = Decomposition(random_panel(5, 2, 60), 8)
    X = fit.trajectory
    total = sum(elementary_projection(X, fit.basis, k, m) for k in range(1, 9) for m in (1, 2))
    np.testing.assert_allclose(total, X.data, atol=1e-12)
    P = elementary_projection(X, fit.basis, 3, 2)
    s = np.linalg.svd(P, compute_uv=False)
    assert s[1] <= 1e-12 * s[0]
    np.testing.assert_allclose(elementary_projection(X, fit.basis, 3, 2, i=1), P[1::2])


def test_cosine_concentrates_on_its_pair():
    L = 24
    x = np.cos(2 * np.pi * np.arange(240) / L)
    fit = Decomposition(x, L)
    X = fit.trajectory
    energy = sum(np.sum(elementary_projection(X, fit.basis, k, 1) ** 2) for k in (2, L))
    assert energy / np.sum(X.data**2) == pytest.approx(1.0, abs=1e-6)


def test_group_matrices():
    fit = Decomposition(random_panel(6, 3, 80), 10)
    X = fit.trajectory
    g = group_matrices(X, fit.basis, GroupingSpec.everything(), 1)
    assert list(g) == ["all"]
    np.testing.assert_allclose(g["all"], X.series(1), atol=1e-12)
    g = group_matrices(X, fit.basis, "trend:k=1; c:k=3", 2)
    trend = sum(elementary_projection(X, fit.basis, 1, m, i=2) for m in (1, 2, 3))
    np.testing.assert_allclose(g["trend"], trend, atol=1e-12)
    cyc = sum(elementary_projection(X, fit.basis, k, m, i=2) for k in (3, 9) for m in (1, 2, 3))
    np.testing.assert_allclose(g["c"], cyc, atol=1e-12)
    np.testing.assert_allclose(sum(g.values()), X.series(2), atol=1e-12)
    with pytest.raises(ParameterError):
        group_matrices(X, fit.basis, "a:k=1", 3)


def test_period_rule():
    assert period_to_frequency(12, 96) == 9
    assert period_to_frequency(96, 96) == 2
    assert period_to_frequency(float("inf"), 96) == 1
    with pytest.raises(GroupingError):
        period_to_frequency(0, 96)


def test_grouping_parse_and_resolve():
    spec = GroupingSpec.parse("trend: period>=96; cycle: period=24-95 m=1 | k=10")
    g = spec.resolve(96, 2)
    assert g.frequencies("trend") == [1, 2]
    assert g["cycle"] == ((3, 1), (4, 1), (5, 1), (10, 1), (10, 2))
    assert list(g) == ["trend", "cycle", "residual"]
    assert (3, 2) in g["residual"] and (49, 2) in g["residual"]
    assert sum(len(p) for p in g.values()) == 49 * 2
    assert GroupingSpec.parse(spec.text()).resolve(96, 2) == g


def test_grouping_no_residual_when_complete():
    g = GroupingSpec.parse("lo:k=1-3; hi:k=4-5").resolve(8, 1)
    assert list(g) == ["lo", "hi"]


@pytest.mark.parametrize("text, match", [
    ("a:k=1-3; b:k=3", r"overlapping.*k=3, m=1.*'a' and 'b'"),
    ("residual:k=1", "reserved"),
    ("a:k=9", "outside"),
    ("a:k=1 m=4", "outside"),
    ("a k=1", "name"),
    ("a:k=1; a:k=2", "twice"),
    ("a:period<1", "matches no"),
    ("a:q=1", "cannot parse"),
])
def test_grouping_errors(text, match):
    with pytest.raises(GroupingError, match=match):
        GroupingSpec.parse(text).resolve(12, 3)


def test_decompose_completeness():
    p = random_panel(7, 3, 150)
    r = decompose(p, 20, "trend:k=1; a:period=4-10")
    np.testing.assert_allclose(r.total(), p.values, atol=1e-10)
    assert r.components["a"].series_names == p.series_names


def test_decompose_recovers_period_12_cycle():
    rng = np.random.default_rng(11)
    t = np.arange(960)
    cyc = np.vstack([np.cos(2 * np.pi * t / 12 + ph) for ph in (0.0, 0.7)])
    slow = np.vstack([0.8 * np.cos(2 * np.pi * t / 48), 0.5 * np.sin(2 * np.pi * t / 48)])
    p = demean(TimeSeriesPanel(cyc + slow + 0.3 * rng.standard_normal((2, 960)), ["a", "b"]))
    r = decompose(p, 96, "cycle:period=12")
    assert r.grouping.frequencies("cycle") == [9]
    for i in range(2):
        assert np.corrcoef(r.components["cycle"].values[i], cyc[i])[0, 1] >= 0.99


def test_white_noise_trend_is_small():
    p = random_panel(12, 2, 1000)
    r = decompose(p, 48, "trend:k=1")
    share = r.components["trend"].values.var(axis=1) / p.values.var(axis=1)
    assert np.all(share <= 0.05)


def test_elementary_set():
    p = random_panel(13, 2, 60)
    r = decompose(p, 6, "t:k=1", elementary=True)
    assert sorted(r.elementary) == [(k, m) for k in range(1, 5) for m in (1, 2)]
    np.testing.assert_allclose(sum(e.values for e in r.elementary.values()), p.values, atol=1e-12)


def test_univariate_harmonic():
    t = np.arange(480)
    x = 3 * np.cos(2 * np.pi * t / 12)
    out = decompose_univariate(x, 48, "c:period=12")
    np.testing.assert_allclose(out["c"], x, atol=1e-9)
    np.testing.assert_allclose(out["residual"], 0, atol=1e-9)
    with pytest.raises(ParameterError):
        decompose_univariate(np.zeros((2, 10)), 4, "a:k=1")


def test_uniqueness_single_series_exact():
    rep = uniqueness_check(random_panel(14, 1, 100), 12)
    assert rep.worst == 0.0 and rep.ok


def test_uniqueness_three_series():
    rep = uniqueness_check(random_panel(15, 3, 200), 24)
    assert rep.discrepancy.shape == (3, 13)
    assert rep.ok
    assert rep.worst <= 1e-10


def test_uniqueness_duplicated_series():
    x = np.random.default_rng(16).standard_normal(120)
    p = demean(TimeSeriesPanel(np.vstack([x, x, -x]), ["a", "b", "c"]))
    assert uniqueness_check(p, 12).ok


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.permutations([0, 1, 2]))
def test_permutation_equivariance(seed, order):
    p = random_panel(seed, 3, 60)
    spec = "t:k=1; c:k=2-3"
    a = decompose(p, 10, spec)
    b = decompose(p.take(order), 10, spec)
    for name in a.components:
        np.testing.assert_allclose(b.components[name].values, a.components[name].values[list(order)], atol=1e-10)
