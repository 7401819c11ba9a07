import numpy as np
import pytest
from scipy import stats as sps

from hadid.errors import DegenerateInput
from hadid.prosody import FEATURE_NAMES
from hadid.stats import (anova_oneway, betainc, dialect_means, f_sf, pairwise_anovas,
                         rank_features)


def test_two_small_groups():
    r = anova_oneway([[1, 2, 3], [2, 3, 4]])
    assert r.f_stat == pytest.approx(1.5)
    assert (r.df_between, r.df_within) == (1, 4)
    assert abs(r.p_value - 0.288) <= 1e-3
    # closed form for the F(1, 4) tail: 1 - I_x(1/2, 2) with x = F / (F + 4)
    x = 1.5 / 5.5
    exact = 1 - (np.sqrt(x) * (3 - x) / 2)
    assert r.p_value == pytest.approx(exact, abs=1e-12)


def test_identical_values_degenerate():
    with pytest.raises(DegenerateInput):
        anova_oneway([[5, 5, 5], [5, 5, 5]])


def test_equal_means_f_zero():
    r = anova_oneway([[1, 1, 2, 2], [1, 2, 1, 2]])
    assert r.f_stat == 0.0 and r.p_value == 1.0


def test_zero_within_variance():
    r = anova_oneway([[1, 1, 1], [2, 2, 2]])
    assert r.f_stat == np.inf and r.p_value == 0.0


def test_degenerate_shapes():
    with pytest.raises(DegenerateInput):
        anova_oneway([[1, 2, 3]])
    with pytest.raises(DegenerateInput):
        anova_oneway([[1], [2]])


def test_p_monotone_in_f():
    fs = np.linspace(0.0, 20.0, 100)
    ps = [f_sf(f, 3, 40) for f in fs]
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert ps[0] == 1.0


def test_matches_scipy_reference(rng):
    for _ in range(50):
        k = int(rng.integers(2, 6))
        groups = [rng.normal(rng.normal(), 1, int(rng.integers(2, 30))) for _ in range(k)]
        r = anova_oneway(groups)
        ref = sps.f_oneway(*groups)
        assert r.f_stat == pytest.approx(ref.statistic, rel=1e-10)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


def test_betainc_against_scipy():
    from scipy.special import betainc as ref
    for a, b, x in [(0.5, 2, 0.27), (3, 7, 0.5), (20, 0.5, 0.99), (1, 1, 0.3), (50, 60, 0.45)]:
        assert betainc(a, b, x) == pytest.approx(ref(a, b, x), rel=1e-12)
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0


def test_means_identity_and_midpoint():
    X = np.arange(3 * 14, dtype=float).reshape(3, 14)
    d, M = dialect_means(X, ["a", "b", "c"])
    assert d == ["a", "b", "c"] and np.array_equal(M, X.T)
    X2 = np.zeros((2, 14))
    X2[:, 0] = [40, 44]
    _, M2 = dialect_means(X2, ["a", "a"])
    assert M2[0, 0] == 42.0


def test_planted_signal_ranks_first(rng):
    n = 300
    X = rng.normal(size=(n, 14))
    y = np.repeat(["A", "B"], n // 2)
    X[y == "B", FEATURE_NAMES.index("pitch_range")] += 1.5
    names, fvals = rank_features(X, y, 3)
    assert names[0] == "pitch_range"
    assert list(fvals) == sorted(fvals, reverse=True)


def test_rank_all_features_is_permutation(rng):
    X = rng.normal(size=(40, 14))
    names, _ = rank_features(X, np.repeat(["A", "B"], 20), 14)
    assert sorted(names) == sorted(FEATURE_NAMES)


def test_pairwise_direction_and_extremes():
    X = np.zeros((9, 14))
    X[:, 0] = [1, 2, 3, 5, 6, 7, 9, 10, 11]
    X[:, 1:] = np.arange(9)[:, None] % 3
    labels = ["lo"] * 3 + ["mid"] * 3 + ["hi"] * 3
    comps = [c for c in pairwise_anovas(X, labels) if c.feature == FEATURE_NAMES[0]]
    assert {c.comparison for c in comps} == {"mid > lo", "hi > lo", "hi > mid"}
    assert [c.extreme for c in comps if c.comparison == "hi > lo"] == [True]
