"""One-way ANOVA, per-dialect means and ANOVA-based feature ranking.

The F-distribution tail is evaluated through the regularized incomplete
beta function, computed here with a Lentz continued fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError, DegenerateInput, EmptyGroup
from .prosody import FEATURE_NAMES

_EPS = 1e-15
_TINY = 1e-300


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p_value: float
    df_between: int
    df_within: int


def _betacf(a, b, x, tol=1e-15, max_iter=10000):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise DataError("betainc needs a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f, df1, df2):
    """Upper tail P(F > f) of the F distribution."""
    if math.isinf(f):
        return 0.0
    if f <= 0:
        return 1.0
    # P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
    x = df2 / (df2 + df1 * f)
    return min(1.0, max(0.0, betainc(df2 / 2.0, df1 / 2.0, x)))


def anova_oneway(groups) -> AnovaResult:
    """Classic one-way ANOVA across ``groups`` (sequences of numbers).

    Zero within-group variance with distinct group means yields
    ``F = inf`` and ``p = 0``.
    """
    arrs = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(arrs) < 2:
        raise DegenerateInput("need at least two groups")
    if any(a.size < 2 for a in arrs):
        raise DegenerateInput("every group needs at least two values")
    allv = np.concatenate(arrs)
    if not np.all(np.isfinite(allv)):
        raise DegenerateInput("values must be finite")
    if np.all(allv == allv[0]):
        raise DegenerateInput("all values are identical")
    k = len(arrs)
    n = allv.size
    grand = allv.mean()
    ssb = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrs))
    ssw = float(sum(np.sum((a - a.mean()) ** 2) for a in arrs))
    df_b, df_w = k - 1, n - k
    scale = max(float(np.sum((allv - grand) ** 2)), _TINY)
    if ssw <= _EPS * scale:
        if ssb <= _EPS * scale:
            return AnovaResult(0.0, 1.0, df_b, df_w)
        return AnovaResult(math.inf, 0.0, df_b, df_w)
    if ssb <= _EPS * scale:
        ssb = 0.0
    f = (ssb / df_b) / (ssw / df_w)
    return AnovaResult(f, f_sf(f, df_b, df_w), df_b, df_w)


def _check_table(X, labels):
    X = np.asarray(X, dtype=np.float64)
    labels = list(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("feature table must be a nonempty 2-D array")
    if len(labels) != X.shape[0]:
        raise DataError("one label per row is required")
    if any(l is None or l == "" for l in labels):
        raise DataError("every row must be labelled")
    return X, np.asarray(labels, dtype=object)


def dialect_means(X, labels, dialects=None, feature_names=FEATURE_NAMES):
    """Mean of every feature per dialect.

    Returns ``(dialects, means)`` where ``means[i, j]`` is the mean of
    feature ``i`` over the rows labelled ``dialects[j]``. Dialects default
    to their order of first appearance.
    """
    X, labels = _check_table(X, labels)
    if dialects is None:
        dialects = list(dict.fromkeys(labels.tolist()))
    means = np.empty((len(feature_names), len(dialects)))
    for j, d in enumerate(dialects):
        rows = labels == d
        if not rows.any():
            raise EmptyGroup(d)
        means[:, j] = X[rows].mean(axis=0)
    return list(dialects), means


def rank_features(X, labels, k, feature_names=FEATURE_NAMES):
    """The ``k`` features with the largest one-way ANOVA F across classes.

    Ties keep the canonical feature order. Returns ``(names, f_values)``
    in rank order.
    """
    X, labels = _check_table(X, labels)
    n_feat = X.shape[1]
    if not 1 <= k <= n_feat:
        raise DataError(f"k must be in 1..{n_feat}")
    classes = list(dict.fromkeys(labels.tolist()))
    if len(classes) < 2:
        raise DegenerateInput("need at least two classes to rank features")
    masks = [labels == c for c in classes]
    fvals = []
    for j in range(n_feat):
        try:
            res = anova_oneway([X[m, j] for m in masks])
        except DegenerateInput as exc:
            raise DegenerateInput(str(exc), feature=feature_names[j]) from exc
        fvals.append(res.f_stat)
    order = sorted(range(n_feat), key=lambda j: (-fvals[j], j))[:k]
    return [feature_names[j] for j in order], [fvals[j] for j in order]


@dataclass(frozen=True)
class Comparison:
    feature: str
    comparison: str
    higher: str
    lower: str
    result: AnovaResult
    extreme: bool


def pairwise_anovas(X, labels, dialects=None, feature_names=FEATURE_NAMES):
    """Two-group ANOVAs for every dialect pair and feature.

    Each comparison is phrased ``"<higher mean> > <lower mean>"``;
    ``extreme`` marks the pair made of the lowest- and highest-mean dialect.
    """
    dialects, means = dialect_means(X, labels, dialects, feature_names)
    X, labels = _check_table(X, labels)
    out = []
    for i, feat in enumerate(feature_names):
        lo = dialects[int(np.argmin(means[i]))]
        hi = dialects[int(np.argmax(means[i]))]
        for a, b in combinations(range(len(dialects)), 2):
            da, db = dialects[a], dialects[b]
            if means[i, a] >= means[i, b]:
                high, low = da, db
            else:
                high, low = db, da
            try:
                res = anova_oneway([X[labels == high, i], X[labels == low, i]])
            except DegenerateInput as exc:
                raise DegenerateInput(str(exc), feature=feat) from exc
            out.append(Comparison(feat, f"{high} > {low}", high, low, res,
                                  {high, low} == {lo, hi}))
    return out
