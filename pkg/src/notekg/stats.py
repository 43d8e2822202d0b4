"""Paired-design, bootstrap, agreement, and multiplicity statistics.

Only the battery this harness needs: exact and chi-square McNemar tests,
score-based paired-difference intervals, Wilson intervals, BCa bootstrap with
optional cluster resampling, Cohen/Fleiss kappa, BH/BY false-discovery-rate
adjustment, the sign test, and ordinary least squares with a correlation test.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairedTable:
    """2x2 paired-outcome table: a both correct, b first-only, c second-only,
    d neither."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n < 1:
            raise ValueError("paired table is empty")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError("lower bound above upper bound")


def _two_sided_exact_binomial(k: int, n: int) -> float:
    """Two-sided exact binomial p at rate 0.5: min(1, 2 * P(X <= min(k, n-k)))."""
    if n == 0:
        return 1.0
    k = min(k, n - k)
    if n <= 1000:
        tail = Fraction(sum(math.comb(n, i) for i in range(k + 1)), 2**n)
        return min(1.0, float(2 * tail))
    return min(1.0, 2.0 * float(sps.binom.cdf(k, n, 0.5)))


def mcnemar_exact(b: int, c: int) -> float:
    """Two-sided exact McNemar p-value on the discordant counts."""
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    return _two_sided_exact_binomial(min(b, c), b + c)


def mcnemar_chi2(b: int, c: int, continuity: bool = False) -> tuple[float, float]:
    """McNemar chi-square statistic and p-value (df=1).

    Default is no continuity correction; pass ``continuity=True`` for the
    Edwards-corrected statistic.
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    if b + c == 0:
        raise ValueError("no discordant pairs")
    if continuity:
        stat = (abs(b - c) - 1) ** 2 / (b + c)
    else:
        stat = (b - c) ** 2 / (b + c)
    return stat, float(sps.chi2.sf(stat, df=1))


def wilson_ci(k: int, n: int, level: float = 0.95) -> ConfidenceInterval:
    """Wilson score interval for a simple proportion k/n."""
    if not 0 <= k <= n or n < 1:
        raise ValueError("need 0 <= k <= n with n >= 1")
    z = float(sps.norm.ppf(1 - (1 - level) / 2))
    p = k / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lower = 0.0 if k == 0 else max(0.0, center - half)
    upper = 1.0 if k == n else min(1.0, center + half)
    return ConfidenceInterval(lower, upper, level)


def newcombe_paired_ci(
    table: PairedTable, level: float = 0.95
) -> tuple[float, ConfidenceInterval]:
    """Difference of paired proportions with a score-based interval.

    Delta is p2 - p1 = (c - b) / n. The interval applies the Wilson score
    interval to the discordant fraction c / (b + c) and maps it back to the
    difference scale via (2q - 1)(b + c)/n, so it degenerates to [0, 0] when
    there are no discordant pairs.
    """
    n = table.n
    delta = (table.c - table.b) / n
    m = table.b + table.c
    if m == 0:
        return delta, ConfidenceInterval(0.0, 0.0, level)
    q = wilson_ci(table.c, m, level)
    lower = (2 * q.lower - 1) * m / n
    upper = (2 * q.upper - 1) * m / n
    return delta, ConfidenceInterval(lower, upper, level)


def wald_paired_ci(
    table: PairedTable, level: float = 0.95
) -> tuple[float, ConfidenceInterval]:
    """Standard Wald interval on the paired difference (internal audit use)."""
    n = table.n
    delta = (table.c - table.b) / n
    z = float(sps.norm.ppf(1 - (1 - level) / 2))
    se = math.sqrt(max(0.0, (table.b + table.c) - (table.c - table.b) ** 2 / n)) / n
    return delta, ConfidenceInterval(delta - z * se, delta + z * se, level)


def sign_test(n_positive: int, n_negative: int) -> float:
    """Two-sided exact sign test (ties excluded upstream)."""
    if n_positive < 0 or n_negative < 0:
        raise ValueError("counts must be non-negative")
    return _two_sided_exact_binomial(min(n_positive, n_negative), n_positive + n_negative)


# -- bootstrap ------------------------------------------------------------


@dataclass(frozen=True)
class BcaDiagnostics:
    point: float
    z0: float
    acceleration: float
    resamples_used: int
    resamples_skipped: int


def _substream(seed: int, index: int) -> np.random.Generator:
    # Counter-based substream per resample: results do not depend on how
    # resamples are scheduled across workers.
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def _stat_or_none(statistic, sample) -> Optional[float]:
    try:
        value = float(statistic(sample))
    except (ValueError, ZeroDivisionError, FloatingPointError):
        return None
    return None if math.isnan(value) else value


def bca_interval_from_resamples(
    thetas: np.ndarray, z0: float, accel: float, level: float = 0.95
) -> tuple[float, float]:
    """The BCa quantile adjustment itself: with z0 = 0 and accel = 0 this is
    exactly the percentile interval."""
    arr = np.sort(np.asarray(thetas, dtype=float))
    alpha = 1 - level
    bounds = []
    for q in (alpha / 2, 1 - alpha / 2):
        zq = float(sps.norm.ppf(q))
        adj = float(sps.norm.cdf(z0 + (z0 + zq) / (1 - accel * (z0 + zq))))
        bounds.append(float(np.quantile(arr, adj)))
    return min(bounds), max(bounds)


def bca_bootstrap(
    items: Sequence,
    statistic: Callable[[Sequence], float],
    resamples: int = 2000,
    seed: int = 42,
    cluster_key: Optional[Callable[[object], Hashable]] = None,
    level: float = 0.95,
    return_diagnostics: bool = False,
):
    """Bias-corrected accelerated bootstrap interval.

    With ``cluster_key``, whole clusters are resampled with replacement (all
    of a drawn cluster's items enter the resample) and the jackknife for the
    acceleration term leaves one cluster out at a time. Resamples on which
    the statistic is undefined (raises or returns NaN) are skipped and
    counted; more than half skipped is an error.
    """
    items = list(items)
    if not items:
        raise ValueError("empty sample")
    theta = float(statistic(items))

    if cluster_key is not None:
        groups: dict[Hashable, list] = {}
        for it in items:
            groups.setdefault(cluster_key(it), []).append(it)
        keys = sorted(groups, key=repr)
        clusters = [groups[k] for k in keys]
        units: list[list] = clusters
    else:
        units = [[it] for it in items]
    n_units = len(units)

    thetas: list[float] = []
    skipped = 0
    for i in range(resamples):
        gen = _substream(seed, i)
        idx = gen.integers(0, n_units, size=n_units)
        sample = [it for j in idx for it in units[j]]
        value = _stat_or_none(statistic, sample)
        if value is None:
            skipped += 1
        else:
            thetas.append(value)
    if skipped > resamples / 2:
        raise DataError(f"statistic undefined on {skipped}/{resamples} resamples")
    if skipped:
        log.warning("bootstrap skipped %d/%d resamples", skipped, resamples)

    arr = np.sort(np.asarray(thetas))
    used = len(arr)
    if used == 0 or bool(np.all(arr == theta)):
        ci = ConfidenceInterval(theta, theta, level)
        diag = BcaDiagnostics(theta, 0.0, 0.0, used, skipped)
        return (ci, diag) if return_diagnostics else ci

    frac = np.count_nonzero(arr < theta) / used
    frac = min(max(frac, 1 / (2 * used)), 1 - 1 / (2 * used))
    z0 = float(sps.norm.ppf(frac))

    jack: list[float] = []
    if n_units > 1:
        for i in range(n_units):
            sample = [it for j, u in enumerate(units) if j != i for it in u]
            value = _stat_or_none(statistic, sample)
            if value is not None:
                jack.append(value)
    if len(jack) > 1:
        jarr = np.asarray(jack)
        jmean = jarr.mean()
        num = float(np.sum((jmean - jarr) ** 3))
        den = 6.0 * float(np.sum((jmean - jarr) ** 2)) ** 1.5
        accel = 0.0 if den == 0.0 else num / den
    else:
        accel = 0.0

    lower, upper = bca_interval_from_resamples(arr, z0, accel, level)
    ci = ConfidenceInterval(lower, upper, level)
    diag = BcaDiagnostics(theta, z0, accel, used, skipped)
    return (ci, diag) if return_diagnostics else ci


# -- agreement ------------------------------------------------------------


def cohen_kappa(
    r1: Sequence, r2: Sequence, weighting: str = "none"
) -> float:
    """Cohen's kappa, optionally linear- or quadratic-weighted.

    Weighted variants order the categories by sorted label. Degenerate
    chance agreement (both raters constant and identical) is defined as 1.0.
    """
    if len(r1) != len(r2):
        raise ValueError("rating vectors differ in length")
    if not r1:
        raise ValueError("empty rating vectors")
    if weighting not in ("none", "linear", "quadratic"):
        raise ValueError(f"unknown weighting {weighting!r}")

    cats = sorted(set(r1) | set(r2), key=repr)
    k = len(cats)
    index = {c: i for i, c in enumerate(cats)}
    n = len(r1)
    observed = np.zeros((k, k))
    for x, y in zip(r1, r2):
        observed[index[x], index[y]] += 1
    observed /= n
    p_row = observed.sum(axis=1)
    p_col = observed.sum(axis=0)
    expected = np.outer(p_row, p_col)

    if weighting == "none":
        weights = 1.0 - np.eye(k)
    else:
        i, j = np.indices((k, k))
        dist = np.abs(i - j) / (k - 1) if k > 1 else np.zeros((k, k))
        weights = dist if weighting == "linear" else dist**2

    disagree_obs = float(np.sum(weights * observed))
    disagree_exp = float(np.sum(weights * expected))
    if disagree_exp == 0.0:
        return 1.0 if disagree_obs == 0.0 else 0.0
    return 1.0 - disagree_obs / disagree_exp


def fleiss_kappa(table: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over an items x categories count table.

    Every item must have the same rater count (>= 2).
    """
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("table must be 2-D with at least one item")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    raters = arr.sum(axis=1)
    if not np.all(raters == raters[0]):
        raise ValueError("unequal rater counts across items")
    n_raters = raters[0]
    if n_raters < 2:
        raise ValueError("need at least two raters per item")

    n_items = arr.shape[0]
    p_cat = arr.sum(axis=0) / (n_items * n_raters)
    p_item = (np.sum(arr * arr, axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_item.mean())
    p_exp = float(np.sum(p_cat * p_cat))
    if p_exp == 1.0:
        return 1.0
    return (p_bar - p_exp) / (1 - p_exp)


# -- multiplicity ----------------------------------------------------------


def _validate_pvalues(ps: Sequence[float]) -> list[float]:
    out = []
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
        out.append(float(p))
    return out


def bh_fdr(ps: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjusted q-values, in input order."""
    ps = _validate_pvalues(ps)
    m = len(ps)
    if m == 0:
        return []
    order = sorted(range(m), key=lambda i: ps[i])
    q = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, ps[i] * m / rank)
        q[i] = running
    return q


def by_adjustment_factor(m: int) -> float:
    """The Benjamini-Yekutieli penalty c(m) = sum_{i=1..m} 1/i."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return sum(1.0 / i for i in range(1, m + 1))


def by_fdr(ps: Sequence[float]) -> list[float]:
    """Benjamini-Yekutieli adjusted q-values (BH scaled by c(m)), input order."""
    ps = _validate_pvalues(ps)
    m = len(ps)
    if m == 0:
        return []
    cm = by_adjustment_factor(m)
    order = sorted(range(m), key=lambda i: ps[i])
    q = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, min(1.0, ps[i] * cm * m / rank))
        q[i] = running
    return q


# -- regression ------------------------------------------------------------


def linear_regression(
    xs: Sequence[float], ys: Sequence[float]
) -> tuple[float, float, float, float]:
    """OLS fit returning (slope, intercept, pearson r, two-sided p).

    The p-value is from t = r * sqrt((n-2) / (1-r^2)) on n-2 degrees of
    freedom. Constant x is a domain error; constant y gives slope 0, r 0.
    """
    n = len(xs)
    if n != len(ys):
        raise ValueError("x and y differ in length")
    if n < 3:
        raise ValueError("need at least 3 points")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    if sxx == 0.0:
        raise ValueError("x values are constant")
    slope = sxy / sxx
    intercept = my - slope * mx
    if syy == 0.0:
        return slope, intercept, 0.0, 1.0
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return slope, intercept, r, 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    p = 2.0 * float(sps.t.sf(abs(t), df=n - 2))
    return slope, intercept, r, p


def paired_table_from_outcomes(
    first: Iterable[bool], second: Iterable[bool]
) -> PairedTable:
    """Build a PairedTable from aligned correctness vectors."""
    a = b = c = d = 0
    first = list(first)
    second = list(second)
    if len(first) != len(second):
        raise ValueError("outcome vectors differ in length")
    for x, y in zip(first, second):
        if x and y:
            a += 1
        elif x:
            b += 1
        elif y:
            c += 1
        else:
            d += 1
    return PairedTable(a, b, c, d)
