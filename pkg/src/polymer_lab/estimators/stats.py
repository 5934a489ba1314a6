"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats


def mean_and_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()) if x.size else math.nan, math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def t_interval(x: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Two-sided Student-t confidence interval for the mean."""
    m, se = mean_and_se(x)
    q = stats.t.ppf(0.5 + level / 2, np.size(x) - 1)
    return m - q * se, m + q * se


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def jackknife_variance(x: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its jackknife standard error.

    Leave-one-out variances have the closed form
    ``((n-1) s^2 - n/(n-1) (x_i - mean)^2) / (n-2)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        raise ValueError("the jackknife needs at least three observations")
    if np.ptp(x) == 0:
        return 0.0, 0.0
    s2 = float(x.var(ddof=1))
    dev2 = (x - x.mean()) ** 2
    loo = ((n - 1) * s2 - n / (n - 1) * dev2) / (n - 2)
    jk_var = (n - 1) / n * float(((loo - loo.mean()) ** 2).sum())
    return s2, math.sqrt(jk_var)


def jackknife_ratio(num: np.ndarray, den: np.ndarray, num_is_variance: bool = True) -> tuple[float, float]:
    """``Var(num) / mean(den)`` (or ``mean(num) / mean(den)``) with a jackknife error."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    n = num.size
    if n < 3:
        raise ValueError("the jackknife needs at least three observations")
    loo_den = (den.sum() - den) / (n - 1)
    if num_is_variance:
        s2 = float(num.var(ddof=1))
        dev2 = (num - num.mean()) ** 2
        loo_num = ((n - 1) * s2 - n / (n - 1) * dev2) / (n - 2)
        full_num = s2
    else:
        loo_num = (num.sum() - num) / (n - 1)
        full_num = float(num.mean())
    full_den = float(den.mean())
    with np.errstate(divide="ignore", invalid="ignore"):
        loo = loo_num / loo_den
        ratio = full_num / full_den if full_den != 0 else math.nan
    jk_var = (n - 1) / n * float(((loo - loo.mean()) ** 2).sum())
    return ratio, math.sqrt(jk_var)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def linear_fit(x, y) -> LinearFit:
    """Least-squares line through finite ``(x, y)`` pairs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2 or np.ptp(x[ok]) == 0:
        return LinearFit(math.nan, math.nan, math.nan, int(ok.sum()))
    res = stats.linregress(x[ok], y[ok])
    return LinearFit(float(res.slope), float(res.intercept), float(res.rvalue**2), int(ok.sum()))


def log_median(log_values: np.ndarray) -> float:
    """Log of the (linear-scale) median, computed without leaving log space."""
    v = np.sort(np.asarray(log_values, dtype=np.float64))
    n = v.size
    if n == 0:
        return math.nan
    if n % 2:
        return float(v[n // 2])
    return float(np.logaddexp(v[n // 2 - 1], v[n // 2]) - math.log(2.0))


def log_quantile(log_values: np.ndarray, q: float) -> float:
    """Quantile of ``exp(log_values)`` on the log scale (order-statistic rule of numpy)."""
    v = np.asarray(log_values, dtype=np.float64)
    return float(np.quantile(v, q, method="inverted_cdf"))


def kolmogorov_critical(alpha: float, *sizes: int) -> float:
    """Asymptotic Kolmogorov critical distance for one or two samples.

    One sample of size ``n``: ``c(alpha) / sqrt(n)``; two samples:
    ``c(alpha) * sqrt((n + m) / (n m))``; ``c(0.01) ~ 1.628``.
    """
    c = float(special.kolmogi(alpha))
    if len(sizes) == 1:
        return c / math.sqrt(sizes[0])
    n, m = sizes
    return c * math.sqrt((n + m) / (n * m))


def anderson_darling_normal(z: np.ndarray) -> float:
    """Anderson-Darling statistic of ``z`` against the standard normal (no fitted parameters)."""
    z = np.sort(np.asarray(z, dtype=np.float64))
    n = z.size
    i = np.arange(1, n + 1)
    terms = (2 * i - 1) * (stats.norm.logcdf(z) + stats.norm.logsf(z[::-1]))
    return float(-n - terms.sum() / n)


@dataclass(frozen=True)
class NormalityReport:
    size: int
    ks_statistic: float
    ks_pvalue: float
    ks_critical: float
    ad_statistic: float
    probabilities: np.ndarray
    theoretical: np.ndarray
    empirical: np.ndarray

    @property
    def ks_pass(self) -> bool:
        return self.ks_statistic < self.ks_critical


QUANTILE_PROBS = np.arange(1, 100) / 100.0


def normality(z: np.ndarray, alpha: float = 0.01) -> NormalityReport:
    """KS and Anderson-Darling distances of an already standardized sample from N(0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    ks = stats.kstest(z, "norm")
    return NormalityReport(
        size=z.size,
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        ks_critical=kolmogorov_critical(alpha, z.size),
        ad_statistic=anderson_darling_normal(z),
        probabilities=QUANTILE_PROBS,
        theoretical=stats.norm.ppf(QUANTILE_PROBS),
        empirical=np.quantile(z, QUANTILE_PROBS),
    )


@dataclass(frozen=True)
class TwoSampleKS:
    statistic: float
    pvalue: float
    critical: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical


def merge_ties(a: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Snap values of the pooled sample that differ by at most ``rtol`` (relative) onto one value.

    Floating-point evaluations of one quantity along different routes differ
    in the last bits; without merging, a two-sample test would see two
    disjoint point masses.
    """
    pooled = np.concatenate([a, b])
    if pooled.size == 0:
        return a, b
    order = np.argsort(pooled, kind="stable")
    v = pooled[order]
    tol = rtol * max(1.0, float(np.max(np.abs(v))))
    cluster = np.concatenate([[0], np.cumsum(np.diff(v) > tol)])
    first = np.concatenate([[0], np.nonzero(np.diff(cluster))[0] + 1])
    snapped = np.empty_like(pooled)
    snapped[order] = v[first][cluster]
    return snapped[: a.size], snapped[a.size:]


def two_sample_ks(a: np.ndarray, b: np.ndarray, alpha: float = 0.01, rtol: float = 1e-12) -> TwoSampleKS:
    a, b = merge_ties(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64), rtol)
    res = stats.ks_2samp(a, b)
    return TwoSampleKS(float(res.statistic), float(res.pvalue), kolmogorov_critical(alpha, a.size, b.size))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)).sum())


def histogram(values: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Empirical frequencies of ``values`` on an integer ``support``."""
    values = np.asarray(values)
    idx = np.searchsorted(support, values)
    counts = np.bincount(idx, minlength=support.size)[: support.size]
    return counts / max(values.size, 1)
