"""Atom-aware goodness-of-fit and summary statistics for sample batches.

Thresholds are fixed, documented approximations (1.36/sqrt(n) for the KS
distance at the asymptotic 5% level, 3/sqrt(n) for correlations); nothing
here claims exact finite-sample test levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KsResult:
    statistic: float
    threshold: float
    n: int
    passed: bool


@dataclass(frozen=True)
class SummaryReport:
    """Moments and zero accounting of one sample batch.

    ``moments`` holds the raw moments m_1..m_5, ``moment_se`` their standard
    errors sqrt((m_2k - m_k^2)/n); ``zero_fraction`` counts entries that are
    exactly 0.0.
    """

    n: int
    mean: float
    variance: float
    moments: tuple[float, ...]
    moment_se: tuple[float, ...]
    zero_fraction: float

    @property
    def se_mean(self) -> float:
        return self.moment_se[0]


@dataclass(frozen=True)
class IndependenceResult:
    """Pearson-correlation check; ``passed`` is None when a margin is degenerate."""

    correlation: float
    threshold: float
    passed: bool | None
    degenerate: bool


def ks_against_cdf(samples, cdf, atom_at_zero: float = 0.0) -> KsResult:
    """Sup distance between the empirical CDF and a law with a possible atom at 0.

    The statistic is evaluated at every sample point from both sides, with
    the reference CDF's left limit at 0 reduced by the atom mass, so a mass
    of exact zeros is compared against the jump rather than excluded.
    Threshold: 1.36/sqrt(n).
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    if n < 20:
        raise ValueError(f"need at least 20 samples for the KS check, got {n}")
    if not (0.0 <= atom_at_zero < 1.0):
        raise ValueError("atom mass must lie in [0, 1)")
    uniq, counts = np.unique(xs, return_counts=True)
    cum = np.cumsum(counts)
    emp_right = cum / n
    emp_left = (cum - counts) / n
    f_right = np.asarray(cdf(uniq), dtype=float)
    f_left = f_right - atom_at_zero * (uniq == 0.0)
    stat = float(
        np.max(np.maximum(np.abs(emp_right - f_right), np.abs(emp_left - f_left)))
    )
    threshold = 1.36 / np.sqrt(n)
    return KsResult(statistic=stat, threshold=float(threshold), n=n, passed=stat <= threshold)


def summarize(samples) -> SummaryReport:
    """Mean, unbiased variance, raw moments m_1..m_5 with SEs, zero fraction."""
    xs = np.asarray(samples, dtype=float)
    n = xs.size
    if n < 2:
        raise ValueError(f"need at least 2 samples to summarize, got {n}")
    powers = [np.mean(xs**k) for k in range(1, 11)]
    moments = tuple(float(powers[k - 1]) for k in range(1, 6))
    ses = tuple(
        float(np.sqrt(max(powers[2 * k - 1] - powers[k - 1] ** 2, 0.0) / n))
        for k in range(1, 6)
    )
    return SummaryReport(
        n=int(n),
        mean=float(np.mean(xs)),
        variance=float(np.var(xs, ddof=1)),
        moments=moments,
        moment_se=ses,
        zero_fraction=float(np.count_nonzero(xs == 0.0) / n),
    )


def independence_check(pairs) -> IndependenceResult:
    """Pearson correlation of paired samples against the 3/sqrt(n) band.

    A necessary-condition check only, not a full independence test.
    Zero-variance margins are reported as degenerate with no verdict.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array")
    n = arr.shape[0]
    if n < 100:
        raise ValueError(f"need at least 100 pairs, got {n}")
    threshold = 3.0 / np.sqrt(n)
    if np.var(arr[:, 0]) == 0.0 or np.var(arr[:, 1]) == 0.0:
        return IndependenceResult(
            correlation=float("nan"), threshold=float(threshold), passed=None, degenerate=True
        )
    rho = float(np.corrcoef(arr[:, 0], arr[:, 1])[0, 1])
    return IndependenceResult(
        correlation=rho,
        threshold=float(threshold),
        passed=bool(abs(rho) < threshold),
        degenerate=False,
    )


def mgf_factorization_check(i1, i2, t_values, rng: np.random.Generator, n_boot: int = 300):
    """Empirical transform factorization gap with bootstrap error bars.

    For each t the signed gap is E[e^{-t(I1+I2)}] - E[e^{-t I1}] E[e^{-t I2}]
    over the paired samples; the pass rule is |gap| < 3 * bootstrap SE.
    Returns a list of dicts with keys t, gap, se, pass.
    """
    a = np.asarray(i1, dtype=float)
    b = np.asarray(i2, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("i1 and i2 must be equal-length 1-d arrays")
    n = a.size

    def gap(t, ia, ib):
        return float(np.mean(np.exp(-t * (ia + ib))) - np.mean(np.exp(-t * ia)) * np.mean(np.exp(-t * ib)))

    results = []
    for t in t_values:
        g = gap(t, a, b)
        boots = np.empty(n_boot)
        for k in range(n_boot):
            idx = rng.integers(0, n, size=n)
            boots[k] = gap(t, a[idx], b[idx])
        se = float(np.std(boots, ddof=1))
        results.append({"t": float(t), "gap": g, "se": se, "pass": bool(abs(g) < 3.0 * se)})
    return results


def summary_to_dict(report: SummaryReport, ks: KsResult | None = None) -> dict:
    """Report JSON payload: n, mean, se_mean, moments, zero_fraction, ks."""
    out = {
        "n": report.n,
        "mean": report.mean,
        "se_mean": report.se_mean,
        "moments": list(report.moments),
        "zero_fraction": report.zero_fraction,
        "ks": None,
    }
    if ks is not None:
        out["ks"] = {"statistic": ks.statistic, "threshold": ks.threshold, "pass": ks.passed}
    return out
