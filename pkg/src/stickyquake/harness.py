"""Comparison of Monte Carlo output with exact oracles."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DomainError

PASS, FAIL = "PASS", "FAIL"
Z_THRESHOLD = 3.0
KS_ALPHA = 0.01
MIN_KS = 20


@dataclass
class OracleReport:
    """Estimate versus oracle with its z-score and verdict.

    For KS reports ``mc_estimate`` is the KS statistic, ``z_score`` the
    two-sided normal quantile of the p-value and ``threshold`` the quantile
    of the significance level, so that ``PASS`` iff ``|z| <= threshold``
    holds for both kinds.
    """

    name: str
    oracle_value: float
    mc_estimate: float
    std_error: float
    n: int
    z_score: float
    verdict: str
    threshold: float = Z_THRESHOLD
    kind: str = "mean"
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        if self.kind == "ks":
            return (f"{self.verdict} {self.name}: D={self.mc_estimate:.5f} "
                    f"p={self.metadata.get('p_value', float('nan')):.4g} n={self.n}")
        return (f"{self.verdict} {self.name}: est={self.mc_estimate:.6g} "
                f"oracle={self.oracle_value:.6g} se={self.std_error:.3g} z={self.z_score:+.2f}")


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def reports_json(reports, extra: Optional[dict] = None) -> str:
    """Deterministic JSON array (or object with ``extra``) of reports."""
    body = [_clean(r.to_dict()) for r in reports]
    doc = body if extra is None else {**_clean(extra), "reports": body}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def estimate_mean(sampler: Callable, n: int, rng: np.random.Generator):
    """Sample mean and standard error of ``sampler(rng, n)``.

    Infinite draws are excluded; the returned triple is
    ``(mean, std_error, finite_fraction)``.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    x = np.asarray(sampler(rng, n), dtype=float)
    return mean_se(x)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    fin = x[np.isfinite(x)]
    frac = fin.size / x.size if x.size else 0.0
    if fin.size < 2:
        return (float(fin.mean()) if fin.size else math.nan), math.nan, frac
    return float(fin.mean()), float(fin.std(ddof=1) / math.sqrt(fin.size)), frac


def _z_verdict(z, threshold):
    return PASS if abs(z) <= threshold else FAIL


def compare_mean(name: str, samples, oracle: float, threshold: float = Z_THRESHOLD,
                 **metadata) -> OracleReport:
    mean, se, frac = mean_se(samples)
    if se == 0:
        z = 0.0 if mean == oracle else math.copysign(math.inf, mean - oracle)
    else:
        z = (mean - oracle) / se
    meta = dict(metadata)
    if frac < 1:
        meta["finite_fraction"] = frac
    return OracleReport(name, float(oracle), mean, se, int(np.size(samples)), float(z),
                        _z_verdict(z, threshold), threshold, "mean", meta)


def compare_proportion(name: str, hits, oracle: float, threshold: float = Z_THRESHOLD,
                       **metadata) -> OracleReport:
    """Binomial proportion against an exact probability (standard error from the oracle)."""
    hits = np.asarray(hits, dtype=bool)
    n = hits.size
    p = float(hits.mean())
    se = math.sqrt(oracle * (1 - oracle) / n) if 0 < oracle < 1 else math.sqrt(p * (1 - p) / n)
    z = 0.0 if p == oracle else ((p - oracle) / se if se > 0 else math.inf)
    return OracleReport(name, float(oracle), p, se, n, float(z), _z_verdict(z, threshold),
                        threshold, "proportion", dict(metadata))


def compare_estimate(name: str, estimate: float, se: float, n: int, oracle: float,
                     threshold: float = Z_THRESHOLD, **metadata) -> OracleReport:
    z = (estimate - oracle) / se if se > 0 else (0.0 if estimate == oracle else math.inf)
    return OracleReport(name, float(oracle), float(estimate), float(se), int(n), float(z),
                        _z_verdict(z, threshold), threshold, "mean", dict(metadata))


def ks_one_sample(samples, cdf_fn: Callable):
    """KS statistic and asymptotic p-value of ``samples`` against ``cdf_fn``."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_KS:
        raise DomainError(f"need at least {MIN_KS} samples")
    r = stats.kstest(x, cdf_fn, method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_two_sample(a, b):
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < MIN_KS or b.size < MIN_KS:
        raise DomainError(f"need at least {MIN_KS} samples in each group")
    r = stats.ks_2samp(a, b, method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_report(name: str, statistic: float, p_value: float, n: int, alpha: float = KS_ALPHA,
              **metadata) -> OracleReport:
    p = max(p_value, 1e-300)
    z = float(stats.norm.isf(p / 2.0))
    thr = float(stats.norm.isf(alpha / 2.0))
    meta = {"p_value": p_value, "alpha": alpha, **metadata}
    return OracleReport(name, 0.0, statistic, math.nan, n, z, PASS if p_value > alpha else FAIL,
                        thr, "ks", meta)
