import json
import math

import numpy as np
import pytest
from scipy import stats

from stickyquake import harness as H
from stickyquake.errors import DomainError
from stickyquake.rng import stream


def test_estimate_mean_constant_sampler():
    mean, se, frac = H.estimate_mean(lambda rng, n: np.full(n, 2.5), 100, stream(0, "c"))
    assert mean == 2.5 and se == 0.0 and frac == 1.0
    with pytest.raises(DomainError):
        H.estimate_mean(lambda rng, n: np.zeros(n), 1, stream(0, "c"))


def test_estimate_mean_drops_infinite_draws():
    mean, se, frac = H.mean_se([1.0, 3.0, math.inf, 2.0])
    assert mean == 2.0 and frac == 0.75
    assert se == pytest.approx(1.0 / math.sqrt(3))


def test_compare_mean_verdicts():
    x = stream(1, "n").normal(1.0, 1.0, 10_000)
    assert H.compare_mean("ok", x, 1.0).passed
    bad = H.compare_mean("bad", x, 1.2)
    assert not bad.passed and bad.z_score < -3
    exact = H.compare_mean("const", np.ones(10), 1.0)
    assert exact.z_score == 0.0 and exact.passed


def test_compare_proportion_uses_oracle_variance():
    hits = np.r_[np.ones(30, bool), np.zeros(70, bool)]
    r = H.compare_proportion("p", hits, 0.3)
    assert r.z_score == 0.0 and r.std_error == pytest.approx(math.sqrt(0.21 / 100))


def test_ks_null_is_calibrated():
    rng = stream(2, "ks")
    p = np.array([H.ks_one_sample(rng.random(200), stats.uniform.cdf)[1] for _ in range(400)])
    # under the null roughly alpha of the p-values fall below alpha
    assert np.mean(p < 0.05) < 0.1
    assert np.mean(p < 0.5) == pytest.approx(0.5, abs=0.1)


def test_ks_detects_shift():
    rng = stream(3, "ks")
    _, p = H.ks_one_sample(rng.normal(0.2, 1.0, 5000), stats.norm.cdf)
    assert p < 1e-6
    a = rng.random(100)
    assert H.ks_two_sample(a, a) == (0.0, 1.0)
    with pytest.raises(DomainError):
        H.ks_one_sample(np.zeros(H.MIN_KS - 1), stats.norm.cdf)
    with pytest.raises(DomainError):
        H.ks_two_sample(a, a[:5])


def test_ks_report_z_matches_p_value():
    r = H.ks_report("k", 0.1, 0.05, 100)
    assert r.z_score == pytest.approx(1.959964, abs=1e-5)
    assert r.passed and r.kind == "ks"
    assert not H.ks_report("k", 0.5, 1e-4, 100).passed
    assert math.isfinite(H.ks_report("k", 1.0, 0.0, 100).z_score)


def test_reports_json_is_deterministic_and_strict():
    reps = [H.compare_mean("a", [1.0, 2.0, 3.0], 2.0),
            H.OracleReport("b", math.inf, math.nan, math.nan, 0, math.nan, "FAIL",
                           metadata={"x": np.float64(1.5), "k": np.int64(3)})]
    s = H.reports_json(reps)
    assert s == H.reports_json(reps)
    doc = json.loads(s, parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))
    assert doc[1]["oracle_value"] == "inf" and doc[1]["metadata"] == {"k": 3, "x": 1.5}
    wrapped = json.loads(H.reports_json(reps, {"seed": 1}))
    assert wrapped["seed"] == 1 and len(wrapped["reports"]) == 2
    assert reps[0].line().startswith("PASS a:")
