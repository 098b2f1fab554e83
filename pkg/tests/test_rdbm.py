import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stickyquake import analytics as A
from stickyquake import rdbm
from stickyquake.errors import DomainError
from stickyquake.harness import ks_one_sample, ks_two_sample
from stickyquake.rng import stream


def within(samples, oracle, z=3.0):
    x = np.asarray(samples, dtype=float)
    return abs(x.mean() - oracle) <= z * x.std(ddof=1) / math.sqrt(x.size)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.integers(0, 2 ** 32))
def test_path_invariants(mu, x0, c, seed):
    p = rdbm.simulate_path(rdbm.RdbmParams(mu, c, dt=1e-2, t_max=2.0), x0, None,
                           stream(seed, "inv"))
    assert np.all(p.values >= 0)
    dg = np.diff(p.local_time)
    assert np.all(dg >= 0)
    assert p.local_time[0] == 0
    assert p.times[-1] <= 2.0 + 1e-12
    if p.killed_at is not None:
        assert 0 <= p.killed_at <= 2.0
        assert p.stop_cause == "ELASTIC_KILL"


def test_local_time_grows_only_when_reflecting():
    # started far from 0 with strong positive drift, the path never touches 0
    p = rdbm.simulate_path(rdbm.RdbmParams(5.0, 0.0, dt=1e-3, t_max=1.0), 5.0, None,
                           stream(1, "far"))
    assert np.all(p.local_time == 0)
    q = rdbm.simulate_path(rdbm.RdbmParams(-5.0, 0.0, dt=1e-3, t_max=1.0), 0.0, None,
                           stream(1, "near"))
    assert q.local_time[-1] > 0


def test_params_validation():
    with pytest.raises(DomainError):
        rdbm.RdbmParams(1.0, c=-1.0)
    with pytest.raises(DomainError):
        rdbm.RdbmParams(1.0, dt=0.0)
    with pytest.raises(DomainError):
        rdbm.simulate_path(rdbm.RdbmParams(1.0), -0.1, None, stream(0, "x"))


def test_folded_normal_marginal():
    # mu = 0, c = 0 from 0: |N(0, 2t)|
    res = rdbm.run_batch(stream(2, "fold"), 10_000, 0.0, 0.0, 1e-3, 1.0)
    _, p = ks_one_sample(res.x, lambda y: A.transition_cdf(1.0, 0.0, y, 0.0, 0.0))
    assert p > 0.01


def test_large_c_kills_at_first_contact():
    res = rdbm.run_batch(stream(3, "c"), 2000, 0.0, 0.0, 1e-3, 1.0,
                         kill_at=rdbm.elastic_thresholds(1e8, stream(3, "k"), 2000))
    assert np.mean(res.cause == rdbm.KILLED) > 0.99


def test_mean_exit_time():
    res = rdbm.run_batch(stream(4, "exit"), 20_000, 0.0, 1.0, 1e-3, math.inf, stop_level=1.0)
    assert np.all(res.cause == rdbm.HIT_LEVEL)
    assert within(res.time, math.exp(-1.0), z=4.0)


def test_bridge_correction_reduces_bias():
    n, dt = 20_000, 1e-2
    on = rdbm.run_batch(stream(5, "b"), n, 0.0, 1.0, dt, math.inf, stop_level=1.0)
    off = rdbm.run_batch(stream(5, "b"), n, 0.0, 1.0, dt, math.inf, stop_level=1.0, bridge=False)
    assert off.time.mean() > on.time.mean()


def test_sample_tau0_exact():
    t = rdbm.sample_tau0_exact(1.0, -2.0, stream(6, "t0"), size=100_000)
    assert within(t, 0.5)
    k = rdbm.sample_tau0_exact(1.0, 1.0, stream(6, "t1"), size=100_000)
    assert within(np.isfinite(k), math.exp(-1.0))
    assert np.all(rdbm.sample_tau0_exact(1e-10, -1.0, stream(6, "t2"), size=100) < 1e-6)


def test_pathwise_tau0_law():
    path = rdbm.pathwise_tau0(1.0, -1.0, 4000, stream(7, "p"), 1e-3, t_max=200.0).time
    exact = rdbm.sample_tau0_exact(1.0, -1.0, stream(7, "e"), size=4000)
    _, p = ks_two_sample(path, exact)
    assert p > 0.01


def test_elastic_survival():
    t, x, mu, c = 0.5, 0.3, 0.7, 0.4
    res = rdbm.run_batch(stream(8, "s"), 20_000, x, mu, 1e-3, t,
                         kill_at=rdbm.elastic_thresholds(c, stream(8, "k"), 20_000))
    assert within(res.cause == rdbm.HORIZON, A.survival_probability(t, x, mu, c))


def test_resolvent_functional():
    # lam = 0, c = 0 with zero weight gives the exit time
    f = rdbm.resolvent_functional_samples(0.0, 1.0, 1.0, 0.0, 0.0, 10_000, stream(9, "r"),
                                          weight_rate=0.0)
    assert within(f, math.exp(-1.0), z=4.0)
    g = rdbm.resolvent_functional_samples(0.0, 1.0, 1.0, 1.0, 1.0, 10_000, stream(9, "r1"))
    assert within(g, A.resolvent_bvp(1.0, 0.0, 1.0, 1.0, 1.5), z=4.0)
    assert rdbm.resolvent_functional_mc(1.0 - 1e-9, 1.0, 1.0, 0.0, 0.0, 100,
                                        stream(9, "r2")) <= 1e-3 + 1e-12


def test_record_mode_and_csv():
    p = rdbm.simulate_path(rdbm.RdbmParams(1.0, 0.0, dt=1e-2, t_max=5.0), 0.0, 1.0,
                           stream(10, "csv"))
    assert p.stop_cause == "HIT_LEVEL" and p.stopped_at == pytest.approx(p.end_time)
    text = p.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,x,gamma,flags"
    assert len(lines) == len(p.times) + 1
    assert lines[-1].endswith("HIT_LEVEL")


def test_batch_deterministic():
    a = rdbm.run_batch(stream(11, "d"), 100, 0.5, 0.3, 1e-3, 1.0)
    b = rdbm.run_batch(stream(11, "d"), 100, 0.5, 0.3, 1e-3, 1.0)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.gamma, b.gamma)


def test_elastic_survival_negative_robin_parameter():
    # c + mu/2 < 0: the kernel is still a valid sub-probability density
    t, x, mu, c = 0.5, 0.3, -2.0, 0.5
    res = rdbm.run_batch(stream(12, "neg"), 20_000, x, mu, 1e-3, t,
                         kill_at=rdbm.elastic_thresholds(c, stream(12, "k"), 20_000))
    want = A.survival_probability(t, x, mu, c)
    assert 0 < want < 1
    assert within(res.cause == rdbm.HORIZON, want, z=3.5)
