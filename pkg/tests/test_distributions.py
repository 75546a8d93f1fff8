import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvlsim.distributions import DistributionError, TruncatedDist


def test_diameter_fit_matches_target_moments():
    d = TruncatedDist(64.60, 40.19, 17.39, 173.50, "lognormal")
    f = d.fit()
    assert f.exact
    assert f.mean == pytest.approx(64.60, abs=1e-6)
    assert f.sd == pytest.approx(40.19, abs=1e-6)
    assert f.acceptance > 0.5


def test_integer_count_fit():
    d = TruncatedDist(5.10, 3.15, 1, 14, "normal", integer=True)
    f = d.fit()
    assert f.exact
    assert f.mean == pytest.approx(5.10, abs=1e-6)
    assert f.sd == pytest.approx(3.15, abs=1e-6)


def test_unattainable_sd_keeps_mean():
    # a truncated lognormal on [69.97, 246.18] cannot reach sd 70.96
    d = TruncatedDist(127.81, 70.96, 69.97, 246.18, "lognormal")
    f = d.fit()
    assert not f.exact
    assert f.mean == pytest.approx(127.81, abs=1e-3)
    assert f.sd < 70.96


def test_empirical_moments():
    d = TruncatedDist(64.60, 40.19, 17.39, 173.50, "lognormal")
    rng = np.random.default_rng(3)
    x = np.array([d.sample(rng) for _ in range(20000)])
    assert x.min() >= 17.39 and x.max() <= 173.50
    assert x.mean() == pytest.approx(64.60, abs=1.0)
    assert x.std(ddof=1) == pytest.approx(40.19, abs=1.0)


def test_degenerate():
    rng = np.random.default_rng(0)
    assert TruncatedDist(65, 0, 17, 173).sample(rng) == 65.0
    assert TruncatedDist(1, 3, 1, 1, integer=True).sample(rng) == 1


@pytest.mark.parametrize(
    "args",
    [(10, 1, 20, 5), (30, 1, 0, 20), (5, -1, 0, 10), (5, 1, 0, 10, "lognormal"), (5, 1, 1, 10, "gamma")],
)
def test_invalid(args):
    with pytest.raises(DistributionError):
        TruncatedDist(*args)


@settings(max_examples=30, deadline=None)
@given(
    mean=st.floats(2, 8),
    sd=st.floats(0.1, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_samples_stay_in_range(mean, sd, seed):
    d = TruncatedDist(mean, sd, 1, 10, "normal", integer=True)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        v = d.sample(rng)
        assert isinstance(v, int) and 1 <= v <= 10
