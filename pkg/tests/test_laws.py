import math

import numpy as np
import pytest

from recgraph import laws


def test_constant_moments():
    law = laws.constant(-3.0)
    assert law.abs_moment(1) == 3.0
    assert law.abs_moment(2) == 3.0
    assert law.mean() == -3.0
    assert law.abs_sup() == 3.0


def test_bernoulli_moment_root():
    law = laws.bernoulli(0.25)
    # (E|X|^p)^(1/p) = prob^(1/p)
    assert law.abs_moment(1) == pytest.approx(0.25)
    assert law.abs_moment(2) == pytest.approx(0.5)


@pytest.mark.parametrize("low,high,p", [(0.0, 1.0, 1), (0.0, 1.0, 2),
                                        (-1.0, 2.0, 1), (-2.0, -1.0, 3)])
def test_uniform_moment_matches_quadrature(low, high, p):
    law = laws.uniform(low, high)
    xs = np.linspace(low, high, 200001)
    quad = np.trapezoid(np.abs(xs) ** p, xs) / (high - low)
    assert law.abs_moment(p) == pytest.approx(quad ** (1.0 / p), rel=1e-6)


def test_normal_abs_moment_closed_form():
    # E|Z|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi) for the standard normal
    for p in (1, 2, 3):
        expected = (2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)
        assert laws.normal(0, 1).abs_moment(p) == pytest.approx(expected, rel=1e-9)
    # shifted case against Monte Carlo
    law = laws.normal(1.5, 0.5)
    z = np.random.default_rng(0).normal(1.5, 0.5, 400000)
    assert law.abs_moment(1) == pytest.approx(np.abs(z).mean(), rel=2e-3)


def test_exponential_moment():
    law = laws.exponential(2.0)
    assert law.abs_moment(1) == pytest.approx(2.0)
    assert law.abs_moment(2) == pytest.approx(2.0 * math.sqrt(2.0))


def test_discrete_moments():
    law = laws.choice([0.0, 2.0], probs=[0.5, 0.5])
    assert law.abs_moment(1) == pytest.approx(1.0)
    assert law.abs_moment(2) == pytest.approx(math.sqrt(2.0))
    pois = laws.poisson(3.0)
    assert pois.abs_moment(1) == pytest.approx(3.0, rel=1e-9)
    geo = laws.geometric(0.5)
    assert geo.mean() == pytest.approx(1.0)
    assert geo.abs_moment(1) == pytest.approx(1.0, rel=1e-9)


def test_sampling_is_seed_deterministic():
    law = laws.uniform(0, 1)
    rng1 = np.random.default_rng(42)
    rng2 = np.random.default_rng(42)
    assert np.array_equal(law.sample(rng1, 10), law.sample(rng2, 10))


def test_roundtrip_json():
    law = laws.choice([1, 2, 3], probs=[0.2, 0.3, 0.5])
    again = laws.Law.from_json(law.to_json())
    assert again == law
    assert laws.Law.from_json(2.5) == laws.constant(2.5)


def test_bad_laws_rejected():
    with pytest.raises(laws.LawError):
        laws.Law("nope", {})
    with pytest.raises(laws.LawError):
        laws.bernoulli(1.5)
    with pytest.raises(laws.LawError):
        laws.choice([])


def test_draw_initial_forms():
    rng = np.random.default_rng(1)
    assert np.array_equal(laws.draw_initial(2.0, 3, rng), np.full(3, 2.0))
    vec = laws.draw_initial(np.array([1.0, 2.0]), 2, rng)
    assert vec.tolist() == [1.0, 2.0]
    with pytest.raises(laws.LawError):
        laws.draw_initial(np.array([1.0]), 2, rng)
    iid = laws.draw_initial(laws.bernoulli(0.5), 1000, np.random.default_rng(3))
    assert set(np.unique(iid)) <= {0.0, 1.0}
