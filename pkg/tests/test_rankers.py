import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from ranklab.distributions import (
    Normal, NormalErr, QuarticErr, SuperLight, UniformImproper, make_stream,
)
from ranklab.exceptions import ParameterError
from ranklab.losses import Ranking
from ranklab.posterior import posterior, posterior_sample
from ranklab.rankers import (
    FootruleRank, PERRank, PosteriorMean, PValueRank, UnitData, Value, apply_ranker,
    expected_ranks, rank_footrule, rank_per, rank_posterior_mean, rank_pvalue, rank_value,
)


def units_from(x, s):
    return [UnitData(float(a), float(b), i) for i, (a, b) in enumerate(zip(x, s))]


# quarter-integer values keep shifts and scalings exact in floating point
quarters = st.integers(-40, 40).map(lambda k: k / 4)
unit_lists = st.integers(2, 10).flatmap(lambda p: st.tuples(
    st.lists(quarters, min_size=p, max_size=p, unique=True),
    st.lists(st.floats(0.05, 2), min_size=p, max_size=p),
))


def test_unit_rejects_negative_sigma():
    with pytest.raises(ParameterError):
        UnitData(0.0, -1.0, 0)


def test_rank_value_examples():
    assert rank_value(units_from([3, 1, 2], [1, 1, 1])) == Ranking([1, 3, 2])
    assert rank_value(units_from([2, 2, 2], [1, 1, 1])) == Ranking([1, 2, 3])


@given(unit_lists)
def test_rank_value_invariant_to_monotone_transform(data):
    x, s = data
    a = rank_value(units_from(x, s))
    b = rank_value(units_from(np.exp(np.array(x)) * 3 + 1, s))
    assert a == b


def test_rank_pvalue_examples():
    r = rank_pvalue([UnitData(1.0, 0.5, 0), UnitData(1.0, 2.0, 1)], 0.0, NormalErr())
    assert r == Ranking([1, 2])
    r = rank_pvalue([UnitData(-0.5, 1.0, 0), UnitData(0.5, 1.0, 1)], 0.0, NormalErr())
    assert r == Ranking([2, 1])


def test_pvalue_zero_sigma_rule():
    u = [UnitData(-1.0, 0.0, 0), UnitData(0.0, 0.0, 1), UnitData(1e-9, 0.0, 2), UnitData(5.0, 1.0, 3)]
    assert rank_pvalue(u, 0.0, NormalErr()).order().tolist() == [2, 3, 1, 0]


def test_normal_pvalues_match_erfc():
    x = np.array([-3.0, 0.2, 1.0, 4.0, 9.0])
    s = np.array([1.0, 0.3, 2.0, 0.7, 1.1])
    logsf = NormalErr().logsf(x, s)
    ref = 0.5 * special.erfc(x / s / math.sqrt(2))
    np.testing.assert_allclose(np.exp(logsf), ref, rtol=1e-10, atol=0)


@given(unit_lists)
@settings(max_examples=30, deadline=None)
def test_uniform_prior_posterior_mean_equals_value(data):
    x, s = data
    u = units_from(x, s)
    assert rank_posterior_mean(u, UniformImproper(), NormalErr()) == rank_value(u)


@given(unit_lists)
@settings(max_examples=30, deadline=None)
def test_equal_sigma_shrinkage_preserves_order(data):
    x, _ = data
    u = units_from(x, [0.7] * len(x))
    assert rank_posterior_mean(u, Normal(0.3, 2.0), NormalErr()) == rank_value(u)


@given(unit_lists, st.integers(-400, 400).map(lambda k: k / 4))
@settings(max_examples=30, deadline=None)
def test_shift_equivariance_flat_prior(data, c):
    x, s = data
    u = units_from(x, s)
    v = units_from(np.array(x) + c, s)
    assert rank_value(u) == rank_value(v)
    assert rank_posterior_mean(u, UniformImproper(), NormalErr()) == \
        rank_posterior_mean(v, UniformImproper(), NormalErr())


def test_superlight_misranking_configuration():
    a = UnitData(3.2, 0.0, 0)
    b = UnitData(3.4, 0.25, 1)
    g = posterior(SuperLight(), NormalErr(), b.x, b.sigma)
    assert g.mean < b.x - 1 / b.x
    assert rank_posterior_mean([a, b], SuperLight(), NormalErr()) == Ranking([1, 2])
    assert rank_value([a, b]) == Ranking([2, 1])


def test_per_examples():
    u = [UnitData(0.5, 1.0, 0), UnitData(0.5, 1.0, 1)]
    r = expected_ranks(u, Normal(0, 1), NormalErr())
    assert r[0] == pytest.approx(r[1])
    assert rank_per(u, Normal(0, 1), NormalErr()) == Ranking([1, 2])
    pm = units_from([1.0, 3.0, -2.0, 0.5], [0, 0, 0, 0])
    assert rank_per(pm, Normal(0, 1), NormalErr()) == rank_value(pm)


def test_expected_ranks_gaussian_fast_path_matches_grid():
    u = units_from([0.1, 1.3, -0.4, 2.2, 0.9], [0.3, 1.1, 0.6, 0.2, 0.8])
    fast = expected_ranks(u, Normal(0.2, 1.5), NormalErr())
    grids = [posterior(Normal(0.2, 1.5), NormalErr(), x.x, x.sigma) for x in u]
    from ranklab.posterior import pairwise_less_prob
    slow = np.array([sum(pairwise_less_prob(grids[i], grids[j]) for j in range(5) if j != i)
                     for i in range(5)])
    np.testing.assert_allclose(fast, slow, atol=1e-6)


@pytest.mark.parametrize("prior,err", [(Normal(0, 1), NormalErr()), (Normal(1.25, 2 / 9), QuarticErr())])
def test_per_matches_monte_carlo_ranks(prior, err):
    rng = make_stream(21)
    x = rng.normal(0, 1.2, 5) + 1
    s = rng.uniform(0.2, 1.0, 5)
    u = units_from(x, s)
    n = 10 ** 5
    draws = np.column_stack([posterior_sample(posterior(prior, err, a, b), rng, n) for a, b in zip(x, s)])
    above = (draws[:, None, :] > draws[:, :, None]).sum(axis=2)
    mc = above.mean(axis=0)
    se = above.std(axis=0) / math.sqrt(n)
    r = expected_ranks(u, prior, err)
    assert np.all(np.abs(r - mc) < 4 * se + 1e-6)
    got = rank_per(u, prior, err).order()
    want = np.argsort(mc, kind="stable")
    for a, b in zip(got, want):
        if a != b:
            assert abs(r[a] - r[b]) < 4 * (se[a] + se[b])


def test_footrule_degenerate_cases():
    u = units_from([1.0, 3.0, 2.0], [0, 0, 0])
    assert rank_footrule(u, Normal(0, 1), NormalErr()) == rank_value(u)
    u2 = units_from([0.3, 0.9], [0.5, 0.8])
    assert rank_footrule(u2, Normal(0, 1), NormalErr(), rng=make_stream(1)) == \
        rank_per(u2, Normal(0, 1), NormalErr())
    with pytest.raises(ParameterError):
        rank_footrule(u2, Normal(0, 1), NormalErr(), mc_samples=10)
    with pytest.raises(ParameterError):
        FootruleRank(mc_samples=999)


def _expected_footrule(perm_positions, pos_draws):
    # pos_draws: (n, p) 1-based positions of each unit per draw
    per_draw = np.abs(pos_draws - perm_positions[None, :]).sum(axis=1)
    return per_draw.mean(), per_draw.std() / math.sqrt(per_draw.size)


@pytest.mark.parametrize("p", [3, 4, 5, 6])
def test_footrule_ranking_near_exhaustive_optimum(p):
    prior, err = Normal(0, 1), NormalErr()
    for k in range(5):
        rng = make_stream(31, p, k)
        x = rng.standard_normal(p) * 1.5
        s = rng.uniform(0.3, 1.2, p)
        u = units_from(x, s)
        got = rank_footrule(u, prior, err, mc_samples=4000, rng=make_stream(32, p, k))
        n = 20_000
        draws = np.column_stack([posterior_sample(posterior(prior, err, a, b), rng, n) for a, b in zip(x, s)])
        pos = np.argsort(np.argsort(-draws, axis=1, kind="stable"), axis=1) + 1
        got_m, got_se = _expected_footrule(got.perm, pos)
        best_m, best_se = min(_expected_footrule(np.array(pp), pos)
                              for pp in itertools.permutations(range(1, p + 1)))
        assert got_m <= best_m + 3 * math.hypot(got_se, best_se)


@pytest.mark.parametrize("spec", [Value(), PValueRank(0.5), PosteriorMean(), PERRank(), FootruleRank()],
                         ids=lambda s: s.name)
def test_rankers_are_bijective_and_deterministic(spec):
    rng = make_stream(41)
    u = units_from(rng.standard_normal(12), rng.uniform(0, 1, 12))
    a = apply_ranker(spec, u, NormalErr(), Normal(0, 1), rng=make_stream(42))
    b = apply_ranker(spec, u, NormalErr(), Normal(0, 1), rng=make_stream(42))
    assert sorted(a.perm.tolist()) == list(range(1, 13))
    assert a == b


def test_apply_ranker_needs_prior():
    with pytest.raises(ParameterError):
        apply_ranker(PosteriorMean(), units_from([1, 2], [1, 1]), NormalErr())


def test_posterior_mean_converges_to_value_as_sigma_shrinks():
    prior = Normal(0, 1)
    agree = []
    for sigma in (0.1, 0.01, 0.001):
        hits = 0
        for k in range(200):
            rng = make_stream(51, k)
            theta = rng.standard_normal(20)
            s = sigma * rng.uniform(0.5, 1.5, 20)
            u = units_from(theta + s * rng.standard_normal(20), s)
            hits += rank_posterior_mean(u, prior, NormalErr()) == rank_value(u)
        agree.append(hits / 200)
    assert agree[0] <= agree[1] <= agree[2]
    assert agree[2] >= 0.95
