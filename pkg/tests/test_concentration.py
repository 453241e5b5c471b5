import math
import random
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from steiner_forge.concentration import (
    CATALOG, bernstein_bound, bernstein_tail_experiment, coordinate_sum, degree_martingale_paths,
    edge_count, freedman_bound, freedman_check, isolated_triples_in_window, random_order_typicality,
)
from steiner_forge.design import affine_plane_3

from conftest import sts


def test_bernstein_examples():
    assert bernstein_bound(1, 100, 0.1, 0) == 1.0
    assert bernstein_bound(1, 100, 0.1, 20) == pytest.approx(math.exp(-5))
    assert bernstein_bound(1, 100, 0.1, 20) == pytest.approx(0.0067379, abs=1e-7)


def test_freedman_examples():
    assert freedman_bound(1, 0, 1) == pytest.approx(math.exp(-0.5))
    assert freedman_bound(2, 5, 0) == 1.0


@pytest.mark.parametrize("args", [(0, 1, 0.5, 1), (1, 0, 0.5, 1), (1, 1, 1.5, 1), (1, 1, 0.5, -1)])
def test_bernstein_preconditions(args):
    with pytest.raises(ValueError):
        bernstein_bound(*args)


@given(st.floats(0.1, 5), st.integers(1, 10_000), st.floats(0, 1), st.floats(0, 100), st.floats(0, 100))
def test_bernstein_monotone(K, n, p, t1, t2):
    lo, hi = sorted((t1, t2))
    b_lo, b_hi = bernstein_bound(K, n, p, lo), bernstein_bound(K, n, p, hi)
    assert 0 <= b_hi <= b_lo <= 1


@given(st.floats(0.1, 5), st.floats(0, 1000), st.floats(0, 100), st.floats(0, 100))
def test_freedman_monotone(K, v, t1, t2):
    lo, hi = sorted((t1, t2))
    assert 0 <= freedman_bound(K, v, hi) <= freedman_bound(K, v, lo) <= 1


def test_p_zero_gives_zero_tails():
    tab = bernstein_tail_experiment("coordinate-sum", 50, 0.0, 1000, [0.5, 1, 2], seed=0)
    assert all(r.empirical == 0 for r in tab.rows)
    tab = bernstein_tail_experiment("isolated-triples", 9, 0.0, 200, [0.5, 1], seed=0)
    assert all(r.empirical == 0 for r in tab.rows)


def test_coordinate_sum_matches_exact_binomial_tail():
    n, p, samples = 200, 0.3, 40_000
    tab = bernstein_tail_experiment("coordinate-sum", n, p, samples, [3.0, 6.0, 9.0], seed=1)
    mean = n * p
    for r in tab.rows:
        exact = stats.binom.sf(math.floor(mean + r.t), n, p) + stats.binom.cdf(math.ceil(mean - r.t) - 1, n, p)
        sd = math.sqrt(exact * (1 - exact) / samples)
        assert abs(r.empirical - exact) <= 4 * sd + 1e-12
    assert tab.violations == 0


def test_catalog_constants():
    assert set(CATALOG) == {"coordinate-sum", "edge-count", "isolated-triples"}
    assert coordinate_sum(10, 0.5).K == 1 and edge_count(10, 0.5).coords == 45
    f = isolated_triples_in_window(30, 0.1)
    assert f.K == 3 and f.coords == math.comb(30, 3)


def brute_isolated(n, w, kept):
    pairs = {}
    for t in kept:
        for pr in combinations(t, 2):
            pairs[pr] = pairs.get(pr, 0) + 1
    return sum(
        1 for t in kept
        if t[0] < w <= t[1] and all(pairs[pr] == 1 for pr in combinations(t, 2))
    )


def test_isolated_triples_against_pure_python():
    n, w, p = 8, 3, 0.15
    f = isolated_triples_in_window(n, p, w)
    # exact mean: window triples times p (1 - p)^{3(n-3)}
    window = sum(1 for t in combinations(range(n), 3) if t[0] < w <= t[1])
    assert f.mean == pytest.approx(window * p * (1 - p) ** (3 * (n - 3)))
    rng = random.Random(0)
    brute = [brute_isolated(n, w, [t for t in combinations(range(n), 3) if rng.random() < p]) for _ in range(20_000)]
    fast = f.sample(np.random.default_rng(0), p, 20_000)
    sd = np.std(brute) / math.sqrt(20_000)
    assert abs(np.mean(brute) - f.mean) < 4 * sd
    assert abs(fast.mean() - f.mean) < 4 * sd


def test_small_catalog_runs_clean():
    assert bernstein_tail_experiment("edge-count", 20, 0.2, 5000, seed=2).violations == 0
    assert bernstein_tail_experiment("isolated-triples", 12, 0.05, 3000, seed=3).violations == 0


def test_freedman_zero_increments():
    rep = freedman_check([[0.0] * 10 for _ in range(5)], K=1.0, t_grid=[0.5, 1.0], v_grid=[0.0])
    assert rep.max_excursion == 0 and rep.violations == 0
    assert all(r["empirical"] == 0 for r in rep.rows)


def test_freedman_detects_heavy_increments():
    # every path jumps by 10 at once: bound with K=1 is violated
    rep = freedman_check([[10.0] for _ in range(50)], K=1.0, t_grid=[10.0], v_grid=[100.0])
    assert rep.violations == 1


def test_degree_martingale_is_centred():
    paths = degree_martingale_paths(21, 200, seed=0)
    finals = np.array([p.X[-1] for p in paths])
    V = np.array([p.V[-1] for p in paths])
    assert abs(finals.mean()) < 4 * math.sqrt(V.mean() / len(paths))
    assert all(np.all(np.abs(np.diff(p.X)) <= 2 + 1e-12) for p in paths)
    assert freedman_check(paths).violations == 0


def test_typicality_trivial_cases():
    S = sts(21, 0)
    assert random_order_typicality(S, 0.0, 0.3, trials=10).pass_rate == 1.0
    assert random_order_typicality(S, 0.3, 1.0, trials=10).pass_rate == 1.0
    assert random_order_typicality(S, 0.1, 1.0, h=1, trials=10).pass_rate == 1.0


def test_typicality_requires_complete_system():
    from steiner_forge.design import PartialSystem
    with pytest.raises(ValueError):
        random_order_typicality(PartialSystem(9, [(0, 1, 2)]), 0.1, 0.3)


def test_typicality_monotone_in_eps():
    S = sts(21, 1)
    rates = [random_order_typicality(S, 0.2, e, trials=30, seed=4).pass_rate for e in (0.1, 0.3, 0.5, 0.8)]
    assert rates == sorted(rates)


def test_typicality_h3_path_agrees_with_h2_on_trivial_band():
    S = affine_plane_3()
    assert random_order_typicality(S, 0.25, 5.0, h=3, trials=5).pass_rate == 1.0
