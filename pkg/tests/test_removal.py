import functools
import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from steiner_forge.design import PartialSystem, fano, leave_graph, validate
from steiner_forge.errors import Unreachable
from steiner_forge.removal import (
    CSV_COLUMNS, TriangleRemoval, binomial_bite, coupling_experiment, replay_log_likelihood, run_trp,
    trajectory, trajectory_csv, wilson_interval, window_property,
)
from steiner_forge.rng import py_rng


def test_zero_steps_returns_start():
    out = run_trp(fano(), 0, 1)
    assert not out.frozen and out.system.triples == fano().triples


def test_steps_beyond_capacity_rejected():
    with pytest.raises(ValueError):
        run_trp(PartialSystem(7), 8, 0)


@pytest.mark.parametrize("seed", range(8))
def test_k4_always_freezes_after_one_step(seed):
    out = run_trp(PartialSystem(4), 2, seed)
    assert out.frozen and out.completed_steps == 1


def exact_completion_probability(n):
    """P(the process on K_n never freezes before N steps), by full recursion."""

    @functools.lru_cache(maxsize=None)
    def rec(edges):
        es = set(edges)
        tris = [t for t in itertools.combinations(range(n), 3)
                if all(p in es for p in itertools.combinations(t, 2))]
        if not es:
            return 1.0
        if not tris:
            return 0.0
        return sum(rec(frozenset(es - set(itertools.combinations(t, 2)))) for t in tris) / len(tris)

    return rec(frozenset(itertools.combinations(range(n), 2)))


def test_n7_completion_frequency_matches_process_tree():
    p = exact_completion_probability(7)
    assert 0 < p < 1
    runs = 3000
    full = sum(not run_trp(PartialSystem(7), 7, s).frozen for s in range(runs))
    sigma = math.sqrt(p * (1 - p) / runs)
    assert abs(full / runs - p) <= 4 * sigma
    out = next(run_trp(PartialSystem(7), 7, s) for s in range(runs) if not run_trp(PartialSystem(7), 7, s).frozen)
    assert validate(out.system).status.name == "COMPLETE"


def test_sampler_matches_enumeration_on_small_graph():
    # every triangle of a sparse leave graph is hit with equal frequency
    S = PartialSystem(9, [(0, 1, 2), (3, 4, 5)])
    state = TriangleRemoval.from_system(S)
    tris = state.triangles()
    assert len(tris) == state.Q
    rng = py_rng(0, 99)
    counts = {t: 0 for t in tris}
    draws = 40 * len(tris)
    for _ in range(draws):
        counts[state.sample(rng)] += 1
    from scipy.stats import chisquare

    assert chisquare(list(counts.values())).pvalue > 1e-4


@given(st.integers(0, 10**6), st.integers(0, 80))
def test_prefixes_valid_and_replay_agrees(seed, steps):
    n = 21
    out = run_trp(PartialSystem(n), min(steps, 70), seed)
    if out.frozen:
        return
    S = out.system
    for i in range(0, S.m + 1, 7):
        P = S.prefix(i)
        assert leave_graph(P).edge_count == math.comb(n, 2) - 3 * i
        assert P.pair_index == P.rebuilt_index()
    assert replay_log_likelihood(S) == pytest.approx(-sum(math.log(q) for q in out.q_log))


def test_replay_examples():
    assert replay_log_likelihood(PartialSystem(7, [(0, 1, 2)])) == pytest.approx(-math.log(35))
    F = fano()
    a = replay_log_likelihood(F)
    b = replay_log_likelihood(list(reversed(F.triples)), 7)
    assert math.isfinite(a) and math.isfinite(b)
    with pytest.raises(Unreachable):
        replay_log_likelihood([(0, 1, 2), (0, 1, 3)], 7)


def test_bite_examples():
    assert binomial_bite(PartialSystem(9), 0.0, 1).kept.m == 0
    b = binomial_bite(PartialSystem(4), 1.0, 1)
    assert b.raw_count == 4 and b.kept.m == 0


@given(st.integers(0, 10**6), st.floats(0.0, 0.2))
def test_bite_conflict_free(seed, p):
    start = PartialSystem(15, [(0, 1, 2)])
    b = binomial_bite(start, p, seed)
    assert b.kept.pair_index == b.kept.rebuilt_index()
    assert b.kept.m == start.m + b.raw_count - b.deleted_count
    assert all(t in b.kept for t in start.triples)


def test_bite_mean_matches_exact_expectation():
    n, alpha = 99, 0.2
    p = alpha / n
    # a triple survives iff drawn and none of its 3(n-3) pair-sharing rivals is drawn
    exact = math.comb(n, 3) * p * (1 - p) ** (3 * (n - 3))
    runs = 300
    ms = [binomial_bite(PartialSystem(n), p, s).kept.m for s in range(runs)]
    mean = sum(ms) / runs
    sd = math.sqrt(sum((m - mean) ** 2 for m in ms) / (runs - 1))
    assert abs(mean - exact) <= 4 * sd / math.sqrt(runs)


def test_coupling_trivial_cases():
    always = lambda triples: True  # noqa: E731  "m >= 0"
    r = coupling_experiment(PartialSystem(21), 0.2, always, range(20))
    assert r.trp_fail_rate == 0 and r.bite_fail_rate == 0
    prop = window_property(range(7))
    r0 = coupling_experiment(PartialSystem(21), 0.0, prop, range(20))
    assert r0.trp_fail_rate == r0.bite_fail_rate == 1.0


def test_frozen_counts_as_success():
    r = coupling_experiment(PartialSystem(4), 0.9, lambda triples: False, range(10))
    # alpha N rounds to 2 steps on K4, which always freezes
    assert r.trp_frozen == 10 and r.trp_fail_rate == 0.0


def test_trajectory_start_and_freeze():
    recs = trajectory(PartialSystem(15), 5, 0, h=2)
    r0 = recs[0]
    assert r0.Q == math.comb(15, 3) and r0.deg_min == r0.deg_max == 14
    assert r0.deg_dev == pytest.approx(1 / 15)
    assert r0.pred_p1n == 15 and r0.pred_p2n == 15
    frozen = trajectory(PartialSystem(4), 2, 3)
    assert len(frozen) == 2 and frozen[-1].Q == 0


def test_trajectory_csv_header():
    text = trajectory_csv(trajectory(PartialSystem(9), 3, 0))
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 5


def test_trajectory_same_seed_same_run():
    a = trajectory(PartialSystem(21), 30, 4, h=2)
    b = trajectory(PartialSystem(21), 30, 4, h=2)
    assert a == b
    assert [r.Q for r in a[:-1]] == run_trp(PartialSystem(21), 30, 4).q_log


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
