import itertools
import random

import pytest
from hypothesis import given, strategies as st

from steiner_forge.design import PartialSystem, affine_plane_3, fano, relabel
from steiner_forge.errors import TooLarge
from steiner_forge.matching import (
    count_perfect_matchings, exact_cover_find, find_perfect_matching, is_matching, is_perfect_matching,
    max_matching,
)
from steiner_forge.removal import run_trp

from conftest import sts


def brute_pm(S):
    k = S.n // 3
    return sum(
        len({v for t in combo for v in t}) == S.n for combo in itertools.combinations(S.triples, k)
    )


def brute_max(S):
    for k in range(S.n // 3, 0, -1):
        for combo in itertools.combinations(S.triples, k):
            if len({v for t in combo for v in t}) == 3 * k:
                return k
    return 0


def test_sts9():
    S = affine_plane_3()
    assert count_perfect_matchings(S) == brute_pm(S) == 4
    M = find_perfect_matching(S)
    assert M.perfect and is_perfect_matching(S, M.triples)
    assert max_matching(S).size == 3


def test_fano():
    F = fano()
    assert find_perfect_matching(F) is None
    assert count_perfect_matchings(F) == 0
    assert max_matching(F).size == brute_max(F) == 1


def test_empty_and_isolated_vertex():
    assert max_matching(PartialSystem(9)).size == 0
    S = PartialSystem(9, [(0, 1, 2), (3, 4, 5)])
    assert find_perfect_matching(S) is None


@pytest.mark.parametrize("seed", [0, 1])
def test_sts15_against_brute_force_and_relabelling(seed):
    S = sts(15, seed)
    c = count_perfect_matchings(S)
    assert c == brute_pm(S)
    perm = list(range(15))
    random.Random(seed).shuffle(perm)
    assert count_perfect_matchings(relabel(S, perm)) == c


def test_count_guard():
    with pytest.raises(TooLarge):
        count_perfect_matchings(sts(33, 0))


@given(st.integers(0, 10**6), st.integers(1, 14))
def test_max_matching_is_maximum(seed, m):
    out = run_trp(PartialSystem(12), min(m, 22), seed)
    if out.frozen:
        return
    S = out.system
    M = max_matching(S)
    assert M.exact and is_matching(S, M.triples)
    assert M.size == brute_max(S)
    assert count_perfect_matchings(S) == brute_pm(S)


def test_heuristic_beyond_limit():
    S = sts(33, 1)
    M = max_matching(S)
    assert not M.exact and is_matching(S, M.triples) and M.size >= 8


def test_find_pm_seeded_variants_valid():
    S = sts(27, 3)
    for seed in range(3):
        M = find_perfect_matching(S, seed)
        assert M is not None and is_perfect_matching(S, list(M.triples))


def test_exact_cover_budget():
    S = sts(45, 2)
    assert exact_cover_find(S.n, S.triples, (1 << S.n) - 1, node_budget=1) is None


def test_is_matching_rejects_foreign_and_overlapping():
    S = affine_plane_3()
    t0, t1 = S.triples[0], next(t for t in S.triples if set(t) & set(S.triples[0]) and t != S.triples[0])
    assert not is_matching(S, [t0, t1])
    a, b, c = t0
    foreign = tuple(sorted((a, b, next(x for x in range(9) if x not in t0))))
    assert foreign not in S and not is_matching(S, [foreign])
