import itertools
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steiner_forge.design import LeaveGraph, PartialSystem, fano, leave_graph
from steiner_forge.errors import InvalidRoots, TooLarge
from steiner_forge.quasirandom import (
    EDGE, TRIANGLE, Pattern, absorber_extension_pattern, check_quasirandom, count_extensions,
    density, linked_triples, pair_ratio_extremes,
)
from steiner_forge.removal import run_trp


def brute_worst(G, h):
    """Max |ratio - 1| over all |A| <= h by explicit set intersection."""
    n = G.n
    nb = [set(G.neighbors(v)) for v in range(n)]
    d = density(G)
    worst = 0.0
    for k in range(1, h + 1):
        for A in itertools.combinations(range(n), k):
            common = set(range(n)).intersection(*(nb[v] for v in A))
            pred = d**k * n
            r = (0.0 if not common else math.inf) if pred == 0 else abs(len(common) / pred - 1)
            worst = max(worst, r)
    return worst


def test_density_examples():
    assert density(LeaveGraph.complete(7)) == 1.0
    assert density(LeaveGraph.empty(9)) == 0.0
    assert density(leave_graph(PartialSystem(9, [(0, 1, 2)]))) == pytest.approx(33 / 36)


def test_k7_band_edges():
    K7 = LeaveGraph.complete(7)
    r = check_quasirandom(K7, 0.30, 2)
    assert r.passed and r.worst_ratio == pytest.approx(5 / 7) and len(r.worst_set) == 2
    r = check_quasirandom(K7, 0.25, 2)
    assert not r.passed and len(r.worst_set) == 2


def test_zero_density_convention():
    assert check_quasirandom(LeaveGraph.empty(9), 0.1, 1).passed
    assert check_quasirandom(leave_graph(fano()), 0.01, 2).passed


def test_report_json_fields():
    d = json.loads(check_quasirandom(LeaveGraph.complete(5), 0.5, 2).to_json())
    assert {"passed", "eps", "h", "density", "worst_set", "worst_ratio", "mode", "samples"} <= set(d)


def test_exhaustive_guard():
    with pytest.raises(TooLarge):
        check_quasirandom(LeaveGraph.complete(200), 0.5, 4)


def test_sampled_mode_is_seeded():
    G = leave_graph(run_trp(PartialSystem(31), 40, 1).system)
    a = check_quasirandom(G, 0.2, 2, mode="sampled", samples=50, seed=3)
    b = check_quasirandom(G, 0.2, 2, mode="sampled", samples=50, seed=3)
    assert a == b and a.samples == 50 and a.mode == "sampled"


@pytest.mark.parametrize("n", [5, 9, 14])
@pytest.mark.parametrize("h", [1, 2, 3])
def test_complete_graph_passes_at_h_over_n(n, h):
    r = check_quasirandom(LeaveGraph.complete(n), h / n, h)
    assert r.passed
    assert r.worst_ratio == pytest.approx((n - h) / n)


@given(st.integers(0, 10_000))
def test_exhaustive_matches_brute_force(seed):
    n = 13
    out = run_trp(PartialSystem(n), random.Random(seed).randint(0, 20), seed)
    if out.frozen:
        return
    G = leave_graph(out.system)
    rep = check_quasirandom(G, 0.3, 2)
    want = brute_worst(G, 2)
    assert abs(rep.worst_ratio - 1) == pytest.approx(want)
    assert rep.passed == (want <= 0.3 + 1e-12)


def test_pair_ratio_extremes_agrees():
    G = leave_graph(run_trp(PartialSystem(21), 30, 5).system)
    lo, hi, d = pair_ratio_extremes(G.to_numpy())
    assert d == pytest.approx(density(G))
    worst = brute_worst(G, 2)
    assert max(1 - lo, hi - 1) == pytest.approx(worst)


def brute_extensions(G, H, roots):
    free = [v for v in range(H.k) if v not in roots]
    avail = [g for g in range(G.n) if g not in roots.values()]
    count = 0
    for img in itertools.permutations(avail, len(free)):
        phi = dict(roots)
        phi.update(zip(free, img))
        if all(G.has_edge(phi[u], phi[v]) for u, v in H.edges):
            count += 1
    return count


def test_extension_examples():
    K7 = LeaveGraph.complete(7)
    assert count_extensions(K7, TRIANGLE) == 210
    assert count_extensions(K7, EDGE, {0: 3}) == 6
    assert count_extensions(K7, Pattern(0, ())) == 1


def test_absorber_pattern_in_k12():
    K12 = LeaveGraph.complete(12)
    F = absorber_extension_pattern()
    roots = {v: v for v in range(9)}
    assert count_extensions(K12, F, roots) == brute_extensions(K12, F, roots) == 6


def test_absorber_pattern_on_sparse_graph():
    S = run_trp(PartialSystem(13), 12, 2).system
    G = leave_graph(S)
    F = absorber_extension_pattern()
    rng = random.Random(0)
    for _ in range(5):
        img = rng.sample(range(13), 7)
        roots = {0: img[0], 1: img[1], 2: img[2], 3: img[3], 5: img[4], 7: img[5], 8: img[6]}
        try:
            got = count_extensions(G, F, roots)
        except InvalidRoots:
            continue
        assert got == brute_extensions(G, F, roots)


def test_isolated_vertex_multiplies():
    G = leave_graph(run_trp(PartialSystem(9), 3, 4).system)
    base = count_extensions(G, TRIANGLE, {0: 0})
    assert count_extensions(G, TRIANGLE.with_isolated_vertex(), {0: 0}) == base * (9 - 3)


def test_invalid_roots():
    G = leave_graph(PartialSystem(7, [(0, 1, 2)]))
    with pytest.raises(InvalidRoots):
        count_extensions(G, EDGE, {0: 0, 1: 1})
    with pytest.raises(InvalidRoots):
        count_extensions(G, TRIANGLE, {0: 3, 1: 3})


def brute_linked(G, X, Y, Z):
    return sum(
        G.has_edge(x1, y2) and G.has_edge(y1, z2) and G.has_edge(z1, x2)
        for (x1, x2) in X for (y1, y2) in Y for (z1, z2) in Z
    )


def test_linked_triples_examples():
    X, Y, Z = [(0, 1), (2, 3)], [(4, 5), (6, 7)], [(0, 5), (2, 7)]
    assert linked_triples(LeaveGraph.complete(9), X, Y, Z) == 8
    assert linked_triples(LeaveGraph.empty(9), X, Y, Z) == 0
    with pytest.raises(ValueError):
        linked_triples(LeaveGraph.complete(9), [(0, 1), (1, 2)], Y, Z)


@given(st.integers(0, 5000))
def test_linked_triples_oracle(seed):
    rng = random.Random(seed)
    out = run_trp(PartialSystem(13), rng.randint(0, 15), seed)
    if out.frozen:
        return
    G = leave_graph(out.system)

    def pairs():
        vs = rng.sample(range(13), 2 * rng.randint(1, 4))
        return [(vs[2 * i], vs[2 * i + 1]) for i in range(len(vs) // 2)]

    X, Y, Z = pairs(), pairs(), pairs()
    assert linked_triples(G, X, Y, Z) == brute_linked(G, X, Y, Z)
