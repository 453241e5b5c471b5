"""Quasirandomness of leave graphs, rooted extension counts, linked triples.

A graph G on n vertices with density d is (eps, h)-quasirandom when every set
A of at most h vertices has (1 +- eps) d^|A| n common neighbours.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .design import LeaveGraph, iter_bits
from .errors import InvalidRoots, TooLarge
from .rng import py_rng

EXHAUSTIVE_LIMIT = 10**7


def density(G: LeaveGraph) -> float:
    if G.n < 2:
        raise ValueError("density needs n >= 2")
    return G.edge_count / math.comb(G.n, 2)


@dataclass
class QuasirandomReport:
    passed: bool
    eps: float
    h: int
    density: float
    worst_set: tuple[int, ...]
    worst_ratio: float
    mode: str = "exhaustive"
    samples: int | None = None
    sets_checked: int = 0
    part: int | None = None
    parts: list["QuasirandomReport"] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_set"] = list(self.worst_set)
        if not self.parts:
            d.pop("parts")
        if self.part is None:
            d.pop("part")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


_TOL = 1e-12  # absorbs rounding at the band edges, e.g. (n - h)/n against 1 - h/n


class _Worst:
    """Running max-violation tracker; merging two of these is associative."""

    __slots__ = ("eps", "ratio", "dist", "subset", "passed", "count")

    def __init__(self, eps: float):
        self.eps = eps
        self.ratio = 1.0
        self.dist = -1.0
        self.subset: tuple[int, ...] = ()
        self.passed = True
        self.count = 0

    def offer(self, subset: tuple[int, ...], common: int, predicted: float) -> None:
        self.count += 1
        if predicted == 0.0:
            # zero-density convention: the band collapses to {0}
            ok = common == 0
            ratio = 1.0 if ok else math.inf
        else:
            ratio = common / predicted
            ok = 1.0 - self.eps - _TOL <= ratio <= 1.0 + self.eps + _TOL
        dist = abs(ratio - 1.0)
        if not ok:
            self.passed = False
        if dist > self.dist:
            self.dist, self.ratio, self.subset = dist, ratio, subset


def check_common_neighbourhoods(
    adj: Sequence[int],
    targets: int,
    candidates: Sequence[int],
    n_scale: int,
    d: float,
    eps: float,
    h: int,
    mode: str = "exhaustive",
    samples: int = 1000,
    seed: int = 0,
) -> _Worst:
    """Scan sets A drawn from ``candidates`` (|A| <= h) and compare
    |common neighbourhood within ``targets``| against d^|A| * n_scale."""
    worst = _Worst(eps)
    cands = list(candidates)
    if mode == "exhaustive":
        total = sum(math.comb(len(cands), k) for k in range(1, h + 1))
        if total > EXHAUSTIVE_LIMIT:
            raise TooLarge(f"{total} sets exceed exhaustive limit {EXHAUSTIVE_LIMIT}")
        preds = [d**k * n_scale for k in range(h + 1)]

        def rec(start: int, mask: int, chosen: list[int]) -> None:
            for i in range(start, len(cands)):
                v = cands[i]
                m2 = mask & adj[v]
                chosen.append(v)
                k = len(chosen)
                worst.offer(tuple(chosen), m2.bit_count(), preds[k])
                if k < h:
                    rec(i + 1, m2, chosen)
                chosen.pop()

        rec(0, targets, [])
    elif mode == "sampled":
        rng = py_rng(seed, 0x51)
        for k in range(1, min(h, len(cands)) + 1):
            pred = d**k * n_scale
            for _ in range(samples):
                A = tuple(sorted(rng.sample(cands, k)))
                mask = targets
                for v in A:
                    mask &= adj[v]
                worst.offer(A, mask.bit_count(), pred)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return worst


def check_quasirandom(
    G: LeaveGraph,
    eps: float,
    h: int = 2,
    mode: str = "exhaustive",
    samples: int = 1000,
    seed: int = 0,
) -> QuasirandomReport:
    """Test (eps, h)-quasirandomness of ``G``.

    ``mode="sampled"`` tests ``samples`` uniformly random sets of each size and
    is probabilistic: a pass does not certify the property.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    d = density(G)
    full = (1 << G.n) - 1
    worst = check_common_neighbourhoods(
        G.adj, full, range(G.n), G.n, d, eps, h, mode, samples, seed
    )
    return QuasirandomReport(
        passed=worst.passed,
        eps=eps,
        h=h,
        density=d,
        worst_set=worst.subset,
        worst_ratio=worst.ratio,
        mode=mode,
        samples=samples if mode == "sampled" else None,
        sets_checked=worst.count,
    )


def pair_ratio_extremes(A: np.ndarray) -> tuple[float, float, float]:
    """Min and max of |common nbhd| / (d^|A| n) over all |A| in {1, 2}, plus d.

    Dense numpy path used by the prefix-scanning experiments; equivalent to an
    exhaustive h=2 check.
    """
    n = A.shape[0]
    Af = A.astype(np.float64)
    deg = Af.sum(axis=1)
    d = deg.sum() / (n * (n - 1))
    if d == 0.0:
        return 1.0, 1.0, 0.0
    codeg = Af @ Af
    iu = np.triu_indices(n, 1)
    r1 = deg / (d * n)
    r2 = codeg[iu] / (d * d * n)
    return float(min(r1.min(), r2.min())), float(max(r1.max(), r2.max())), float(d)


# -- rooted extensions ----------------------------------------------------------


@dataclass(frozen=True)
class Pattern:
    """A small graph H on vertices 0..k-1."""

    k: int
    edges: tuple[tuple[int, int], ...]

    def with_isolated_vertex(self) -> "Pattern":
        return Pattern(self.k + 1, self.edges)

    def neighbours(self) -> list[set[int]]:
        nb: list[set[int]] = [set() for _ in range(self.k)]
        for u, v in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb


TRIANGLE = Pattern(3, ((0, 1), (0, 2), (1, 2)))
EDGE = Pattern(2, ((0, 1),))

MAX_FREE_VERTICES = 8


def absorber_extension_pattern() -> Pattern:
    """Graph skeleton of an absorber-extension around rooted vertices x, y, z.

    Vertices: 0..2 = x, y, z (isolated, present only to be avoided),
    3..8 = x1, x2, y1, y2, z1, z2, 9..11 = w_x, w_y, w_z.  The four external
    hyperedges {w_x,w_y,w_z}, {x1,y2,w_z}, {y1,z2,w_x}, {z1,x2,w_y} become
    triangles of the leave graph.
    """
    x1, x2, y1, y2, z1, z2, wx, wy, wz = range(3, 12)
    tris = [(wx, wy, wz), (x1, y2, wz), (y1, z2, wx), (z1, x2, wy)]
    edges = set()
    for t in tris:
        for u, v in combinations(t, 2):
            edges.add((min(u, v), max(u, v)))
    return Pattern(12, tuple(sorted(edges)))


def count_extensions(G: LeaveGraph, H: Pattern, roots: Mapping[int, int] | None = None) -> int:
    """Number of injective homomorphisms H -> G that agree with ``roots``."""
    roots = dict(roots or {})
    free = [v for v in range(H.k) if v not in roots]
    if len(free) > MAX_FREE_VERTICES:
        raise TooLarge(f"{len(free)} free pattern vertices exceed {MAX_FREE_VERTICES}")
    images = list(roots.values())
    if len(set(images)) != len(images) or any(not 0 <= g < G.n for g in images):
        raise InvalidRoots("roots must be distinct vertices of G")
    if any(not 0 <= h < H.k for h in roots):
        raise InvalidRoots("root keys must be pattern vertices")
    nb = H.neighbours()
    for u, v in H.edges:
        if u in roots and v in roots and not G.has_edge(roots[u], roots[v]):
            raise InvalidRoots(f"rooted edge ({u},{v}) is not an edge of G")

    # embed free vertices with many already-placed neighbours first
    order: list[int] = []
    placed = set(roots)
    remaining = set(free)
    while remaining:
        nxt = max(sorted(remaining), key=lambda v: len(nb[v] & placed))
        order.append(nxt)
        placed.add(nxt)
        remaining.discard(nxt)

    full = (1 << G.n) - 1
    phi = dict(roots)
    used = 0
    for g in images:
        used |= 1 << g

    def rec(i: int, used: int) -> int:
        if i == len(order):
            return 1
        v = order[i]
        mask = full & ~used
        for u in nb[v]:
            if u in phi:
                mask &= G.adj[phi[u]]
        if i == len(order) - 1:
            return mask.bit_count()
        total = 0
        for g in iter_bits(mask):
            phi[v] = g
            total += rec(i + 1, used | (1 << g))
            del phi[v]
        return total

    return rec(0, used)


# -- linked triples ---------------------------------------------------------------


def _check_disjoint(pairs: Sequence[tuple[int, int]], name: str) -> None:
    seen: set[int] = set()
    for a, b in pairs:
        if a == b or a in seen or b in seen:
            raise ValueError(f"pairs in {name} must be pairwise vertex-disjoint")
        seen.update((a, b))


def linked_triples(
    G: LeaveGraph,
    X: Sequence[tuple[int, int]],
    Y: Sequence[tuple[int, int]],
    Z: Sequence[tuple[int, int]],
) -> int:
    """Count (x, y, z) in X*Y*Z with {x1,y2}, {y1,z2}, {z1,x2} all edges of G."""
    for pairs, name in ((X, "X"), (Y, "Y"), (Z, "Z")):
        _check_disjoint(pairs, name)
    if not X or not Y or not Z:
        return 0
    A = G.to_numpy().astype(np.int64)
    x1 = np.array([p[0] for p in X])
    x2 = np.array([p[1] for p in X])
    y1 = np.array([p[0] for p in Y])
    y2 = np.array([p[1] for p in Y])
    z1 = np.array([p[0] for p in Z])
    z2 = np.array([p[1] for p in Z])
    # through[a, b] = #{z in Z : a ~ z2 and b ~ z1}
    through = A[:, z2] @ A[:, z1].T
    xy = A[np.ix_(x1, y2)]  # [x, y] -> x1 ~ y2
    closing = through[np.ix_(y1, x2)].T  # [x, y] -> #z linking y1 and x2
    return int((xy * closing).sum())
