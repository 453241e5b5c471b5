"""Exact perfect-matching search and counting in 3-uniform systems.

All searches are exact cover over vertex bitmasks: a triple is a 3-bit mask
and a matching is a set of masks with pairwise empty intersections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .design import PartialSystem, Triple, iter_bits
from .errors import TooLarge

COUNT_LIMIT_N = 27


@dataclass(frozen=True)
class Matching:
    n: int
    triples: tuple[Triple, ...]
    exact: bool = True  # False when produced by a heuristic (size is a lower bound)

    @property
    def covered(self) -> int:
        mask = 0
        for a, b, c in self.triples:
            mask |= (1 << a) | (1 << b) | (1 << c)
        return mask

    @property
    def size(self) -> int:
        return len(self.triples)

    @property
    def perfect(self) -> bool:
        return 3 * len(self.triples) == self.n and self.covered == (1 << self.n) - 1

    def __len__(self) -> int:
        return len(self.triples)


def is_matching(S: PartialSystem | Iterable[Triple], triples: Iterable[Triple]) -> bool:
    """True iff ``triples`` are triples of ``S`` and pairwise vertex-disjoint."""
    host = S.unordered() if isinstance(S, PartialSystem) else frozenset(tuple(sorted(t)) for t in S)
    seen: set[int] = set()
    for t in triples:
        t = tuple(sorted(t))
        if t not in host or len(set(t)) != 3:
            return False
        if seen.intersection(t):
            return False
        seen.update(t)
    return True


def is_perfect_matching(S: PartialSystem, triples: Sequence[Triple]) -> bool:
    return is_matching(S, triples) and 3 * len(triples) == S.n and len({v for t in triples for v in t}) == S.n


def _incidence(n: int, triples: Iterable[Triple]) -> list[list[int]]:
    inc: list[list[int]] = [[] for _ in range(n)]
    for a, b, c in triples:
        mask = (1 << a) | (1 << b) | (1 << c)
        inc[a].append(mask)
        inc[b].append(mask)
        inc[c].append(mask)
    return inc


def _mask_to_triple(mask: int) -> Triple:
    a, b, c = iter_bits(mask)
    return (a, b, c)


def exact_cover_find(
    n: int,
    triples: Iterable[Triple],
    target: int,
    order: Sequence[int] | None = None,
    node_budget: int | None = None,
) -> list[Triple] | None:
    """One set of disjoint triples covering exactly ``target`` (a vertex mask).

    Branches on the uncovered vertex with the fewest usable triples, trying
    them in the order given (``order`` permutes the triple list, which lets
    callers randomise the search).  Returns None if no cover exists or the
    node budget is exhausted.
    """
    tl = list(triples)
    if order is not None:
        tl = [tl[i] for i in order]
    inc = _incidence(n, (t for t in tl if all(target >> v & 1 for v in t)))
    nodes = 0
    chosen: list[int] = []

    def rec(mask: int) -> bool:
        nonlocal nodes
        if mask == 0:
            return True
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            raise _Budget
        best_v, best_opts = -1, None
        for v in iter_bits(mask):
            opts = [t for t in inc[v] if t & mask == t]
            if best_opts is None or len(opts) < len(best_opts):
                best_v, best_opts = v, opts
                if len(opts) <= 1:
                    break
        for t in best_opts:
            chosen.append(t)
            if rec(mask ^ t):
                return True
            chosen.pop()
        return False

    try:
        ok = rec(target)
    except _Budget:
        return None
    return [_mask_to_triple(t) for t in chosen] if ok else None


class _Budget(Exception):
    pass


def find_perfect_matching(S: PartialSystem, seed: int | None = None) -> Matching | None:
    if S.n % 3:
        return None
    order = None
    if seed is not None:
        from .rng import py_rng

        order = list(range(S.m))
        py_rng(seed, 4).shuffle(order)
    found = exact_cover_find(S.n, S.triples, (1 << S.n) - 1, order)
    if found is None:
        return None
    return Matching(S.n, tuple(sorted(found)))


def count_perfect_matchings(S: PartialSystem, limit_n: int = COUNT_LIMIT_N) -> int:
    """Exact number of perfect matchings.

    Branches on the least-index uncovered vertex with memoisation on the
    uncovered set; counts are Python ints throughout.
    """
    n = S.n
    if n > limit_n:
        raise TooLarge(f"exact PM count refused for n={n} > {limit_n}")
    if n % 3:
        return 0
    inc = _incidence(n, S.triples)
    memo: dict[int, int] = {0: 1}

    def rec(mask: int) -> int:
        hit = memo.get(mask)
        if hit is not None:
            return hit
        v = (mask & -mask).bit_length() - 1
        total = 0
        for t in inc[v]:
            if t & mask == t:
                total += rec(mask ^ t)
        memo[mask] = total
        return total

    return rec((1 << n) - 1)


def max_matching(S: PartialSystem, exact_limit: int = COUNT_LIMIT_N, seed: int = 0) -> Matching:
    """A maximum matching (branch and bound) for n <= ``exact_limit``.

    Larger systems get greedy + one-for-two local search, flagged
    ``exact=False``.
    """
    n = S.n
    if n > exact_limit:
        return _greedy_matching(S, seed)
    inc = _incidence(n, S.triples)
    best: list[int] = []
    chosen: list[int] = []
    full = (1 << n) - 1

    def rec(mask: int) -> None:
        # mask: vertices still allowed (not covered, not skipped)
        nonlocal best
        if len(chosen) + mask.bit_count() // 3 <= len(best):
            return
        if len(chosen) > len(best):
            best = chosen.copy()
        if mask == 0:
            return
        v = (mask & -mask).bit_length() - 1
        for t in inc[v]:
            if t & mask == t:
                chosen.append(t)
                rec(mask ^ t)
                chosen.pop()
        rec(mask ^ (1 << v))

    rec(full)
    return Matching(n, tuple(sorted(_mask_to_triple(t) for t in best)))


def _greedy_matching(S: PartialSystem, seed: int) -> Matching:
    from .rng import py_rng

    rng = py_rng(seed, 5)
    triples = list(S.triples)
    rng.shuffle(triples)
    used: set[int] = set()
    M: list[Triple] = []
    for t in triples:
        if not used.intersection(t):
            M.append(t)
            used.update(t)
    # local search: drop one matched triple, add two disjoint free ones
    improved = True
    while improved:
        improved = False
        free = set(range(S.n)) - used
        for i, t in enumerate(M):
            avail = free | set(t)
            cands = [u for u in triples if avail.issuperset(u)]
            pick = None
            for a in range(len(cands)):
                for b in range(a + 1, len(cands)):
                    if not set(cands[a]) & set(cands[b]):
                        pick = (cands[a], cands[b])
                        break
                if pick:
                    break
            if pick:
                M[i:i + 1] = list(pick)
                used = {v for u in M for v in u}
                improved = True
                break
    return Matching(S.n, tuple(sorted(M)), exact=False)
