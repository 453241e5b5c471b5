"""Completing partial systems: hill-climbing generation and exact counting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .design import PartialSystem, Triple, is_admissible, leave_graph
from .errors import TooLarge
from .quasirandom import check_quasirandom
from .removal import run_trp
from .rng import py_rng


class HillClimbFailed(RuntimeError):
    def __init__(self, best_m: int, moves: int):
        self.best_m = best_m
        self.moves = moves
        super().__init__(f"no completion after {moves} moves (best m={best_m})")


def default_moves(n: int) -> int:
    return 2000 + 40 * n * n


def complete_hillclimb(
    S: PartialSystem,
    seed: int,
    max_moves: int | None = None,
    protect_prefix: bool = False,
) -> PartialSystem:
    """Complete ``S`` to a Steiner triple system by Stinson-style hill-climbing.

    Each move takes a uniformly random uncovered pair {x, y}, orients it at
    random, picks z uniformly among the uncovered partners of x, and adds
    {x, y, z}; if {y, z} was covered, its triple is evicted first.  The number
    of triples never decreases.  With ``protect_prefix`` the triples of ``S``
    are never evicted (moves that would do so are rejected), so the result
    contains ``S``; otherwise they may be swapped out.

    Raises:
        ValueError: ``S.n`` is not 1 or 3 mod 6.
        HillClimbFailed: the move budget ran out.
    """
    n = S.n
    if not is_admissible(n):
        raise ValueError(f"order {n} is not 1 or 3 mod 6")
    target = n * (n - 1) // 6
    if max_moves is None:
        max_moves = default_moves(n)
    rng = py_rng(seed, 3)
    rand = rng.random

    third = [[-1] * n for _ in range(n)]
    live: list[list[int]] = [[] for _ in range(n)]  # uncovered partners
    lpos = [[-1] * n for _ in range(n)]
    unc: list[tuple[int, int]] = []  # uncovered pairs u < v
    upos: dict[tuple[int, int], int] = {}

    def cover(u: int, v: int, w: int) -> None:
        third[u][v] = third[v][u] = w
        for a, b in ((u, v), (v, u)):
            i = lpos[a][b]
            last = live[a].pop()
            if last != b:
                live[a][i] = last
                lpos[a][last] = i
            lpos[a][b] = -1
        key = (u, v) if u < v else (v, u)
        i = upos.pop(key)
        last = unc.pop()
        if last != key:
            unc[i] = last
            upos[last] = i

    def uncover(u: int, v: int) -> None:
        third[u][v] = third[v][u] = -1
        for a, b in ((u, v), (v, u)):
            lpos[a][b] = len(live[a])
            live[a].append(b)
        key = (u, v) if u < v else (v, u)
        upos[key] = len(unc)
        unc.append(key)

    for u in range(n):
        for v in range(u + 1, n):
            lpos[u][v] = len(live[u])
            live[u].append(v)
            lpos[v][u] = len(live[v])
            live[v].append(u)
            upos[(u, v)] = len(unc)
            unc.append((u, v))

    blocks: dict[Triple, None] = {}
    for t in S.triples:
        a, b, c = t
        cover(a, b, c)
        cover(a, c, b)
        cover(b, c, a)
        blocks[t] = None
    protected = set(S.triples) if protect_prefix else set()

    best = len(blocks)
    moves = 0
    while unc:
        if moves >= max_moves:
            raise HillClimbFailed(best, moves)
        moves += 1
        x, y = unc[int(rand() * len(unc))]
        if rand() < 0.5:
            x, y = y, x
        partners = live[x]
        if len(partners) < 2:
            continue
        z = partners[int(rand() * len(partners))]
        if z == y:
            continue
        w = third[y][z]
        if w >= 0:
            old = tuple(sorted((y, z, w)))
            if old in protected:
                continue
            del blocks[old]
            uncover(y, z)
            uncover(y, w)
            uncover(z, w)
        cover(x, y, z)
        cover(x, z, y)
        cover(y, z, x)
        blocks[tuple(sorted((x, y, z)))] = None
        best = max(best, len(blocks))
    assert len(blocks) == target
    return PartialSystem(n, blocks)


def generate_sts(n: int, seed: int, prefix_fraction: float = 0.5, max_moves: int | None = None) -> PartialSystem:
    """A random STS(n): a triangle-removal prefix of about ``prefix_fraction * N``
    triples, finished by hill-climbing.  Retries on derived seeds if the
    climber runs out of moves."""
    if not is_admissible(n):
        raise ValueError(f"order {n} is not 1 or 3 mod 6")
    N = n * (n - 1) // 6
    steps = int(prefix_fraction * N)
    for attempt in range(8):
        out = run_trp(PartialSystem(n), steps, seed if attempt == 0 else seed + (attempt << 40))
        start = out.system if out.system is not None else PartialSystem(n)
        try:
            return complete_hillclimb(start, seed + (attempt << 40), max_moves)
        except HillClimbFailed:
            continue
    raise HillClimbFailed(-1, -1)


# -- exact counting --------------------------------------------------------------


def _count_guard(S: PartialSystem, edges: int) -> None:
    if S.n <= 9:
        return
    if S.n <= 15 and edges <= 45:
        return
    raise TooLarge(f"exact completion count refused for n={S.n} with {edges} uncovered pairs")


def _least_pair(adj: list[int]) -> tuple[int, int] | None:
    for u, a in enumerate(adj):
        if a:
            return u, (a & -a).bit_length() - 1
    return None


def count_completions(S: PartialSystem) -> int:
    """Number of Steiner triple systems containing ``S`` (exact backtracking).

    Branches on the lexicographically least uncovered pair {u, v}; each
    admissible w (with {u, w} and {v, w} uncovered) gives one subtree.
    """
    G = leave_graph(S)
    _count_guard(S, G.edge_count)
    if not is_admissible(S.n) and G.edge_count:
        return 0
    adj = G.adj

    def rec() -> int:
        pair = _least_pair(adj)
        if pair is None:
            return 1
        u, v = pair
        cands = adj[u] & adj[v]
        total = 0
        while cands:
            low = cands & -cands
            w = low.bit_length() - 1
            cands ^= low
            bu, bv, bw = 1 << u, 1 << v, 1 << w
            adj[u] ^= bv | bw
            adj[v] ^= bu | bw
            adj[w] ^= bu | bv
            total += rec()
            adj[u] ^= bv | bw
            adj[v] ^= bu | bw
            adj[w] ^= bu | bv
        return total

    return rec()


def branch_counts(S: PartialSystem) -> dict[Triple, int]:
    """Completion counts of S + t for every admissible t at the branching pair."""
    G = leave_graph(S)
    pair = _least_pair(G.adj)
    if pair is None:
        return {}
    u, v = pair
    out = {}
    cands = G.adj[u] & G.adj[v]
    for w in range(S.n):
        if cands >> w & 1:
            t = tuple(sorted((u, v, w)))
            out[t] = count_completions(S.copy().add(t))
    return out


def enumerate_systems(n: int, start: PartialSystem | None = None) -> list[PartialSystem]:
    """All labelled STS(n) containing ``start`` (n <= 9 unless nearly complete)."""
    S = start if start is not None else PartialSystem(n)
    G = leave_graph(S)
    _count_guard(S, G.edge_count)
    if not is_admissible(n):
        return []
    adj = G.adj
    chosen: list[Triple] = list(S.triples)
    found: list[PartialSystem] = []

    def rec() -> None:
        pair = _least_pair(adj)
        if pair is None:
            found.append(PartialSystem(n, chosen))
            return
        u, v = pair
        cands = adj[u] & adj[v]
        while cands:
            low = cands & -cands
            w = low.bit_length() - 1
            cands ^= low
            bu, bv, bw = 1 << u, 1 << v, 1 << w
            adj[u] ^= bv | bw
            adj[v] ^= bu | bw
            adj[w] ^= bu | bv
            chosen.append(tuple(sorted((u, v, w))))
            rec()
            chosen.pop()
            adj[u] ^= bv | bw
            adj[v] ^= bu | bw
            adj[w] ^= bu | bv

    rec()
    return found


@dataclass
class ExtensionRatioReport:
    n: int
    m: int
    samples: int
    accepted: int
    counts: list[int] = field(default_factory=list)
    max_count: int = 0
    min_count: int = 0
    ratio: float = math.nan
    log_ordered_factor: float = 0.0  # log (N - m)!
    eps: float | None = None
    h: int = 2

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["counts"] = list(self.counts)
        return d


def extension_ratio_experiment(
    n: int,
    m: int,
    samples: int,
    seed: int,
    eps: float | None = None,
    h: int = 2,
) -> ExtensionRatioReport:
    """Spread of exact completion counts over m-triple triangle-removal prefixes.

    With ``eps`` set, a sample is kept only if every prefix S_i (i <= m) has
    an (eps, h)-quasirandom leave graph.  The ratio max/min is taken over kept
    samples with a nonzero count (zero-count samples are listed in ``counts``).
    Ordered extension counts are (N - m)! times these, so the ratio is shared.
    """
    if n > 9:
        raise TooLarge("extension ratio experiment needs n <= 9 for exact counts")
    N = n * (n - 1) // 6
    counts: list[int] = []
    accepted = 0
    for k in range(samples):
        out = run_trp(PartialSystem(n), m, seed + k)
        if out.frozen:
            continue
        S = out.system
        if eps is not None and not all(
            check_quasirandom(leave_graph(S.prefix(i)), eps, h).passed for i in range(m + 1)
        ):
            continue
        accepted += 1
        counts.append(count_completions(S))
    nz = [c for c in counts if c > 0]
    report = ExtensionRatioReport(
        n, m, samples, accepted, counts, eps=eps, h=h, log_ordered_factor=math.lgamma(N - m + 1)
    )
    if nz:
        report.max_count, report.min_count = max(nz), min(nz)
        report.ratio = report.max_count / report.min_count
    return report
