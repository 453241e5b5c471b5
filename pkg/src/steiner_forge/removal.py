"""The triangle removal process, binomial bites and trajectory tracking.

Sampling is exactly uniform over the triangles of the current leave graph
without materialising the triangle set: draw a uniform edge {u, v}, accept it
with probability codeg(u, v) / B where B >= every codegree, then take a
uniform common neighbour.  Each triangle is reachable through its three edges,
so every triangle has acceptance probability 3 / (E * B).  The triangle count
Q is maintained exactly: deleting triangle {a, b, c} destroys
codeg(a,b) + codeg(a,c) + codeg(b,c) - 2 triangles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .design import PartialSystem, Triple, iter_bits, leave_graph
from .errors import Unreachable
from .rng import np_rng, py_rng

# rejection attempts before falling back to explicit enumeration
_MAX_TRIES = 64


class TriangleRemoval:
    """Mutable state of one run: leave graph, edge list and triangle count."""

    __slots__ = ("n", "adj", "deg", "edges", "edge_pos", "Q")

    def __init__(self, n: int, adj: list[int]):
        self.n = n
        self.adj = list(adj)
        self.deg = [a.bit_count() for a in adj]
        self.edges: list[tuple[int, int]] = []
        for u in range(n):
            for v in iter_bits(adj[u] >> (u + 1) << (u + 1)):
                self.edges.append((u, v))
        self.edge_pos = {e: i for i, e in enumerate(self.edges)}
        if all(d == n - 1 for d in self.deg):
            self.Q = math.comb(n, 3)
        else:
            self.Q = sum((adj[u] & adj[v]).bit_count() for u, v in self.edges) // 3

    @classmethod
    def from_system(cls, S: PartialSystem) -> "TriangleRemoval":
        return cls(S.n, leave_graph(S).adj)

    def clone(self) -> "TriangleRemoval":
        other = object.__new__(TriangleRemoval)
        other.n = self.n
        other.adj = self.adj.copy()
        other.deg = self.deg.copy()
        other.edges = self.edges.copy()
        other.edge_pos = self.edge_pos.copy()
        other.Q = self.Q
        return other

    def codeg(self, u: int, v: int) -> int:
        return (self.adj[u] & self.adj[v]).bit_count()

    def is_triangle(self, t: Triple) -> bool:
        a, b, c = t
        adj = self.adj
        return bool((adj[a] >> b & 1) and (adj[a] >> c & 1) and (adj[b] >> c & 1))

    def triangles(self) -> list[Triple]:
        out = []
        for u, v in self.edges:
            common = self.adj[u] & self.adj[v]
            for w in iter_bits(common >> (v + 1) << (v + 1)):
                out.append((u, v, w))
        return out

    def sample(self, rng) -> Triple | None:
        """A uniformly random triangle, or None when the graph is triangle-free."""
        if self.Q == 0:
            return None
        adj, edges = self.adj, self.edges
        bound = max(self.deg) - 1
        n_edges = len(edges)
        rand = rng.random
        for _ in range(_MAX_TRIES):
            u, v = edges[int(rand() * n_edges)]
            common = adj[u] & adj[v]
            c = common.bit_count()
            if c and rand() * bound < c:
                k = int(rand() * c)
                for w in iter_bits(common):
                    if k == 0:
                        break
                    k -= 1
                a, b, cc = sorted((u, v, w))
                return (a, b, cc)
        tris = self.triangles()
        return tris[int(rand() * len(tris))]

    def remove(self, t: Triple) -> None:
        a, b, c = t
        adj = self.adj
        self.Q -= (
            (adj[a] & adj[b]).bit_count()
            + (adj[a] & adj[c]).bit_count()
            + (adj[b] & adj[c]).bit_count()
            - 2
        )
        adj[a] &= ~((1 << b) | (1 << c))
        adj[b] &= ~((1 << a) | (1 << c))
        adj[c] &= ~((1 << a) | (1 << b))
        self.deg[a] -= 2
        self.deg[b] -= 2
        self.deg[c] -= 2
        pos, edges = self.edge_pos, self.edges
        for e in ((a, b), (a, c), (b, c)):
            i = pos.pop(e)
            last = edges.pop()
            if i < len(edges):
                edges[i] = last
                pos[last] = i


@dataclass
class TrpOutcome:
    """Result of a run.  ``system`` is None exactly when the run froze."""

    system: PartialSystem | None
    completed_steps: int
    seed: int
    q_log: list[int] = field(default_factory=list)

    @property
    def frozen(self) -> bool:
        return self.system is None


def _capacity(n: int) -> float:
    return n * (n - 1) / 6


def run_trp(start: PartialSystem, steps: int, seed: int, *, _state: TriangleRemoval | None = None) -> TrpOutcome:
    """Delete ``steps`` uniformly random triangles from G(start).

    Returns a frozen outcome (``system=None``) if the graph runs out of
    triangles first.  ``q_log[i]`` is the triangle count before step i.
    """
    N = _capacity(start.n)
    if steps > N - start.m + 1e-9:
        raise ValueError(f"steps={steps} exceeds remaining capacity {N - start.m:g}")
    state = _state.clone() if _state is not None else TriangleRemoval.from_system(start)
    rng = py_rng(seed, 1)
    chosen: list[Triple] = []
    q_log: list[int] = []
    for _ in range(steps):
        t = state.sample(rng)
        if t is None:
            return TrpOutcome(None, len(chosen), seed, q_log)
        q_log.append(state.Q)
        state.remove(t)
        chosen.append(t)
    out = start.copy()
    for t in chosen:
        out.add(t)
    return TrpOutcome(out, len(chosen), seed, q_log)


def replay_log_likelihood(S: PartialSystem | Sequence[Triple], n: int | None = None) -> float:
    """log Pr(the process started from K_n produces exactly this ordered prefix)."""
    if isinstance(S, PartialSystem):
        n, triples = S.n, S.triples
    else:
        if n is None:
            raise TypeError("n is required for a raw triple list")
        triples = [tuple(sorted(t)) for t in S]
    state = TriangleRemoval.from_system(PartialSystem(n))
    total = 0.0
    for i, t in enumerate(triples):
        if len(set(t)) != 3 or not state.is_triangle(t):
            raise Unreachable(i, t)
        total -= math.log(state.Q)
        state.remove(t)
    return total


# -- trajectory ---------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    step: int
    Q: int
    deg_min: int
    deg_mean: float
    deg_max: int
    codeg_min: int | None
    codeg_max: int | None
    pred_p1n: float
    pred_p2n: float
    deg_dev: float
    max_dev: float
    envelope: float | None = None


CSV_COLUMNS = ["step", "Q", "deg_min", "deg_mean", "deg_max", "pred_p1n", "pred_p2n", "max_dev"]


def _record(state: TriangleRemoval, i_total: int, step: int, N: float, pairs, envelope) -> TrajectoryRecord:
    n = state.n
    p = 1.0 - i_total / N
    p1n, p2n = p * n, p * p * n
    deg = state.deg
    dmin, dmax = min(deg), max(deg)
    if p1n > 0:
        deg_dev = max(abs(dmin / p1n - 1.0), abs(dmax / p1n - 1.0))
    else:
        deg_dev = 0.0 if dmax == 0 else math.inf
    max_dev = deg_dev
    cmin = cmax = None
    if pairs:
        adj = state.adj
        cods = [(adj[u] & adj[v]).bit_count() for u, v in pairs]
        cmin, cmax = min(cods), max(cods)
        if p2n > 0:
            max_dev = max(max_dev, abs(cmin / p2n - 1.0), abs(cmax / p2n - 1.0))
        elif cmax:
            max_dev = math.inf
    env = None
    if envelope is not None:
        C, c, eps = envelope
        env = p ** (-C) * eps**c if p > 0 else math.inf
    return TrajectoryRecord(
        step, state.Q, dmin, sum(deg) / n, dmax, cmin, cmax, p1n, p2n, deg_dev, max_dev, env
    )


def trajectory(
    start: PartialSystem,
    steps: int,
    seed: int,
    h: int = 1,
    sample_pairs: int = 200,
    envelope: tuple[float, float, float] | None = None,
) -> list[TrajectoryRecord]:
    """Per-step statistics of a run against p(i)^k n, p(i) = 1 - i/N.

    Records cover the states after 0, 1, ..., k removals; a frozen run stops
    at its freeze step, whose record has Q = 0.  With ``h >= 2`` codegrees of
    ``sample_pairs`` fixed random pairs are tracked as well.  ``envelope`` is
    an optional (C, c, eps) triple giving e(i) = p(i)^-C eps^c for reference.
    """
    n = start.n
    N = _capacity(n)
    state = TriangleRemoval.from_system(start)
    rng = py_rng(seed, 1)
    pairs = []
    if h >= 2 and n >= 2:
        prng = py_rng(seed, 2)
        all_pairs = math.comb(n, 2)
        k = min(sample_pairs, all_pairs)
        pairs = [tuple(sorted(prng.sample(range(n), 2))) for _ in range(k)]
    records = [_record(state, start.m, 0, N, pairs, envelope)]
    for step in range(1, steps + 1):
        t = state.sample(rng)
        if t is None:
            break
        state.remove(t)
        records.append(_record(state, start.m + step, step, N, pairs, envelope))
    return records


def trajectory_csv(records: Iterable[TrajectoryRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.step, r.Q, r.deg_min, f"{r.deg_mean:.6f}", r.deg_max,
            f"{r.pred_p1n:.6f}", f"{r.pred_p2n:.6f}", f"{r.max_dev:.6f}",
        ])
    return buf.getvalue()


# -- binomial bite -------------------------------------------------------------


@dataclass
class BiteSample:
    kept: PartialSystem
    added: list[Triple]
    raw_count: int
    deleted_count: int


@lru_cache(maxsize=8)
def _all_triples(n: int) -> np.ndarray:
    if n < 3:
        return np.zeros((0, 3), dtype=np.int64)
    return np.array(list(combinations(range(n), 3)), dtype=np.int64)


def candidate_triples(start: PartialSystem) -> np.ndarray:
    """Triples not conflicting with ``start``: the triangles of G(start)."""
    if start.m == 0:
        return _all_triples(start.n)
    tris = TriangleRemoval.from_system(start).triangles()
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def _bite(start: PartialSystem, p: float, rng: np.random.Generator, cands: np.ndarray) -> BiteSample:
    n = start.n
    T = len(cands)
    M = int(rng.binomial(T, p)) if T else 0
    if M == 0:
        return BiteSample(start.copy(), [], 0, 0)
    idx = rng.choice(T, size=M, replace=False)
    idx.sort()
    picked = cands[idx]
    pair_ids = np.stack(
        [picked[:, 0] * n + picked[:, 1], picked[:, 0] * n + picked[:, 2], picked[:, 1] * n + picked[:, 2]],
        axis=1,
    )
    uniq, inv, counts = np.unique(pair_ids.ravel(), return_inverse=True, return_counts=True)
    clash = (counts[inv].reshape(-1, 3) > 1).any(axis=1)
    keep = picked[~clash]
    added = [tuple(int(v) for v in row) for row in keep]
    kept = start.copy()
    for t in added:
        kept.add(t)
    return BiteSample(kept, added, M, int(clash.sum()))


def binomial_bite(start: PartialSystem, p: float, seed: int) -> BiteSample:
    """Sample G*(start, p): include each non-conflicting triple with
    probability p, then drop every included triple that shares a pair with
    another included triple."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return _bite(start, p, np_rng(seed, 2), candidate_triples(start))


# -- coupling ------------------------------------------------------------------


def window_property(window: Iterable[int]) -> Callable[[frozenset], bool]:
    """Monotone property: some triple lies entirely inside ``window``."""
    win = frozenset(window)

    def prop(triples) -> bool:
        return any(a in win and b in win and c in win for a, b, c in triples)

    prop.__name__ = f"window_{len(win)}"
    return prop


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    denom = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class CouplingResult:
    trp_fail_rate: float
    bite_fail_rate: float
    trp_failures: int
    bite_failures: int
    runs: int
    trp_frozen: int
    trp_ci: tuple[float, float]
    bite_ci: tuple[float, float]
    trp_steps: int
    p: float

    def to_dict(self) -> dict:
        return asdict(self)


def coupling_experiment(
    start: PartialSystem,
    alpha: float,
    property_eval: Callable[[frozenset], bool],
    seeds: Iterable[int],
) -> CouplingResult:
    """Failure frequencies of a monotone increasing property under
    R(start, alpha N) and under the bite G*(start, alpha/n).

    A frozen run satisfies every property.
    """
    n = start.n
    steps = int(round(alpha * _capacity(n)))
    p = alpha / n if n else 0.0
    base = TriangleRemoval.from_system(start)
    cands = candidate_triples(start)
    seeds = list(seeds)
    trp_fail = bite_fail = frozen = 0
    for s in seeds:
        out = run_trp(start, steps, s, _state=base)
        if out.frozen:
            frozen += 1
        elif not property_eval(out.system.unordered()):
            trp_fail += 1
        bite = _bite(start, p, np_rng(s, 2), cands)
        if not property_eval(bite.kept.unordered()):
            bite_fail += 1
    runs = len(seeds)
    return CouplingResult(
        trp_fail / runs if runs else 0.0,
        bite_fail / runs if runs else 0.0,
        trp_fail,
        bite_fail,
        runs,
        frozen,
        wilson_interval(trp_fail, runs),
        wilson_interval(bite_fail, runs),
        steps,
        p,
    )
