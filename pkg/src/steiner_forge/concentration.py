"""Concentration inequalities checked against Monte-Carlo tails.

Three experiments:

* a Bernstein-type bound for Lipschitz functions of independent Bernoulli
  coordinates, tested on a small catalog of functions with known constants;
* Freedman's inequality, tested on the exact degree martingale of the
  triangle removal process;
* typicality of random orderings of a complete system (every short prefix
  leaves a quasirandom graph).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .design import LeaveGraph, PartialSystem
from .quasirandom import _TOL, check_quasirandom, pair_ratio_extremes
from .removal import TriangleRemoval
from .rng import np_rng, py_rng


def bernstein_bound(K: float, n: int, p: float, t: float) -> float:
    """exp(-t^2 / (4 K^2 n p + 2 K t)) for P(|f - E f| > t)."""
    if K <= 0 or n < 1 or not 0.0 <= p <= 1.0 or t < 0:
        raise ValueError("need K > 0, n >= 1, p in [0, 1], t >= 0")
    if t == 0:
        return 1.0
    return math.exp(-t * t / (4.0 * K * K * n * p + 2.0 * K * t))


def freedman_bound(K: float, v: float, t: float) -> float:
    """exp(-t^2 / (2 (v + K t))) for a supermartingale with |step| <= K."""
    if K <= 0 or v < 0 or t < 0:
        raise ValueError("need K > 0, v >= 0, t >= 0")
    if t == 0:
        return 1.0
    return math.exp(-t * t / (2.0 * (v + K * t)))


# -- Bernstein catalog -------------------------------------------------------------


@dataclass(frozen=True)
class FSpec:
    """A function of ``coords`` Bernoulli(p) coordinates with Lipschitz constant K."""

    name: str
    K: float
    coords: int
    mean: float
    sampler: object  # (rng, p, size) -> np.ndarray of f values

    def sample(self, rng: np.random.Generator, p: float, size: int) -> np.ndarray:
        return self.sampler(rng, p, size)


def coordinate_sum(n: int, p: float) -> FSpec:
    # flipping one coordinate moves the sum by exactly 1
    return FSpec("coordinate-sum", 1.0, n, n * p, lambda rng, p_, s: rng.binomial(n, p_, s).astype(float))


def edge_count(n: int, p: float) -> FSpec:
    """Edges of G(n, p); coordinates are the C(n, 2) pairs, K = 1."""
    N = math.comb(n, 2)
    return FSpec("edge-count", 1.0, N, N * p, lambda rng, p_, s: rng.binomial(N, p_, s).astype(float))


def isolated_triples_in_window(n: int, p: float, w: int | None = None) -> FSpec:
    """Triples of the random 3-graph on n vertices (each triple kept with
    probability p) that have one vertex in W = {0..w-1}, two in Z = the rest,
    and share no pair with another kept triple.

    K = 3: adding a triple kills the isolation of at most three others (one
    per pair) and removing one frees at most three.  The expectation is
    exact: |window| p (1 - p)^(3(n - 3)).
    """
    if n < 3:
        raise ValueError("need n >= 3")
    if w is None:
        w = n // 3
    triples = list(combinations(range(n), 3))
    pair_id = {pr: i for i, pr in enumerate(combinations(range(n), 2))}
    inc = np.array([[pair_id[(a, b)], pair_id[(a, c)], pair_id[(b, c)]] for a, b, c in triples])
    window = np.array([i for i, (a, b, c) in enumerate(triples) if a < w <= b])
    T, P = len(triples), len(pair_id)
    mean = len(window) * p * (1.0 - p) ** (3 * (n - 3))

    def sampler(rng: np.random.Generator, p_: float, size: int) -> np.ndarray:
        out = np.empty(size)
        chunk = max(1, 2_000_000 // T)
        for lo in range(0, size, chunk):
            s = min(chunk, size - lo)
            X = rng.random((s, T)) < p_
            counts = np.zeros((s, P), dtype=np.int32)
            rows, cols = np.nonzero(X)
            for j in range(3):
                np.add.at(counts, (rows, inc[cols, j]), 1)
            alone = (counts[:, inc[window]] == 1).all(axis=2)
            out[lo:lo + s] = (X[:, window] & alone).sum(axis=1)
        return out

    return FSpec("isolated-triples", 3.0, T, mean, sampler)


CATALOG = {
    "coordinate-sum": coordinate_sum,
    "edge-count": edge_count,
    "isolated-triples": isolated_triples_in_window,
}


@dataclass
class TailRow:
    t: float
    empirical: float
    bound: float
    sigma: float
    violation: bool


@dataclass
class TailTable:
    f: str
    n: int
    p: float
    samples: int
    lipschitz_K: float
    coords: int
    mean: float
    rows: list[TailRow] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(r.violation for r in self.rows)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations
        return d


def bernstein_tail_experiment(
    f_spec: str | FSpec,
    n: int,
    p: float,
    samples: int,
    t_grid: Sequence[float] | None = None,
    seed: int = 0,
) -> TailTable:
    """Empirical P(|f - E f| > t) against the Bernstein-type bound.

    A row is flagged when the empirical tail exceeds bound + 3 sigma, with
    sigma = sqrt(b (1 - b) / samples) the Monte-Carlo error of a frequency
    whose true value is the bound b.  The default grid spans 0 to 6 standard
    deviations of the sampled f.
    """
    spec = CATALOG[f_spec](n, p) if isinstance(f_spec, str) else f_spec
    vals = spec.sample(np_rng(seed, 13), p, samples)
    dev = np.abs(vals - spec.mean)
    if t_grid is None:
        sd = float(vals.std()) or 1.0
        t_grid = [round(k * sd, 6) for k in np.linspace(0.0, 6.0, 13)]
    table = TailTable(spec.name, n, p, samples, spec.K, spec.coords, spec.mean)
    for t in t_grid:
        emp = float((dev > t).mean())
        b = bernstein_bound(spec.K, spec.coords, p, t)
        sigma = math.sqrt(b * (1.0 - b) / samples)
        table.rows.append(TailRow(float(t), emp, b, sigma, emp > b + 3.0 * sigma))
    return table


# -- Freedman on the removal process ----------------------------------------------------


@dataclass
class MartingalePath:
    """X(i) = D_v(i) - D_v(0) + sum_{j<i} 2 T_v(j) / Q(j); V(i) = sum 4 q (1 - q)."""

    X: np.ndarray
    V: np.ndarray


def degree_martingale_paths(n: int, runs: int, seed: int, fraction: float = 0.8, vertex: int = 0) -> list[MartingalePath]:
    """Exact degree martingale of one vertex along triangle removal runs from K_n.

    The degree of v drops by 2 exactly when the removed triangle contains v,
    which happens with probability q = T_v / Q (T_v triangles through v, Q in
    total).  Subtracting the compensator -2q makes X a martingale with
    |dX| <= 2 and conditional variance 4 q (1 - q).
    """
    N = n * (n - 1) // 6
    steps = int(fraction * N)
    full = (1 << n) - 1
    base = TriangleRemoval(n, [full ^ (1 << u) for u in range(n)])
    paths = []
    for r in range(runs):
        state = base.clone()
        rng = py_rng(seed + r, 14)
        X = [0.0]
        V = [0.0]
        x = v_acc = 0.0
        for _ in range(steps):
            if state.Q == 0:
                break
            av = state.adj[vertex]
            Tv = sum((state.adj[u] & av).bit_count() for u in _bits(av)) // 2
            q = Tv / state.Q
            t = state.sample(rng)
            state.remove(t)
            x += (-2.0 if vertex in t else 0.0) + 2.0 * q
            v_acc += 4.0 * q * (1.0 - q)
            X.append(x)
            V.append(v_acc)
        paths.append(MartingalePath(np.array(X), np.array(V)))
    return paths


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class FreedmanReport:
    K: float
    runs: int
    max_excursion: float
    rows: list[dict] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(r["violation"] for r in self.rows)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations
        return d


def freedman_check(
    paths: Sequence[MartingalePath | Sequence[float]],
    K: float = 2.0,
    t_grid: Sequence[float] | None = None,
    v_grid: Sequence[float] | None = None,
) -> FreedmanReport:
    """Frequency of {X(i) >= t and V(i) <= v for some i} against the bound,
    for X and -X (both are supermartingales when X is a martingale).

    Plain increment sequences are accepted with V taken as the running sum of
    squared increments.
    """
    norm = []
    for p in paths:
        if isinstance(p, MartingalePath):
            norm.append(p)
        else:
            inc = np.asarray(p, dtype=float)
            norm.append(MartingalePath(np.concatenate([[0.0], np.cumsum(inc)]),
                                       np.concatenate([[0.0], np.cumsum(inc * inc)])))
    runs = len(norm)
    max_exc = max((float(np.abs(p.X).max()) for p in norm), default=0.0)
    if v_grid is None:
        finals = sorted(float(p.V[-1]) for p in norm)
        v_grid = sorted({finals[int(q * (runs - 1))] for q in (0.25, 0.5, 1.0)} if finals else {0.0})
    if t_grid is None:
        scale = math.sqrt(max(v_grid)) or 1.0
        t_grid = [k * scale for k in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
    report = FreedmanReport(K, runs, max_exc)
    for v in v_grid:
        tops = []
        for p in norm:
            ok = p.V <= v + 1e-12
            sel = p.X[ok]
            tops.append((float(sel.max()), float((-sel).max())) if sel.size else (0.0, 0.0))
        for sign, idx in (("+", 0), ("-", 1)):
            for t in t_grid:
                if t <= 0:
                    continue
                emp = sum(tp[idx] >= t for tp in tops) / runs if runs else 0.0
                b = freedman_bound(K, v, t)
                sigma = math.sqrt(b * (1.0 - b) / runs) if runs else 0.0
                report.rows.append({
                    "sign": sign, "v": v, "t": t, "empirical": emp, "bound": b,
                    "violation": emp > b + 3.0 * sigma,
                })
    return report


# -- random orderings --------------------------------------------------------------------


@dataclass
class TypicalityReport:
    pass_rate: float
    trials: int
    alpha: float
    eps: float
    h: int
    stride: int
    worst_deviation: float

    def to_dict(self) -> dict:
        return asdict(self)


def random_order_typicality(
    S: PartialSystem,
    alpha: float,
    eps: float,
    h: int = 2,
    trials: int = 200,
    seed: int = 0,
    stride: int = 1,
) -> TypicalityReport:
    """Fraction of uniformly random orderings of the triples of a complete
    ``S`` whose every prefix of length i <= alpha N (every ``stride``-th one,
    plus the last) leaves an (eps, h)-quasirandom graph."""
    if not S.admissible or 3 * S.m != math.comb(S.n, 2):
        raise ValueError("random_order_typicality needs a complete system")
    n = S.n
    N = S.m
    last = int(alpha * N)
    checkpoints = sorted(set(range(0, last + 1, max(1, stride))) | {last})
    rng = np_rng(seed, 15)
    triples = np.array(S.triples, dtype=np.int64)
    passed = 0
    worst_dev = 0.0
    for _ in range(trials):
        order = triples[rng.permutation(N)]
        A = ~np.eye(n, dtype=bool)
        ok = True
        done = 0
        for i in checkpoints:
            for a, b, c in order[done:i]:
                A[a, b] = A[b, a] = A[a, c] = A[c, a] = A[b, c] = A[c, b] = False
            done = i
            if h <= 2:
                lo, hi, _ = pair_ratio_extremes(A)
                if h == 1:
                    deg = A.sum(axis=1)
                    d = deg.sum() / (n * (n - 1))
                    lo = hi = 1.0
                    if d:
                        r = deg / (d * n)
                        lo, hi = float(r.min()), float(r.max())
                dev = max(1.0 - lo, hi - 1.0)
                good = lo >= 1.0 - eps - _TOL and hi <= 1.0 + eps + _TOL
            else:
                rep = check_quasirandom(_to_leave(A), eps, h)
                dev = abs(rep.worst_ratio - 1.0)
                good = rep.passed
            worst_dev = max(worst_dev, dev)
            if not good:
                ok = False
                break
        passed += ok
    return TypicalityReport(passed / trials if trials else 1.0, trials, alpha, eps, h, stride, worst_dev)


def _to_leave(A: np.ndarray) -> LeaveGraph:
    n = A.shape[0]
    adj = [sum(1 << int(j) for j in np.nonzero(A[i])[0]) for i in range(n)]
    return LeaveGraph(n, adj)
