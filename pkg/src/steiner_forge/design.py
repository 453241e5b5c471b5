"""Partial Steiner triple systems, their leave graphs, and file formats.

Vertices are ``0..n-1``.  A triple is stored as a sorted 3-tuple.  A
:class:`PartialSystem` keeps its triples in insertion order (systems are
ordered by default) together with a pair index mapping every covered pair to
the position of the triple that covers it.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

from .errors import PairConflict, ParseError

Triple = tuple[int, int, int]
Pair = tuple[int, int]


def normalize_triple(t: Iterable[int], n: int | None = None) -> Triple:
    a, b, c = sorted(int(v) for v in t)
    if a == b or b == c:
        raise ValueError(f"triple {t!r} has repeated vertices")
    if a < 0 or (n is not None and c >= n):
        raise ValueError(f"triple {t!r} out of range for n={n}")
    return (a, b, c)


def pairs_of(t: Triple) -> tuple[Pair, Pair, Pair]:
    a, b, c = t
    return ((a, b), (a, c), (b, c))


def is_admissible(n: int) -> bool:
    """True when an STS of order ``n`` exists (n = 1, 3 mod 6)."""
    return n % 6 in (1, 3)


def iter_bits(x: int) -> Iterator[int]:
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


class PartialSystem:
    """An ordered partial Steiner triple system on ``n`` vertices."""

    def __init__(self, n: int, triples: Iterable[Iterable[int]] = ()):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.triples: list[Triple] = []
        self.pair_index: dict[Pair, int] = {}
        for t in triples:
            self.add(t)

    @property
    def m(self) -> int:
        return len(self.triples)

    @property
    def admissible(self) -> bool:
        return is_admissible(self.n)

    @property
    def capacity(self) -> int | None:
        """N = C(n,2)/3 for admissible orders, else None."""
        if not self.admissible:
            return None
        return self.n * (self.n - 1) // 6

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __contains__(self, t) -> bool:
        try:
            t = normalize_triple(t)
        except ValueError:
            return False
        idx = self.pair_index.get((t[0], t[1]))
        return idx is not None and self.triples[idx] == t

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialSystem):
            return NotImplemented
        return self.n == other.n and self.triples == other.triples

    def __repr__(self) -> str:
        return f"PartialSystem(n={self.n}, m={self.m})"

    def copy(self) -> "PartialSystem":
        return copy.deepcopy(self)

    def covering(self, u: int, v: int) -> int | None:
        """Index of the triple covering pair {u, v}, or None."""
        if u > v:
            u, v = v, u
        return self.pair_index.get((u, v))

    def third(self, u: int, v: int) -> int | None:
        """The third vertex of the triple through {u, v}, or None."""
        idx = self.covering(u, v)
        if idx is None:
            return None
        a, b, c = self.triples[idx]
        return a + b + c - u - v

    def add(self, t: Iterable[int]) -> "PartialSystem":
        t = normalize_triple(t, self.n)
        for p in pairs_of(t):
            idx = self.pair_index.get(p)
            if idx is not None:
                raise PairConflict(p, idx)
        idx = len(self.triples)
        self.triples.append(t)
        for p in pairs_of(t):
            self.pair_index[p] = idx
        return self

    def remove(self, t: Iterable[int]) -> "PartialSystem":
        t = normalize_triple(t, self.n)
        idx = self.pair_index.get((t[0], t[1]))
        if idx is None or self.triples[idx] != t:
            raise KeyError(f"triple {t} not in system")
        del self.triples[idx]
        for p in pairs_of(t):
            del self.pair_index[p]
        # later triples shift down by one
        for j in range(idx, len(self.triples)):
            for p in pairs_of(self.triples[j]):
                self.pair_index[p] = j
        return self

    def rebuilt_index(self) -> dict[Pair, int]:
        index = {}
        for i, t in enumerate(self.triples):
            for p in pairs_of(t):
                index[p] = i
        return index

    def prefix(self, i: int) -> "PartialSystem":
        s = PartialSystem(self.n)
        s.triples = list(self.triples[:i])
        s.pair_index = s.rebuilt_index()
        return s

    def unordered(self) -> frozenset[Triple]:
        return frozenset(self.triples)

    def third_table(self) -> list[list[int]]:
        """Dense n x n table of third points, -1 for uncovered pairs."""
        table = [[-1] * self.n for _ in range(self.n)]
        for a, b, c in self.triples:
            table[a][b] = table[b][a] = c
            table[a][c] = table[c][a] = b
            table[b][c] = table[c][b] = a
        return table

    def leave_graph(self) -> "LeaveGraph":
        return leave_graph(self)


class LeaveGraph:
    """Graph of uncovered pairs.  ``adj[v]`` is a bitmask of neighbours."""

    def __init__(self, n: int, adj: Sequence[int]):
        self.n = n
        self.adj = list(adj)
        self.edge_count = sum(a.bit_count() for a in self.adj) // 2

    @classmethod
    def complete(cls, n: int) -> "LeaveGraph":
        full = (1 << n) - 1
        return cls(n, [full ^ (1 << v) for v in range(n)])

    @classmethod
    def empty(cls, n: int) -> "LeaveGraph":
        return cls(n, [0] * n)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Pair]) -> "LeaveGraph":
        adj = [0] * n
        for u, v in edges:
            if u == v:
                raise ValueError("self-loop")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls(n, adj)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def neighbors(self, v: int) -> list[int]:
        return list(iter_bits(self.adj[v]))

    def degree(self, v: int) -> int:
        return self.adj[v].bit_count()

    def degrees(self) -> list[int]:
        return [a.bit_count() for a in self.adj]

    def edges(self) -> list[Pair]:
        return [(u, v) for u in range(self.n) for v in iter_bits(self.adj[u] >> (u + 1) << (u + 1))]

    def triangle_count(self) -> int:
        total = 0
        for u, v in self.edges():
            total += (self.adj[u] & self.adj[v]).bit_count()
        return total // 3

    def to_numpy(self):
        import numpy as np

        a = np.zeros((self.n, self.n), dtype=bool)
        for u in range(self.n):
            for v in iter_bits(self.adj[u]):
                a[u, v] = True
        return a


def leave_graph(S: PartialSystem) -> LeaveGraph:
    n = S.n
    full = (1 << n) - 1
    adj = [full ^ (1 << v) for v in range(n)]
    for a, b, c in S.triples:
        adj[a] &= ~((1 << b) | (1 << c))
        adj[b] &= ~((1 << a) | (1 << c))
        adj[c] &= ~((1 << a) | (1 << b))
    return LeaveGraph(n, adj)


class Status(enum.Enum):
    PARTIAL = "partial"
    COMPLETE = "complete"
    INVALID = "invalid"


@dataclass(frozen=True)
class Validation:
    status: Status
    reason: str | None = None
    pair: Pair | None = None
    admissible: bool = True

    @property
    def complete(self) -> bool:
        return self.status is Status.COMPLETE


def validate(S, n: int | None = None) -> Validation:
    """Classify a system (or a raw triple list with ``n``) by brute-force pair scan.

    A raw list may contain conflicts; the first doubly covered pair is reported.
    Orders outside 1, 3 (mod 6) can only ever be partial, which is flagged
    through ``admissible``.
    """
    if isinstance(S, PartialSystem):
        n, triples = S.n, S.triples
    else:
        if n is None:
            raise TypeError("n is required for a raw triple list")
        triples = list(S)
    ok_order = is_admissible(n)
    seen: dict[Pair, int] = {}
    for i, t in enumerate(triples):
        if len(set(t)) != 3 or len(t) != 3:
            return Validation(Status.INVALID, f"triple #{i} {tuple(t)} is degenerate", None, ok_order)
        if min(t) < 0 or max(t) >= n:
            return Validation(Status.INVALID, f"triple #{i} {tuple(t)} out of range", None, ok_order)
        for p in combinations(sorted(t), 2):
            if p in seen:
                return Validation(
                    Status.INVALID, f"pair {p} covered by triples #{seen[p]} and #{i}", p, ok_order
                )
            seen[p] = i
    if ok_order and len(seen) == n * (n - 1) // 2:
        return Validation(Status.COMPLETE, admissible=True)
    return Validation(Status.PARTIAL, admissible=ok_order)


# -- file formats -----------------------------------------------------------


def encode(S: PartialSystem) -> str:
    lines = [f"STS 1 n={S.n} m={S.m}"]
    lines.extend(f"{a} {b} {c}" for a, b, c in S.triples)
    return "\n".join(lines) + "\n"


def parse(text: str) -> PartialSystem:
    """Parse the v1 text format.  Lines starting with ``#`` are ignored."""
    rows = [
        (i, line.strip())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise ParseError(1, "empty input")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "STS" or parts[1] != "1":
        raise ParseError(lineno, f"bad header {header!r}")
    try:
        n = int(parts[2].removeprefix("n="))
        m = int(parts[3].removeprefix("m="))
        if not parts[2].startswith("n=") or not parts[3].startswith("m="):
            raise ValueError
    except ValueError:
        raise ParseError(lineno, f"bad header {header!r}") from None
    body = rows[1:]
    if len(body) != m:
        raise ParseError(lineno, f"header says m={m} but {len(body)} triples follow")
    S = PartialSystem(n)
    for lineno, line in body:
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(lineno, "expected three vertices")
        try:
            t = tuple(int(f) for f in fields)
        except ValueError:
            raise ParseError(lineno, "non-integer vertex") from None
        if list(t) != sorted(t):
            raise ParseError(lineno, "vertices must be sorted ascending")
        try:
            S.add(t)
        except PairConflict as exc:
            raise ParseError(lineno, str(exc)) from None
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return S


def to_json(S: PartialSystem) -> str:
    return json.dumps({"n": S.n, "triples": [list(t) for t in S.triples]})


def from_json(text: str) -> PartialSystem:
    try:
        obj = json.loads(text)
        n = int(obj["n"])
        triples = obj["triples"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(1, f"bad JSON system: {exc}") from None
    S = PartialSystem(n)
    for i, t in enumerate(triples):
        try:
            S.add(t)
        except ValueError as exc:
            raise ParseError(i + 1, str(exc)) from None
    return S


def load(text: str) -> PartialSystem:
    """Parse either format, sniffing JSON by its leading brace."""
    if text.lstrip().startswith("{"):
        return from_json(text)
    return parse(text)


# -- small catalog ------------------------------------------------------------


def fano() -> PartialSystem:
    """The Fano plane: lines {i, i+1, i+3} mod 7."""
    return PartialSystem(7, [((i) % 7, (i + 1) % 7, (i + 3) % 7) for i in range(7)])


def affine_plane_3() -> PartialSystem:
    """The unique STS(9): lines of AG(2,3) on points 3*x + y."""
    lines = set()
    pts = [(x, y) for x in range(3) for y in range(3)]
    for p, q in combinations(pts, 2):
        r = ((-p[0] - q[0]) % 3, (-p[1] - q[1]) % 3)
        lines.add(tuple(sorted(3 * x + y for x, y in (p, q, r))))
    return PartialSystem(9, sorted(lines))


def relabel(S: PartialSystem, perm: Sequence[int]) -> PartialSystem:
    return PartialSystem(S.n, [tuple(perm[v] for v in t) for t in S.triples])
