"""Latin squares as triangle decompositions of K_{n,n,n}.

Vertices of K_{n,n,n}: rows 0..n-1, columns n..2n-1, symbols 2n..3n-1.  A
filled cell (r, c, s) is the triangle {r, n + c, 2n + s}.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .design import LeaveGraph
from .errors import ParseError, TooLarge
from .quasirandom import QuasirandomReport, check_common_neighbourhoods
from .removal import TriangleRemoval
from .rng import py_rng

TRANSVERSAL_LIMIT_N = 12


class LatinSquare:
    def __init__(self, cells: Sequence[Sequence[int]]):
        self.cells = [list(row) for row in cells]
        self.n = len(self.cells)

    @classmethod
    def cyclic(cls, n: int) -> "LatinSquare":
        return cls([[(i + j) % n for j in range(n)] for i in range(n)])

    @classmethod
    def from_triples(cls, n: int, triples: Iterable[tuple[int, int, int]]) -> "LatinSquare":
        cells = [[-1] * n for _ in range(n)]
        for r, c, s in triples:
            cells[r][c] = s
        return cls(cells)

    def triples(self) -> list[tuple[int, int, int]]:
        return [(r, c, s) for r, row in enumerate(self.cells) for c, s in enumerate(row)]

    def isotope(self, rows: Sequence[int], cols: Sequence[int], syms: Sequence[int]) -> "LatinSquare":
        """Apply row, column and symbol permutations."""
        out = [[0] * self.n for _ in range(self.n)]
        for r, c, s in self.triples():
            out[rows[r]][cols[c]] = syms[s]
        return LatinSquare(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, LatinSquare) and self.cells == other.cells

    def __repr__(self) -> str:
        return f"LatinSquare(n={self.n})"


def validate_latin(L: LatinSquare | Sequence[Sequence[int]]) -> bool:
    cells = L.cells if isinstance(L, LatinSquare) else [list(r) for r in L]
    n = len(cells)
    want = set(range(n))
    if any(len(row) != n for row in cells):
        return False
    for row in cells:
        if set(row) != want:
            return False
    for c in range(n):
        if {cells[r][c] for r in range(n)} != want:
            return False
    return True


def count_transversals(L: LatinSquare) -> int:
    """Exact transversal count: rows in order, column and symbol bitmasks."""
    n = L.n
    if n > TRANSVERSAL_LIMIT_N:
        raise TooLarge(f"transversal count refused for n={n} > {TRANSVERSAL_LIMIT_N}")
    cells = L.cells

    def rec(r: int, cols: int, syms: int) -> int:
        if r == n:
            return 1
        total = 0
        row = cells[r]
        for c in range(n):
            if cols >> c & 1:
                continue
            s = row[c]
            if syms >> s & 1:
                continue
            total += rec(r + 1, cols | (1 << c), syms | (1 << s))
        return total

    return rec(0, 0, 0)


def is_transversal(L: LatinSquare, cells: Sequence[tuple[int, int]]) -> bool:
    n = L.n
    if len(cells) != n:
        return False
    rows = {r for r, _ in cells}
    cols = {c for _, c in cells}
    syms = {L.cells[r][c] for r, c in cells}
    return len(rows) == len(cols) == len(syms) == n


# -- generation -------------------------------------------------------------------------


class LatinFailed(RuntimeError):
    def __init__(self, best: int, moves: int):
        self.best = best
        self.moves = moves
        super().__init__(f"no Latin square after {moves} moves (best {best} cells)")


def tripartite_adjacency(n: int, triples: Iterable[tuple[int, int, int]] = ()) -> list[int]:
    """Adjacency bitmasks of K_{n,n,n} minus the edges of the given cells."""
    R = (1 << n) - 1
    C = R << n
    Sy = R << (2 * n)
    adj = [C | Sy] * n + [R | Sy] * n + [R | C] * n
    for r, c, s in triples:
        a, b, d = r, n + c, 2 * n + s
        adj[a] &= ~((1 << b) | (1 << d))
        adj[b] &= ~((1 << a) | (1 << d))
        adj[d] &= ~((1 << a) | (1 << b))
    return adj


def latin_leave_graph(n: int, triples: Iterable[tuple[int, int, int]]) -> LeaveGraph:
    return LeaveGraph(3 * n, tripartite_adjacency(n, triples))


def _trp_prefix(n: int, steps: int, seed: int) -> list[tuple[int, int, int]]:
    state = TriangleRemoval(3 * n, tripartite_adjacency(n))
    rng = py_rng(seed, 11)
    cells = []
    for _ in range(steps):
        t = state.sample(rng)
        if t is None:
            break
        state.remove(t)
        r, c, s = t
        cells.append((r, c - n, s - 2 * n))
    return cells


def complete_latin(n: int, cells: Iterable[tuple[int, int, int]], seed: int, max_moves: int) -> LatinSquare:
    """Hill-climb a partial Latin square to a full one.

    Works on the leave graph inside K_{n,n,n}.  A move takes a uniformly random
    uncovered edge {x, y}, orients it at random, picks z uniformly among the
    uncovered partners of x in the third part, and adds the cell {x, y, z};
    a cell already covering {y, z} is evicted first.  The filled-cell count
    never decreases.
    """
    rng = py_rng(seed, 12)
    rand = rng.random
    V = 3 * n
    third = [[-1] * V for _ in range(V)]
    live = [[[] for _ in range(3)] for _ in range(V)]  # live[x][part]
    lpos = [[-1] * V for _ in range(V)]
    unc: list[tuple[int, int]] = []
    upos: dict[tuple[int, int], int] = {}

    def cover(u: int, v: int, w: int) -> None:
        third[u][v] = third[v][u] = w
        for a, b in ((u, v), (v, u)):
            lst = live[a][b // n]
            i = lpos[a][b]
            last = lst.pop()
            if last != b:
                lst[i] = last
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
            lst = live[a][b // n]
            lpos[a][b] = len(lst)
            lst.append(b)
        key = (u, v) if u < v else (v, u)
        upos[key] = len(unc)
        unc.append(key)

    def add(a: int, b: int, c: int) -> None:
        cover(a, b, c)
        cover(a, c, b)
        cover(b, c, a)

    for u in range(V):
        for v in range(u + 1, V):
            if u // n != v // n:
                uncover(u, v)
    for r, c, s in cells:
        add(r, n + c, 2 * n + s)

    best = n * n - len(unc) // 3
    moves = 0
    while unc:
        if moves >= max_moves:
            raise LatinFailed(best, moves)
        moves += 1
        x, y = unc[int(rand() * len(unc))]
        if rand() < 0.5:
            x, y = y, x
        partners = live[x][3 - x // n - y // n]
        z = partners[int(rand() * len(partners))]
        w = third[y][z]
        if w >= 0:
            uncover(y, z)
            uncover(y, w)
            uncover(z, w)
        add(x, y, z)
        best = max(best, n * n - len(unc) // 3)
    sym = [[-1] * n for _ in range(n)]
    for r in range(n):
        for c in range(n):
            sym[r][c] = third[r][n + c] - 2 * n
    return LatinSquare(sym)


def generate_latin(n: int, seed: int, prefix_fraction: float = 0.5, max_moves: int | None = None) -> LatinSquare:
    """A random Latin square: triangle-removal prefix on K_{n,n,n} of about
    ``prefix_fraction * n^2`` cells, finished by hill-climbing.

    The result is not uniformly distributed; no bias correction is attempted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_moves is None:
        max_moves = 2000 + 50 * n**3
    cells = _trp_prefix(n, int(prefix_fraction * n * n), seed)
    return complete_latin(n, cells, seed, max_moves)


# -- tripartite quasirandomness ----------------------------------------------------------


def check_tripartite_quasirandom(
    G: LeaveGraph,
    eps: float,
    h: int = 2,
    mode: str = "exhaustive",
    samples: int = 1000,
    seed: int = 0,
) -> QuasirandomReport:
    """For each part V_i, every A outside V_i with |A| <= h must have
    (1 +- eps)(m/n^2)^|A| n common neighbours in V_i.

    ``G`` is a graph on 3n vertices laid out as rows, columns, symbols.  The
    density m/n^2 is averaged over the three pairs of parts.
    """
    if G.n % 3:
        raise ValueError("tripartite graph needs 3n vertices")
    n = G.n // 3
    part_mask = [((1 << n) - 1) << (i * n) for i in range(3)]
    between = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        between.append(sum((G.adj[v] & part_mask[j]).bit_count() for v in range(i * n, (i + 1) * n)))
    d = sum(between) / (3 * n * n)
    reports = []
    for i in range(3):
        cands = [v for v in range(G.n) if not part_mask[i] >> v & 1]
        worst = check_common_neighbourhoods(G.adj, part_mask[i], cands, n, d, eps, h, mode, samples, seed + i)
        reports.append(
            QuasirandomReport(worst.passed, eps, h, d, worst.subset, worst.ratio, mode,
                              samples if mode == "sampled" else None, worst.count, part=i)
        )
    worst = max(reports, key=lambda r: abs(r.worst_ratio - 1.0))
    return QuasirandomReport(
        all(r.passed for r in reports), eps, h, d, worst.worst_set, worst.worst_ratio, mode,
        samples if mode == "sampled" else None, sum(r.sets_checked for r in reports), parts=reports,
    )


# -- text format ---------------------------------------------------------------------------


def encode_latin(L: LatinSquare) -> str:
    lines = [f"LSQ 1 n={L.n}"]
    lines.extend(" ".join(str(s) for s in row) for row in L.cells)
    return "\n".join(lines) + "\n"


def parse_latin(text: str) -> LatinSquare:
    rows = [
        (i, line.strip())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise ParseError(1, "empty input")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 3 or parts[:2] != ["LSQ", "1"] or not parts[2].startswith("n="):
        raise ParseError(lineno, f"bad header {header!r}")
    try:
        n = int(parts[2][2:])
    except ValueError:
        raise ParseError(lineno, "bad order") from None
    if len(rows) - 1 != n:
        raise ParseError(lineno, f"expected {n} rows, found {len(rows) - 1}")
    cells = []
    for lineno, line in rows[1:]:
        try:
            row = [int(f) for f in line.split()]
        except ValueError:
            raise ParseError(lineno, "non-integer symbol") from None
        if len(row) != n or any(not 0 <= s < n for s in row):
            raise ParseError(lineno, f"row must hold {n} symbols in [0, {n})")
        cells.append(row)
    return LatinSquare(cells)
