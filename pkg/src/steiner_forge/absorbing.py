"""Absorbers, resilient templates, absorbing structures and the absorber-based
perfect-matching pipeline.

An absorber for (x, y, z) is seven triples

    e_x = {x, x1, x2}   e_y = {y, y1, y2}   e_z = {z, z1, z2}   e_* = {wx, wy, wz}
    e_1 = {x1, y2, wz}  e_2 = {y1, z2, wx}  e_3 = {z1, x2, wy}

with two perfect matchings: {e_x, e_y, e_z, e_*} on all 12 vertices
(covering) and {e_1, e_2, e_3} on the 9 external vertices (non-covering).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .design import PartialSystem, Triple
from .errors import CertificationFailed
from .matching import Matching, exact_cover_find, is_matching, is_perfect_matching
from .rng import py_rng


def _t(*vs: int) -> Triple:
    a, b, c = sorted(vs)
    return (a, b, c)


@dataclass(frozen=True)
class Absorber:
    root: tuple[int, int, int]
    x1: int
    x2: int
    y1: int
    y2: int
    z1: int
    z2: int
    wx: int
    wy: int
    wz: int

    @property
    def external_vertices(self) -> tuple[int, ...]:
        return (self.x1, self.x2, self.y1, self.y2, self.z1, self.z2, self.wx, self.wy, self.wz)

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.root + self.external_vertices

    def rooted_edges(self) -> list[Triple]:
        x, y, z = self.root
        return [_t(x, self.x1, self.x2), _t(y, self.y1, self.y2), _t(z, self.z1, self.z2)]

    def external_edges(self) -> list[Triple]:
        return [
            _t(self.wx, self.wy, self.wz),
            _t(self.x1, self.y2, self.wz),
            _t(self.y1, self.z2, self.wx),
            _t(self.z1, self.x2, self.wy),
        ]

    def triples(self) -> list[Triple]:
        return self.rooted_edges() + self.external_edges()

    def covering_matching(self) -> list[Triple]:
        return self.rooted_edges() + [_t(self.wx, self.wy, self.wz)]

    def non_covering_matching(self) -> list[Triple]:
        return self.external_edges()[1:]

    def to_dict(self) -> dict:
        return {"root": list(self.root), "external": list(self.external_vertices)}


def canonical_absorber() -> tuple[PartialSystem, Absorber]:
    """The 12-vertex system consisting of exactly one absorber on (0, 1, 2)."""
    A = Absorber((0, 1, 2), 3, 4, 5, 6, 7, 8, 9, 10, 11)
    return PartialSystem(12, A.triples()), A


def _partitions(triples: Sequence[Triple], vertices: Iterable[int]) -> bool:
    flat = [v for t in triples for v in t]
    return len(flat) == len(set(flat)) and set(flat) == set(vertices)


def verify_absorber(S: PartialSystem, A: Absorber) -> bool:
    vs = A.vertices
    if len(set(vs)) != 12 or any(not 0 <= v < S.n for v in vs):
        return False
    if not all(t in S for t in A.triples()):
        return False
    return _partitions(A.covering_matching(), vs) and _partitions(
        A.non_covering_matching(), A.external_vertices
    )


def find_absorbers(
    S: PartialSystem,
    x: int,
    y: int,
    z: int,
    limit: int,
    seed: int = 0,
    forbidden: Iterable[int] = (),
    third: list[list[int]] | None = None,
) -> list[Absorber]:
    """Greedily collect up to ``limit`` absorbers on (x, y, z) whose external
    vertex sets are pairwise disjoint and avoid ``forbidden``.

    Candidate rooted triples are scanned in a seeded random order.
    """
    if len({x, y, z}) != 3:
        raise ValueError("root vertices must be distinct")
    if limit <= 0:
        return []
    T = third if third is not None else S.third_table()
    rng = py_rng(seed, 6)
    blocked = set(forbidden) | {x, y, z}
    found: list[Absorber] = []

    def options(r: int) -> list[tuple[int, int]]:
        out = []
        for a in range(S.n):
            b = T[r][a]
            if b >= 0 and a not in blocked and b not in blocked:
                out.append((a, b))  # both orientations appear as a ranges over the line
        rng.shuffle(out)
        return out

    while len(found) < limit:
        hit = None
        ox, oy, oz = options(x), options(y), options(z)
        for x1, x2 in ox:
            for y1, y2 in oy:
                if y1 in (x1, x2) or y2 in (x1, x2):
                    continue
                wz = T[x1][y2]
                if wz < 0 or wz in blocked or wz in (x1, x2, y1, y2):
                    continue
                used6 = {x1, x2, y1, y2, wz}
                for z1, z2 in oz:
                    if z1 in used6 or z2 in used6:
                        continue
                    wx = T[y1][z2]
                    wy = T[z1][x2]
                    if wx < 0 or wy < 0 or wx in blocked or wy in blocked:
                        continue
                    if T[wx][wy] != wz:
                        continue
                    A = Absorber((x, y, z), x1, x2, y1, y2, z1, z2, wx, wy, wz)
                    if len(set(A.vertices)) == 12:
                        hit = A
                        break
                if hit:
                    break
            if hit:
                break
        if hit is None:
            break
        found.append(hit)
        blocked.update(hit.external_vertices)
    return found


# -- templates -------------------------------------------------------------------

CERTIFY_LIMIT_Z = 16


@dataclass
class Template:
    """A 3-graph on vertices 0..size-1 with flexible set ``Z``.

    Removing any half of Z leaves a hypergraph with a perfect matching; this
    is verified exhaustively over all C(|Z|, |Z|/2) removals.
    """

    size: int
    hyperedges: list[Triple]
    Z: list[int]
    kind: str = "paths"
    certified: bool = False
    checks: int = 0

    def matching_without(self, removed: Iterable[int]) -> list[Triple] | None:
        removed = set(removed)
        target = 0
        for v in range(self.size):
            if v not in removed:
                target |= 1 << v
        return exact_cover_find(self.size, self.hyperedges, target)

    def certify(self) -> bool:
        k = len(self.Z) // 2
        checks = 0
        for R in combinations(self.Z, k):
            checks += 1
            if self.matching_without(R) is None:
                self.certified, self.checks = False, checks
                return False
        self.certified, self.checks = True, checks
        return True

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "kind": self.kind,
            "Z": self.Z,
            "hyperedges": [list(t) for t in self.hyperedges],
            "certified": self.certified,
            "checks": self.checks,
        }


def build_template(
    z_size: int,
    multiplier: int = 4,
    seed: int = 0,
    y_factor: int = 2,
    kind: str = "paths",
    retries: int = 500,
) -> Template:
    """Build and exhaustively certify a resilient template.

    ``kind="paths"``: with k = z_size/2, parts Y (y_factor*k), Z (2k),
    X (|Y| + k) and W (|X|).  A random bipartite graph R joins each x in X to
    ``multiplier`` vertices of Y u Z; W is matched to X; every path w-x-u
    becomes a hyperedge {w, x, u}.  A perfect matching of R minus any k
    vertices of Z lifts to one of the template.  With the default
    y_factor=2 the part sizes are 3k, 2k, 2k, 3k (10k vertices).

    ``kind="star"`` (z_size=4 only): one hub a with hyperedges {a, z, z'} for
    all six pairs of Z, the smallest template with |Z| = 4.

    Raises:
        ValueError: z_size odd, negative, or above the certification limit.
        CertificationFailed: no certified instance within ``retries``.
    """
    if z_size < 0 or z_size % 2:
        raise ValueError("z_size must be a non-negative even integer")
    if z_size > CERTIFY_LIMIT_Z:
        raise ValueError(f"z_size {z_size} exceeds exhaustive certification limit {CERTIFY_LIMIT_Z}")
    if z_size == 0:
        T = Template(0, [], [], kind)
        T.certify()
        return T
    k = z_size // 2
    if kind == "star":
        if z_size != 4:
            raise ValueError("star templates exist only for z_size=4")
        Z = [1, 2, 3, 4]
        T = Template(5, [(0, a, b) for a, b in combinations(Z, 2)], Z, "star")
        if not T.certify():
            raise CertificationFailed("star template failed certification")
        return T
    if kind != "paths":
        raise ValueError(f"unknown template kind {kind!r}")
    ny = y_factor * k
    nx = ny + k
    W = list(range(nx))
    X = list(range(nx, 2 * nx))
    Y = list(range(2 * nx, 2 * nx + ny))
    Z = list(range(2 * nx + ny, 2 * nx + ny + 2 * k))
    size = 2 * nx + ny + 2 * k
    right = Y + Z
    rng = py_rng(seed, 7)
    for _ in range(retries):
        edges = set()
        for i, x in enumerate(X):
            for u in rng.sample(right, min(multiplier, len(right))):
                edges.add((W[i], x, u))
        T = Template(size, sorted(edges), Z, "paths")
        if T.certify():
            return T
    raise CertificationFailed(f"no certified template after {retries} attempts")


# -- absorbing structures -----------------------------------------------------------


@dataclass
class AbsorbingStructure:
    template: Template
    placement: list[int]  # template vertex -> host vertex
    absorbers: list[Absorber]

    @property
    def Z(self) -> list[int]:
        return [self.placement[z] for z in self.template.Z]

    def template_vertices(self) -> list[int]:
        return list(self.placement)

    def external_vertices(self) -> list[int]:
        return [v for A in self.absorbers for v in A.external_vertices]

    def vertices(self) -> set[int]:
        return set(self.placement) | set(self.external_vertices())

    def triples(self) -> list[Triple]:
        return [t for A in self.absorbers for t in A.triples()]

    def matching_without(self, removed: Iterable[int]) -> list[Triple] | None:
        """Perfect matching of the structure minus ``removed`` (host vertices of Z)."""
        inv = {h: t for t, h in enumerate(self.placement)}
        local = [inv[v] for v in removed]
        pm = self.template.matching_without(local)
        if pm is None:
            return None
        chosen = set(pm)
        out: list[Triple] = []
        for edge, A in zip(self.template.hyperedges, self.absorbers):
            out.extend(A.covering_matching() if edge in chosen else A.non_covering_matching())
        return out

    def to_dict(self) -> dict:
        return {
            "template": self.template.to_dict(),
            "placement": self.placement,
            "Z": self.Z,
            "absorbers": [A.to_dict() for A in self.absorbers],
        }


def assemble_structure(
    S: PartialSystem,
    template: Template,
    seed: int,
    attempts: int = 20,
) -> AbsorbingStructure | None:
    """Embed ``template`` at random and put externally disjoint absorbers on
    each of its hyperedges, greedily in hyperedge order."""
    if template.size > S.n:
        return None
    third = S.third_table()
    rng = py_rng(seed, 8)
    for attempt in range(attempts):
        placement = rng.sample(range(S.n), template.size)
        blocked = set(placement)
        absorbers: list[Absorber] = []
        for j, (a, b, c) in enumerate(template.hyperedges):
            got = find_absorbers(
                S, placement[a], placement[b], placement[c], 1,
                seed=seed + 7919 * attempt + j, forbidden=blocked, third=third,
            )
            if not got:
                break
            absorbers.append(got[0])
            blocked.update(got[0].external_vertices)
        else:
            return AbsorbingStructure(template, placement, absorbers)
    return None


# -- conditions -------------------------------------------------------------------------


def z_degrees(S: PartialSystem, Z: Sequence[int]) -> list[int]:
    """deg_Z(v) = #{pairs {x, y} in Z : {v, x, y} in S} for every vertex v."""
    deg = [0] * S.n
    for x, y in combinations(Z, 2):
        w = S.third(x, y)
        if w is not None:
            deg[w] += 1
    return deg


def induced_count(S: PartialSystem, W: Iterable[int]) -> int:
    W = set(W)
    return sum(1 for a, b, c in S.triples if a in W and b in W and c in W)


@dataclass
class ConditionsReport:
    degree_threshold: float
    low_degree: list[int]
    cond2_holds: bool
    density_min_size: float
    density_checked: int
    density_skipped: int
    density_worst_margin: float | None
    cond3_holds: bool
    probabilistic: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def density_margin(S: PartialSystem, W: Sequence[int], beta: float, delta: float) -> float | None:
    """Induced triples of W minus (1 - beta)|W|^3/(6n); None if |W| < 3 delta^5 n."""
    n = S.n
    if len(W) < 3 * delta**5 * n:
        return None
    return induced_count(S, W) - (1 - beta) * len(W) ** 3 / (6 * n)


def check_conditions(
    S: PartialSystem,
    Z: Sequence[int],
    delta: float,
    beta: float,
    structure_vertices: Iterable[int] = (),
    samples: int = 200,
    seed: int = 0,
) -> ConditionsReport:
    """Low-degree-into-Z condition (exact) and induced-density condition
    (sampled over random W, so a pass is only probabilistic)."""
    n = S.n
    H = set(structure_vertices) | set(Z)
    deg = z_degrees(S, Z)
    thr = 6 * delta**5 * n
    low = [v for v in range(n) if v not in H and deg[v] < thr]
    cond2 = len(low) <= delta * n
    rng = py_rng(seed, 9)
    min_size = 3 * delta**5 * n
    worst = None
    checked = skipped = 0
    sizes = [n] + [rng.randint(1, n) for _ in range(samples - 1)] if samples > 0 else []
    for size in sizes:
        W = rng.sample(range(n), size)
        margin = density_margin(S, W, beta, delta)
        if margin is None:
            skipped += 1
            continue
        checked += 1
        worst = margin if worst is None else min(worst, margin)
    cond3 = worst is None or worst >= 0
    return ConditionsReport(thr, low, cond2, min_size, checked, skipped, worst, cond3)


# -- the pipeline -----------------------------------------------------------------------


class PipelineFailure(RuntimeError):
    def __init__(self, stage: str, log: dict | None = None):
        self.stage = stage
        self.log = log or {}
        super().__init__(f"absorber pipeline failed at stage {stage!r}")


@dataclass
class PipelineParams:
    delta: float = 0.15
    beta: float = 0.5
    z_size: int | None = None
    reserve: int | None = None
    seed: int = 0
    template_kind: str = "auto"
    multiplier: int = 4
    node_budget: int = 200_000
    attempts: int = 4


@dataclass
class PipelineResult:
    matching: Matching
    structure: AbsorbingStructure | None
    log: dict = field(default_factory=dict)
    path: str = "absorber"

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "matching": [list(t) for t in self.matching.triples],
            "structure": self.structure.to_dict() if self.structure else None,
            "log": self.log,
        }


def _paths_structure_size(k: int, multiplier: int) -> int:
    return 10 * k + 9 * 3 * k * multiplier


def default_template(n: int, multiplier: int = 4) -> tuple[int, str]:
    """Desk choice of (z_size, kind) for order n.

    Starts from z = 2 floor(n/33); a path template is used only if its
    absorbing structure fits in half the vertices, else the 4-vertex-Z star
    (59 structure vertices) if it fits in 60% of them, else no template.
    """
    z = 2 * (n // 33)
    k = z // 2
    while k >= 1 and _paths_structure_size(k, multiplier) > n // 2:
        k -= 1
    if k >= 1 and 2 * k <= CERTIFY_LIMIT_Z:
        return 2 * k, "paths"
    if 5 + 6 * 9 <= 0.6 * n:
        return 4, "star"
    return 0, "paths"


def _reserve(requested: int, k: int) -> int | None:
    """Largest a <= min(requested, k/2) with a = -k (mod 3), so that half of Z
    splits into a flexible pairs plus triples inside Z."""
    a = min(requested, k // 2)
    while a >= 0 and (a + k) % 3:
        a -= 1
    return a if a >= 0 else None


def find_pm_via_absorbers(S: PartialSystem, params: PipelineParams | None = None) -> PipelineResult:
    """Build a perfect matching through an absorbing structure.

    Stages: (1) assemble the structure; (2) cover vertices with low degree
    into Z; (3) main step over the remaining non-structure vertices, leaving a
    reserve; (4) cover each reserve vertex with a pair of Z; (5) cover the rest
    of half of Z with triples inside Z; (6) resolve the template on the
    untouched half of Z and take covering/non-covering absorber matchings.
    Stages 2-4 run as one seeded search: choices are greedy in a random order
    and backtracking only happens when greedy gets stuck.

    Raises:
        PipelineFailure: tagged with the stage that ran out of choices.
    """
    p = params or PipelineParams()
    n = S.n
    log: dict = {}
    if n % 3:
        raise PipelineFailure("divisibility", log)
    z_size, kind = (p.z_size, "paths") if p.z_size is not None else default_template(n, p.multiplier)
    if p.template_kind != "auto":
        kind = p.template_kind
    elif p.z_size is not None and p.z_size == 4 and _paths_structure_size(2, p.multiplier) > n // 2:
        kind = "star"
    log.update(z_size=z_size, template=kind, delta=p.delta)
    k = z_size // 2
    reserve = _reserve(p.reserve if p.reserve is not None else max(3, 3 * math.floor(p.delta**5 * n)), k)
    if reserve is None:
        raise PipelineFailure("divisibility", log)
    log["reserve"] = reserve

    # stage 1
    if z_size:
        template = build_template(z_size, p.multiplier, p.seed, kind=kind)
        structure = assemble_structure(S, template, p.seed)
        if structure is None:
            raise PipelineFailure("absorbers", log)
    else:
        structure = None
    H = structure.vertices() if structure else set()
    Z = structure.Z if structure else []
    log["structure_vertices"] = len(H)
    outside = [v for v in range(n) if v not in H]
    out_set = set(outside)

    deg = z_degrees(S, Z)
    thr = 6 * p.delta**5 * n
    U = [v for v in outside if deg[v] < thr]
    log["low_degree"] = len(U)
    third = S.third_table()
    zpairs = {v: [] for v in outside}
    for a, b in combinations(Z, 2):
        w = third[a][b]
        if w in zpairs:
            zpairs[w].append((a, b))

    # stages 2-4
    rng = py_rng(p.seed, 10)
    inc: dict[int, list[Triple]] = {v: [] for v in outside}
    for t in S.triples:
        if all(v in out_set for v in t):
            for v in t:
                inc[v].append(t)
    branch_order = U + [v for v in outside if v not in set(U)]
    result = None
    nodes = 0
    for attempt in range(p.attempts):
        for v in outside:
            rng.shuffle(inc[v])
        matched: set[int] = set()
        zused: set[int] = set()
        chosen: list[tuple[str, Triple]] = []

        def rec(pos: int, reserved: int) -> bool:
            nonlocal nodes
            nodes += 1
            if nodes > p.node_budget * (attempt + 1):
                raise _OutOfBudget
            while pos < len(branch_order) and branch_order[pos] in matched:
                pos += 1
            if pos == len(branch_order):
                return reserved == reserve
            v = branch_order[pos]
            stage = "low-degree" if deg[v] < thr else "main"
            for t in inc[v]:
                a, b, c = t
                if a in matched or b in matched or c in matched:
                    continue
                matched.update(t)
                chosen.append((stage, t))
                if rec(pos + 1, reserved):
                    return True
                chosen.pop()
                matched.difference_update(t)
            if reserved < reserve:
                for a, b in zpairs[v]:
                    if a in zused or b in zused:
                        continue
                    t = _t(v, a, b)
                    matched.add(v)
                    zused.update((a, b))
                    chosen.append(("flexible", t))
                    if rec(pos + 1, reserved + 1):
                        return True
                    chosen.pop()
                    zused.difference_update((a, b))
                    matched.discard(v)
            return False

        try:
            if rec(0, 0):
                result = (list(chosen), set(zused))
                break
        except _OutOfBudget:
            continue
    log["search_nodes"] = nodes
    if result is None:
        raise PipelineFailure("main", log)
    chosen, zused = result

    # stage 5: triples inside the unused part of Z
    need = k - len(zused)
    if need:
        free_z = [z for z in Z if z not in zused]
        inside = [t for t in S.triples if all(v in free_z for v in t)]
        picked = _pick_inside(inside, need // 3)
        if picked is None:
            raise PipelineFailure("flexible", log)
        for t in picked:
            chosen.append(("z-internal", t))
            zused.update(t)

    # stage 6
    final = [t for _, t in chosen]
    if structure is not None:
        resolved = structure.matching_without(zused)
        if resolved is None:
            raise PipelineFailure("template", log)
        final.extend(resolved)
    counts: dict[str, int] = {}
    for stage, _ in chosen:
        counts[stage] = counts.get(stage, 0) + 1
    log["stage_triples"] = counts
    if not is_perfect_matching(S, final):
        raise AssertionError("pipeline produced an invalid matching")
    return PipelineResult(Matching(n, tuple(sorted(final))), structure, log)


class _OutOfBudget(Exception):
    pass


def _pick_inside(triples: list[Triple], count: int) -> list[Triple] | None:
    if count == 0:
        return []
    for combo in combinations(triples, count):
        if is_matching(triples, combo):
            return list(combo)
    return None
