"""Fiber and FSO backhaul planning.

The long-term design graph connects every SBS to its nearest already
connected node, in random order, starting from the MBS ring. Incremental
deployments then pick SBSs one at a time (``fbcp``) and lay fiber along
their design-graph shortest path to the closest MBS, paying for trenches
only where no trench exists yet.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scenario import Scenario

Edge = tuple[int, int]


class PlanningError(ValueError):
    pass


def edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class CostParams:
    beta_dig: float = 2.4  # per meter of trench
    beta_fiber: float = 0.006  # per meter of fiber
    beta_trx: float = 1.0  # per transceiver
    beta_fso: float = 50.0  # per FSO terminal

    def __post_init__(self):
        for name in ("beta_dig", "beta_fiber", "beta_trx", "beta_fso"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class BackhaulGraph:
    """Fiber plant and backhaul partition of the base stations.

    ``trench`` holds every dug edge (MBS ring included). ``fiber`` maps each
    fiber-backhauled SBS to its dedicated fiber path towards an MBS, and
    ``fso`` maps each FSO-backhauled SBS to ``(target, length)``.
    """

    xy: np.ndarray
    mbs: tuple[int, ...]
    sbs: tuple[int, ...]
    ring: tuple[int, ...] = ()
    trench: dict[Edge, float] = field(default_factory=dict)
    fiber: dict[int, tuple[tuple[int, ...], float]] = field(default_factory=dict)
    fso: dict[int, tuple[int, float]] = field(default_factory=dict)

    @property
    def ring_edges(self) -> list[Edge]:
        r = self.ring
        if len(r) < 2:
            return []
        if len(r) == 2:
            return [edge(r[0], r[1])]
        return [edge(r[i], r[(i + 1) % len(r)]) for i in range(len(r))]

    @property
    def v_fib(self) -> set[int]:
        return set(self.fiber)

    @property
    def v_fso(self) -> set[int]:
        return set(self.fso)

    @property
    def v_iab(self) -> set[int]:
        return set(self.sbs) - self.fiber.keys() - self.fso.keys()

    def dist(self, u: int, v: int) -> float:
        return math.hypot(*(self.xy[u] - self.xy[v]))

    def copy(self) -> BackhaulGraph:
        return BackhaulGraph(
            self.xy, self.mbs, self.sbs, self.ring, dict(self.trench), dict(self.fiber), dict(self.fso)
        )

    def validate(self) -> None:
        fib, fso, iab = self.v_fib, self.v_fso, self.v_iab
        if (fib & fso) or not (fib | fso) <= set(self.sbs):
            raise PlanningError("fiber/FSO partitions overlap or contain non-SBS nodes")
        if iab | fib | fso != set(self.sbs):
            raise PlanningError("SBS partition does not cover all SBSs")
        for e in self.ring_edges:
            if e not in self.trench:
                raise PlanningError(f"ring edge {e} missing from trench set")
        mbs = set(self.mbs)
        for v, (path, _) in self.fiber.items():
            if path[0] != v or path[-1] not in mbs:
                raise PlanningError(f"fiber path of {v} does not end at an MBS")
            for a, b in zip(path, path[1:]):
                if edge(a, b) not in self.trench:
                    raise PlanningError(f"fiber path of {v} uses undug edge {(a, b)}")
        for v, (target, _) in self.fso.items():
            if target not in mbs and target not in fib:
                raise PlanningError(f"FSO link of {v} does not end at a fiber-connected node")


def ring_order(xy: np.ndarray, mbs: Sequence[int]) -> tuple[int, ...]:
    """MBS ids sorted by angle about their centroid (ties: distance, then id)."""
    ids = list(mbs)
    if not ids:
        return ()
    pts = xy[ids]
    c = pts.mean(axis=0)
    key = []
    for i, (x, y) in zip(ids, pts):
        key.append((math.atan2(y - c[1], x - c[0]), math.hypot(x - c[0], y - c[1]), i))
    return tuple(k[2] for k in sorted(key))


def build_mbs_ring(xy: np.ndarray, mbs: Sequence[int], sbs: Sequence[int] = ()) -> BackhaulGraph:
    """Ring the MBSs together by fiber; all SBSs start IAB-backhauled.

    One MBS gives no edges and two give a single edge. Collinear MBSs still
    get a (degenerate) ring whose perimeter is twice their span.
    """
    xy = np.asarray(xy, dtype=float)
    g = BackhaulGraph(xy, tuple(mbs), tuple(sbs), ring_order(xy, mbs))
    for u, v in g.ring_edges:
        g.trench[(u, v)] = g.dist(u, v)
    return g


def graph_from_scenario(s: Scenario) -> BackhaulGraph:
    return build_mbs_ring(s.xy, s.mbs, s.sbs)


class DesignGraph:
    """Connected long-term fiber layout, with cached shortest paths to the MBSs."""

    def __init__(self, xy: np.ndarray, donors: Iterable[int], edges: Mapping[Edge, float]):
        self.xy = xy
        self.donors = tuple(donors)
        self.edges = dict(edges)
        self.adj = adjacency(self.edges)
        self._dist = donor_distances(self.adj, self.donors)
        self._paths: dict[int, tuple[tuple[int, ...], float]] = {}

    def path_to_donor(self, v: int) -> tuple[tuple[int, ...], float]:
        if v not in self._paths:
            self._paths[v] = _reconstruct(self.adj, self._dist, set(self.donors), v)
        return self._paths[v]


def plan_connected_topology(graph: BackhaulGraph, rng: np.random.Generator) -> DesignGraph:
    """Connect every isolated node to its closest already connected node, in random order.

    MBSs count as connected from the start (they anchor the ring even when
    there are fewer than two of them).
    """
    if not graph.mbs and not graph.sbs:
        raise PlanningError("empty vertex set")
    if not graph.mbs:
        raise PlanningError("no MBS to anchor the design graph")
    edges = {e: graph.trench[e] for e in graph.ring_edges}
    degree: dict[int, int] = {}
    for u, v in edges:
        degree[u] = degree.get(u, 0) + 1
        degree[v] = degree.get(v, 0) + 1
    isolated = [v for v in graph.sbs if degree.get(v, 0) == 0]
    connected = list(graph.mbs) + [v for v in graph.sbs if degree.get(v, 0) > 0]
    order = rng.permutation(np.asarray(sorted(isolated), dtype=np.int64))
    for v in order:
        v = int(v)
        cand = np.asarray(connected)
        d = np.hypot(*(graph.xy[cand] - graph.xy[v]).T)
        best = np.flatnonzero(d == d.min())
        u = int(cand[best].min())
        edges[edge(v, u)] = graph.dist(v, u)
        connected.append(v)
    return DesignGraph(graph.xy, graph.mbs, edges)


def adjacency(edges: Mapping[Edge, float]) -> dict[int, list[tuple[int, float]]]:
    adj: dict[int, list[tuple[int, float]]] = {}
    for (u, v), w in edges.items():
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    for lst in adj.values():
        lst.sort()
    return adj


def donor_distances(adj: Mapping[int, list[tuple[int, float]]], donors: Iterable[int]) -> dict[int, float]:
    """Multi-source Dijkstra: distance from each vertex to its nearest donor."""
    dist: dict[int, float] = {}
    heap = [(0.0, d) for d in donors]
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if u in dist:
            continue
        dist[u] = d
        for v, w in adj.get(u, ()):
            if v not in dist:
                heapq.heappush(heap, (d + w, v))
    return dist


def _tight(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a))


def _reconstruct(adj, dist, donors, v) -> tuple[tuple[int, ...], float]:
    if v not in dist:
        raise PlanningError(f"vertex {v} cannot reach any MBS")
    path = [v]
    length = 0.0
    seen = {v}
    x = v
    while x not in donors:
        # neighbors are id-sorted, so the first tight one gives the lexicographically smallest path
        for y, w in adj[x]:
            if y in dist and y not in seen and _tight(dist[x], w + dist[y]):
                break
        else:
            raise PlanningError(f"no shortest-path successor at {x}")
        path.append(y)
        length += w
        seen.add(y)
        x = y
    return tuple(path), length


def shortest_path_to_donor(
    edges: Mapping[Edge, float] | DesignGraph, donors: Iterable[int], v: int
) -> tuple[tuple[int, ...], float]:
    """Minimum-length path from ``v`` to any donor, ties broken by the smallest id sequence."""
    if isinstance(edges, DesignGraph):
        return edges.path_to_donor(v)
    adj = adjacency(edges)
    donors = set(donors)
    return _reconstruct(adj, donor_distances(adj, donors), donors, v)


def path_edges(path: Sequence[int]) -> list[Edge]:
    return [edge(a, b) for a, b in zip(path, path[1:])]


def step_cost(graph: BackhaulGraph, path: Sequence[int], length: float, params: CostParams):
    """New trench edges needed for ``path`` and the cost of lighting it."""
    new = []
    for a, b in zip(path, path[1:]):
        e = edge(a, b)
        if e not in graph.trench and e not in new:
            new.append(e)
    dig = math.fsum(graph.dist(*e) for e in new)
    return new, params.beta_dig * dig + params.beta_fiber * length + 2.0 * params.beta_trx


def inverse_separation(xy: np.ndarray, v: int, refs: Iterable[int]) -> float:
    """Sum of 1/distance from ``v`` to each reference; a coincident reference gives inf."""
    refs = list(refs)
    if not refs:
        return 0.0
    d = np.hypot(*(np.asarray(xy)[refs] - np.asarray(xy)[v]).T)
    if np.any(d == 0):
        return math.inf
    return float(np.sum(1.0 / d))


@dataclass(frozen=True)
class PlanStep:
    chosen: int
    new_edges: tuple[Edge, ...]
    path: tuple[int, ...]
    path_len: float
    step_cost: float
    sep_raw: float
    weight: float


def connect_fiber(graph: BackhaulGraph, v: int, path: Sequence[int], length: float, new_edges: Iterable[Edge]) -> None:
    for e in new_edges:
        graph.trench[e] = graph.dist(*e)
    graph.fiber[v] = (tuple(path), length)


def minmax(values: np.ndarray) -> np.ndarray:
    """Min-max normalize; equal values map to 0. Infinite entries map to inf."""
    finite = np.isfinite(values)
    out = np.full(values.shape, np.inf)
    if finite.any():
        lo, hi = values[finite].min(), values[finite].max()
        out[finite] = (values[finite] - lo) / (hi - lo) if hi > lo else 0.0
    return out


def fbcp(
    graph: BackhaulGraph, design: DesignGraph, n: int, alpha: float, params: CostParams = CostParams()
) -> tuple[BackhaulGraph, list[PlanStep]]:
    """Greedily fiber-connect ``n`` IAB SBSs, trading connection cost against crowding.

    ``alpha = 0`` picks the cheapest connection each round; ``alpha = 1`` picks
    the SBS farthest (in summed inverse distance) from the fibered nodes.
    """
    if not 0.0 <= alpha <= 1.0:
        raise PlanningError(f"alpha must lie in [0, 1], got {alpha}")
    cand = sorted(graph.v_iab)
    if n < 0 or n > len(cand):
        raise PlanningError(f"cannot fiber-connect {n} SBSs, only {len(cand)} are IAB-backhauled")
    g = graph.copy()
    if n == 0:
        return g, []

    paths = [design.path_to_donor(v) for v in cand]
    plen = np.array([p[1] for p in paths])
    eidx: dict[Edge, int] = {}
    rows, cols = [], []
    for i, (p, _) in enumerate(paths):
        for e in set(path_edges(p)):
            rows.append(i)
            cols.append(eidx.setdefault(e, len(eidx)))
    inc = np.zeros((len(cand), max(len(eidx), 1)))
    inc[rows, cols] = 1.0
    elen = np.zeros(inc.shape[1])
    for e, j in eidx.items():
        elen[j] = g.dist(*e)
    undug = np.array([e not in g.trench for e in sorted(eidx, key=eidx.get)] or [False], dtype=float)

    xy = g.xy
    cxy = xy[cand]
    refs = list(g.mbs) + sorted(g.fiber)
    sep = np.zeros(len(cand))
    if refs:
        d = np.hypot(*(cxy[:, None, :] - xy[refs][None, :, :]).transpose(2, 0, 1))
        with np.errstate(divide="ignore"):
            sep = np.where((d == 0).any(axis=1), np.inf, (1.0 / np.where(d == 0, 1.0, d)).sum(axis=1))

    active = np.ones(len(cand), dtype=bool)
    steps = []
    for _ in range(n):
        idx = np.flatnonzero(active)
        cost = params.beta_dig * (inc[idx] @ (elen * undug)) + params.beta_fiber * plen[idx] + 2.0 * params.beta_trx
        cn = minmax(cost)
        if alpha == 0.0:
            weight = cn
        else:
            weight = alpha * minmax(sep[idx]) + (1.0 - alpha) * cn
        k = int(idx[int(np.argmin(weight))])
        v = cand[k]
        path, length = paths[k]
        new, c = step_cost(g, path, length, params)
        connect_fiber(g, v, path, length, new)
        steps.append(PlanStep(v, tuple(new), path, length, c, float(sep[k]), float(weight[idx == k][0])))
        active[k] = False
        for e in new:
            undug[eidx[e]] = 0.0
        dv = np.hypot(*(cxy - xy[v]).T)
        with np.errstate(divide="ignore"):
            sep = sep + np.where(dv == 0, np.inf, 1.0 / np.where(dv == 0, 1.0, dv))
    return g, steps


def random_placement(
    graph: BackhaulGraph, design: DesignGraph, n: int, rng: np.random.Generator, params: CostParams = CostParams()
) -> tuple[BackhaulGraph, list[PlanStep]]:
    """Fiber-connect ``n`` IAB SBSs drawn uniformly without replacement."""
    cand = sorted(graph.v_iab)
    if n < 0 or n > len(cand):
        raise PlanningError(f"cannot fiber-connect {n} SBSs, only {len(cand)} are IAB-backhauled")
    order = [int(v) for v in rng.permutation(np.asarray(cand, dtype=np.int64))[:n]]
    return place_in_order(graph, design, order, params)


def place_in_order(
    graph: BackhaulGraph, design: DesignGraph, order: Sequence[int], params: CostParams = CostParams()
) -> tuple[BackhaulGraph, list[PlanStep]]:
    g = graph.copy()
    steps = []
    for v in order:
        if v not in g.v_iab:
            raise PlanningError(f"SBS {v} is not IAB-backhauled")
        path, length = design.path_to_donor(v)
        new, c = step_cost(g, path, length, params)
        sep = inverse_separation(g.xy, v, list(g.mbs) + sorted(g.fiber))
        connect_fiber(g, v, path, length, new)
        steps.append(PlanStep(v, tuple(new), path, length, c, sep, math.nan))
    return g, steps


def assign_fso(graph: BackhaulGraph, m: int, ranking: Iterable[int]) -> BackhaulGraph:
    """Give the first ``m`` IAB SBSs of ``ranking`` a direct FSO link.

    Each link goes to the geometrically nearest fiber-connected node or MBS
    (ties: lowest id). ``ranking`` is normally the continuation of the fiber
    selection order, so hybrid plans nest inside all-fiber ones.
    """
    iab = graph.v_iab
    if m < 0 or m > len(iab):
        raise PlanningError(f"cannot FSO-connect {m} SBSs, only {len(iab)} are IAB-backhauled")
    g = graph.copy()
    anchors = sorted(set(g.mbs) | g.v_fib)
    if m and not anchors:
        raise PlanningError("no fiber-connected node to terminate FSO links")
    chosen = []
    for v in ranking:
        if len(chosen) == m:
            break
        if v in iab and v not in chosen:
            chosen.append(v)
    if len(chosen) < m:
        raise PlanningError("ranking does not name enough IAB SBSs")
    a = np.asarray(anchors)
    for v in chosen:
        d = np.hypot(*(g.xy[a] - g.xy[v]).T)
        t = int(a[np.flatnonzero(d == d.min()).min()])
        g.fso[v] = (t, g.dist(v, t))
    return g


def fbcp_ranking(graph: BackhaulGraph, design: DesignGraph, alpha: float, params: CostParams = CostParams()) -> list[int]:
    """Order in which ``fbcp`` would keep fiber-connecting the remaining IAB SBSs."""
    _, steps = fbcp(graph, design, len(graph.v_iab), alpha, params)
    return [s.chosen for s in steps]


def total_cost(graph: BackhaulGraph, params: CostParams = CostParams()) -> float:
    """Trench once per dug edge, fiber along every ring link and SBS path, two transceivers per link."""
    ring = graph.ring_edges
    dig = math.fsum(graph.trench.values())
    fib = math.fsum([graph.trench[e] for e in ring] + [length for _, length in graph.fiber.values()])
    links = len(ring) + len(graph.fiber)
    return (
        params.beta_dig * dig
        + params.beta_fiber * fib
        + 2.0 * params.beta_trx * links
        + 2.0 * params.beta_fso * len(graph.fso)
    )


def fiber_path_km(graph: BackhaulGraph, v: int) -> float:
    return graph.fiber[v][1] / 1000.0


def plan_to_dict(graph: BackhaulGraph, design: DesignGraph, steps: Sequence[PlanStep], params: CostParams) -> dict:
    """Export document; ``cum_cost`` is the full network cost (ring included) after each step."""
    base = graph_without_plan(graph, steps)
    cum = total_cost(base, params)
    out_steps = []
    for i, s in enumerate(steps, 1):
        cum += s.step_cost
        out_steps.append({"n": i, "chosen": s.chosen, "cost": s.step_cost, "cum_cost": cum})
    return {
        "ring": list(graph.ring),
        "design_edges": [[u, v, w] for (u, v), w in sorted(design.edges.items())],
        "steps": out_steps,
        "fso": [{"sbs": v, "target": t, "len": l} for v, (t, l) in sorted(graph.fso.items())],
        "total_cost": total_cost(graph, params),
    }


def graph_without_plan(graph: BackhaulGraph, steps: Sequence[PlanStep]) -> BackhaulGraph:
    g = graph.copy()
    g.fso = {}
    for s in steps:
        g.fiber.pop(s.chosen, None)
        for e in s.new_edges:
            g.trench.pop(e, None)
    return g
