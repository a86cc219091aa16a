"""Node layouts: MBSs, SBSs and UEs dropped uniformly in a rectangle."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng


class ScenarioError(ValueError):
    pass


class NodeKind(str, enum.Enum):
    MBS = "mbs"
    SBS = "sbs"
    UE = "ue"


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class Region:
    width: float = 1000.0
    height: float = 1000.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0) or not (math.isfinite(self.width) and math.isfinite(self.height)):
            raise ScenarioError(f"region must have positive finite size, got {self.width} x {self.height}")

    def contains(self, p: Point) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    pos: Point


@dataclass(frozen=True)
class Scenario:
    """An immutable layout. Node ids are dense: MBSs first, then SBSs, then UEs."""

    region: Region
    nodes: tuple[Node, ...]
    seed: int
    _xy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate node id")
        if sorted(ids) != list(range(len(ids))):
            raise ScenarioError("node ids must be dense 0..n-1")
        for n in self.nodes:
            if not (math.isfinite(n.pos.x) and math.isfinite(n.pos.y)):
                raise ScenarioError(f"node {n.id} has a non-finite coordinate")
            if not self.region.contains(n.pos):
                raise ScenarioError(f"node {n.id} at ({n.pos.x}, {n.pos.y}) lies outside the region")
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        object.__setattr__(self, "nodes", nodes)
        xy = np.array([[n.pos.x, n.pos.y] for n in nodes], dtype=float).reshape(-1, 2)
        xy.flags.writeable = False
        object.__setattr__(self, "_xy", xy)

    def ids(self, kind: NodeKind) -> list[int]:
        return [n.id for n in self.nodes if n.kind == kind]

    @property
    def mbs(self) -> list[int]:
        return self.ids(NodeKind.MBS)

    @property
    def sbs(self) -> list[int]:
        return self.ids(NodeKind.SBS)

    @property
    def ue(self) -> list[int]:
        return self.ids(NodeKind.UE)

    @property
    def xy(self) -> np.ndarray:
        """(n, 2) read-only coordinate array indexed by node id."""
        return self._xy

    def count(self, kind: NodeKind) -> int:
        return sum(1 for n in self.nodes if n.kind == kind)


def distance(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def sample_scenario(region: Region, n_mbs: int, n_sbs: int, n_ue: int, seed: int) -> Scenario:
    """Drop exactly the requested numbers of nodes i.i.d. uniformly over ``region``.

    Each node kind has its own substream, so changing the UE count leaves the
    base-station layout untouched, and a larger UE set extends a smaller one.
    """
    for name, n in (("n_mbs", n_mbs), ("n_sbs", n_sbs), ("n_ue", n_ue)):
        if n < 0:
            raise ScenarioError(f"{name} must be >= 0, got {n}")
    nodes: list[Node] = []
    for kind, n, tag in (
        (NodeKind.MBS, n_mbs, _rng.MBS_POSITIONS),
        (NodeKind.SBS, n_sbs, _rng.SBS_POSITIONS),
        (NodeKind.UE, n_ue, _rng.UE_POSITIONS),
    ):
        g = _rng.substream(seed, tag)
        xy = g.uniform(0.0, 1.0, size=(n, 2)) * (region.width, region.height)
        for x, y in xy:
            nodes.append(Node(len(nodes), kind, Point(float(x), float(y))))
    return Scenario(region, tuple(nodes), seed)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "region": {"width": s.region.width, "height": s.region.height},
        "seed": s.seed,
        "nodes": [{"id": n.id, "kind": n.kind.value, "x": n.pos.x, "y": n.pos.y} for n in s.nodes],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        region = Region(float(doc["region"]["width"]), float(doc["region"]["height"]))
        seed = int(doc["seed"])
        nodes = tuple(
            Node(int(n["id"]), NodeKind(n["kind"]), Point(float(n["x"]), float(n["y"]))) for n in doc["nodes"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario document: {exc!r}") from exc
    return Scenario(region, nodes, seed)


def save_scenario(s: Scenario) -> bytes:
    return json.dumps(scenario_to_dict(s), indent=1).encode()


def load_scenario(data: bytes | str) -> Scenario:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    return scenario_from_dict(doc)
