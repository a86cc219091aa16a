"""Experiment configuration, Monte Carlo sweeps and result files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng as _rng
from .channel import ChannelParams
from .planning import (
    BackhaulGraph,
    CostParams,
    DesignGraph,
    assign_fso,
    fbcp,
    graph_from_scenario,
    place_in_order,
    plan_connected_topology,
    total_cost,
)
from .radio import DropState, Geometry, PowerParams, RadioParams, draw_channel, total_power_w
from .scenario import Region, Scenario, sample_scenario

AXES = ("n_fiber", "beta_fso", "p_sbs_dbm", "n_ue", "alpha")
CSV_HEADER = (
    "strategy",
    "alpha",
    "n_fiber",
    "n_fso",
    "beta_fso",
    "p_sbs_dbm",
    "n_ue",
    "seed",
    "mean_cost",
    "mean_coverage",
    "mean_ee",
    "drops",
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class ScenarioBlock:
    width: float = 1000.0
    height: float = 1000.0
    n_mbs: int = 5
    n_sbs: int = 80
    n_ue: int = 1000
    seed: int = 1
    n_seeds: int = 20
    drops: int = 50

    @property
    def region(self) -> Region:
        return Region(self.width, self.height)


@dataclass(frozen=True)
class Strategy:
    kind: str = "fbcp"  # "fbcp" or "rnd"
    alpha: float | None = 0.0

    @property
    def label(self) -> str:
        return "rnd" if self.kind == "rnd" else "fbcp"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioBlock = ScenarioBlock()
    channel: ChannelParams = ChannelParams()
    radio: RadioParams = RadioParams()
    cost: CostParams = CostParams()
    power: PowerParams = PowerParams()
    n_fiber: int = 40
    n_fso: int = 0
    axis: str = "n_fiber"
    values: tuple = tuple(range(0, 81, 10))
    strategies: tuple[Strategy, ...] = (Strategy("fbcp", 0.0), Strategy("fbcp", 1.0), Strategy("rnd", None))


def _block(doc: dict, name: str, cls, path: str):
    sub = doc.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in sub.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown field")
        default = getattr(cls(), key)
        if isinstance(default, bool) or not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
        if isinstance(default, int) and not isinstance(default, bool):
            if float(value) != int(value):
                raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ValueError as exc:
        named = [k for k in known if k in str(exc)]
        raise ConfigError(f"{path}.{named[0]}" if named else path, str(exc)) from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a validated config; unknown or invalid fields raise ConfigError with their JSON path."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "config must be a JSON object")
    for key in doc:
        if key not in ("scenario", "channel", "radio", "cost", "power", "deployment", "sweep", "strategies"):
            raise ConfigError(key, "unknown block")
    sc = _block(doc, "scenario", ScenarioBlock, "scenario")
    for name in ("n_mbs", "n_sbs", "n_ue", "n_seeds", "seed"):
        if getattr(sc, name) < 0:
            raise ConfigError(f"scenario.{name}", "must be >= 0")
    if sc.n_ue < 1:
        raise ConfigError("scenario.n_ue", "coverage needs at least one UE")
    if sc.drops < 1:
        raise ConfigError("scenario.drops", "must be >= 1")
    if sc.n_seeds < 1:
        raise ConfigError("scenario.n_seeds", "must be >= 1")
    if sc.seed >= 2**64:
        raise ConfigError("scenario.seed", "must fit in 64 bits")
    if not (sc.width > 0 and sc.height > 0):
        raise ConfigError("scenario", "region width and height must be positive")
    dep = doc.get("deployment", {})
    if not isinstance(dep, dict):
        raise ConfigError("deployment", "expected an object")
    n_fiber = dep.get("n_fiber", 40)
    n_fso = dep.get("n_fso", 0)
    for key in dep:
        if key not in ("n_fiber", "n_fso"):
            raise ConfigError(f"deployment.{key}", "unknown field")
    for key, v in (("n_fiber", n_fiber), ("n_fso", n_fso)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"deployment.{key}", f"expected a non-negative integer, got {v!r}")

    sw = doc.get("sweep", {})
    if not isinstance(sw, dict):
        raise ConfigError("sweep", "expected an object")
    axis = sw.get("axis", "n_fiber")
    if axis not in AXES:
        raise ConfigError("sweep.axis", f"must be one of {', '.join(AXES)}")
    values = sw.get("values", list(range(0, 81, 10)))
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values", "must be a non-empty list")
    for i, v in enumerate(values):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"sweep.values[{i}]", f"expected a number, got {v!r}")
        if axis in ("n_fiber", "n_ue") and (v != int(v) or v < 0):
            raise ConfigError(f"sweep.values[{i}]", "expected a non-negative integer")
        if axis == "n_ue" and v < 1:
            raise ConfigError(f"sweep.values[{i}]", "coverage needs at least one UE")
        if axis == "alpha" and not 0 <= v <= 1:
            raise ConfigError(f"sweep.values[{i}]", "alpha must lie in [0, 1]")
        if axis == "beta_fso" and v < 0:
            raise ConfigError(f"sweep.values[{i}]", "beta_fso must be >= 0")
    if axis in ("n_fiber", "n_ue"):
        values = [int(v) for v in values]
    for key in sw:
        if key not in ("axis", "values"):
            raise ConfigError(f"sweep.{key}", "unknown field")

    strategies = []
    raw = doc.get("strategies", [{"kind": "fbcp", "alpha": 0.0}, {"kind": "fbcp", "alpha": 1.0}, {"kind": "rnd"}])
    if not isinstance(raw, list) or not raw:
        raise ConfigError("strategies", "must be a non-empty list")
    for i, s in enumerate(raw):
        p = f"strategies[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(p, "expected an object")
        kind = s.get("kind")
        if kind == "rnd":
            if set(s) - {"kind"}:
                raise ConfigError(p, "rnd takes no parameters")
            strategies.append(Strategy("rnd", None))
        elif kind == "fbcp":
            alpha = s.get("alpha", 0.0)
            if set(s) - {"kind", "alpha"}:
                raise ConfigError(p, "unknown field")
            if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or not 0 <= alpha <= 1:
                raise ConfigError(f"{p}.alpha", "alpha must be a number in [0, 1]")
            strategies.append(Strategy("fbcp", float(alpha)))
        else:
            raise ConfigError(f"{p}.kind", "must be 'fbcp' or 'rnd'")

    cfg = ExperimentConfig(
        scenario=sc,
        channel=_block(doc, "channel", ChannelParams, "channel"),
        radio=_block(doc, "radio", RadioParams, "radio"),
        cost=_block(doc, "cost", CostParams, "cost"),
        power=_block(doc, "power", PowerParams, "power"),
        n_fiber=n_fiber,
        n_fso=n_fso,
        axis=axis,
        values=tuple(values),
        strategies=tuple(strategies),
    )
    for pt in sweep_points(cfg):
        if pt.n_fiber + pt.n_fso > sc.n_sbs:
            where = "sweep.values" if axis == "n_fiber" else "deployment"
            raise ConfigError(where, f"n_fiber + n_fso = {pt.n_fiber + pt.n_fso} exceeds n_sbs = {sc.n_sbs}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


@dataclass(frozen=True)
class Point:
    """One sweep point for one strategy."""

    strategy: Strategy
    n_fiber: int
    n_fso: int
    beta_fso: float
    p_sbs_dbm: float
    n_ue: int


@dataclass(frozen=True)
class ResultRow:
    strategy: str
    alpha: float | None
    n_fiber: int
    n_fso: int
    beta_fso: float
    p_sbs_dbm: float
    n_ue: int
    seed: int
    mean_cost: float
    mean_coverage: float
    mean_ee: float
    drops: int


def sweep_points(cfg: ExperimentConfig) -> list[Point]:
    """Sweep value major, strategy minor."""
    pts = []
    for v in cfg.values:
        for s in cfg.strategies:
            kw = dict(
                strategy=s,
                n_fiber=cfg.n_fiber,
                n_fso=cfg.n_fso,
                beta_fso=cfg.cost.beta_fso,
                p_sbs_dbm=cfg.radio.p_sbs_dbm,
                n_ue=cfg.scenario.n_ue,
            )
            if cfg.axis == "alpha":
                if s.kind == "fbcp":
                    kw["strategy"] = Strategy("fbcp", float(v))
            else:
                kw[cfg.axis] = v
            pts.append(Point(**kw))
    return pts


def scenario_seeds(cfg: ExperimentConfig) -> list[int]:
    return [_rng.derive_seed(cfg.scenario.seed, k) for k in range(cfg.scenario.n_seeds)]


@dataclass
class SeedPlans:
    """Design graph and full selection orders for one scenario seed, shared by every strategy."""

    ring: BackhaulGraph
    design: DesignGraph
    cost: CostParams
    orders: dict = field(default_factory=dict)

    def order(self, strategy: Strategy, seed: int) -> list[int]:
        key = (strategy.kind, strategy.alpha)
        if key not in self.orders:
            if strategy.kind == "rnd":
                g = _rng.substream(seed, _rng.RANDOM_PLACEMENT)
                order = [int(v) for v in g.permutation(np.asarray(sorted(self.ring.v_iab), dtype=np.int64))]
            else:
                _, steps = fbcp(self.ring, self.design, len(self.ring.v_iab), strategy.alpha, self.cost)
                order = [s.chosen for s in steps]
            self.orders[key] = order
        return self.orders[key]

    def build(self, strategy: Strategy, seed: int, n_fiber: int, n_fso: int) -> BackhaulGraph:
        order = self.order(strategy, seed)
        g, _ = place_in_order(self.ring, self.design, order[:n_fiber], self.cost)
        return assign_fso(g, n_fso, order[n_fiber:]) if n_fso else g


def seed_plans(scenario: Scenario, cost: CostParams) -> SeedPlans:
    ring = graph_from_scenario(scenario)
    design = plan_connected_topology(ring, _rng.substream(scenario.seed, _rng.DESIGN_ORDER))
    return SeedPlans(ring, design, cost)


def run_seed(cfg: ExperimentConfig, seed: int) -> list[ResultRow]:
    """Every sweep point for one scenario seed; the same drops are reused across points."""
    pts = sweep_points(cfg)
    sc = cfg.scenario
    base = sample_scenario(sc.region, sc.n_mbs, sc.n_sbs, 0, seed)
    plans = seed_plans(base, cfg.cost)
    graphs = {}
    for pt in pts:
        key = (pt.strategy, pt.n_fiber, pt.n_fso)
        if key not in graphs:
            graphs[key] = plans.build(pt.strategy, seed, pt.n_fiber, pt.n_fso)

    cov = np.zeros((len(pts), sc.drops))
    ee = np.zeros((len(pts), sc.drops))
    for n_ue in sorted({pt.n_ue for pt in pts}):
        scen = sample_scenario(sc.region, sc.n_mbs, sc.n_sbs, n_ue, seed)
        geo = Geometry(scen, cfg.channel)
        idx_ue = [i for i, pt in enumerate(pts) if pt.n_ue == n_ue]
        by_power = {}
        for i in idx_ue:
            by_power.setdefault(pts[i].p_sbs_dbm, []).append(i)
        radios = {p: dataclasses.replace(cfg.radio, p_sbs_dbm=p) for p in by_power}
        ptot = {
            i: total_power_w(graphs[(pts[i].strategy, pts[i].n_fiber, pts[i].n_fso)], radios[pts[i].p_sbs_dbm], cfg.power)
            for i in idx_ue
        }
        for d in range(sc.drops):
            real = draw_channel(geo, seed, d)
            for p, idx in by_power.items():
                state = DropState(geo, real, radios[p])
                for i in idx:
                    pt = pts[i]
                    r = state.evaluate(graphs[(pt.strategy, pt.n_fiber, pt.n_fso)], radios[p], ptot[i])
                    cov[i, d] = r.coverage
                    ee[i, d] = r.ee

    rows = []
    for i, pt in enumerate(pts):
        g = graphs[(pt.strategy, pt.n_fiber, pt.n_fso)]
        cost = total_cost(g, dataclasses.replace(cfg.cost, beta_fso=pt.beta_fso))
        rows.append(
            ResultRow(
                strategy=pt.strategy.label,
                alpha=pt.strategy.alpha,
                n_fiber=pt.n_fiber,
                n_fso=pt.n_fso,
                beta_fso=float(pt.beta_fso),
                p_sbs_dbm=float(pt.p_sbs_dbm),
                n_ue=pt.n_ue,
                seed=seed,
                mean_cost=cost,
                mean_coverage=math.fsum(cov[i]) / sc.drops,
                mean_ee=math.fsum(ee[i]) / sc.drops,
                drops=sc.drops,
            )
        )
    return rows


def _run_seed_args(args):
    return run_seed(*args)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[ResultRow]:
    """Rows ordered by sweep value, then strategy, then scenario seed.

    ``threads`` sets the number of worker processes; it never changes results.
    """
    seeds = scenario_seeds(cfg)
    if threads > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            per_seed = list(ex.map(_run_seed_args, [(cfg, s) for s in seeds]))
    else:
        per_seed = [run_seed(cfg, s) for s in seeds]
    n_pts = len(per_seed[0])
    return [per_seed[k][i] for i in range(n_pts) for k in range(len(seeds))]


def find_crossover(betas: Sequence[float], cost_a: Sequence[float], cost_b: Sequence[float]) -> float | None:
    """First beta where curve b crosses curve a, by linear interpolation on the grid.

    Returns None when the difference never changes sign on the grid.
    """
    x = np.asarray(betas, dtype=float)
    diff = np.asarray(cost_a, dtype=float) - np.asarray(cost_b, dtype=float)
    if x.shape != diff.shape or x.size == 0:
        raise ValueError("curves must be sampled on a common, non-empty grid")
    if np.all(diff == 0):
        raise ValueError("identical curves have no isolated crossover")
    order = np.argsort(x, kind="stable")
    x, diff = x[order], diff[order]
    for i in range(len(x)):
        if diff[i] == 0:
            return float(x[i])
        if i + 1 < len(x) and diff[i] * diff[i + 1] < 0:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(x[i] + t * (x[i + 1] - x[i]))
    return None


def rows_to_dicts(rows: Sequence[ResultRow]) -> list[dict]:
    return [dataclasses.asdict(r) for r in rows]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        d = dataclasses.asdict(r)
        w.writerow([_fmt(d[k]) for k in CSV_HEADER])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    out = []
    for d in csv.DictReader(io.StringIO(text)):
        out.append(
            ResultRow(
                strategy=d["strategy"],
                alpha=float(d["alpha"]) if d["alpha"] else None,
                n_fiber=int(d["n_fiber"]),
                n_fso=int(d["n_fso"]),
                beta_fso=float(d["beta_fso"]),
                p_sbs_dbm=float(d["p_sbs_dbm"]),
                n_ue=int(d["n_ue"]),
                seed=int(d["seed"]),
                mean_cost=float(d["mean_cost"]),
                mean_coverage=float(d["mean_coverage"]),
                mean_ee=float(d["mean_ee"]),
                drops=int(d["drops"]),
            )
        )
    return out


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    return json.dumps(rows_to_dicts(rows), indent=1)


def rows_from_json(text: str) -> list[ResultRow]:
    return [ResultRow(**d) for d in json.loads(text)]


def emit_results(rows: Sequence[ResultRow], path: str | Path, fmt: str = "csv") -> Path:
    if not rows:
        raise ValueError("no rows to write")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows)
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(text)
    return path


def seed_mean(rows: Sequence[ResultRow], metric: str, **match) -> float:
    """Average ``metric`` over the rows (seeds) matching every ``match`` field."""
    vals = [getattr(r, metric) for r in rows if all(getattr(r, k) == v for k, v in match.items())]
    if not vals:
        raise KeyError(f"no rows match {match}")
    return math.fsum(vals) / len(vals)


def plan_for(cfg: ExperimentConfig, seed: int, strategy: Strategy | None = None):
    """Plan of the configured deployment for one scenario seed: (graph, design, fiber steps)."""
    sc = cfg.scenario
    strategy = strategy or cfg.strategies[0]
    scen = sample_scenario(sc.region, sc.n_mbs, sc.n_sbs, 0, seed)
    plans = seed_plans(scen, cfg.cost)
    if cfg.n_fiber + cfg.n_fso > sc.n_sbs:
        raise ConfigError("deployment", "n_fiber + n_fso exceeds n_sbs")
    order = plans.order(strategy, seed)
    g, steps = place_in_order(plans.ring, plans.design, order[: cfg.n_fiber], cfg.cost)
    if cfg.n_fso:
        g = assign_fso(g, cfg.n_fso, order[cfg.n_fiber :])
    return g, plans.design, steps
