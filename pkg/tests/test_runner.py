import json
import subprocess
import sys

import pytest

from iabplan import cli
from iabplan.planning import total_cost
from iabplan.runner import (
    CSV_HEADER,
    ConfigError,
    ResultRow,
    config_from_dict,
    emit_results,
    find_crossover,
    load_config,
    plan_for,
    rows_from_csv,
    rows_from_json,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    scenario_seeds,
    seed_mean,
)


def small(**over):
    doc = {
        "scenario": {"width": 300, "height": 300, "n_mbs": 2, "n_sbs": 8, "n_ue": 30, "seed": 3, "n_seeds": 2, "drops": 2},
        "deployment": {"n_fiber": 3},
        "sweep": {"axis": "n_fiber", "values": [0, 4, 8]},
    }
    for k, v in over.items():
        doc[k] = v
    return doc


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"radio": {"beta_split": 1.5}}, "radio.beta_split"),
        ({"radio": {"bogus": 1}}, "radio.bogus"),
        ({"scenario": {"drops": 0}}, "scenario.drops"),
        ({"scenario": {"n_ue": 0}}, "scenario.n_ue"),
        ({"sweep": {"axis": "power"}}, "sweep.axis"),
        ({"sweep": {"values": []}}, "sweep.values"),
        ({"sweep": {"axis": "n_fiber", "values": [10, "x"]}}, "sweep.values[1]"),
        ({"sweep": {"axis": "n_fiber", "values": [81]}}, "sweep.values"),
        ({"strategies": [{"kind": "fbcp", "alpha": 2}]}, "strategies[0].alpha"),
        ({"strategies": [{"kind": "greedy"}]}, "strategies[0].kind"),
        ({"deployment": {"n_fiber": -1}}, "deployment.n_fiber"),
        ({"plot": {}}, "plot"),
    ],
)
def test_config_errors_carry_field_path(doc, path):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(doc)
    assert exc.value.path == path


def test_config_defaults():
    cfg = config_from_dict({})
    assert (cfg.scenario.n_mbs, cfg.scenario.n_sbs, cfg.scenario.n_ue) == (5, 80, 1000)
    assert (cfg.scenario.n_seeds, cfg.scenario.drops) == (20, 50)
    assert cfg.channel.carrier_freq == 28.0 and cfg.radio.total_bw_hz == 1e9
    assert cfg.values == tuple(range(0, 81, 10))
    assert [(s.label, s.alpha) for s in cfg.strategies] == [("fbcp", 0.0), ("fbcp", 1.0), ("rnd", None)]


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(small()))
    assert load_config(p).scenario.n_sbs == 8
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


def test_single_point_row_count():
    cfg = config_from_dict(small(scenario={**small()["scenario"], "n_seeds": 1, "drops": 1}, sweep={"axis": "n_fiber", "values": [2]}))
    rows = run_experiment(cfg)
    assert len(rows) == len(cfg.strategies) == 3
    assert all(r.drops == 1 for r in rows)


def test_row_count_and_order():
    cfg = config_from_dict(small(sweep={"axis": "n_fiber", "values": [0, 4, 8]}))
    rows = run_experiment(cfg)
    assert len(rows) == 3 * 3 * 2
    seeds = scenario_seeds(cfg)
    keys = [(r.n_fiber, r.strategy, r.alpha, r.seed) for r in rows]
    want = [(v, s.label, s.alpha, k) for v in (0, 4, 8) for s in cfg.strategies for k in seeds]
    assert keys == want
    for r in rows:
        assert 0.0 <= r.mean_coverage <= 1.0 and r.mean_ee >= 0
    # every strategy has the same cost with all SBSs fibered, and none at zero
    for k in seeds:
        assert len({r.mean_cost for r in rows if r.seed == k and r.n_fiber == 8}) == 1
        assert len({r.mean_cost for r in rows if r.seed == k and r.n_fiber == 0}) == 1


def test_default_axes_give_27_rows_per_seed():
    doc = small(scenario={**small()["scenario"], "n_sbs": 80, "n_ue": 5, "n_seeds": 1, "drops": 1, "width": 1000, "height": 1000})
    del doc["sweep"]
    rows = run_experiment(config_from_dict(doc))
    assert len(rows) == 27


def test_rows_match_plan_for():
    cfg = config_from_dict(small(sweep={"axis": "n_fiber", "values": [3]}))
    rows = run_experiment(cfg)
    for s in cfg.strategies:
        for seed in scenario_seeds(cfg):
            g, _, _ = plan_for(cfg, seed, s)
            assert seed_mean(rows, "mean_cost", strategy=s.label, alpha=s.alpha, seed=seed) == total_cost(g, cfg.cost)


def test_threads_do_not_change_output(tmp_path):
    cfg = config_from_dict(small(scenario={**small()["scenario"], "n_seeds": 3}, sweep={"axis": "p_sbs_dbm", "values": [10, 30]}))
    a = rows_to_csv(run_experiment(cfg, threads=1))
    b = rows_to_csv(run_experiment(cfg, threads=2))
    c = rows_to_csv(run_experiment(cfg, threads=3))
    assert a == b == c


def test_common_drops_across_sweep_values():
    # coverage at a repeated sweep value is identical because drops depend on the seed only
    cfg = config_from_dict(small(sweep={"axis": "beta_fso", "values": [10, 10, 90]}, deployment={"n_fiber": 2, "n_fso": 2}))
    rows = run_experiment(cfg)
    for s in cfg.strategies:
        mine = [r for r in rows if (r.strategy, r.alpha) == (s.label, s.alpha)]
        c = [r.mean_coverage for r in mine]
        assert c[:2] == c[2:4] == c[4:]
        cost = [r.mean_cost for r in mine if r.seed == rows[0].seed]
        assert cost[2] - cost[0] == pytest.approx(2 * 80 * 2)


def test_find_crossover():
    betas = list(range(1, 101))
    fiber = [21000.0] * 100
    hybrid = [18200.0 + 40 * b for b in betas]
    assert find_crossover(betas, fiber, hybrid) == pytest.approx(70.0, abs=1e-12)
    assert find_crossover([1, 50, 100], fiber[:3], [18200.0 + 40 * b for b in (1, 50, 100)]) == pytest.approx(70.0)
    assert find_crossover(betas, fiber, [1e5] * 100) is None
    assert find_crossover([1, 2, 3], [5, 5, 5], [4, 5, 6]) == 2.0
    with pytest.raises(ValueError):
        find_crossover([1, 2], [3, 3], [3, 3])


def _row(**kw):
    base = dict(strategy="fbcp", alpha=0.0, n_fiber=40, n_fso=0, beta_fso=50.0, p_sbs_dbm=24.0, n_ue=1000,
                seed=123, mean_cost=12711.123456789012, mean_coverage=2 / 3, mean_ee=8.123456789012345e8, drops=50)
    base.update(kw)
    return ResultRow(**base)


def test_csv_format():
    text = rows_to_csv([_row()])
    lines = text.splitlines()
    assert len(lines) == 2
    assert lines[0] == "strategy,alpha,n_fiber,n_fso,beta_fso,p_sbs_dbm,n_ue,seed,mean_cost,mean_coverage,mean_ee,drops"
    assert tuple(lines[0].split(",")) == CSV_HEADER
    assert "0.6666666666666666" in lines[1]
    rows = [_row(), _row(strategy="rnd", alpha=None)]
    assert rows_from_csv(rows_to_csv(rows)) == rows


def test_json_round_trip():
    rows = [_row(), _row(strategy="rnd", alpha=None, mean_ee=1e-300)]
    assert rows_from_json(rows_to_json(rows)) == rows
    assert isinstance(json.loads(rows_to_json(rows)), list)


def test_emit_results(tmp_path):
    p = emit_results([_row()], tmp_path / "r.csv")
    assert p.read_text() == rows_to_csv([_row()])
    p = emit_results([_row()], tmp_path / "r.json", "json")
    assert rows_from_json(p.read_text()) == [_row()]
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "x.csv")
    with pytest.raises(OSError):
        emit_results([_row()], tmp_path / "missing" / "r.csv")


def _cfg_file(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_cli_scenario_and_plan(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, small())
    out = tmp_path / "s.json"
    assert cli.main(["scenario", "--config", cfg, "--seed", "9", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 9 and len(doc["nodes"]) == 40
    assert cli.main(["plan", "--config", cfg, "--seed", "9"]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert len(plan["steps"]) == 3


def test_cli_sweep_deterministic(tmp_path):
    cfg = _cfg_file(tmp_path, small(sweep={"axis": "n_fiber", "values": [0, 8]}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", "--config", cfg, "--seed", "5", "--out", str(a)]) == 0
    assert cli.main(["sweep", "--config", cfg, "--seed", "5", "--threads", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 2 * 3 * 2
    j = tmp_path / "a.json"
    assert cli.main(["sweep", "--config", cfg, "--seed", "5", "--format", "json", "--out", str(j)]) == 0
    assert rows_to_csv(rows_from_json(j.read_text())) == a.read_text()


def test_cli_errors(tmp_path, capsys):
    bad = _cfg_file(tmp_path, {"radio": {"beta_split": 7}})
    assert cli.main(["sweep", "--config", bad]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "config", "path": "radio.beta_split", "message": err["message"]}
    assert cli.main(["plan", "--config", str(tmp_path / "absent.json")]) != 0
    json.loads(capsys.readouterr().err)
    cfg = _cfg_file(tmp_path, small())
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "no" / "x.csv")]) == 1
    assert json.loads(capsys.readouterr().err)["error"]
    assert cli.main(["plan", "--config", cfg, "--seed", str(2**64)]) == 2


def test_module_entry_point(tmp_path):
    cfg = _cfg_file(tmp_path, small())
    r = subprocess.run([sys.executable, "-m", "iabplan", "scenario", "--config", cfg], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["nodes"]
    r = subprocess.run([sys.executable, "-m", "iabplan", "sweep", "--config", _cfg_file(tmp_path, {"scenario": {"drops": 0}})],
                       capture_output=True, text=True)
    assert r.returncode == 2 and json.loads(r.stderr)["path"] == "scenario.drops"
