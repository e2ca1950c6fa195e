from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from conftest import DESK, desk_instance
from evsp.cli import (EXIT_INFEASIBLE, EXIT_INVALID, EXIT_LIMIT, EXIT_OK, SUMMARY_FIELDS,
                      InstanceFormatError, instance_from_dict, instance_to_dict, load_instance,
                      main, save_instance)
from evsp.oracle import generate_instance

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"


def _run(*argv):
    return main([str(a) for a in argv])


def test_fixture_loads_and_solves(tmp_path):
    inst = load_instance(DATA / "one_service.json")
    assert inst.n_services == 1 and inst.capacity == 50
    out = tmp_path / "sol.json"
    assert _run("bp", DATA / "one_service.json", "-o", out) == EXIT_OK
    sol = json.loads(out.read_text())
    assert sol["status"] == "optimal"
    # depot -> service (5) and service -> depot (4), no charging needed
    assert sol["cost"] == pytest.approx(1000 + 5 + 4)
    assert _run("validate", DATA / "one_service.json", out, "-o", tmp_path / "r.json") == EXIT_OK


def test_matrix_mismatch_names_matrix(tmp_path):
    data = json.loads((DATA / "one_service.json").read_text())
    data["travel_energy"] = [row[:2] for row in data["travel_energy"]]
    with pytest.raises(InstanceFormatError, match="travel_energy"):
        instance_from_dict(data)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    assert _run("preprocess", path) == EXIT_INVALID


def test_schema_error_names_field():
    data = json.loads((DATA / "one_service.json").read_text())
    del data["services"][0]["t_begin"]
    with pytest.raises(InstanceFormatError, match="services/0"):
        instance_from_dict(data)
    data = json.loads((DATA / "one_service.json").read_text())
    data["vehicle"]["capacity"] = "big"
    with pytest.raises(InstanceFormatError, match="vehicle/capacity"):
        instance_from_dict(data)


def test_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n "horizon": 10,\n "name": oops\n}\n')
    with pytest.raises(InstanceFormatError, match="line 3"):
        load_instance(path)


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "inst.txt"
    path.write_text("x")
    with pytest.raises(InstanceFormatError, match="no loader"):
        load_instance(path)


@pytest.mark.parametrize("piecewise", [False, True])
def test_round_trip(tmp_path, piecewise):
    inst = generate_instance(7, 2, 3, seed=3, piecewise=piecewise)
    path = tmp_path / "i.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert instance_to_dict(back) == instance_to_dict(inst)
    assert back.services == inst.services
    for key in ("travel_time", "travel_cost", "travel_energy"):
        assert np.array_equal(getattr(back, key), getattr(inst, key))
    save_instance(back, tmp_path / "j.json")
    assert (tmp_path / "j.json").read_bytes() == path.read_bytes()


def test_validate_tampered_exits_1(tmp_path):
    sol = json.loads((GOLDEN / "dive_n20_seed42.json").read_text())
    sol["routes"][0]["arcs"][0]["to"] = sol["routes"][1]["services"][0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(sol))
    assert _run("validate", GOLDEN / "gen_n20_seed42.json", bad, "-o", tmp_path / "r.json") \
        == EXIT_INVALID
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["feasible"] is False and rep["violation"]["kind"]


def test_generate_matches_golden(tmp_path):
    out = tmp_path / "inst.json"
    assert _run("generate", out, "--services", 20, "--seed", 42) == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "gen_n20_seed42.json").read_bytes()


def test_dive_matches_golden(tmp_path):
    out = tmp_path / "dive.json"
    assert _run("dive", GOLDEN / "gen_n20_seed42.json", "-o", out) == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "dive_n20_seed42.json").read_bytes()
    assert _run("validate", GOLDEN / "gen_n20_seed42.json", out, "-o", tmp_path / "r.json") \
        == EXIT_OK


@pytest.mark.parametrize("mode", ["preprocess", "root-lp", "bp", "dive", "price-only"])
def test_modes_are_deterministic(tmp_path, mode):
    inst = desk_instance(28)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    _run(mode, path, "-o", a, "--seed", 3)
    _run(mode, path, "-o", b, "--seed", 3)
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_env(tmp_path, monkeypatch):
    inst_path = GOLDEN / "gen_n20_seed42.json"
    base = tmp_path / "base.json"
    _run("preprocess", inst_path, "--sparsify", "-o", base)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nu3": 1, "nu1": 1}))
    via_flag = tmp_path / "flag.json"
    _run("--config", cfg, "preprocess", inst_path, "--sparsify", "-o", via_flag)
    monkeypatch.setenv("EVSP_CONFIG", str(cfg))
    via_env = tmp_path / "env.json"
    _run("preprocess", inst_path, "--sparsify", "-o", via_env)
    n_base = json.loads(base.read_text())["arcs"]
    assert json.loads(via_flag.read_text())["arcs"] < n_base
    assert via_env.read_bytes() == via_flag.read_bytes()
    # explicit flags still win over the config file
    explicit = tmp_path / "explicit.json"
    _run("preprocess", inst_path, "--sparsify", "--nu1", 2, "--nu3", 15, "-o", explicit)
    assert json.loads(explicit.read_text())["arcs"] == n_base


def test_bad_config_exits_1(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    assert _run("--config", cfg, "preprocess", GOLDEN / "gen_n20_seed42.json") == EXIT_INVALID


def test_summary_and_log(tmp_path):
    inst = desk_instance(8)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    summary = tmp_path / "summary.csv"
    for mode in ("bp", "dive"):
        assert _run(mode, path, "-o", tmp_path / f"{mode}.json", "--summary", summary) == EXIT_OK
    rows = list(csv.DictReader(summary.open()))
    assert list(rows[0]) == SUMMARY_FIELDS
    assert [r["mode"] for r in rows] == ["bp", "dive"]
    bp = json.loads((tmp_path / "bp.json").read_text())
    assert float(rows[0]["ub"]) == pytest.approx(bp["cost"], abs=0.05)
    assert int(rows[0]["vehicles"]) == len(bp["routes"])
    log = tmp_path / "cg.csv"
    assert _run("root-lp", path, "-o", tmp_path / "lp.json", "--log", log) == EXIT_OK
    assert log.read_text().startswith("iteration,lp_value,columns_added,alpha,pricing_time")


def test_dump_and_price_only(tmp_path):
    inst = desk_instance(5)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    dump = tmp_path / "dump"
    _run("preprocess", path, "--dump", dump, "-o", tmp_path / "p.json")
    report = json.loads((tmp_path / "p.json").read_text())
    files = sorted(dump.iterdir())
    assert len(files) == 2
    assert sum(len(f.read_text().splitlines()) for f in files) == report["arcs"]
    duals = tmp_path / "duals.json"
    duals.write_text(json.dumps([DESK["fixed_cost"] * 3] * inst.n_services))
    out = tmp_path / "price.json"
    assert _run("price-only", path, "--duals", duals, "--top", 3, "-o", out) == EXIT_OK
    data = json.loads(out.read_text())
    for dep in data["depots"]:
        assert len(dep["bounds"]) == inst.n_services + 2
        costs = [r["reduced_cost"] for r in dep["routes"]]
        assert costs == sorted(costs) and len(costs) <= 3


def test_exit_codes_for_infeasible_and_limit(tmp_path):
    data = json.loads((DATA / "one_service.json").read_text())
    data["services"][0]["t_begin"] = 1.0     # the depot is 5 minutes away
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(data))
    assert _run("bp", path, "-o", tmp_path / "s.json") == EXIT_INFEASIBLE
    assert json.loads((tmp_path / "s.json").read_text())["status"] == "infeasible"
    inst = desk_instance(28)
    p2 = tmp_path / "branching.json"
    save_instance(inst, p2)
    assert _run("bp", p2, "--node-limit", 1, "-o", tmp_path / "l.json") == EXIT_LIMIT
    assert json.loads((tmp_path / "l.json").read_text())["status"] == "limit"
