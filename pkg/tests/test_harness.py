import dataclasses
import json
import math

import numpy as np
import pytest

from cryptomine import harness
from cryptomine.harness import (
    CSV_COLUMNS,
    Report,
    ScenarioError,
    emit,
    load_json_reports,
    rows_to_csv,
    run_scenario,
    sweep_alpha,
    sweep_table,
    write_outputs,
)
from cryptomine.mine import TracePoint, TrainTrace
from cryptomine.scenarios import (
    GROUPS,
    PRESETS,
    PROFILES,
    ConfigError,
    Scenario,
    SourceSpec,
    SweepSpec,
    load_scenario_file,
    resolve,
    resolve_sweep,
    scenario_from_dict,
)

TINY = {"epochs": 3, "hidden": (8, 8)}


def tiny(name="none", **kw):
    scn = PRESETS[name]()
    return dataclasses.replace(scn, n_samples=kw.pop("n", 256), mine=dict(TINY, **kw))


def fake_report(**kw):
    base = dict(scenario="s", scheme="otp", alpha=None, seed=0, n_samples=10, epochs=2,
                final_mi_nats=0.125, dataset_digest="ab", config_echo={"a": 1})
    base.update(kw)
    return Report(**base)


def test_quick_profile_values():
    q = PROFILES["quick"]
    assert (q.n_samples, q.batch_size, q.epochs) == (20_000, 2_000, 300)
    p = PROFILES["paper"]
    assert (p.n_samples, p.wide_n_samples, p.batch_size, p.epochs, p.long_epochs) == (
        100_000, 500_000, 10_000, 2_000, 5_000)


def test_mine_config_from_scenario():
    cfg = PRESETS["none"]().mine_config(PROFILES["quick"])
    assert cfg.input_dim == 32 and cfg.batch_size == 2000 and cfg.lr == 1e-4
    assert cfg.hidden == (100, 100) and cfg.reg_coeff == 0.1
    wide = PRESETS["huncc_uniform"]().mine_config(PROFILES["paper"])
    assert wide.input_dim == 256 and wide.epochs == 5000
    assert PRESETS["otp_with_key"]().mine_config(PROFILES["quick"]).input_dim == 48


def test_run_scenario_report():
    rep = run_scenario(tiny("none"))
    assert rep.scenario == "none" and rep.n_samples == 256 and rep.epochs == 3
    assert len(rep.trace) == 3
    assert rep.final_mi_nats == rep.trace.final_estimate()
    assert rep.metadata["ceiling_nats"] == pytest.approx(math.log(256))
    assert rep.config_echo["mine"]["batch_size"] == 256
    assert len(rep.dataset_digest) == 64


def test_run_scenario_is_deterministic():
    a = run_scenario(tiny("xor_repeat"))
    b = run_scenario(tiny("xor_repeat"))
    assert rows_to_csv([a]) == rows_to_csv([b])
    assert a.trace.points == b.trace.points


def test_ceiling_assertion(monkeypatch):
    def fake_train(ds, cfg):
        t = TrainTrace()
        t.append(TracePoint(1, 99.0, 99.0, 0.0))
        return None, t

    monkeypatch.setattr(harness, "train", fake_train)
    with pytest.raises(ScenarioError, match="exceeds"):
        run_scenario(tiny("none"))


def test_errors_carry_scenario_name():
    scn = tiny("none", batch_size=1000)
    with pytest.raises(ScenarioError, match="'none'"):
        run_scenario(scn)


def test_report_json_roundtrip(tmp_path):
    rep = run_scenario(tiny("otp"))
    path = emit(rep, "json", tmp_path / "r.json")
    back = load_json_reports(path)[0]
    assert back.to_dict() == json.loads(json.dumps(rep.to_dict()))
    assert back.trace.points == rep.trace.points


def test_empty_csv_is_header_only():
    assert rows_to_csv([]) == ",".join(CSV_COLUMNS) + "\n"


def test_csv_golden(tmp_path):
    reps = [fake_report(), fake_report(scenario="h", scheme="huncc", alpha=0.01, seed=2,
                                       n_samples=100000, epochs=300, final_mi_nats=3.5)]
    emit(reps, "csv", tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == (
        "scenario,alpha,scheme,final_mi_nats,seed,n_samples,epochs\n"
        "s,,otp,0.125,0,10,2\n"
        "h,0.01,huncc,3.5,2,100000,300\n"
    )
    with pytest.raises(ValueError):
        emit(reps, "xml", tmp_path / "t.xml")


def test_write_outputs_traces(tmp_path):
    rep = run_scenario(tiny("none"))
    path = write_outputs([rep], tmp_path / "out")
    assert path.name == "results.csv"
    trace = tmp_path / "out" / "none_seed0_trace.csv"
    assert TrainTrace.from_csv(trace).points == rep.trace.points


def test_sweep_and_table(monkeypatch):
    spec = SweepSpec(alphas=(0.1, 0.5), schemes=("huncc", "aes128_ctr"), seeds=(0,), n_samples=64)
    orig = harness.huncc_scenario

    def small(*a, **k):
        return dataclasses.replace(orig(*a, **k), mine=dict(TINY))

    monkeypatch.setattr(harness, "huncc_scenario", small)
    reports, errors = sweep_alpha(spec, jobs=1)
    assert not errors
    assert [(r.alpha, r.scheme) for r in reports] == [
        (0.1, "huncc"), (0.1, "aes128_ctr"), (0.5, "huncc"), (0.5, "aes128_ctr")]
    table = sweep_table(reports)
    assert set(table) == {(0.1, "huncc"), (0.1, "aes128_ctr"), (0.5, "huncc"), (0.5, "aes128_ctr")}


def test_sweep_keeps_partial_results(monkeypatch):
    def flaky(scn, prof, huncc_cfg=None):
        if scn.scheme == "aes128_ctr":
            raise ScenarioError("boom")
        return fake_report(scheme=scn.scheme, alpha=scn.source.alpha)

    monkeypatch.setattr(harness, "run_scenario", flaky)
    reports, errors = sweep_alpha(SweepSpec(alphas=(0.1,), schemes=("huncc", "aes128_ctr")), jobs=1)
    assert len(reports) == 1 and errors == ["boom"]


def test_sweep_table_averages_seeds():
    reps = [fake_report(alpha=0.1, scheme="huncc", final_mi_nats=v, seed=s)
            for s, v in enumerate((1.0, 2.0, 3.0))]
    assert sweep_table(reps) == {(0.1, "huncc"): 2.0}


def test_sweep_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        SweepSpec(alphas=(0.1, 0.05))
    with pytest.raises(ConfigError):
        SweepSpec(alphas=(0.0,))
    with pytest.raises(ConfigError):
        SweepSpec(alphas=(0.6,))
    with pytest.raises(ConfigError):
        SweepSpec(schemes=("otp",))
    assert resolve_sweep("table1").alphas[0] == 0.01
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"alphas": [0.1], "seeds": [1, 2]}))
    assert resolve_sweep(str(path)).seeds == (1, 2)
    path.write_text(json.dumps({"alphas": [0.1], "bogus": 1}))
    with pytest.raises(ConfigError, match="unknown keys"):
        resolve_sweep(str(path))


def test_presets_and_groups_resolve():
    for g, names in GROUPS.items():
        assert [s.name for s in resolve(g, seed=4)] == [PRESETS[n]().name for n in names]
        assert all(s.seed == 4 for s in resolve(g, seed=4))
    with pytest.raises(ConfigError, match="unknown scenario"):
        resolve("nope")


def test_scenario_config_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({
        "name": "custom", "scheme": "aes128_ctr",
        "source": {"type": "ge", "alpha": 0.1}, "seed": 7,
        "mine": {"hidden": [10, 10], "epochs": 2},
    }))
    scn = load_scenario_file(path)
    assert scn.source.alpha == 0.1 and scn.mine["hidden"] == (10, 10)
    assert resolve(str(path))[0].seed == 7
    path.write_text(json.dumps({"name": "x", "shceme": "otp"}))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_scenario_file(path)
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_scenario_file(path)


@pytest.mark.parametrize("bad", [
    {"name": "x", "scheme": "rot13"},
    {"name": "x", "source": {"type": "ge"}},
    {"name": "x", "source": {"type": "uniform", "alpha": 0.1}},
    {"name": "x", "source": {"type": "zipf"}},
    {"name": "x", "mine": {"input_dim": 3}},
    {"name": "x", "mine": {"lrr": 3}},
    {"name": "x", "probe_view": "fixed_message"},
    {"name": "x", "scheme": "spn", "msg_len": 8},
    {"scheme": "otp"},
])
def test_bad_scenarios(bad):
    with pytest.raises(ConfigError):
        scenario_from_dict(bad)


def test_scenario_to_dict_roundtrip():
    scn = PRESETS["aes128_ecb_ge"]()
    d = json.loads(json.dumps(scn.to_dict()))
    assert scenario_from_dict(d) == scn


def test_probe_defaults():
    rep_scn = PRESETS["probe"]()
    assert rep_scn.dx == 16 and rep_scn.dy == 128
    assert Scenario(name="p", source=SourceSpec("mixed_one_constant"), scheme="huncc",
                    n_links=8, probe_view="all_messages").dx == 128


def test_individual_secrecy_probe_small(monkeypatch):
    orig = harness.probe_scenario

    def small(*a, **k):
        return dataclasses.replace(orig(*a, **k), mine=dict(TINY))

    monkeypatch.setattr(harness, "probe_scenario", small)
    rep = harness.individual_secrecy_probe(n_samples=64, seed=1)
    assert rep.metadata["probe_view"] == "fixed_message"
    assert rep.config_echo["mine"]["input_dim"] == 144
    assert np.isfinite(rep.final_mi_nats)
