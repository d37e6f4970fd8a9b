"""Config validation, run-spec resolution, and the command-line interface."""

import json

import pytest

from racksim.cli import main
from racksim.config import ConfigError, ExperimentConfig
from racksim.runner import CSV_COLUMNS

from conftest import CONFIG_DIR


def base_raw(**over):
    raw = {
        "workload": {"service": {"kind": "exponential", "mean_us": 50.0}},
        "policy": {"kind": "shortest"},
    }
    raw.update(over)
    return raw


def parse(**over):
    return ExperimentConfig.from_dict(base_raw(**over))


class TestDefaults:
    def test_minimal_config_defaults(self):
        exp = parse()
        assert exp.n_servers == 8 and exp.workers == [8] * 8
        assert exp.clients == 4 and exp.gap_us == 1.0
        assert exp.tracking == "int1" and exp.intra_kind == "cfcfs"
        assert (exp.rt_stages, exp.rt_slots, exp.rt_ttl_us) == (4, 16384, 100000.0)
        assert exp.budget.max_stages == 12
        assert exp.loads == [0.5] and exp.seeds == [1]
        assert exp.warmup_fraction == 0.1

    def test_capacity_is_total_workers_over_mean_service(self):
        exp = parse()
        assert exp.capacity_rps == pytest.approx(64 / 50.0 * 1e6)

    def test_capacity_weights_class_means(self):
        exp = parse(workload={"classes": [
            {"tag": "s", "weight": 1.0,
             "service": {"kind": "deterministic", "mean_us": 20.0}},
            {"tag": "l", "weight": 3.0,
             "service": {"kind": "deterministic", "mean_us": 60.0}},
        ]})
        assert exp.capacity_rps == pytest.approx(64 / 50.0 * 1e6)

    def test_capacity_counts_only_initially_active_servers(self):
        exp = parse(servers={"count": 4, "workers": 8,
                             "initial_active": [0, 2]})
        assert exp.capacity_rps == pytest.approx(16 / 50.0 * 1e6)


class TestRejection:
    def check(self, match, **over):
        with pytest.raises(ConfigError, match=match):
            parse(**over)

    def test_unknown_key_carries_dotted_path(self):
        self.check(r"workload\.servcie",
                   workload={"servcie": {"kind": "exponential", "mean_us": 1}})

    def test_unknown_nested_variant_key(self):
        raw = base_raw()
        del raw["policy"]
        raw["policies"] = {"a": {"kind": "shortest", "knid": 1}}
        with pytest.raises(ConfigError, match=r"policies\.a\.knid"):
            ExperimentConfig.from_dict(raw)

    def test_mixture_probabilities_must_sum_to_one(self):
        self.check("sum to 1", workload={"service": {
            "kind": "bimodal", "modes": [[0.5, 10.0], [0.6, 100.0]]}})

    def test_trimodal_needs_three_modes(self):
        self.check("exactly 3", workload={"service": {
            "kind": "trimodal", "modes": [[0.5, 10.0], [0.5, 100.0]]}})

    def test_mixture_rejects_explicit_mean(self):
        self.check("mean is implied", workload={"service": {
            "kind": "bimodal", "mean_us": 55.0,
            "modes": [[0.9, 50.0], [0.1, 100.0]]}})

    def test_policy_exceeding_pipeline_budget(self):
        self.check("pipeline stages", pipeline={"max_stages": 1})

    def test_sampling_width_bounded_by_servers(self):
        self.check(r"policy\.k", policy={"kind": "sampling", "k": 64})

    def test_locality_under_global_baseline(self):
        self.check("locality",
                   locality_sets={"west": [0, 1]},
                   workload={"classes": [
                       {"tag": "a", "locality": "west",
                        "service": {"kind": "exponential", "mean_us": 50.0}}]},
                   policy={"kind": "global-cfcfs"})

    def test_fault_timeline_under_client_baseline(self):
        self.check("switch-based dispatch",
                   policy={"kind": "client"},
                   timeline=[{"kind": "switch_fail", "at_us": 100.0,
                              "duration_us": 50.0}])

    def test_client_count_override_with_wfq_weights(self):
        raw = base_raw(intra={"kind": "wfq", "wfq_weights": [1, 1, 1, 1]})
        del raw["policy"]
        raw["policies"] = {"c": {"kind": "client", "clients": 100}}
        with pytest.raises(ConfigError, match="wfq"):
            ExperimentConfig.from_dict(raw)

    def test_jbsq_with_piggyback_tracking(self):
        self.check("jbsq", policy={"kind": "jbsq"},
                   tracking={"kind": "int3"})

    def test_clients_override_only_for_client_kind(self):
        self.check("only valid", policy={"kind": "shortest", "clients": 10})

    def test_duplicate_class_tags(self):
        svc = {"kind": "exponential", "mean_us": 50.0}
        self.check("duplicate", workload={"classes": [
            {"tag": "a", "service": svc}, {"tag": "a", "service": svc}]})

    def test_service_and_classes_are_exclusive(self):
        svc = {"kind": "exponential", "mean_us": 50.0}
        self.check("exactly one", workload={
            "service": svc, "classes": [{"tag": "a", "service": svc}]})

    def test_unknown_locality_name(self):
        self.check("unknown locality", workload={"classes": [
            {"tag": "a", "locality": "nowhere",
             "service": {"kind": "exponential", "mean_us": 50.0}}]})

    def test_reserved_locality_name(self):
        self.check("reserved", locality_sets={"all": [0, 1]})

    def test_workers_list_length(self):
        self.check(r"servers\.workers",
                   servers={"count": 4, "workers": [8, 8]})

    def test_non_integer_seed(self):
        self.check(r"seeds\[0\]", sweep={"seeds": [1.5]})


class TestRunSpec:
    def test_global_variant_collapses_to_pooled_server(self):
        exp = parse(policy={"kind": "global-ps"},
                    intra={"kind": "cfcfs"})
        spec = exp.build_runspec("default", 0.5, 1)
        assert spec.n_servers == 1 and spec.workers == [64]
        assert spec.policy_kind == "hash" and spec.intra_kind == "ps"
        assert spec.loc_sets == [[0]] and not spec.client_mode

    def test_global_cfcfs_forces_fcfs_discipline(self):
        exp = parse(policy={"kind": "global-cfcfs"}, intra={"kind": "ps"})
        assert exp.build_runspec("default", 0.5, 1).intra_kind == "cfcfs"

    def test_client_variant_samples_at_clients(self):
        exp = parse(policy={"kind": "client", "k": 2, "clients": 100})
        spec = exp.build_runspec("default", 0.5, 1)
        assert spec.client_mode and spec.policy_kind == "sampling"
        assert spec.clients == 100 and spec.n_servers == 8

    def test_rate_scales_with_load(self):
        exp = parse()
        spec = exp.build_runspec("default", 0.5, 1)
        assert spec.rate_rps == pytest.approx(0.5 * exp.capacity_rps)

    def test_points_order_is_variant_load_seed(self):
        raw = base_raw(sweep={"loads": [0.5, 0.7], "seeds": [1, 2]})
        del raw["policy"]
        raw["policies"] = {"a": {"kind": "shortest"}, "b": {"kind": "random"}}
        exp = ExperimentConfig.from_dict(raw)
        assert list(exp.points()) == [
            ("a", 0.5, 1), ("a", 0.5, 2), ("a", 0.7, 1), ("a", 0.7, 2),
            ("b", 0.5, 1), ("b", 0.5, 2), ("b", 0.7, 1), ("b", 0.7, 2)]

    def test_sha_ignores_key_order_but_not_values(self):
        a = ExperimentConfig.from_dict(
            {"policy": {"kind": "shortest"},
             "workload": {"service": {"kind": "exponential", "mean_us": 50.0}}})
        b = parse()
        assert a.config_sha256 == b.config_sha256
        c = parse(sweep={"loads": [0.6]})
        assert c.config_sha256 != b.config_sha256

    def test_timeline_sorted_by_time(self):
        exp = parse(timeline=[
            {"kind": "set_load", "at_us": 500.0, "load": 0.2},
            {"kind": "switch_fail", "at_us": 100.0, "duration_us": 10.0}])
        assert [ev["at_us"] for ev in exp.timeline] == [100.0, 500.0]


# -- command line ----------------------------------------------------------------


TINY = {
    "name": "tiny",
    "servers": {"count": 2, "workers": 2},
    "workload": {"service": {"kind": "exponential", "mean_us": 20.0}},
    "policy": {"kind": "shortest"},
    "sweep": {"loads": [0.5], "seeds": [1], "requests_per_point": 2000},
}


def write_config(tmp_path, raw, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


class TestCli:
    def test_validate_accepts_every_shipped_config(self, capsys):
        configs = sorted(CONFIG_DIR.glob("*.json"))
        assert len(configs) >= 12
        for cfg in configs:
            assert main(["validate", str(cfg)]) == 0
            out = capsys.readouterr().out
            assert "ok" in out and "capacity" in out

    def test_validate_rejects_bad_config(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_raw(pipeline={"max_stages": 1}))
        with pytest.raises(SystemExit) as exc:
            main(["validate", cfg])
        assert exc.value.code == 1
        assert "pipeline stages" in capsys.readouterr().err

    def test_validate_rejects_non_json(self, tmp_path, capsys):
        path = tmp_path / "junk.json"
        path.write_text("{nope")
        with pytest.raises(SystemExit):
            main(["validate", str(path)])
        assert "not valid JSON" in capsys.readouterr().err

    def test_run_writes_csv_with_exact_schema(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        assert main(["run", cfg, "--out", str(tmp_path / "r1"), "--quiet"]) == 0
        printed = capsys.readouterr().out.splitlines()
        csvs = [p for p in printed if p.endswith(".csv")]
        assert len(csvs) == 1
        header, *rows = open(csvs[0]).read().splitlines()
        assert header == ",".join(CSV_COLUMNS)
        assert rows, "expected at least one data row"
        first = rows[0].split(",")
        assert first[0] == "0.5" and first[3] == "all" and first[-1] == "1"

    def test_run_is_deterministic_across_invocations(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        bodies = []
        for sub in ("a", "b"):
            main(["run", cfg, "--out", str(tmp_path / sub), "--quiet"])
            printed = capsys.readouterr().out.splitlines()
            csvs = [p for p in printed if p.endswith(".csv")]
            bodies.append(open(csvs[0], "rb").read())
        assert bodies[0] == bodies[1]

    def test_run_writes_manifest(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        main(["run", cfg, "--out", str(tmp_path / "r"), "--quiet"])
        printed = capsys.readouterr().out.splitlines()
        manifest = [p for p in printed if p.endswith("manifest.txt")]
        assert manifest and "tiny" in open(manifest[0]).read()

    def test_compare_identical_results(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        main(["run", cfg, "--out", str(tmp_path / "r"), "--quiet"])
        csvs = [p for p in capsys.readouterr().out.splitlines()
                if p.endswith(".csv")]
        assert main(["compare", csvs[0], csvs[0]]) == 0
        out = capsys.readouterr().out
        assert "mean p99 ratio (candidate/baseline): 1.000" in out

    def test_compare_rejects_grid_mismatch(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        other = dict(TINY, sweep={"loads": [0.6], "seeds": [1],
                                  "requests_per_point": 2000})
        cfg2 = write_config(tmp_path, other, name="exp2.json")
        main(["run", cfg, "--out", str(tmp_path / "r1"), "--quiet"])
        a = [p for p in capsys.readouterr().out.splitlines()
             if p.endswith(".csv")][0]
        main(["run", cfg2, "--out", str(tmp_path / "r2"), "--quiet"])
        b = [p for p in capsys.readouterr().out.splitlines()
             if p.endswith(".csv")][0]
        assert main(["compare", a, b]) == 2
        assert "grids do not match" in capsys.readouterr().err

    def test_compare_rejects_missing_columns(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("foo,bar\n1,2\n")
        with pytest.raises(SystemExit) as exc:
            main(["compare", str(bad), str(bad)])
        assert exc.value.code == 2
