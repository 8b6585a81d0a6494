"""Scenario schema, experiment reports, file outputs, canned cases, CLI.

Byte-level expectations (CSV headers, summary.json layout, replay) are
pinned here because downstream tooling parses these files.
"""

import copy
import hashlib
import json
import math
import os

import numpy as np
import pytest

from residlab import cli
from residlab.attacks import ConstantAttack
from residlab.detection import tune_threshold
from residlab.errors import (
    HorizonZero,
    ParseError,
    SchemaError,
    UnknownCase,
    ValidationError,
)
from residlab.harness import (
    REPRODUCE_CASES,
    load_scenario,
    reproduce,
    run_calibration,
    run_experiment,
    scenario_from_dict,
)

_SCENARIO_DIR = os.path.abspath(
    os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")
)

_SHIPPED = (
    "constant_filtered.json",
    "hidden.json",
    "nominal_chi2.json",
    "yf_calibration.json",
    "yf_sinusoid.json",
    "zero_alarm.json",
)


def _shipped(name):
    return os.path.join(_SCENARIO_DIR, name)


def _doc(**overrides):
    """Fresh benchmark scenario document; overrides replace whole keys."""
    doc = {
        "model": {
            "A": [[0.0, 1.0], [-4.0, -20.0]],
            "B": [[0.0], [1.0]],
            "C": [[1.0, 0.0]],
            "K": [[1.0, 1.0]],
            "L": [[0.0], [2.0]],
            "noise_covariance": 2.0,
        },
        "tau": 0.001,
        "horizon": {"steps": 4000},
        "attack": {"type": "none"},
        "detector": {"type": "chi_squared", "false_alarm_rate": 0.05},
        "seed": 99,
    }
    doc.update(copy.deepcopy(overrides))
    return doc


class TestSchema:
    def test_minimal_document_parses(self):
        sc = scenario_from_dict(_doc())
        assert sc.name == "<dict>"
        assert sc.sha256 is None
        assert sc.tau == 0.001
        assert sc.steps == 4000
        assert sc.seed == 99
        assert sc.transient_discard == 0
        assert sc.x0 is None and sc.xhat0 is None
        assert sc.outputs.summary and not sc.outputs.trace
        assert sc.raw["seed"] == 99

    def test_unknown_top_level_key(self):
        doc = _doc()
        doc["omega"] = 1.0
        with pytest.raises(SchemaError, match="omega: unknown key"):
            scenario_from_dict(doc)

    def test_missing_required_key(self):
        doc = _doc()
        del doc["detector"]
        with pytest.raises(SchemaError, match="detector: missing required"):
            scenario_from_dict(doc)

    def test_tau_must_be_positive(self):
        with pytest.raises(ValidationError, match="tau"):
            scenario_from_dict(_doc(tau=-1.0))
        with pytest.raises(ValidationError, match="tau"):
            scenario_from_dict(_doc(tau=0.0))

    def test_tau_must_be_numeric(self):
        with pytest.raises(SchemaError, match="tau: expected a number"):
            scenario_from_dict(_doc(tau="fast"))

    def test_horizon_exactly_one_of_steps_and_seconds(self):
        with pytest.raises(SchemaError, match="exactly one"):
            scenario_from_dict(_doc(horizon={"steps": 10, "seconds": 1.0}))
        with pytest.raises(SchemaError, match="exactly one"):
            scenario_from_dict(_doc(horizon={}))

    def test_horizon_seconds_resolve_by_rounding(self):
        sc = scenario_from_dict(_doc(horizon={"seconds": 2.0}))
        assert sc.steps == 2000
        sc = scenario_from_dict(_doc(horizon={"seconds": 0.0015}))
        assert sc.steps == 2

    def test_horizon_must_be_positive(self):
        with pytest.raises(ValidationError, match="seconds"):
            scenario_from_dict(_doc(horizon={"seconds": -3.0}))
        with pytest.raises(ValidationError, match="steps"):
            scenario_from_dict(_doc(horizon={"steps": 0}))

    def test_unknown_attack_type(self):
        with pytest.raises(SchemaError, match="attack.type"):
            scenario_from_dict(_doc(attack={"type": "ramp"}))

    def test_unknown_attack_parameter_carries_path(self):
        bad = {"type": "constant", "lvel": 1.0}
        with pytest.raises(SchemaError, match="attack.lvel: unknown key"):
            scenario_from_dict(_doc(attack=bad))

    def test_none_attack_takes_no_parameters(self):
        with pytest.raises(SchemaError, match="attack.level"):
            scenario_from_dict(_doc(attack={"type": "none", "level": 1.0}))

    def test_attack_parameters_reach_the_constructor(self):
        doc = _doc(attack={"type": "constant", "level": 2.5, "start_time": 3.0})
        attack = scenario_from_dict(doc).attack
        assert isinstance(attack, ConstantAttack)
        assert attack.level == 2.5
        assert attack.start_time == 3.0

    def test_unknown_detector_type_and_parameter(self):
        with pytest.raises(SchemaError, match="detector.type"):
            scenario_from_dict(_doc(detector={"type": "cusum"}))
        bad = {"type": "chi_squared", "omega_c": 12.0}
        with pytest.raises(SchemaError, match="detector.omega_c"):
            scenario_from_dict(_doc(detector=bad))

    def test_detector_config_violations_become_validation_errors(self):
        both = {"type": "chi_squared", "false_alarm_rate": 0.05, "alpha": 3.8}
        with pytest.raises(ValidationError, match="detector"):
            scenario_from_dict(_doc(detector=both))
        neither = {"type": "filtered_chi_squared", "omega_c": 12.0}
        with pytest.raises(ValidationError, match="detector"):
            scenario_from_dict(_doc(detector=neither))

    def test_attack_construction_errors_become_validation_errors(self):
        bad = {"type": "zero_alarm", "fraction": 1.5}
        with pytest.raises(ValidationError, match="attack"):
            scenario_from_dict(_doc(attack=bad))

    def test_unstable_model_is_rejected_with_prefix(self):
        doc = _doc()
        doc["model"]["K"] = [[5.0, 0.0]]
        with pytest.raises(ValidationError, match="model"):
            scenario_from_dict(doc)

    def test_model_block_requires_every_matrix(self):
        doc = _doc()
        del doc["model"]["L"]
        with pytest.raises(SchemaError, match="model.L: missing required"):
            scenario_from_dict(doc)

    def test_seed_bounds(self):
        with pytest.raises(SchemaError, match="seed"):
            scenario_from_dict(_doc(seed=-1))
        with pytest.raises(SchemaError, match="seed"):
            scenario_from_dict(_doc(seed=2**64))
        assert scenario_from_dict(_doc(seed=2**64 - 1)).seed == 2**64 - 1

    def test_seed_is_optional(self):
        doc = _doc()
        del doc["seed"]
        assert scenario_from_dict(doc).seed is None

    def test_transient_discard_validation(self):
        with pytest.raises(ValidationError, match="transient_discard"):
            scenario_from_dict(_doc(transient_discard=-1))
        with pytest.raises(ValidationError, match="exceeds"):
            scenario_from_dict(_doc(transient_discard=4001))
        # Equal to the horizon parses; run_experiment is what refuses it.
        sc = scenario_from_dict(_doc(transient_discard=4000))
        assert sc.transient_discard == 4000

    def test_default_discard_covers_the_filter_warm_up(self):
        det = {"type": "filtered_chi_squared", "false_alarm_rate": 0.05,
               "omega_c": 12.0}
        sc = scenario_from_dict(_doc(detector=det))
        assert sc.transient_discard == math.ceil(10.0 / (12.0 * 0.001))
        assert sc.transient_discard == 834

    def test_default_discard_skipped_when_run_is_too_short(self):
        det = {"type": "filtered_chi_squared", "false_alarm_rate": 0.05,
               "omega_c": 12.0}
        sc = scenario_from_dict(_doc(detector=det, horizon={"steps": 500}))
        assert sc.transient_discard == 0

    def test_default_discard_zero_for_unfiltered(self):
        assert scenario_from_dict(_doc()).transient_discard == 0

    def test_initial_state_shape(self):
        with pytest.raises(ValidationError, match="x0"):
            scenario_from_dict(_doc(x0=[0.1]))
        sc = scenario_from_dict(_doc(x0=[0.1, -0.2], xhat0=[0.0, 0.0]))
        assert np.array_equal(sc.x0, [0.1, -0.2])
        assert np.array_equal(sc.xhat0, [0.0, 0.0])

    def test_outputs_validation(self):
        with pytest.raises(SchemaError, match="outputs.trace"):
            scenario_from_dict(_doc(outputs={"trace": 1}))
        with pytest.raises(SchemaError, match="outputs.plots"):
            scenario_from_dict(_doc(outputs={"plots": True}))
        sc = scenario_from_dict(_doc(outputs={"raw": True, "summary": False}))
        assert sc.outputs.raw and not sc.outputs.summary


class TestLoadScenario:
    def test_every_shipped_scenario_loads(self):
        names = sorted(os.listdir(_SCENARIO_DIR))
        assert names == sorted(_SHIPPED)
        for name in names:
            sc = load_scenario(_shipped(name))
            assert sc.name == name
            assert len(sc.sha256) == 64
            assert sc.seed is not None

    def test_sha256_is_over_the_raw_bytes(self, tmp_path):
        path = tmp_path / "sc.json"
        text = json.dumps(_doc())
        path.write_text(text, encoding="utf-8")
        sc = load_scenario(str(path))
        assert sc.sha256 == hashlib.sha256(text.encode()).hexdigest()
        assert sc.name == "sc.json"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            load_scenario(str(tmp_path / "absent.json"))

    def test_malformed_json_reports_line_and_column(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"tau": }\n', encoding="utf-8")
        with pytest.raises(ParseError, match=r"bad\.json:1:9: Expecting value"):
            load_scenario(str(path))

    def test_non_utf8_bytes(self, tmp_path):
        path = tmp_path / "latin.json"
        path.write_bytes(b'{"tau": 0.001\xff}')
        with pytest.raises(ParseError, match="not valid UTF-8"):
            load_scenario(str(path))


class TestRunExperiment:
    def test_report_fields_small_run(self):
        report = run_experiment(scenario_from_dict(_doc()))
        assert report.scenario == "<dict>"
        assert report.seed == 99
        assert report.engine in ("numba", "python")
        assert report.detector == "chi_squared"
        assert report.attack == "none"
        assert report.steps == 4000
        assert report.counted == 4000
        assert report.threshold == tune_threshold(0.05, 1)
        assert 0.02 <= report.alarm_rate <= 0.09
        assert abs(report.z_mean - 1.0) < 0.15
        assert set(report.z_quantiles) == {"p50", "p90", "p95", "p99"}
        assert report.z_quantiles["p50"] < report.z_quantiles["p99"] <= report.z_max

    def test_report_lines_inventory(self):
        report = run_experiment(scenario_from_dict(_doc()))
        lines = report.to_lines()
        keys = [line.split("=", 1)[0] for line in lines]
        assert keys == [
            "scenario", "sha256", "seed", "engine", "detector", "attack",
            "steps", "tau", "transient_discard", "counted", "threshold",
            "alarm_rate", "z_mean", "z_var", "z_max",
            "z_p50", "z_p90", "z_p95", "z_p99",
        ]
        assert f"threshold={tune_threshold(0.05, 1)!r}" in lines

    def test_seed_must_come_from_somewhere(self):
        doc = _doc()
        del doc["seed"]
        sc = scenario_from_dict(doc)
        with pytest.raises(SchemaError, match="no seed"):
            run_experiment(sc)
        assert run_experiment(sc, seed=7).seed == 7

    def test_seed_override_beats_the_file(self):
        sc = scenario_from_dict(_doc())
        base = run_experiment(sc)
        same = run_experiment(sc, seed=99)
        other = run_experiment(sc, seed=100)
        assert same.to_lines() == base.to_lines()
        assert other.z_mean != base.z_mean

    def test_discard_equal_to_horizon_refused_at_run_time(self):
        sc = scenario_from_dict(_doc(transient_discard=4000))
        with pytest.raises(HorizonZero):
            run_experiment(sc)

    def test_engine_override(self):
        rep = run_experiment(scenario_from_dict(_doc()), engine="python")
        assert rep.engine == "python"

    def test_long_run_streams_statistics(self):
        sc = scenario_from_dict(_doc(horizon={"steps": 2_000_001}))
        report = run_experiment(sc)
        assert report.z_quantiles is None
        assert report.counted == 2_000_001
        assert abs(report.alarm_rate - 0.05) < 0.002
        # The Euler loop carries an O(tau * |A - LC|) covariance bias, so
        # the sample mean sits a percent or two under the ideal value.
        assert abs(report.z_mean - 1.0) < 0.03

    def test_zero_alarm_scenario_never_fires(self):
        report = run_experiment(load_scenario(_shipped("zero_alarm.json")))
        assert report.alarm_rate == 0.0
        assert report.z_max < report.threshold

    def test_filtered_detector_sees_the_constant_attack_better(self):
        filtered = run_experiment(load_scenario(_shipped("constant_filtered.json")))
        doc = _doc(
            horizon={"seconds": 20.0},
            attack={"type": "constant", "level": 1.0, "start_time": 10.0},
            transient_discard=834,
            seed=20250822,
        )
        plain = run_experiment(scenario_from_dict(doc))
        assert filtered.alarm_rate > plain.alarm_rate

    def test_replay_writes_byte_identical_outputs(self, tmp_path):
        sc = load_scenario(_shipped("nominal_chi2.json"))
        d1, d2 = tmp_path / "a", tmp_path / "b"
        run_experiment(sc, out_dir=str(d1))
        run_experiment(sc, out_dir=str(d2))
        for name in ("trace.csv", "histogram.csv", "summary.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
        assert not (d1 / "z_samples.csv").exists()

    def test_different_seed_changes_the_summary(self, tmp_path):
        sc = load_scenario(_shipped("nominal_chi2.json"))
        d1, d2 = tmp_path / "a", tmp_path / "b"
        run_experiment(sc, out_dir=str(d1))
        run_experiment(sc, out_dir=str(d2), seed=1)
        assert (d1 / "summary.json").read_bytes() != (d2 / "summary.json").read_bytes()

    def test_trace_csv_layout(self, tmp_path):
        doc = _doc(horizon={"steps": 50}, outputs={"trace": True})
        run_experiment(scenario_from_dict(doc), out_dir=str(tmp_path))
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == (
            "k,t,x0,x1,xhat0,xhat1,y0,delta0,ybar0,r0,rho0,yf,z,alarm"
        )
        assert len(lines) == 51
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == repr(0.0)
        cols = {name: i for i, name in enumerate(lines[0].split(","))}
        for row_text in lines[1:]:
            row = row_text.split(",")
            assert row[cols["rho0"]] == ""
            assert row[cols["yf"]] == ""
            assert row[cols["alarm"]] in ("0", "1")
            # z must be the squared residual over the loop's r variance.
            z = float(row[cols["z"]])
            r0 = float(row[cols["r0"]])
            assert z == pytest.approx(r0 * r0 * 30.0 / 61.0, rel=1e-9)
        ks = [int(line.split(",", 1)[0]) for line in lines[1:]]
        assert ks == list(range(50))

    def test_filtered_trace_fills_the_rho_column(self, tmp_path):
        det = {"type": "filtered_chi_squared", "false_alarm_rate": 0.05,
               "omega_c": 12.0}
        doc = _doc(horizon={"steps": 40}, detector=det,
                   outputs={"trace": True}, transient_discard=0)
        run_experiment(scenario_from_dict(doc), out_dir=str(tmp_path))
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        cols = {name: i for i, name in enumerate(lines[0].split(","))}
        row = lines[5].split(",")
        assert row[cols["rho0"]] != ""
        float(row[cols["rho0"]])
        assert row[cols["yf"]] == ""

    def test_switching_trace_fills_the_yf_column(self, tmp_path):
        doc = _doc(horizon={"steps": 40},
                   detector={"type": "yf_threshold", "omega_c": 12.0},
                   outputs={"trace": True})
        doc["model"]["noise_covariance"] = 0.0
        run_experiment(scenario_from_dict(doc), out_dir=str(tmp_path))
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        cols = {name: i for i, name in enumerate(lines[0].split(","))}
        row = lines[5].split(",")
        assert row[cols["yf"]] != ""
        assert row[cols["rho0"]] == ""
        assert float(row[cols["z"]]) == abs(float(row[cols["yf"]]))

    def test_histogram_csv(self, tmp_path):
        doc = _doc(outputs={"histogram": True})
        run_experiment(scenario_from_dict(doc), out_dir=str(tmp_path))
        lines = (tmp_path / "histogram.csv").read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,count"
        assert len(lines) == 201
        total = sum(int(line.split(",")[2]) for line in lines[1:])
        assert total == 4000
        lefts = [float(line.split(",")[0]) for line in lines[1:]]
        assert lefts == sorted(lefts)

    def test_raw_samples_csv(self, tmp_path):
        doc = _doc(horizon={"steps": 300}, outputs={"raw": True},
                   transient_discard=100)
        run_experiment(scenario_from_dict(doc), out_dir=str(tmp_path))
        lines = (tmp_path / "z_samples.csv").read_text().splitlines()
        assert lines[0] == "z"
        assert len(lines) == 201
        for line in lines[1:]:
            assert float(line) >= 0.0

    def test_summary_json_is_reproducible_from_the_report(self, tmp_path):
        sc = scenario_from_dict(_doc(outputs={"summary": True}))
        report = run_experiment(sc, out_dir=str(tmp_path))
        text = (tmp_path / "summary.json").read_text()
        expected = json.dumps(
            {"report": report.to_dict(), "scenario": sc.raw},
            indent=2, sort_keys=True,
        ) + "\n"
        assert text == expected
        parsed = json.loads(text)
        assert parsed["report"]["alarm_rate"] == report.alarm_rate
        assert parsed["scenario"]["seed"] == 99

    def test_no_out_dir_writes_nothing(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run_experiment(scenario_from_dict(_doc(outputs={"trace": True})))
        assert os.listdir(tmp_path) == []


class TestAlarmRateScaling:
    """Quadrupling the horizon should halve the spread of the rate estimate."""

    def test_ci_width_halves_from_1e5_to_4e5_steps(self):
        spreads = {}
        for steps in (100_000, 400_000):
            doc = _doc(horizon={"steps": steps}, transient_discard=1000)
            rates = [
                run_experiment(scenario_from_dict(doc), seed=5000 + s).alarm_rate
                for s in range(30)
            ]
            spreads[steps] = np.std(rates, ddof=1)
            assert abs(np.mean(rates) - 0.05) < 0.005
        ratio = spreads[100_000] / spreads[400_000]
        assert 1.5 <= ratio <= 2.7


class TestRunCalibration:
    def test_rejects_non_switching_detectors(self):
        sc = scenario_from_dict(_doc())
        with pytest.raises(ValidationError, match="yf_threshold"):
            run_calibration(sc, 1.0)

    def test_shipped_calibration_scenario(self):
        sc = load_scenario(_shipped("yf_calibration.json"))
        alpha_f, lines = run_calibration(sc, 5.0)
        assert alpha_f == pytest.approx(1.5758570485, rel=1e-6)
        keys = [line.split("=", 1)[0] for line in lines]
        assert keys == [
            "scenario", "sha256", "seed", "settle_seconds",
            "duration_seconds", "samples_used", "alpha_f",
        ]
        assert lines[0] == "scenario=yf_calibration.json"
        assert "seed=11" in lines
        assert "settle_seconds=5.0" in lines
        assert "samples_used=49999" in lines
        assert lines[-1] == f"alpha_f={alpha_f!r}"

    def test_seed_required_here_too(self):
        doc = _doc(detector={"type": "yf_threshold", "omega_c": 12.0})
        del doc["seed"]
        with pytest.raises(SchemaError, match="no seed"):
            run_calibration(scenario_from_dict(doc), 1.0)


class TestReproduce:
    def test_unknown_case(self, tmp_path):
        with pytest.raises(UnknownCase, match="unknown case"):
            reproduce("fig9", str(tmp_path))

    def test_case_inventory(self):
        assert REPRODUCE_CASES == (
            "fig1_cdf", "fig2_pdf", "fig3_residuals", "tuning_table"
        )

    def test_tuning_table(self, tmp_path):
        lines = reproduce("tuning_table", str(tmp_path))
        assert lines[0] == "case=tuning_table"
        assert sum(1 for line in lines if line.endswith("ok=true")) == 2
        assert any(line.startswith("engine=") for line in lines)
        assert "file=tuning_table.csv" in lines
        report = (tmp_path / "report.txt").read_text()
        assert report == "\n".join(lines) + "\n"
        table = (tmp_path / "tuning_table.csv").read_text().splitlines()
        assert table[0] == "false_alarm_rate,sensors,threshold"
        assert len(table) == 13
        row = dict()
        for line in table[1:]:
            rate, p, alpha = line.split(",")
            row[(rate, p)] = float(alpha)
        assert row[("0.05", "1")] == pytest.approx(3.8414588206928784, abs=1e-12)
        assert row[("0.05", "2")] == pytest.approx(-2.0 * math.log(0.05), abs=1e-9)

    def test_fig1_cdf(self, tmp_path):
        lines = reproduce("fig1_cdf", str(tmp_path))
        joined = "\n".join(lines)
        assert "cdf_gap_at_threshold_filtered=" in joined
        assert "target=filtered gap exceeds unfiltered gap ok=true" in joined
        gaps = {}
        for line in lines:
            for which in ("unfiltered", "filtered"):
                prefix = f"cdf_gap_at_threshold_{which}="
                if line.startswith(prefix):
                    gaps[which] = float(line[len(prefix):])
        assert gaps["filtered"] > gaps["unfiltered"]
        csv_lines = (tmp_path / "fig1_cdf.csv").read_text().splitlines()
        assert csv_lines[0] == (
            "z,unfiltered_nominal,unfiltered_attack,"
            "filtered_nominal,filtered_attack"
        )
        assert len(csv_lines) == 401
        last = [float(v) for v in csv_lines[-1].split(",")]
        assert all(0.0 <= v <= 1.0 for v in last[1:])

    def test_fig2_pdf(self, tmp_path):
        lines = reproduce("fig2_pdf", str(tmp_path))
        assert any(
            line.startswith("target=nominal z mean near sensor count 1 ok=true")
            for line in lines
        )
        csv_lines = (tmp_path / "fig2_pdf.csv").read_text().splitlines()
        assert len(csv_lines) == 201
        assert csv_lines[0].startswith("z_unfiltered_nominal,pdf_unfiltered_nominal")

    def test_fig3_residuals(self, tmp_path):
        lines = reproduce("fig3_residuals", str(tmp_path))
        oks = [line for line in lines if line.endswith("ok=true")]
        assert len(oks) == 2
        for name in ("fig3_constant.csv", "fig3_sinusoid.csv"):
            body = (tmp_path / name).read_text().splitlines()
            assert body[0] == "t,yf,yf_predicted"
            assert len(body) == 30001
        steady = next(
            float(line.split("=", 1)[1]) for line in lines
            if line.startswith("steady_yf_constant=")
        )
        assert steady == pytest.approx(0.4, rel=0.02)


class TestCli:
    def test_tune_prints_the_bare_threshold(self, capsys):
        code = cli.main(["tune", "--false-alarm-rate", "0.05", "--sensors", "1"])
        assert code == 0
        assert capsys.readouterr().out == "3.8414588206928784\n"

    def test_tune_rejects_out_of_range_rate(self, capsys):
        code = cli.main(["tune", "--false-alarm-rate", "1.5", "--sensors", "1"])
        assert code == 3
        assert capsys.readouterr().err.startswith("error:")

    def test_tune_missing_flag_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["tune", "--sensors", "1"])
        assert exc.value.code == 2

    def test_unknown_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["explode"])
        assert exc.value.code == 2

    def test_seed_flag_must_be_u64(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([
                "simulate", "--scenario", _shipped("nominal_chi2.json"),
                "--seed", "-1",
            ])
        assert exc.value.code == 2

    def test_simulate_prints_the_report_and_writes_files(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = cli.main([
            "simulate", "--scenario", _shipped("nominal_chi2.json"),
            "--seed", "5", "--trace", str(out),
        ])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "scenario=nominal_chi2.json"
        assert "seed=5" in lines
        assert (out / "trace.csv").exists()
        assert (out / "histogram.csv").exists()
        assert (out / "summary.json").exists()

    def test_simulate_missing_scenario_exits_2(self, tmp_path, capsys):
        code = cli.main([
            "simulate", "--scenario", str(tmp_path / "nope.json"),
        ])
        assert code == 2
        assert "cannot read" in capsys.readouterr().err

    def test_simulate_malformed_scenario_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        assert cli.main(["simulate", "--scenario", str(path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_simulate_unstable_model_exits_3(self, tmp_path, capsys):
        doc = _doc()
        doc["model"]["L"] = [[-1.0], [0.0]]
        path = tmp_path / "unstable.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        assert cli.main(["simulate", "--scenario", str(path)]) == 3
        assert "A-LC" in capsys.readouterr().err

    def test_calibrate_af_prints_the_threshold(self, tmp_path, capsys):
        doc = _doc(
            detector={"type": "yf_threshold", "omega_c": 12.0},
            horizon={"seconds": 10.0},
            seed=3,
        )
        doc["model"]["noise_covariance"] = 0.001
        path = tmp_path / "cal.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        code = cli.main([
            "calibrate-af", "--scenario", str(path), "--settle", "2.0",
        ])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "scenario=cal.json"
        assert "samples_used=7999" in lines
        value = float(lines[-1].split("=", 1)[1])
        assert 0.0 < value < 5.0

    def test_calibrate_af_wrong_detector_exits_3(self, capsys):
        code = cli.main([
            "calibrate-af", "--scenario", _shipped("nominal_chi2.json"),
            "--settle", "2.0",
        ])
        assert code == 3
        assert "yf_threshold" in capsys.readouterr().err

    def test_reproduce_runs_a_case(self, tmp_path, capsys):
        code = cli.main([
            "reproduce", "--case", "tuning_table", "--out", str(tmp_path),
        ])
        assert code == 0
        assert "case=tuning_table" in capsys.readouterr().out
        assert (tmp_path / "report.txt").exists()

    def test_reproduce_unknown_case_exits_2(self, tmp_path, capsys):
        code = cli.main(["reproduce", "--case", "fig9", "--out", str(tmp_path)])
        assert code == 2
        assert "unknown case" in capsys.readouterr().err
