import json
import re

import numpy as np
import pytest
import yaml

from platesim.cli import main
from platesim.config import SCENARIOS, build_initial_state, load_config, parse_config
from platesim.errors import ConfigError
from platesim.plots import emit_plots
from platesim.records import CSV_COLUMNS, RunRecord, read_csv, to_jsonable, write_csv
from platesim.scenarios import run_ladder, run_scenario


def _cfg(tmp_path, name="run.yaml", **sections):
    data = {
        "domain": {"dim": 1, "lengths": [1.0]},
        "resolution": {"modes": 8},
        "init": {"form": "z", "displacement": {"kind": "single_mode", "index": [1], "amplitude": 1e-2}},
        "scheme": {"kind": "etd2", "dt": 1e-2, "t_end": 0.2},
        "output": {"directory": str(tmp_path / "out"), "plots": False},
    }
    for key, value in sections.items():
        data[key] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_minimal_config_defaults():
    cfg = parse_config({"domain": {"dim": 1}, "init": {"kind": "single_mode", "index": [1], "amplitude": 1e-3}})
    assert cfg.modes == (32,)
    assert cfg.scheme.kind == "etd2" and cfg.scheme.dt == 1e-3
    assert cfg.params.stiffness.kind == "cubic" and cfg.params.omega == 1.0
    assert cfg.init_form == "w" and cfg.lengths == (1.0,)
    assert cfg.echo()["resolution"]["modes"] == 32


def test_negative_beta_names_the_key():
    with pytest.raises(ConfigError, match=r"params\.beta"):
        parse_config({"domain": {"dim": 1}, "params": {"beta": -1.0}})


def test_unknown_scenario_lists_valid_names():
    with pytest.raises(ConfigError) as err:
        parse_config({"domain": {"dim": 1}, "scenario": "nope"})
    for name in SCENARIOS:
        assert name in str(err.value)


@pytest.mark.parametrize(
    "data, where",
    [
        ({"domain": {"dim": 1}, "colour": 1}, "colour"),
        ({"domain": {"dim": 1}, "scheme": {"dtt": 1}}, "scheme.dtt"),
        ({"domain": {"dim": 1}, "init": {"kind": "single_mode", "amp": 1}}, "init.displacement.amp"),
        ({}, "domain"),
        ({"domain": {"dim": 3}}, "domain.dim"),
        ({"domain": {"dim": 1}, "resolution": {"dealias": 3}}, "resolution.dealias"),
        ({"domain": {"dim": 1}, "scheme": {"kind": "euler"}}, "scheme.kind"),
        ({"domain": {"dim": 2}, "init": {"kind": "single_mode", "index": [1]}}, "init.displacement.index"),
        ({"domain": {"dim": 1}, "stiffness": {"kind": "tabulated", "breakpoints": [[0, 1]]}}, "stiffness"),
    ],
)
def test_config_errors_carry_key_paths(data, where):
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    assert err.value.key.startswith(where)


def test_overrides_and_missing_file(tmp_path):
    path = _cfg(tmp_path)
    cfg = load_config(path, ["scheme.dt=5e-3", "params.omega=0", "stiffness.kind=constant"])
    assert cfg.scheme.dt == 5e-3 and cfg.params.omega == 0.0 and cfg.params.stiffness.kind == "constant"
    with pytest.raises(ConfigError):
        load_config(path, ["scheme.dt"])
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_w_form_is_reduced(tmp_path):
    cfg = load_config(_cfg(tmp_path), ["init.form=w"])
    s = build_initial_state(cfg)
    assert s.z.coeffs[0] == pytest.approx(np.pi**2 * 1e-2)


def test_random_init_is_seeded(tmp_path):
    path = _cfg(tmp_path, init={"form": "z", "displacement": {"kind": "random", "amplitude": 1e-3}})
    a = build_initial_state(load_config(path)).z.coeffs
    b = build_initial_state(load_config(path)).z.coeffs
    c = build_initial_state(load_config(path, ["seed=1"])).z.coeffs
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert abs(a[-1]) <= 1e-3 * 10 * (1 / 8) ** 4


def test_csv_header_and_roundtrip(tmp_path):
    rec = run_scenario(load_config(_cfg(tmp_path)))
    csv = rec.csv_path()
    assert csv.read_text().splitlines()[0] == "t,E1,E1_beta,E2,E3,X,min_a,boost_ratio,identity_residual_cum"
    data = read_csv(csv)
    assert tuple(data) == CSV_COLUMNS
    assert len(data["t"]) == rec.results["n_samples"] == 21
    for name in rec.manifest:
        assert (tmp_path / "out" / name).is_file()


def test_csv_uses_17_significant_digits(tmp_path):
    from platesim.energy import EnergyReport

    d = EnergyReport(0.1, 1 / 3, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, -1e-20)
    write_csv(tmp_path / "d.csv", [d])
    row = (tmp_path / "d.csv").read_text().splitlines()[1]
    assert row.startswith("0.10000000000000001,0.33333333333333331,1,")
    assert read_csv(tmp_path / "d.csv")["E1"][0] == 1 / 3


def test_reruns_are_byte_identical(tmp_path):
    path = _cfg(tmp_path, init={"form": "z", "displacement": {"kind": "random", "amplitude": 1e-2}})
    main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(path), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    ok = _cfg(tmp_path, "ok.yaml")
    assert main(["run", "--config", str(ok)]) == 0
    halt = _cfg(
        tmp_path,
        "halt.yaml",
        stiffness={"kind": "tabulated", "breakpoints": [[-10, 11], [10, -9]]},
        init={"form": "z", "velocity": {"kind": "single_mode", "index": [1], "amplitude": 5.0}},
        scenario="hyperbolicity_probe",
    )
    assert main(["run", "--config", str(halt), "--out", str(tmp_path / "h")]) == 2
    rec = RunRecord.load(tmp_path / "h" / "record.json")
    assert rec.halt_reason == "hyperbolicity_loss" and rec.results["min_a_final"] <= 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("domain: {dim: 1}\nparams: {beta: -1}\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "params.beta" in capsys.readouterr().out
    unstable = _cfg(tmp_path, "unstable.yaml", scheme={"kind": "rk4", "dt": 0.05, "t_end": 5.0})
    assert main(["run", "--config", str(unstable), "--out", str(tmp_path / "u")]) in (1, 2)
    assert main(["ladder", "--config", str(ok), "--halvings", "0"]) == 1


def test_solver_failure_exits_with_one(tmp_path):
    # a contraction that cannot converge in one iteration is a solver failure
    path = _cfg(
        tmp_path,
        scheme={"kind": "kato", "dt": 1e-2, "t_end": 0.1, "kato": {"window": 0.1, "max_iter": 1, "max_halvings": 0}},
    )
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "k")]) == 1
    assert RunRecord.load(tmp_path / "k" / "record.json").halt_reason == "solver_failure"


def test_linear_analytic_matches_closed_form(tmp_path):
    path = _cfg(
        tmp_path,
        scenario="linear_analytic",
        init={"form": "z", "displacement": {"kind": "multi_mode", "modes": [{"index": [1], "amplitude": 1e-2}, {"index": [3], "amplitude": -5e-3}]}},
        scheme={"kind": "etd2", "dt": 1e-3, "t_end": 1.0},
    )
    rec = run_scenario(load_config(path))
    assert rec.results["max_rel_dev_X"] <= 1e-6


def test_energy_identity_ratio_in_band(tmp_path):
    path = _cfg(tmp_path, scenario="energy_identity", scheme={"kind": "etd2", "dt": 2e-3, "t_end": 0.5})
    rec = run_scenario(load_config(path))
    assert 2.7 <= rec.results["ratio"] <= 6.0


def test_small_data_decay_records_a_positive_rate(tmp_path):
    path = _cfg(
        tmp_path,
        init={"form": "w", "displacement": {"kind": "single_mode", "index": [1], "amplitude": 1e-3}},
        scheme={"kind": "etd2", "dt": 1e-2, "t_end": 5.0},
    )
    rec = run_scenario(load_config(path))
    assert rec.decay_fit["k"] > 0
    assert rec.barrier is not None and rec.barrier["constants"]["C1"] > 0
    assert json.loads((tmp_path / "out" / "record.json").read_text())["decay_fit"]["k"] == rec.decay_fit["k"]


def test_kato_vs_direct_records_contraction(tmp_path):
    path = _cfg(tmp_path, scenario="kato_vs_direct", scheme={"kind": "kato", "dt": 1e-3, "t_end": 0.05, "kato": {"window": 0.05}})
    rec = run_scenario(load_config(path))
    assert rec.results["kato_halt_reason"] == "completed"
    assert rec.results["max_rel_dev_X"] <= 1e-5
    assert all(r < 1 for ratios in rec.results["contraction_ratios"] for r in ratios[:3])
    assert "trajectory_etd2.csv" in rec.manifest


def test_boost_check_runs_three_resolutions(tmp_path):
    rec = run_scenario(load_config(_cfg(tmp_path, scenario="boost_check")))
    assert set(rec.results["sup_boost_ratio"]) == {"4", "8", "16"}


def test_plots_embed_fit_and_are_deterministic(tmp_path):
    path = _cfg(tmp_path, scheme={"kind": "etd2", "dt": 1e-2, "t_end": 2.0}, output={"directory": str(tmp_path / "p"), "plots": True})
    rec = run_scenario(load_config(path))
    svg = (tmp_path / "p" / "log_X.svg").read_text()
    assert f"k={rec.decay_fit['k']:.17g}" in svg
    assert {"log_X.svg", "energies.svg", "min_a.svg"} <= set(rec.manifest)
    first = svg
    emit_plots(RunRecord.load(tmp_path / "p" / "record.json"))
    assert (tmp_path / "p" / "log_X.svg").read_text() == first


def test_empty_trajectory_gives_message_and_no_plots(tmp_path, capsys):
    write_csv(tmp_path / "trajectory.csv", [])
    rec = RunRecord("small_data_decay", {}, "0", "", "", "completed", manifest=["trajectory.csv"], output_dir=str(tmp_path))
    assert emit_plots(rec) == []
    assert "empty trajectory" in capsys.readouterr().out
    assert not list(tmp_path.glob("*.svg"))


def test_missing_csv_is_reported(tmp_path):
    rec = RunRecord("small_data_decay", {}, "0", "", "", "completed", output_dir=str(tmp_path))
    with pytest.raises(FileNotFoundError):
        emit_plots(rec)
    rec.save()
    assert main(["plot", "--record", str(tmp_path / "record.json")]) == 1


def test_two_run_ladder_bar_chart(tmp_path, capsys):
    path = _cfg(tmp_path, output={"directory": str(tmp_path / "lad"), "plots": True})
    assert main(["ladder", "--config", str(path), "--halvings", "1"]) == 0
    out = capsys.readouterr().out
    assert len(re.findall(r"identity_residual=", out)) == 2
    svg = (tmp_path / "lad" / "ladder.svg").read_text()
    assert svg.count("ratio ") >= 1
    assert len(re.findall(r'<g id="patch_\d+">', svg)) >= 2 + 1  # background plus two bars
    rec = RunRecord.load(tmp_path / "lad" / "record.json")
    assert len(rec.ladder["residual"]) == 2
    assert rec.ladder["ratio"][0] == pytest.approx(rec.ladder["residual"][0] / rec.ladder["residual"][1])


def test_ladder_function_reports_ratios(tmp_path):
    cfg = load_config(_cfg(tmp_path), ["scheme.dt=4e-3", "scheme.t_end=0.4"])
    rec = run_ladder(cfg, 2, tmp_path / "l2", emit=False)
    assert len(rec.ladder["ratio"]) == 2
    assert all(2.7 <= q <= 6.0 for q in rec.ladder["ratio"])


def test_plot_command_rewrites_svgs(tmp_path, capsys):
    path = _cfg(tmp_path)
    main(["run", "--config", str(path)])
    capsys.readouterr()
    assert main(["plot", "--record", str(tmp_path / "out" / "record.json")]) == 0
    assert "log_X.svg" in capsys.readouterr().out


def test_batch_run_isolates_outputs(tmp_path, capsys):
    a = _cfg(tmp_path, "a.yaml")
    b = _cfg(tmp_path, "b.yaml", scenario="linear_analytic")
    assert main(["run", "--config", str(a), str(b), "--out", str(tmp_path / "batch"), "--jobs", "2"]) == 0
    assert (tmp_path / "batch" / "a" / "trajectory.csv").is_file()
    assert RunRecord.load(tmp_path / "batch" / "b" / "record.json").scenario == "linear_analytic"


def test_json_is_strict():
    data = to_jsonable({"a": float("inf"), "b": np.float64("nan"), "c": np.arange(2), "d": (np.bool_(True),)})
    assert json.loads(json.dumps(data, allow_nan=False)) == {"a": "inf", "b": "nan", "c": [0, 1], "d": [True]}


def test_overrides_reach_shortcut_init(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text("domain: {dim: 1}\ninit: {kind: single_mode, index: [2], amplitude: 1.0e-3}\n")
    cfg = load_config(path, ["init.displacement.amplitude=0.5"])
    assert cfg.displacement.amplitude == 0.5 and cfg.displacement.index == (2,)
