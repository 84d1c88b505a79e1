import json

import pytest

from twinforge.cli import EXIT_INVALID, EXIT_OK, EXIT_STAGE, build_parser, main

SMALL = ["--n-aprbs", "6", "--test-k", "2", "--max-epochs", "20"]


def small_config_file(tmp_path):
    doc = {
        "grid": {"n_samples": 60, "dt": 5.0},
        "signals": {"counts": {"APRBS": 6}, "aprbs": {"hold_min": 40.0, "hold_max": 70.0, "n_levels": 4}},
        "train": {"max_epochs": 20, "patience": 10, "i_max": 1},
        "test_k": 2,
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = small_config_file(tmp)
    code = main(["run", "--config", str(cfg), "--output", str(tmp / "out"), "--store", str(tmp / "store")])
    return tmp, cfg, code


def test_run_succeeds(cli_run, capsys):
    tmp, _, code = cli_run
    assert code == EXIT_OK
    assert (tmp / "out" / "final_model.json").exists()


def test_stage_command_stops_early(tmp_path, capsys):
    cfg = small_config_file(tmp_path)
    code = main(["features", "--config", str(cfg), "--output", str(tmp_path / "o")])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["stage"] == "features"
    assert (tmp_path / "o" / "features.csv").exists()
    assert not (tmp_path / "o" / "test_group.csv").exists()
    # store defaults to <output>/store
    assert (tmp_path / "o" / "store").is_dir()


def test_env_store(tmp_path, monkeypatch):
    monkeypatch.setenv("TWINFORGE_STORE", str(tmp_path / "env"))
    cfg = small_config_file(tmp_path)
    assert main(["gen-signals", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_OK
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_OK
    assert (tmp_path / "env").is_dir()


def test_invalid_config_exit_code(tmp_path, capsys):
    assert main(["run", "--test-k", "0", "--output", str(tmp_path)]) == EXIT_INVALID
    assert "CONFIG_INVALID" in capsys.readouterr().err


def test_stage_failure_exit_code(tmp_path, capsys):
    cfg = small_config_file(tmp_path)
    code = main(["run", "--config", str(cfg), "--test-k", "6", "--output", str(tmp_path / "o")])
    assert code in (EXIT_INVALID, EXIT_STAGE)
    doc = json.loads(cfg.read_text())
    doc["signals"]["counts"] = {"MULTISINE": 4}
    doc["signals"]["multisine"] = {"amp_min": 299.999, "amp_max": 300.0}
    doc["fom"] = {"T_init": 300.0}
    cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "o2")]) == EXIT_STAGE
    assert "select_test" in capsys.readouterr().err


def test_predict_stdout_and_file(cli_run, tmp_path, capsys):
    run_dir, _, _ = cli_run
    model = str(run_dir / "out" / "final_model.json")
    assert main(["predict", "--model", model, "--x0", "300", "300"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,T_A,T_B" and len(lines) == 281
    out = tmp_path / "p.csv"
    assert main(["predict", "--model", model, "--x0", "300", "300", "--out", str(out)]) == EXIT_OK
    assert [ln for ln in out.read_text().splitlines() if not ln.startswith("#")] == lines


def test_predict_bad_signal(cli_run, tmp_path, capsys):
    run_dir, _, _ = cli_run
    sig = tmp_path / "s.csv"
    sig.write_text("t,T_oven\n0,300\nfoo,bar\n")
    code = main(["predict", "--model", str(run_dir / "out" / "final_model.json"), "--x0", "300", "300",
                 "--signal", str(sig)])
    assert code == EXIT_INVALID
    assert "3" in capsys.readouterr().err


def test_missing_model(tmp_path, capsys):
    assert main(["predict", "--model", str(tmp_path / "nope.json"), "--x0", "1", "2"]) == EXIT_INVALID


def test_evaluate(cli_run, capsys):
    run_dir, cfg, _ = cli_run
    code = main(["evaluate", "--config", str(cfg), "--store", str(run_dir / "store"),
                 "--model", str(run_dir / "out" / "final_model.json"), "AP0001", "AP0002"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["ids"] == ["AP0001", "AP0002"]
    assert doc["rmse"] > 0


def test_bench(cli_run, capsys):
    run_dir, _, _ = cli_run
    code = main(["bench", "--model", str(run_dir / "out" / "final_model.json"), "--repeats", "10"])
    assert code == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["speedup"] == rep["fom_wall_time"] / rep["rom_wall_time"]


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("gen-signals", "simulate", "features", "select-test", "train", "correlate",
                 "partner-chart", "finalize", "run", "evaluate", "predict", "bench"):
        assert name in text
