import json

import numpy as np
import pytest
import yaml

from core.command_processor import EXIT_CONFIG, EXIT_DATA, EXIT_FAILURE, EXIT_OK, EXIT_SKIPS, CommandProcessor
from main import main


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    monkeypatch.delenv("VERDOORN_CONFIG", raising=False)
    monkeypatch.delenv("VERDOORN_LOG_LEVEL", raising=False)


def fit_args(levels_csv, out, *extra):
    return ["fit", "--input", str(levels_csv), "--periods", "1986-1994", "--periods", "1995-1999", "--out", str(out), *extra]


def test_fit_writes_tables(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(fit_args(levels_csv, out)) == EXIT_OK
    text = (out / "fit.txt").read_text(encoding="utf-8")
    for title in ("Metal (1986-1994)", "Metal (1995-1999)", "Textile (1986-1994)", "Textile (1995-1999)"):
        assert title in text
    records = [json.loads(line) for line in (out / "fit.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(records) == 16
    dpd = [r for r in records if r["method"] == "DPD"]
    assert [r["n_instruments"] for r in dpd] == [23, 5, 23, 5]
    assert (out / "fit.csv").is_file()


def test_fit_is_byte_identical_across_runs_and_workers(levels_csv, tmp_path):
    assert main(fit_args(levels_csv, tmp_path / "a")) == EXIT_OK
    assert main(fit_args(levels_csv, tmp_path / "b", "--workers", "3")) == EXIT_OK
    for name in ("fit.txt", "fit.csv", "fit.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fit_config_file_overrides_flags(levels_csv, tmp_path):
    config = tmp_path / "run.yml"
    config.write_text(yaml.safe_dump({"fit": {"estimators": ["OLS"]}, "output": {"formats": ["jsonl"]}}))
    out = tmp_path / "out"
    assert main(fit_args(levels_csv, out, "--estimators", "FE,RE", "--config", str(config))) == EXIT_OK
    records = [json.loads(line) for line in (out / "fit.jsonl").read_text(encoding="utf-8").splitlines()]
    assert {r["method"] for r in records} == {"OLS"}
    assert not (out / "fit.txt").exists()


def test_unknown_estimator_is_a_config_error(levels_csv, tmp_path):
    assert main(fit_args(levels_csv, tmp_path, "--estimators", "FE,GLS")) == EXIT_CONFIG


def test_missing_input_is_a_data_error(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_DATA


def test_no_input_is_a_config_error(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_industry_is_skipped(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(["fit", "--input", str(levels_csv), "--industries", "Metal,Mining", "--out", str(out)]) == EXIT_SKIPS
    text = (out / "fit.txt").read_text(encoding="utf-8")
    assert "Metal (all periods)" in text
    assert "Skipped:\n  Mining (all periods): industry not present in the input" in text


def test_short_window_skips_dpd(levels_csv, tmp_path):
    out = tmp_path / "out"
    code = main(["fit", "--input", str(levels_csv), "--industries", "Metal", "--periods", "1986-1988", "--out", str(out)])
    assert code == EXIT_SKIPS
    assert "DPD not estimated" in (out / "fit.txt").read_text(encoding="utf-8")


def test_unitroot(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(["unitroot", "--input", str(levels_csv), "--out", str(out), "--lag-policy", "fixed:2"]) == EXIT_OK
    text = (out / "unitroot.txt").read_text(encoding="utf-8")
    assert "Metal (all periods)" in text and "Inverse³" in text
    assert "pᵇ" in text
    records = [json.loads(line) for line in (out / "unitroot.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [(r["industry"], r["variable"]) for r in records] == [("Metal", "p"), ("Metal", "q"), ("Textile", "p"), ("Textile", "q")]


def test_unitroot_bad_policy(levels_csv, tmp_path):
    assert main(["unitroot", "--input", str(levels_csv), "--out", str(tmp_path), "--lag-policy", "newey"]) == EXIT_CONFIG


def test_scatter(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(["scatter", "--input", str(levels_csv), "--periods", "1986-1994", "--out", str(out)]) == EXIT_OK
    lines = (out / "scatter_metal_1986-1994.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "entity,period,q,p"
    assert len(lines) == 1 + 7 * 8
    assert (out / "scatter_textile_1986-1994.csv").is_file()


def test_simulate(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--estimator", "OLS", "--replications", "5", "--seed", "3", "--out", str(out)]) == EXIT_OK
    lines = (out / "simulate.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1].startswith("OLS,5,5,0,")


def test_simulate_study_file(tmp_path):
    study = tmp_path / "small.study"
    study.write_text("estimator = F_FE_OLS\nreplications = 4\nn_entities = 5\n")
    out = tmp_path / "out"
    assert main(["simulate", "--study", str(study), "--out", str(out)]) == EXIT_OK
    assert (out / "simulate.csv").read_text(encoding="utf-8").splitlines()[1].startswith("F_FE_OLS,4,")


def test_simulate_bad_estimator(tmp_path):
    assert main(["simulate", "--estimator", "GMM", "--replications", "2", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_scatter_writes_level_data(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(["scatter", "--input", str(levels_csv), "--periods", "1986-1994", "--industries", "Metal", "--out", str(out)]) == EXIT_OK
    lines = (out / "levels_metal_1986-1994.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("entity,period,output,productivity")
    assert len(lines) == 1 + 7 * 9
    assert lines[1].startswith("R1,1986,")


def test_fit_reports_returns_to_scale(levels_csv, tmp_path):
    out = tmp_path / "out"
    assert main(fit_args(levels_csv, out)) == EXIT_OK
    assert "  returns to scale: FE " in (out / "fit.txt").read_text(encoding="utf-8")
    records = [json.loads(line) for line in (out / "fit.jsonl").read_text(encoding="utf-8").splitlines()]
    assert all(r["returns_to_scale"] for r in records)


@pytest.mark.parametrize(
    "args, names",
    [
        (["unitroot", "--lag-policy", "until_significant"], ["unitroot.txt", "unitroot.csv", "unitroot.jsonl"]),
        (["scatter", "--periods", "1995-1999"], ["scatter_metal_1995-1999.csv", "levels_textile_1995-1999.csv"]),
    ],
)
def test_data_commands_are_byte_identical_across_runs(levels_csv, tmp_path, args, names):
    for run in ("a", "b"):
        assert main([*args, "--input", str(levels_csv), "--out", str(tmp_path / run)]) == EXIT_OK
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_is_byte_identical_across_runs(tmp_path):
    for run, workers in (("a", "1"), ("b", "1"), ("c", "3")):
        args = ["simulate", "--estimator", "RE", "--replications", "12", "--seed", "8", "--workers", workers]
        assert main([*args, "--out", str(tmp_path / run)]) == EXIT_OK
    first = (tmp_path / "a" / "simulate.csv").read_bytes()
    assert first == (tmp_path / "b" / "simulate.csv").read_bytes()
    assert first == (tmp_path / "c" / "simulate.csv").read_bytes()


def test_undecodable_input_is_a_data_error(tmp_path):
    path = tmp_path / "latin1.csv"
    path.write_bytes("region,year,industry,output,productivity\nSão Paulo,1986,Metal,1.0,1.0\n".encode("latin-1"))
    assert main(["fit", "--input", str(path), "--out", str(tmp_path / "out")]) == EXIT_DATA


def test_ragged_csv_is_a_data_error(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("region,year,industry,output,productivity\nR1,1986,Metal,1.0,1.0\nR1,1987,Metal,1.1,1.0,9,9\n")
    assert main(["fit", "--input", str(path), "--out", str(tmp_path / "out")]) == EXIT_DATA


def test_unexpected_errors_become_failure_results():
    class BrokenController:
        def run(self, parameters, defaults):
            raise np.linalg.LinAlgError("singular matrix")

    processor = CommandProcessor({})
    processor.app_controllers["fit"] = BrokenController()
    result = processor.execute("fit", {})
    assert result["success"] is False
    assert result["exit_code"] == EXIT_FAILURE
    assert "singular matrix" in result["error"]
