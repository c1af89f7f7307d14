import csv
import json

import pytest
from click.testing import CliRunner

from app import cli
from config.constants import CSV_HEADERS
from utils.output_writer import sha256_of


def run(*args):
    return CliRunner().invoke(cli, list(args), catch_exceptions=False)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return reader.fieldnames, list(reader)


def test_zfn_three_methods_agree(tmp_path):
    out = tmp_path / "zfn.csv"
    result = run("--output", str(out), "zfn", "--N", "2", "--M", "2", "--z", "1", "--method", "all")
    assert result.exit_code == 0
    header, rows = read_rows(out)
    assert header == CSV_HEADERS["zfn"]
    assert [r["method"] for r in rows] == ["enumerate", "transfer", "kasteleyn"]
    for row in rows:
        assert float(row["z_value"]) == pytest.approx(8.0, rel=1e-9)


def test_zfn_skips_kasteleyn_on_a_single_row(tmp_path):
    out = tmp_path / "zfn.csv"
    assert run("--output", str(out), "zfn", "--N", "4", "--M", "1").exit_code == 0
    _, rows = read_rows(out)
    assert [r["method"] for r in rows] == ["enumerate", "transfer"]


def test_precondition_exit_code():
    result = run("zfn", "--N", "3", "--M", "2")
    assert result.exit_code == 2
    assert "lattice" in result.output


def test_capacity_exit_code():
    result = run("--max-states", "4", "zfn", "--N", "4", "--M", "4", "--method", "transfer")
    assert result.exit_code == 3


def test_lemma_check_reports_ok():
    result = run("lemma-check", "--N", "4", "--M", "4", "--n", "2")
    assert result.exit_code == 0
    assert "OK, 0 counterexamples" in result.output


def test_efp_output_is_deterministic_and_manifested(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    for out in (first, second):
        assert run("--output", str(out), "efp", "--N", "6", "--M", "4", "--z", "2", "--n-max", "3").exit_code == 0
    assert first.read_bytes() == second.read_bytes()

    header, rows = read_rows(first)
    assert header == CSV_HEADERS["efp"]
    assert [int(r["n"]) for r in rows] == [1, 2, 3]

    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "efp"
    assert manifest["settings"]["max_states"] > 0
    assert manifest["parameters"]["n_max"] == 3
    assert manifest["outputs"][str(first)] == sha256_of(first)
    assert "wall_time_seconds" in manifest


def test_json_mirror(tmp_path):
    out = tmp_path / "chess.csv"
    assert run("--output", str(out), "--json", "chessboard-check", "--N", "8", "--M", "2", "--n", "1", "--k", "2").exit_code == 0
    payload = json.loads((tmp_path / "chess.json").read_text())
    assert payload["columns"] == CSV_HEADERS["chessboard-check"]
    assert payload["manifest"]["subcommand"] == "chessboard-check"
    assert payload["rows"][0]["holds"] == "true"


def test_refstate_and_fit_decay_headers(tmp_path):
    ref = tmp_path / "ref.csv"
    fit = tmp_path / "fit.csv"
    assert run("--output", str(ref), "refstate", "--N", "8", "--M", "8", "--ell", "4").exit_code == 0
    assert run("--output", str(fit), "fit-decay", "--N", "8", "--M", "4", "--n-max", "3").exit_code == 0
    header, rows = read_rows(ref)
    assert header == CSV_HEADERS["refstate"]
    assert float(rows[0]["entropy_density"]) == pytest.approx(0.125)
    header, rows = read_rows(fit)
    assert header == CSV_HEADERS["fit-decay"]
    assert len(rows) == 3


def test_mcmc_command(tmp_path):
    out = tmp_path / "mcmc.csv"
    result = run(
        "--output", str(out), "mcmc", "--N", "4", "--M", "4", "--sweeps", "200", "--burn-in", "20", "--seed", "3"
    )
    assert result.exit_code == 0
    header, rows = read_rows(out)
    assert header == CSV_HEADERS["mcmc"]
    assert [r["start"] for r in rows] == ["horizontal", "vertical"]
    assert all(r["exact"] != "" for r in rows)


def test_suzuki_command(tmp_path):
    out = tmp_path / "chain.csv"
    assert run("--output", str(out), "suzuki", "--N", "4", "--n-max", "2").exit_code == 0
    header, rows = read_rows(out)
    assert header == CSV_HEADERS["suzuki"]
    assert float(rows[0]["expectation"]) == pytest.approx(1.0)


def test_suzuki_compare_command(tmp_path):
    out = tmp_path / "compare.csv"
    args = ("--output", str(out), "suzuki", "--N", "4", "--n-max", "2", "--compare-M", "4")
    assert run(*args).exit_code == 0
    header, rows = read_rows(out)
    assert header == CSV_HEADERS["suzuki-compare"]
    assert "expectation_2n" in header
    assert [int(r["n"]) for r in rows] == [1, 2]


def test_validate_command(tmp_path):
    good = tmp_path / "good.txt"
    bad = tmp_path / "bad.txt"
    good.write_text("UU\nDD\n")
    bad.write_text("RR\nLL\n")
    result = run("validate", "--input", str(good))
    assert result.exit_code == 0
    assert "V=2" in result.output
    assert run("validate", "--input", str(bad)).exit_code == 2


def test_enumerate_command(tmp_path):
    out = tmp_path / "configs.txt"
    assert run("--output", str(out), "enumerate", "--N", "2", "--M", "2").exit_code == 0
    blocks = out.read_text().strip().split("\n\n")
    assert len(blocks) == 8


@pytest.mark.slow
def test_efp_twelve_by_twelve(tmp_path):
    out = tmp_path / "efp.csv"
    assert run("--output", str(out), "efp", "--N", "12", "--M", "12", "--z", "1", "--n-max", "4").exit_code == 0
    _, rows = read_rows(out)
    logs = [float(r["log_prob"]) for r in rows]
    assert len(logs) == 4
    assert all(b < a for a, b in zip(logs, logs[1:]))
