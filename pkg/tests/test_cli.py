import json
import os
import subprocess
import sys

import pytest

from coherence import cli
from coherence.report import (
    ReportTable,
    cells_from_csv,
    cells_from_json,
    cells_from_markdown,
    fmt_bound,
    fmt_count,
    fmt_frac,
    fmt_pct,
    fmt_tokens,
)
from coherence.scenarios import builtin_path


def test_formatters():
    assert fmt_tokens(1_979_600) == "1,979.6K tok"
    assert fmt_tokens(1000, 250) == "1.0K tok ± 0.2K tok"
    assert fmt_pct(0.95) == "95.0%"
    assert fmt_frac(0.0588) == "0.059 frac"
    assert fmt_count(7168, "states") == "7,168 states"
    assert fmt_bound(-0.2) == "0.0% (bound<0: -20.0%)"
    assert fmt_bound(None) == "n/a"


def test_row_width_checked():
    table = ReportTable("t", "T", ["a", "b"])
    with pytest.raises(ValueError):
        table.add_row(["1"])
    with pytest.raises(ValueError):
        table.render("html")


def test_every_report_has_identical_cells_in_all_formats(experiments):
    for table in experiments.tables():
        md = cells_from_markdown(table.to_markdown())
        assert md == cells_from_csv(table.to_csv()) == cells_from_json(table.to_json()), \
            table.name


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_command(capsys):
    code, out, _ = run(capsys, "bounds", "--n", "4", "--s", "40", "--v", "0.05,0.9")
    assert code == 0
    # 1 - 4/40 - 0.9 is exactly zero, not a negative rounding artefact
    assert "85.0%" in out and "-0.0%" not in out


def test_format_before_or_after_subcommand(capsys):
    _, before, _ = run(capsys, "--format", "json", "bounds", "--n", "2", "--s", "10")
    _, after, _ = run(capsys, "bounds", "--n", "2", "--s", "10", "--format", "json")
    assert before == after
    assert json.loads(before)["name"] == "bounds"


def test_run_command(capsys):
    code, out, _ = run(capsys, "--format", "csv", "run", str(builtin_path("scenario_a")),
                       "--runs", "2")
    assert code == 0 and out.startswith("Scenario,Strategy")


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", str(builtin_path("scenario_a")), "--param", "n",
                       "--values", "2,4", "--format", "json")
    assert code == 0
    assert [r["n"] for r in json.loads(out)["rows"]] == ["2", "4"]


def test_check_command_exit_codes(capsys):
    assert run(capsys, "check")[0] == 0
    code, out, _ = run(capsys, "check", "--broken-upgrade")
    assert code == 1 and "SingleWriter violated, 4 transitions" in out
    assert run(capsys, "check", "--broken-upgrade", "--verbatim")[0] == 0
    code, _, err = run(capsys, "check", "--max-states", "10")
    assert code == 1 and "more than 10 states" in err


def test_input_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("n: 4\n")
    code, _, err = run(capsys, "run", str(bad))
    assert code == 2 and "missing required field" in err
    assert run(capsys, "bounds", "--n", "4", "--s", "40", "--v", "2")[0] == 2
    assert run(capsys, "sweep", str(builtin_path("scenario_a")), "--param", "V",
               "--values", "x")[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


def test_reproduce_writes_reports(tmp_path, monkeypatch, capsys, experiments):
    out = tmp_path / "reports"
    monkeypatch.setenv(cli.OUT_ENV, str(out))
    code = cli.main(["reproduce"])
    text = capsys.readouterr().out
    lines = [ln for ln in text.splitlines() if ln.startswith("[")]
    assert len(lines) == 18
    failed = [ln for ln in lines if ln.startswith("[FAIL]")]
    assert code == (1 if failed else 0)
    assert len(list(out.iterdir())) == 11 * 3 + 2
    for table in experiments.tables():
        assert (out / f"{table.name}.json").read_text() == table.to_json(), table.name
    # a second execution in a fresh interpreter (new hash seed) must match byte for byte
    again = tmp_path / "again"
    env = dict(os.environ, PYTHONHASHSEED="12345")
    proc = subprocess.run([sys.executable, "-m", "coherence.cli", "reproduce", "--out",
                           str(again)], env=env, capture_output=True, text=True)
    assert proc.returncode == code, proc.stderr
    names = sorted(p.name for p in out.glob("*.json"))
    assert names == sorted(p.name for p in again.glob("*.json"))
    for name in names:
        assert (out / name).read_bytes() == (again / name).read_bytes(), name
    doc = json.loads((out / "acceptance.json").read_text())
    assert len(doc["rows"]) == 18
