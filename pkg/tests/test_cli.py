import csv
import io
import json
import subprocess
import sys

import pytest

from treeperc import __version__, shearer as S
from treeperc.cli import run_cli


def run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(out):
    return [l for l in out.splitlines() if not l.startswith("#")]


def table(out):
    return list(csv.DictReader(io.StringIO("\n".join(body(out)))))


def test_header(capsys):
    code, out, _ = run(capsys, "critical-values", "--k", "1", "--br", "2")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == f"# treeperc {__version__}"
    cfg = json.loads(lines[1].removeprefix("# config: "))
    assert cfg == {"br": 2.0, "k": 1, "seed": 42, "subcommand": "critical-values"}
    assert lines[2] == "# seed: 42"
    assert body(out) == ["k,br,p_min,p_max,regime", "1,2,0.25,0.75,shearer"]


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("PERC_SEED", "7")
    _, out, _ = run(capsys, "line", "--law", "iid", "--p", "0.5", "--n", "8", "--query", "sample")
    assert "# seed: 7" in out
    _, out2, _ = run(capsys, "line", "--law", "iid", "--p", "0.5", "--n", "8", "--query", "sample",
                     "--seed", "9")
    assert "# seed: 9" in out2 and body(out) != body(out2)
    monkeypatch.setenv("PERC_SEED", "9")
    _, out3, _ = run(capsys, "line", "--law", "iid", "--p", "0.5", "--n", "8", "--query", "sample")
    assert out3 == out2


def test_shearer_commands(capsys):
    code, out, _ = run(capsys, "shearer", "--k", "1", "--line", "200", "--p-sh")
    assert code == 0
    val = float(table(out)[0]["p_sh"])
    assert val == S.p_shearer_line(1, 200)
    # the finite line sits about 6e-5 below the limit 3/4
    assert 0.7499 < val < 0.75
    _, out, _ = run(capsys, "shearer", "--k", "1", "--b-sequence", "--p", "0.75", "--n", "4")
    assert [float(r["b"]) for r in table(out)] == pytest.approx([0.75, 0.5, 0.3125, 0.1875])
    _, out, _ = run(capsys, "shearer", "--k", "2")
    assert float(table(out)[0]["p_sh"]) == pytest.approx(23 / 27)
    _, out, _ = run(capsys, "shearer", "--k", "1", "--xi", "--p", "0.75")
    assert float(table(out)[0]["xi"]) == pytest.approx(0.5)
    _, out, _ = run(capsys, "shearer", "--graph", "complete:3")
    assert float(table(out)[0]["p_sh"]) == pytest.approx(2 / 3)
    _, out, _ = run(capsys, "shearer", "--k", "1", "--graph", "path:3", "--p", "0.75")
    assert float(table(out)[0]["critical_function"]) == pytest.approx(0.3125)


def test_line_commands(capsys):
    _, out, _ = run(capsys, "line", "--law", "shearer_factor", "--k", "1", "--p", "0.75",
                    "--n", "3")
    assert [float(r["allones"]) for r in table(out)] == pytest.approx([1, 0.75, 0.5, 0.3125])
    _, out, _ = run(capsys, "line", "--law", "shearer_factor", "--k", "1", "--p", "0.75",
                    "--query", "next", "--history", "1")
    assert float(table(out)[0]["next_bit_prob"]) == pytest.approx(2 / 3)
    _, out, _ = run(capsys, "line", "--law", "minimal", "--k", "1", "--p", "0.25", "--n", "2",
                    "--query", "distribution")
    rows = table(out)
    assert len(rows) == 4
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1)
    assert float([r for r in rows if r["prefix"] == "11"][0]["probability"]) == pytest.approx(0.125)


def test_simulate_and_export(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--model", "iid", "--p", "0", "--tree", "d_ary:2",
                       "--depth", "10", "--replicas", "500")
    assert code == 0
    assert float(table(out)[-1]["estimate"]) == 0
    path = tmp_path / "sample.csv"
    code, out, _ = run(capsys, "simulate", "--model", "canonical", "--k", "1", "--p", "0.8",
                       "--depth", "4", "--replicas", "200", "--export-sample", str(path))
    text = path.read_text()
    assert text.startswith(f"# treeperc {__version__}\n# config: ")
    rows = table(text)
    assert len(rows) == 31 and set(rows[0]) == {"vertex_id", "level", "bit"}
    assert [int(r["level"]) for r in rows][:3] == [0, 1, 1]


def test_output_file_and_json(capsys, tmp_path):
    path = tmp_path / "cv.json"
    code, out, _ = run(capsys, "critical-values", "--k", "2", "--br", "1.2", "--format", "json",
                       "-o", str(path))
    assert code == 0 and out == ""
    doc = json.loads("\n".join(body(path.read_text())))
    assert doc["columns"][2] == "p_min"
    assert doc["rows"][0][2] == pytest.approx(1.2 ** -3)


def test_diameters(capsys):
    code, out, _ = run(capsys, "diameters", "--model", "cutup", "--k", "1", "--N", "2",
                       "--depth", "20", "--replicas", "2000")
    assert code == 0
    assert "# bound_4N_minus_4: 4; violations: 0" in out
    code, out, _ = run(capsys, "diameters", "--model", "iid", "--p", "0", "--depth", "6",
                       "--replicas", "100", "--format", "json")
    doc = json.loads("\n".join(body(out)))
    assert doc["max_diameter"] == 0 and doc["histogram"] == [100]


def test_bounds(capsys):
    code, out, _ = run(capsys, "bounds", "--model", "iid", "--p", "0.5", "--depth", "2", "--exact")
    rows = table(out)
    assert code == 0
    assert float(rows[2]["first_moment"]) == pytest.approx(0.5)
    assert float(rows[1]["second_moment"]) <= float(rows[1]["exact_reach"])
    assert "# kernel certificate: alpha=2 " in out


def test_audits(capsys):
    code, out, _ = run(capsys, "kernel-audit", "--model", "canonical", "--k", "1", "--p", "0.8",
                       "--depth", "8")
    doc = json.loads("\n".join(body(out)))
    assert code == 0 and doc["passed"] and doc["failures"] == 0 and "pairs" not in doc
    code, out, err = run(capsys, "kernel-audit", "--model", "canonical", "--k", "1", "--p", "0.75",
                         "--depth", "4", "--quasi-independence", "on")
    assert code == 2 and "threshold" in err
    code, out, _ = run(capsys, "minimality-audit", "--law", "minimal", "--k", "1", "--p", "0.8",
                       "--n", "8")
    assert code == 0 and json.loads("\n".join(body(out)))["passed"]
    code, out, _ = run(capsys, "minimality-audit", "--law", "cutup", "--k", "2", "--N", "4",
                       "--fuzz", "1", "--n", "8")
    assert code == 3 and not json.loads("\n".join(body(out)))["passed"]


def test_figure1(capsys):
    code, out, _ = run(capsys, "figure1")
    rows = table(out)
    assert code == 0 and len(rows) == 4 * 151 + 3
    corner = [r for r in rows if r["regime"] == "corner" and r["k"] == "1"][0]
    assert float(corner["br"]) == 2 and float(corner["p_max"]) == 0.75


def test_exit_codes(capsys):
    code, _, err = run(capsys, "line", "--law", "shearer_factor", "--k", "1", "--p", "0.7")
    assert code == 2 and "threshold: p >= p_sh" in err
    assert run(capsys, "critical-values", "--k", "1")[0] == 2
    assert run(capsys, "critical-values", "--k", "1", "--br", "2", "--bogus")[0] == 2
    assert run(capsys, "simulate", "--model", "canonical", "--p", "0.8", "--replicas", "0")[0] == 2
    assert run(capsys, "simulate", "--model", "iid", "--p", "0.5", "--tree", "cylinder:2")[0] == 2


def test_byte_identical_across_workers(capsys):
    args = ["simulate", "--model", "canonical", "--k", "1", "--p", "0.8", "--depth", "10",
            "--replicas", "20000", "--seed", "5"]
    _, one, _ = run(capsys, *args, "--workers", "1")
    _, two, _ = run(capsys, *args, "--workers", "3")
    _, again, _ = run(capsys, *args, "--workers", "1")
    assert one == two == again
    args = ["diameters", "--model", "minimal", "--k", "1", "--p", "0.5", "--depth", "10",
            "--replicas", "10000", "--seed", "5"]
    assert run(capsys, *args, "--workers", "1")[1] == run(capsys, *args, "--workers", "2")[1]


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "treeperc.cli", "critical-values", "--k", "0",
                          "--br", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.splitlines()[-1] == "0,2,0.5,0.5,g_k"
