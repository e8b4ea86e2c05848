import json

import pytest
from fractions import Fraction
from unittest.mock import AsyncMock, patch

from takagi import spectra
from takagi.cli import main
from takagi.schema import Estimate, SelfTestReport, TrialRecord


def _lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_render_csv(capsys):
    assert main(["render", "--function", "takagi", "--depth", "2", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert "# command=render" in out
    assert "# function=takagi" in out
    assert _lines(out) == [
        "j,x,f,f_float",
        "0,0,0,0",
        "1,1/4,1/2,0.5",
        "2,1/2,1/2,0.5",
        "3,3/4,1/2,0.5",
        "4,1,0,0",
    ]


def test_render_svg(tmp_path):
    path = tmp_path / "gray.svg"
    assert main(["render", "--function", "gray", "--depth", "6", "--format", "svg", "--out", str(path)]) == 0
    text = path.read_text()
    assert "<svg" in text and "polyline" in text
    assert "function=gray" in text


def test_levelset_json(tmp_path):
    path = tmp_path / "gray.json"
    argv = ["levelset", "--function", "gray", "--y", "2/5", "--max-depth", "12", "--out", str(path)]
    assert main(argv) == 0
    document = json.loads(path.read_text())
    assert document["config"]["y"] == "2/5"
    assert document["depths"] == list(range(1, 13))
    assert document["fitted_dimension"] is not None
    assert "jobs" not in document["config"]


def test_levelset_empty_cover_still_writes(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    argv = ["levelset", "--y", "3/4", "--max-depth", "8", "--format", "csv", "--out", str(path)]
    assert main(argv) == 1
    assert "error:" in capsys.readouterr().err
    rows = _lines(path.read_text())
    assert rows[0] == "depth,count"
    assert rows[-1] == "8,0"


def test_levelset_needs_a_target(capsys):
    assert main(["levelset"]) == 1
    assert "error: y:" in capsys.readouterr().err


def test_bad_rational_exits_one(capsys):
    assert main(["levelset", "--y", "0.4"]) == 1
    assert "error: y:" in capsys.readouterr().err


def test_jsr_witness(capsys):
    assert main(["jsr", "--max-len", "2"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["witness_product"] == "FE"
    assert document["norm"] == "entry-sum"


def test_jsr_enumeration_guard(tmp_path, capsys):
    path = tmp_path / "three.txt"
    path.write_text("A\n1 1\n0 1\n\nB\n1 0\n1 1\n\nC\n1 0\n0 1\n")
    assert main(["jsr", "--matrices", str(path), "--max-len", "15"]) == 3
    assert "guard" in capsys.readouterr().err


def test_rho_scan(capsys):
    assert main(["jsr", "--rho-scan", "--k-max", "6"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["ks"] == [3, 4, 5, 6]


def test_dimension_pieces(capsys):
    assert main(["dimension", "--pieces", "2:1/4"]) == 0
    assert json.loads(capsys.readouterr().out)["dimension"] == pytest.approx(0.5)


def test_dimension_counts_file(tmp_path, capsys):
    path = tmp_path / "counts.csv"
    path.write_text("# from an earlier run\ndepth,count\n" + "".join(f"{d},{2**d}\n" for d in range(1, 9)))
    assert main(["dimension", "--counts", str(path), "--method", "ratio"]) == 0
    assert json.loads(capsys.readouterr().out)["dimension"] == pytest.approx(1.0)


def test_extremal_table(capsys):
    assert main(["extremal", "--stages", "4"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["level"] == "8/17"
    assert [row["y"] for row in document["stages"][:4]] == ["0", "1/2", "1/2", "15/32"]
    assert document["expected"] == pytest.approx(spectra.DV_STAR)


def test_gray_bounds(capsys):
    assert main(["gray", "--which", "bounds", "--stages", "4"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert len(document["stages"]) == 5


def test_line_reduction(capsys):
    argv = ["line", "--function", "gray", "--slope", "2", "--intercept", "1/8", "--max-depth", "10"]
    assert main(argv) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["level"] == "1/32"
    assert document["line_cover"]["depths"] == list(range(0, 9))
    assert document["level_cover"]["depths"] == list(range(2, 11))


def test_matrices_round_trip(tmp_path, capsys):
    assert main(["matrices", "--out", str(tmp_path) + "/"]) == 0
    assert (tmp_path / "M_HAT.txt").is_file()
    assert (tmp_path / "E.txt").read_text().startswith("# command=matrices\n")
    assert main(["matrices", "--check", str(tmp_path / "E.txt")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# command=matrices\n")
    assert f"# check={tmp_path / 'E.txt'}" in out
    assert _lines(out) == ["E: ok"]
    (tmp_path / "E.txt").write_text("E\n2 0 1\n2 0 3\n2 0 1\n")
    assert main(["matrices", "--check", str(tmp_path / "E.txt")]) == 2
    assert "error: E[2,3]" in capsys.readouterr().err


def test_matrices_listing_has_echo_header(capsys):
    assert main(["matrices"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "# command=matrices"
    assert set(spectra.parse_matrices(out)) == set(spectra.NAMED_MATRICES)


def test_simulate_jsonl_layout(capsys):
    record = TrialRecord(model=1, seed=0, p=Fraction(3, 5), depth=20, observables={"z_shape": True})
    estimate = Estimate(mean=1.0, std_error=0.0, trials=1, target=2 / 3)
    with patch("takagi.cli.MonteCarloClient.z_shape_probability", new_callable=AsyncMock) as z_shape:
        z_shape.return_value = (estimate, [record])
        argv = ["simulate", "--experiment", "z-shape", "--p", "3/5", "--trials", "1", "--depth", "20"]
        assert main(argv) == 0
    z_shape.assert_awaited_once_with(Fraction(3, 5), 1, 20, 0)
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["config"]["experiment"] == "z-shape"
    assert json.loads(lines[1])["p"] == "3/5"
    assert json.loads(lines[2])["summary"]["mean"] == 1.0


def test_simulate_output_does_not_depend_on_jobs(tmp_path):
    outputs = []
    for jobs in ("1", "3"):
        path = tmp_path / f"jobs{jobs}.jsonl"
        argv = ["simulate", "--experiment", "z-shape", "--p", "1/2", "--trials", "300", "--depth", "30"]
        assert main(argv + ["--jobs", jobs, "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_simulate_table(capsys):
    argv = ["simulate", "--experiment", "table", "--trials", "4", "--stages", "3"]
    assert main(argv) == 0
    assert json.loads(capsys.readouterr().out)["summary"]["passed"] is True


def test_selftest_failure_exits_two(capsys):
    report = SelfTestReport()
    report.add("grid all-plus", True)
    report.add("transcription E.txt", False, "E[2,3] = 3, expected 2")
    with patch("takagi.cli.run_selftest", new_callable=AsyncMock, return_value=report):
        assert main(["selftest"]) == 2
    captured = capsys.readouterr()
    assert "PASS grid all-plus" in captured.out
    assert "FAIL transcription E.txt: E[2,3] = 3, expected 2" in captured.out
    assert "1 of 2 selftest checks failed" in captured.err


def test_selftest_writes_echo_first(capsys):
    report = SelfTestReport()
    report.add("grid all-plus", True)
    with patch("takagi.cli.run_selftest", new_callable=AsyncMock, return_value=report):
        assert main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# command=selftest"
    assert _lines("\n".join(lines)) == ["PASS grid all-plus"]


@pytest.mark.parametrize(
    "argv",
    [
        ["render", "--no-such-flag"],
        ["render", "--depth", "ten"],
        ["simulate", "--experiment", "nothing"],
        ["bogus"],
        [],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert "usage:" in err
    assert "error: takagi" in err
