import csv
import io
import json
import math
import subprocess
import sys

import pytest

from kieferweiss.cli import COMPARE_COLUMNS, main
from kieferweiss.design import DesignProblem, TestPlan as Plan, design_modified
from kieferweiss.evaluate import performance
from kieferweiss.expfam import binomial, poisson

POISSON = ["--family", "poisson", "--theta0", "0.5", "--theta1", "0.7"]


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_fss_example(capsys):
    status, out, _ = run(capsys, "fss", *POISSON, "--alpha", "0.1", "--beta", "0.1")
    assert status == 0
    doc = json.loads(out)
    assert doc["fss"] == pytest.approx(98.07, abs=0.02)
    assert doc["config"]["theta0"] == 0.5 and doc["config"]["command"] == "fss"


def test_fss_csv(capsys):
    status, out, _ = run(capsys, "fss", *POISSON, "--alpha", "0.1", "--beta", "0.1", "--format", "csv")
    assert status == 0
    assert out.startswith("# config: ")
    assert float(read_csv(out)[0]["fss"]) == pytest.approx(98.07, abs=0.02)


def test_missing_flag_exits_1(capsys):
    status, _, err = run(capsys, "fss", "--family", "poisson", "--theta0", "0.5", "--alpha", "0.1", "--beta", "0.1")
    assert status == 1
    assert "--theta1" in err


def test_invalid_value_exits_1(capsys):
    status, _, err = run(capsys, "design-modified", *POISSON, "--theta", "0.9", "--lambda0", "10", "--lambda1", "10")
    assert status == 1 and "error" in err


def test_bad_usage_exits_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["fss", "--family", "gamma"])
    assert info.value.code == 1


def test_evaluate_always_stop_plan(tmp_path, capsys):
    pr = DesignProblem(poisson(), 0.5, 0.7, 0.6, 10.0, 10.0)
    path = tmp_path / "plan.json"
    path.write_text(Plan(1, [], [], [0], problem=pr).to_json(), encoding="utf-8")
    status, out, _ = run(capsys, "evaluate", "--plan", str(path), "--thetas", "0.3", "0.6", "2.0")
    assert status == 0
    assert [r["asn"] for r in json.loads(out)["reports"]] == [1.0, 1.0, 1.0]


def test_plan_round_trip_is_bit_identical(tmp_path, capsys):
    path = tmp_path / "plan.json"
    args = ["design-modified", "--family", "binomial", "--m", "3", "--theta0", "0.05", "--theta1", "0.08",
            "--theta", "0.06193", "--lambda0", "450", "--lambda1", "489.75", "--out", str(path)]
    assert run(capsys, *args)[0] == 0
    status, out, _ = run(capsys, "evaluate", "--plan", str(path), "--thetas", "0.05", "0.06193", "0.08")
    assert status == 0
    plan = design_modified(DesignProblem(binomial(3), 0.05, 0.08, 0.06193, 450.0, 489.75))
    direct = [performance(plan, binomial(3), t, 0.05, 0.08).to_dict() for t in (0.05, 0.06193, 0.08)]
    assert json.loads(out)["reports"] == json.loads(json.dumps(direct))
    saved = json.loads(path.read_text(encoding="utf-8"))
    assert saved["plan"]["horizon"] == 484 and saved["config"]["lambda1"] == 489.75


def test_design_modified_csv_stages(capsys):
    status, out, _ = run(capsys, "design-modified", "--family", "binomial", "--m", "1", "--theta0", "0.3",
                         "--theta1", "0.7", "--theta", "0.5", "--lambda0", "30", "--lambda1", "30", "--format", "csv")
    assert status == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["n", "a", "b", "threshold"]
    assert rows[-1]["a"] == "" and rows[-1]["b"] == ""


def test_evaluate_sprt_bounds(capsys):
    status, out, _ = run(capsys, "evaluate", *POISSON, "--log-a", str(-0.916 * math.log(10)),
                         "--log-b", str(0.868 * math.log(10)), "--thetas", "0.58464", "--format", "csv")
    assert status == 0
    row = read_csv(out)[0]
    assert float(row["asn"]) == pytest.approx(72.28, abs=0.05)
    assert abs(int(row["quantile_99"]) - 281) <= 1


def test_sprt_fit_nonconvergence_exits_2(tmp_path, capsys):
    path = tmp_path / "sprt.json"
    status, _, _ = run(capsys, "sprt-fit", "--family", "binomial", "--m", "3", "--theta0", "0.05", "--theta1", "0.08",
                       "--alpha", "0.1", "--beta", "0.0005", "--max-iter", "1", "--out", str(path))
    assert status == 2
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["sprt"]["converged"] is False and doc["sprt"]["log_a"] < 0


def test_compare_with_given_parameters(capsys):
    ln10 = math.log(10)
    status, out, _ = run(capsys, "compare", "--family", "geometric", "--theta0", "1", "--theta1", "2",
                         "--alpha", "0.1", "--beta", "0.1", "--theta", "1.27794", "--lambda0", "69.00",
                         "--lambda1", "84.38", "--log-a", str(-0.8920 * ln10), "--log-b", str(0.7318 * ln10))
    assert status == 0
    header = [ln for ln in out.splitlines() if not ln.startswith("#")][0]
    assert header.split(",") == COMPARE_COLUMNS
    row = read_csv(out)[0]
    assert int(row["H"]) == 74
    assert float(row["N_theta"]) == pytest.approx(17.08, abs=0.05)
    assert int(row["Q99"]) == 41
    assert float(row["N_theta0_W"]) == pytest.approx(15.30, abs=0.05)
    assert float(row["FSS"]) == pytest.approx(23.83, abs=0.02)
    assert float(row["QR_W"]) == pytest.approx(0.36, abs=0.01)
    # two decimals in compare mode
    assert row["N_theta"].split(".")[1].__len__() == 2


@pytest.fixture(scope="module")
def geometric_row():
    buf = io.StringIO()
    stdout, sys.stdout = sys.stdout, buf
    try:
        status = main(["compare", "--family", "geometric", "--theta0", "1", "--theta1", "2",
                       "--alpha", "0.1", "--beta", "0.1"])
    finally:
        sys.stdout = stdout
    return status, read_csv(buf.getvalue())[0]


def test_compare_full_search_geometric(geometric_row):
    status, row = geometric_row
    assert status == 0
    expect = {"N_theta": (17.08, 0.05), "N_theta0": (15.43, 0.05), "N_theta1": (11.63, 0.05), "FSS": (23.83, 0.02),
              "R": (1.40, 0.01), "R0": (1.54, 0.01), "R1": (2.05, 0.01), "QR": (0.58, 0.01)}
    for key, (value, tol) in expect.items():
        assert float(row[key]) == pytest.approx(value, abs=tol), key
    assert float(row["theta"]) == pytest.approx(1.27794, abs=5e-3)
    assert int(row["H"]) == 74 and abs(int(row["Q99"]) - 41) <= 1


@pytest.mark.xfail(strict=True, reason="the printed geometric SPRT bounds miss the nominal errors by 2% relative; "
                                       "the fitted SPRT is closer to (0.1, 0.1) and has a different ASN")
def test_compare_full_search_geometric_sprt_columns(geometric_row):
    _, row = geometric_row
    expect = {"N_theta_W": (18.24, 0.05), "N_theta0_W": (15.30, 0.05), "N_theta1_W": (11.42, 0.05),
              "R_W": (1.31, 0.01), "R0_W": (1.56, 0.01), "R1_W": (2.09, 0.01), "QR_W": (0.36, 0.01)}
    for key, (value, tol) in expect.items():
        assert float(row[key]) == pytest.approx(value, abs=tol), key


def test_reproduce_table_small(capsys, monkeypatch):
    monkeypatch.setenv("KW_THREADS", "2")
    status, out, _ = run(capsys, "reproduce-table", "--family", "binomial", "--m", "1", "--theta0", "0.3",
                         "--theta1", "0.7", "--alphas", "0.2", "0.1", "--no-asymmetric")
    assert status == 0
    rows = read_csv(out)
    assert [r["alpha"] for r in rows] == ["0.2", "0.1"]
    assert all(float(r["theta"]) == pytest.approx(0.5, abs=5e-3) for r in rows)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kieferweiss", "fss", *POISSON, "--alpha", "0.1", "--beta", "0.1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n_star"] == 98
