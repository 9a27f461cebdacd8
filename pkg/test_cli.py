import csv
import json
import math
from unittest.mock import patch

import pytest

import correlation_analytics as ca
import cli


def _read(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def test_density_command_n1(tmp_path):
    assert cli.main(["density", "--n", "1", "--out", str(tmp_path)]) == 0
    header, rows = _read(tmp_path / "density.csv")
    assert header == ["r", "rho", "rho_over_N", "rho_limit_over_N"]
    assert len(rows) == 400
    assert float(rows[-1][0]) == 1.0
    assert float(rows[-1][1]) == 0.0
    for row in rows[::37]:
        r, rho = float(row[0]), float(row[1])
        assert rho == pytest.approx(6 / math.pi * (1 - r * r) ** 2 / (1 + r * r) ** 4, abs=1e-12)


def test_csv_uses_lf_line_endings(tmp_path):
    cli.main(["density", "--n", "2", "--out", str(tmp_path)])
    raw = (tmp_path / "density.csv").read_bytes()
    assert b"\r\n" not in raw
    assert raw.endswith(b"\n")


def test_sample_command_is_reproducible(tmp_path):
    args = ["sample", "--beta", "4", "--n", "3", "--count", "4", "--seed", "7"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "samples.csv").read_bytes()
    assert first == (tmp_path / "b" / "samples.csv").read_bytes()
    header, rows = _read(tmp_path / "a" / "samples.csv")
    assert header == cli.SAMPLE_COLUMNS
    assert len(rows) == 12
    for row in rows:
        assert float(row[3]) >= 0
        x, y, z = (float(v) for v in row[6:9])
        assert x * x + y * y + z * z == pytest.approx(1.0)


def test_sample_command_real_ensemble(tmp_path):
    assert cli.main(["sample", "--beta", "1", "--n", "4", "--count", "3", "--seed", "1", "--out", str(tmp_path)]) == 0
    _, rows = _read(tmp_path / "samples.csv")
    assert len(rows) == 12


def test_kernel_command(tmp_path):
    out = str(tmp_path)
    assert cli.main(["kernel", "--n", "3", "--points", "0.3,0.2;-0.1,0.5", "--out", out]) == 0
    header, rows = _read(tmp_path / "kernel.csv")
    assert header == cli.KERNEL_COLUMNS
    assert len(rows) == 3
    values = [dict(zip(header, (float(v) for v in row))) for row in rows]
    diagonal = values[0]
    assert diagonal["re_D"] == 0 and diagonal["im_D"] == 0
    assert diagonal["re_I"] == 0 and diagonal["im_I"] == 0
    rho = ca.density(0.3 + 0.2j, 3)
    assert abs(diagonal["rho_2"]) <= 1e-8 * rho * rho
    for row in values:
        s = complex(row["re_S"], row["im_S"])
        s_int = complex(row["re_S_integral"], row["im_S_integral"])
        assert abs(s - s_int) <= 1e-8 * max(1.0, abs(s))


def test_kernel_command_on_the_unit_circle(tmp_path):
    assert cli.main(["kernel", "--n", "3", "--points", "1,0;0.3,0.2", "--out", str(tmp_path)]) == 0
    header, rows = _read(tmp_path / "kernel.csv")
    values = [dict(zip(header, (float(v) for v in row))) for row in rows]
    assert len(values) == 3
    for row in values[:2]:
        assert row["re_S"] == 0 and row["im_S"] == 0
        assert row["re_S_integral"] == 0 and row["im_S_integral"] == 0
        assert row["rho_2"] == 0


def test_kernel_command_needs_points(tmp_path):
    assert cli.main(["kernel", "--n", "3", "--out", str(tmp_path)]) == 1
    assert cli.main(["kernel", "--points", "0.1;0.2", "--out", str(tmp_path)]) == 1


def test_verify_command_writes_report(tmp_path):
    assert cli.main(["verify", "--check", "n1_closed_form", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["passed"] is True
    assert [c["name"] for c in doc["checks"]] == ["n1_closed_form"]


def test_verify_command_fails_on_sign_mutation(tmp_path):
    original = ca.log_c_n

    def flipped(n):
        sign, log_c = original(n)
        return -sign, log_c

    with patch("correlation_analytics.log_c_n", side_effect=flipped):
        code = cli.main(["verify", "--check", "normalization", "--n", "2", "--out", str(tmp_path)])
    assert code == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["passed"] is False


def test_bad_arguments(tmp_path):
    assert cli.main(["hist", "--bins", "3", "--out", str(tmp_path)]) == 1
    assert cli.main(["verify", "--check", "nope", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        cli.main(["sample", "--beta", "3"])


def test_hist_command_small_run(tmp_path):
    args = ["hist", "--n", "3", "--count", "30", "--bins", "5", "--seed", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read(tmp_path / "hist.csv")
    assert header == cli.HIST_COLUMNS
    assert len(rows) == 5
    assert sum(int(row[2]) for row in rows) == 90
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"] == {"n": 3, "count": 30, "seed": 2, "bins": 5}
    assert "chi2_per_dof" in doc["comparison"]
    assert doc["angular"]["dof"] == 15
    assert 0.0 <= doc["angular"]["p_value"] <= 1.0


def test_parse_points():
    assert cli.parse_points("0.1,0.2; -0.3,0") == [(0.1, 0.2), (-0.3, 0.0)]
    assert cli.parse_points(None) == []
