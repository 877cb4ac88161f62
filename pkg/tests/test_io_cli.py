import json
import subprocess
import sys

import numpy as np
import pytest

from wwdensity.bandwidth import BandwidthPlan
from wwdensity.cli import main
from wwdensity.confidence import build_band
from wwdensity.estimators import Grid, GridEstimate
from wwdensity.gls import TailModel
from wwdensity.io import (
    InputError,
    load_experiment_config,
    read_band_csv,
    read_estimate,
    read_sample_csv,
    validate_config,
    write_band,
    write_estimate,
)
from wwdensity.kernels import gaussian


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_sample_header_and_blank_lines(tmp_path):
    p = write(tmp_path, "s.csv", "x,y\n1,2\n\n3.5,-4\n")
    assert read_sample_csv(p, 2).tolist() == [[1, 2], [3.5, -4]]


@pytest.mark.parametrize("text,match", [
    ("", "no observations"),
    ("x\n", "no observations"),
    ("1\nabc\n", "line 2"),
    ("1\nnan\n", "line 2"),
])
def test_read_sample_errors(tmp_path, text, match):
    with pytest.raises(InputError, match=match):
        read_sample_csv(write(tmp_path, "s.csv", text), 1)


def test_ragged_rows_rejected(tmp_path):
    with pytest.raises(InputError, match="line 2: expected 2 columns"):
        read_sample_csv(write(tmp_path, "s.csv", "1,2\n3\n"))


def test_dimension_mismatch_names_line(tmp_path):
    with pytest.raises(InputError, match="line 1"):
        read_sample_csv(write(tmp_path, "s.csv", "1,2\n"), 1)


def make_state():
    grid = Grid.with_step([-1.0, -1.0], [1.0, 1.0], 0.25)
    xs = np.random.default_rng(0).normal(size=(20, 2))
    return GridEstimate(grid, BandwidthPlan(2.0, 2), gaussian()).extend(xs)


def test_estimate_round_trip(tmp_path):
    state = make_state()
    write_estimate(state, tmp_path)
    again = read_estimate(tmp_path / "estimate.json")
    assert np.array_equal(again.values, state.values)
    assert again.n == state.n and again.grid == state.grid and again.kernel == state.kernel


def test_grid_mismatch_detected(tmp_path):
    write_estimate(make_state(), tmp_path)
    meta = json.loads((tmp_path / "estimate.json").read_text())
    meta["domain_box"]["upper"] = [2.0, 2.0]
    (tmp_path / "estimate.json").write_text(json.dumps(meta))
    with pytest.raises(InputError, match="grid mismatch"):
        read_estimate(tmp_path / "estimate.json")


def test_band_round_trip_is_bitwise(tmp_path):
    band = build_band(make_state(), TailModel(1.0, 0.05), 0.05)
    write_band(band, tmp_path)
    data = read_band_csv(tmp_path / "band.csv", 2)
    assert np.array_equal(data["lower"], band.lower.ravel())
    assert np.array_equal(data["estimate"], band.estimate.ravel())
    assert np.array_equal(data["upper"], band.upper.ravel())
    meta = json.loads((tmp_path / "band.json").read_text())
    assert meta["u_alpha"] == band.u_alpha and meta["model"] == {"C": 1.0, "s": 0.05,
                                                                 "shape": "nu"}


def test_config_validation_reports_paths(tmp_path):
    with pytest.raises(InputError, match="plan/beta"):
        validate_config({"experiment": "tail", "n": 100, "plan": {"beta": -1}})
    with pytest.raises(InputError, match="n_list"):
        validate_config({"experiment": "rate"})
    with pytest.raises(InputError, match="invalid JSON"):
        load_experiment_config(write(tmp_path, "c.json", "{oops"))


def node_value(out_dir, x=0.0):
    data = np.loadtxt(out_dir / "estimate.csv", delimiter=",", skiprows=1)
    return data[np.argmin(np.abs(data[:, 0] - x)), 1]


def test_cli_estimate_single_and_pair(tmp_path):
    one = write(tmp_path, "one.csv", "0.0\n")
    assert main(["estimate", str(one), "--grid-step", "0.1", "--out", str(tmp_path / "a")]) == 0
    assert node_value(tmp_path / "a") == pytest.approx(0.398942, abs=1e-6)
    two = write(tmp_path, "two.csv", "0.0\n0.0\n")
    assert main(["estimate", str(two), "--beta", "1", "--grid-step", "0.1",
                 "--out", str(tmp_path / "b")]) == 0
    h2 = (np.log(2) / 2) ** (1 / 3)
    phi0 = 1 / np.sqrt(2 * np.pi)
    assert node_value(tmp_path / "b") == pytest.approx(0.5 * (phi0 + phi0 / h2), rel=1e-14)
    assert node_value(tmp_path / "b") == pytest.approx(0.48346, abs=2e-5)


def test_cli_errors_are_single_line(tmp_path, capsys):
    empty = write(tmp_path, "e.csv", "")
    assert main(["estimate", str(empty), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("wwdensity: error: ") and err.count("\n") == 1
    assert "no observations" in err
    bad = write(tmp_path, "b.csv", "0.1\nfoo\n")
    assert main(["estimate", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_unknown_command_exits_with_usage():
    proc = subprocess.run([sys.executable, "-m", "wwdensity", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode != 0 and "usage" in proc.stderr


def test_cli_band_unit_width(tmp_path):
    sample = write(tmp_path, "s.csv", "\n".join(str(v) for v in np.linspace(-1, 1, 9)))
    main(["estimate", str(sample), "--grid-step", "0.5", "--out", str(tmp_path)])
    B = BandwidthPlan(2.0).normalizer(9)
    s = B / np.e**2 / 1.5
    C = 0.05 / float(TailModel(1.0, s).tail_bound(B))
    write(tmp_path, "tail.json", json.dumps({"C": C, "s": s, "shape": "nu"}))
    assert main(["band", str(tmp_path / "estimate.json"), str(tmp_path / "tail.json"),
                 "--alpha", "0.05", "--out", str(tmp_path)]) == 0
    data = read_band_csv(tmp_path / "band.csv", 1)
    np.testing.assert_allclose(data["upper"] - data["lower"], 2.0, rtol=1e-9)


def test_cli_band_unreachable_alpha(tmp_path, capsys):
    sample = write(tmp_path, "s.csv", "0\n1\n")
    main(["estimate", str(sample), "--out", str(tmp_path)])
    write(tmp_path, "tail.json", '{"C": 1.0, "s": 1.0}')
    assert main(["band", str(tmp_path / "estimate.json"), str(tmp_path / "tail.json"),
                 "--alpha", "0.5"]) == 1
    assert "exceeds" in capsys.readouterr().err


def test_cli_kernel_build(tmp_path):
    assert main(["kernel-build", "--beta", "3.5", "--out", str(tmp_path)]) == 0
    spec = json.loads((tmp_path / "kernel.json").read_text())
    assert spec["poly_coeffs"] == pytest.approx([1.5, -0.5], abs=1e-12)
    sample = write(tmp_path, "s.csv", "0\n")
    assert main(["estimate", str(sample), "--kernel-file", str(tmp_path / "kernel.json"),
                 "--grid-step", "0.5", "--out", str(tmp_path / "e")]) == 0
    assert node_value(tmp_path / "e") == pytest.approx(1.5 * 0.3989422804014327, rel=1e-12)


def test_cli_rate_power_law_summary(tmp_path, capsys):
    cfg = write(tmp_path, "rate.json", json.dumps({
        "experiment": "rate", "estimator": "power_law", "n_list": [100, 200, 400, 800],
        "replicates": 2}))
    assert main(["rate", str(cfg), "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "rate: slope=0.4000"
    assert (tmp_path / "rate_rate_table.csv").exists()


def test_cli_schema_error_has_field_path(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", json.dumps({"experiment": "tail", "n": 1}))
    assert main(["tail", str(cfg), "--out", str(tmp_path)]) == 1
    assert "n: " in capsys.readouterr().err


def test_cli_experiment_is_byte_identical(tmp_path, monkeypatch):
    cfg = write(tmp_path, "tail.json", json.dumps({
        "experiment": "tail", "n": 128, "replicates": 200, "grid_step": 0.2, "seed": 9}))
    main(["tail", str(cfg), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("WW_DENSITY_THREADS", "1")
    main(["tail", str(cfg), "--out", str(tmp_path / "b")])
    for name in ("tail_report.json", "tail_tail_curve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_overrides_reach_config(tmp_path):
    assert main(["compare", "--n", "128", "--reps", "3", "--seed", "5", "--grid-step", "0.2",
                 "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "compare_report.json").read_text())
    assert rep["seed"] == 5 and rep["replicates"] == 3
