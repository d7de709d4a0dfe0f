import csv
import json
import math
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from boussinesq_lab.acceptance import run_suite
from boussinesq_lab.config import (CaseSection, ConfigError, DataSection, GridSection, IntegratorSection,
                                   MonitorSection, RunConfig, format_config, parse_config)
from boussinesq_lab.harness import COLUMNS, main, run_config

BASE = """\
case.id = 7
eps = 0.1
grid.n = 64
data.family = gaussian_hump
data.amplitude = 0.2
integrator.dt = 0.01
integrator.t_end = 0.5
integrator.report_every = 5
output.dir = run
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(directory):
    with open(directory / "timeseries.csv") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- config grammar


finite = st.floats(-10, 10, allow_nan=False)


@given(eps=st.floats(1e-3, 1.0), case_id=st.sampled_from([None, *range(1, 14)]), a=st.one_of(st.none(), finite),
       n=st.sampled_from([16, 64, 256]), length=st.floats(0.5, 200.0), dim=st.sampled_from([1, 2]),
       modes=st.lists(st.integers(1, 9), min_size=1, max_size=4), seed=st.integers(0, 2**63 - 1),
       kmax=st.one_of(st.none(), st.floats(1.0, 50.0)), dt=st.floats(1e-5, 1.0), every=st.integers(1, 100),
       nonlinear=st.booleans(), h=st.floats(0.0, 0.9))
def test_config_round_trip(eps, case_id, a, n, length, dim, modes, seed, kmax, dt, every, nonlinear, h):
    cfg = RunConfig(case=CaseSection(id=case_id, a=a, nonlinear=nonlinear), eps=eps,
                    grid=GridSection(dim, n, length),
                    data=DataSection(family="cosine_modes", modes=tuple(modes), seed=seed, kmax=kmax),
                    integrator=IntegratorSection(dt=dt, report_every=every), monitor=MonitorSection(h=h))
    assert parse_config(format_config(cfg)) == cfg


def test_pi_multiples_and_comments():
    cfg = parse_config("grid.length = 16pi  # box\n\n# note\ngrid.n = 32\nsweep.eps = 0.1, 0.05\n")
    assert cfg.grid.length == 16 * math.pi
    assert cfg.sweep.eps == (0.1, 0.05)
    assert parse_config("grid.length = pi").grid.length == math.pi


@pytest.mark.parametrize("text", ["eps 0.1", "grid.spacing = 2", "grid.n = many", "case.nonlinear = maybe",
                                  "grid.n = 32\ngrid.n = 64", "data.family = square_wave", "bogus = 1"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# ---------------------------------------------------------------- run


def test_zero_length_run(tmp_path):
    code = main(["run", _write(tmp_path, BASE.replace("t_end = 0.5", "t_end = 0")), "--out", str(tmp_path / "o")])
    assert code == 0
    rows = _rows(tmp_path / "o")
    assert len(rows) == 1 and float(rows[0]["t"]) == 0.0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["verdict"]["healthy"] and manifest["rows"] == 1


def test_row_count_and_header(tmp_path):
    assert main(["run", _write(tmp_path, BASE), "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "timeseries.csv").read_text()
    assert text.splitlines()[0] == ",".join(COLUMNS)
    rows = _rows(tmp_path / "o")
    assert len(rows) == math.floor(0.5 / (0.01 * 5)) + 1
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["hamiltonian"] == "" and r["E_s"] != "" for r in rows)


def test_invalid_sum_exits_3(tmp_path, capsys):
    text = BASE.replace("case.id = 7", "case.a = 0.5\ncase.b = 0.5")
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3
    assert "1/3" in capsys.readouterr().err


def test_cavitating_data_exits_3(tmp_path):
    text = BASE.replace("data.amplitude = 0.2", "data.amplitude = -12")
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3


def test_case_id_mismatch_exits_3(tmp_path):
    text = BASE + "case.a = -0.1\ncase.c = -0.1\ncase.b = 0.3\ncase.d = 0.23333333333333334\n"
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3


def test_argparse_errors_exit_2(tmp_path):
    assert main(["launch"]) == 2
    assert main(["run"]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_manifest_rerun_is_bit_identical(tmp_path):
    cfg = _write(tmp_path, BASE.replace("gaussian_hump", "random_bandlimited") + "data.seed = 99\n")
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "timeseries.csv").read_bytes() == (tmp_path / "b" / "timeseries.csv").read_bytes()


def test_blow_up_is_a_result(tmp_path):
    text = """\
case.id = 12
case.variables = eta_v
eps = 0.1
grid.n = 64
data.family = cosine_modes
data.amplitude = 9.5
data.velocity_ratio = 1.0
monitor.h = 0
integrator.dt = 0.05
integrator.t_end = 20
integrator.report_every = 1
"""
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert not manifest["verdict"]["healthy"] and manifest["verdict"]["t_star"] > 0
    for row in _rows(tmp_path / "o"):
        cells = [row[c] for c in COLUMNS if c != "status" and row[c] != ""]
        assert all(math.isfinite(float(c)) for c in cells) or row["status"].startswith("blowup")


def test_eta_v_needs_case_12(tmp_path):
    assert main(["run", _write(tmp_path, BASE + "case.variables = eta_v\n"), "--out", str(tmp_path / "o")]) == 3


def test_field_dumps_are_listed(tmp_path):
    assert main(["run", _write(tmp_path, BASE + "output.dump_fields = true\n"), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert len(manifest["field_dumps"]) == manifest["rows"]
    assert all((tmp_path / "o" / name).exists() for name in manifest["field_dumps"])


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BSQ_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["run", _write(tmp_path, BASE)]) == 0
    assert (tmp_path / "root" / "run" / "manifest.json").exists()


# ---------------------------------------------------------------- sweeps


def test_linear_sweep_is_healthy(tmp_path, monkeypatch):
    monkeypatch.setenv("BSQ_OUTPUT_ROOT", str(tmp_path))
    text = BASE.replace("case.id = 7", "case.id = 12\ncase.nonlinear = false") + "sweep.t_budget = 0.05\n"
    assert main(["sweep-lifespan", _write(tmp_path, text), "--eps", "0.5", "0.2", "0.1", "--workers", "2"]) == 0
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert [r["healthy"] for r in summary["runs"]] == [True] * 3
    assert summary["lifespan_fit"] is None


def test_sweep_needs_three_eps(tmp_path):
    assert main(["sweep-lifespan", _write(tmp_path, BASE), "--eps", "0.1", "0.05"]) == 2


def test_cauchy_needs_deltas(tmp_path):
    assert main(["sweep-cauchy", _write(tmp_path, BASE)]) == 2


def test_transparent_cauchy_is_degenerate(tmp_path, monkeypatch):
    monkeypatch.setenv("BSQ_OUTPUT_ROOT", str(tmp_path))
    text = BASE.replace("case.id = 7", "case.id = 12").replace("t_end = 0.5", "t_end = 0.1")
    assert main(["sweep-cauchy", _write(tmp_path, text), "--deltas", "0.015", "0.01", "0.005"]) == 0
    out = json.loads((tmp_path / "run" / "cauchy.json").read_text())
    assert out["degenerate"] and out["slope"] is None
    assert max(d["distance"] for d in out["distances"]) < 1e-12


# ---------------------------------------------------------------- acceptance entry point


def test_unknown_suite_exits_2():
    assert main(["acceptance", "operatorz"]) == 2


def test_operator_suite_passes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["acceptance", "operators", "--json", str(out)]) == 0
    verdicts = json.loads(out.read_text())
    assert all(v["passed"] for v in verdicts)


def test_longtime_fast_budget():
    start = time.perf_counter()
    results = run_suite("longtime-fast")
    assert time.perf_counter() - start < 60.0
    assert all(r.passed for r in results)
