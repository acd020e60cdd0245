import csv
import json
from collections import defaultdict
from importlib import resources

import numpy as np
import pytest

from ulrrm import cli, experiment
from ulrrm.experiment import (OUTPUT_ENV, load_config, parse_config_text, run_experiment,
                              validate_config)
from ulrrm.fairness import aggregate, geometric_mean

TINY = {
    "preset": "uma",
    "scenario": {"num_subchannels": 4, "report_block_subchannels": 2},
    "strategies": ["CTR_F", "BD", "CTR_ONE"],
    "power_schemes": ["TPM", "EPM"],
    "num_users": [3],
    "antennas": [[4, 2]],
    "budgets_mw": [5.0],
    "num_realizations": 3,
    "horizon": 4,
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return p


def check(text):
    raw, errors = parse_config_text(text)
    if errors:
        return None, errors
    return validate_config(raw, text)


def test_beta_error_message():
    cfg, errors = check('{\n  "beta": 0.9\n}')
    assert cfg is None
    assert [(e.line, e.message) for e in errors] == [(2, "β must exceed 1")]


def test_antenna_error():
    _, errors = check('{\n  "preset": "uma",\n  "antennas": [[4, 8]]\n}')
    assert len(errors) == 1 and errors[0].line == 3 and "M_U" in errors[0].message


def test_empty_strategies_error():
    _, errors = check('{"strategies": []}')
    assert any("strategy list" in e.message for e in errors)


def test_json_syntax_error_has_line():
    _, errors = check('{\n  "beta": 1.1,\n  "horizon": \n}')
    assert len(errors) == 1 and errors[0].line == 4


def test_other_errors_collected():
    _, errors = check(json.dumps({"num_users": [0], "jobs": 0, "bogus": 1, "power_schemes": ["X"],
                                  "scenario": {"corr_coeff": 2.0}, "preset": "mars"}))
    msgs = " ".join(e.message for e in errors)
    for part in ("user counts", "jobs", "bogus", "power", "preset", "corr_coeff"):
        assert part in msgs


@pytest.mark.parametrize("name", ["defaults_uma.json", "defaults_rma.json"])
def test_shipped_defaults_validate(tmp_path, name):
    text = resources.files("ulrrm.data").joinpath(name).read_text()
    cfg, errors = check(text)
    assert errors == []
    assert cfg.horizon == 66 and cfg.window == 6 and cfg.beta == 1.05
    assert (cfg.fit_a, cfg.fit_d) == (1.389, 0.5191)
    sc = cfg.scenario(64, 4)
    assert sc.num_subchannels == 78 and sc.subchannel_bw == 360e3
    assert (sc.report_block_subchannels, sc.report_block_slots) == (13, 2)
    assert sc.carrier_freq == 3.5e9 and sc.corr_coeff == 0.4 and sc.noise_figure_db == 9.0


def test_seeds_and_hash():
    cfg, _ = validate_config(dict(TINY, base_seed=7))
    assert [t.seed for t in experiment._tasks(cfg)][:3] == [7, 8, 9]
    cfg2, _ = validate_config(dict(TINY, base_seed=8))
    assert cfg.config_hash() != cfg2.config_hash()


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    cfg, errors = validate_config(TINY)
    assert not errors
    base = tmp_path_factory.mktemp("runs")
    run_experiment(cfg, out_dir=base / "a")
    run_experiment(cfg, out_dir=base / "b")
    run_experiment(cfg.__class__(**{**cfg.__dict__, "reuse": False}), out_dir=base / "c")
    return base


def test_outputs_exist_and_columns(tiny_runs):
    a = tiny_runs / "a"
    for name in ("rates.csv", "histogram.csv", "summary.json", "manifest.json"):
        assert (a / name).exists()
    with open(a / "rates.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == experiment.RATE_COLUMNS
    assert len(rows) == 3 * 2 * 3 * 4 * 3  # strategies x schemes x seeds x TS x users


def test_rerun_byte_identical(tiny_runs):
    for name in ("rates.csv", "histogram.csv", "summary.json"):
        assert (tiny_runs / "a" / name).read_bytes() == (tiny_runs / "b" / name).read_bytes()


def test_reuse_toggle_identical_rates(tiny_runs):
    assert (tiny_runs / "a" / "rates.csv").read_bytes() == \
        (tiny_runs / "c" / "rates.csv").read_bytes()
    ma = json.loads((tiny_runs / "a" / "manifest.json").read_text())
    mc = json.loads((tiny_runs / "c" / "manifest.json").read_text())
    assert ma["config"]["reuse"] is True and mc["config"]["reuse"] is False
    assert len(ma["runtimes_s"]) == len(mc["runtimes_s"]) == 18


def test_summary_recomputable_from_csv(tiny_runs):
    a = tiny_runs / "a"
    totals = defaultdict(lambda: defaultdict(float))
    with open(a / "rates.csv") as fh:
        for r in csv.DictReader(fh):
            key = (r["strategy"], r["power_scheme"], int(r["realization"]))
            totals[key][int(r["user"])] += float(r["rate_mbps"])
    summary = json.loads((a / "summary.json").read_text())
    (point,) = summary["points"]
    means = {}
    for res in point["results"]:
        gms = [geometric_mean(np.array(list(totals[(res["strategy"], res["power_scheme"], i)].values())))
               for i in range(3)]
        assert res["gm_per_realization"] == pytest.approx(gms, rel=1e-12)
        assert res["mean_gm"] == pytest.approx(np.mean(gms), rel=1e-12)
        assert res["ci90_half_width"] == pytest.approx(aggregate(gms).half_width, rel=1e-9,
                                                       abs=1e-12)
        means[(res["strategy"], res["power_scheme"])] = res["mean_gm"]
    if means[("CTR_F", "TPM")] > 0:
        assert point["ratios"]["BD/CTR_F (TPM)"] == pytest.approx(
            means[("BD", "TPM")] / means[("CTR_F", "TPM")])


def test_histogram_fractions(tiny_runs):
    with open(tiny_runs / "a" / "histogram.csv") as fh:
        rows = list(csv.DictReader(fh))
    groups = defaultdict(float)
    for r in rows:
        groups[(r["strategy"], r["power_scheme"])] += float(r["fraction"])
        if r["strategy"] == "CTR_ONE":
            assert r["pattern"] == "1"
        if r["strategy"] == "BD":
            assert r["pattern"] == "1+2"
    for v in groups.values():
        assert v == pytest.approx(1.0, abs=1e-8)


def test_manifest_contents(tiny_runs):
    m = json.loads((tiny_runs / "a" / "manifest.json").read_text())
    assert m["seeds"] == [0, 1, 2]
    assert len(m["config_hash"]) == 64
    assert {"numpy", "scipy", "numba", "ulrrm", "python"} <= set(m["versions"])
    assert m["failures"] == []


def test_failed_realization_recorded(tmp_path, monkeypatch):
    real = experiment.run_realization

    def flaky(config, strategy, scheme, seed, **kw):
        if seed == 1:
            raise RuntimeError("boom")
        return real(config, strategy, scheme, seed, **kw)

    monkeypatch.setattr(experiment, "run_realization", flaky)
    cfg, _ = validate_config(dict(TINY, strategies=["CTR_ONE"], power_schemes=["TPM"]))
    m = run_experiment(cfg, out_dir=tmp_path)
    assert len(m["failures"]) == 1 and "boom" in m["failures"][0]["error"]
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["points"][0]["results"][0]["n"] == 2


# ---------------------------------------------------------------- CLI

def test_cli_validate_codes(tmp_path, capsys):
    assert cli.main(["validate", str(write(tmp_path, TINY))]) == 0
    bad = write(tmp_path, dict(TINY, beta=0.9), "bad.json")
    assert cli.main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.json:" in err and "β must exceed 1" in err
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2


def test_cli_run_with_flags(tmp_path, monkeypatch):
    cfg = dict(TINY, strategies=["CTR_ONE"], power_schemes=["TPM"], num_realizations=2)
    p = write(tmp_path, cfg)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", str(p), "--quiet", "--seed", "5", "--reuse", "off"]) == 0
    m = json.loads((tmp_path / "env_out" / "manifest.json").read_text())
    assert m["seeds"] == [5, 6] and m["config"]["reuse"] is False
    assert cli.main(["run", str(p), "--quiet", "--out", str(tmp_path / "o"), "--jobs", "2"]) == 0
    assert (tmp_path / "o" / "rates.csv").exists()
    assert cli.main(["run", str(p), "--jobs", "0"]) == 2


def test_cli_runtime_failure(tmp_path, monkeypatch):
    def broken(*a, **kw):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "run_experiment", broken)
    assert cli.main(["run", str(write(tmp_path, TINY)), "--quiet"]) == 3


def test_cli_default_config(capsys):
    assert cli.main(["default-config", "rma"]) == 0
    assert json.loads(capsys.readouterr().out)["preset"] == "rma"
