import json
from pathlib import Path

import numpy as np
import pytest

from nlslab.evolver import single_mode_deviation

from nlslab.experiments import (ExperimentConfig, RunRecord, execute, load_summary, parse_report,
                                report, run, run_convergence, run_counting_suite, run_longtime,
                                run_tensor_suite, s_cr, s_pr, longtime_level)

GOLDEN = Path(__file__).parent / "golden" / "counting_report.txt"


def small_counting(**kw):
    base = dict(kind="counting-suite", count_Ms_d1=(4, 8, 16), count_Ms_d2=(4, 8, 16),
                count_samples=8, n_schur=20)
    base.update(kw)
    return ExperimentConfig(**base)


def test_exponents():
    assert s_pr(5) == -0.25
    assert s_cr(1, 5) == 0.0
    assert s_cr(2, 3) == 0.0


@pytest.mark.parametrize("kw", [
    dict(kind="convergence", d=1, p=3),              # (d, p) = (1, 3) excluded
    dict(kind="longtime", d=1, p=3, s=0.1),
    dict(kind="convergence", d=1, p=5, s=-0.25),     # s must exceed s_pr
    dict(kind="longtime", d=1, p=5, s=0.1, nu=1.5),  # nu beyond (p-1)(s - s_pr) = 1.4
    dict(kind="longtime", d=1, p=5, s=0.1, nu=0.0),
    dict(kind="scaling", Ns=(8, 12)),
    dict(kind="bogus"),
    dict(kind="scaling", schema_version=99),
    dict(kind="tensor-suite", n_bilinear=10 ** 6),
    dict(kind="convergence", stride=500),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(kind="longtime", s=0.1, Ns=(32, 64), nu=0.2)
    assert cfg.a == pytest.approx(0.6) and cfg.sp == pytest.approx(0.05)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"kind": "scaling", "colour": 1})


def test_convergence_zero_data():
    cfg = ExperimentConfig(kind="convergence", s=-0.15, data="zero", Ns=(2, 4), tau=0.002,
                           dt=1e-4, ensemble=1, verify_samples=0)
    rec = run_convergence(cfg)
    assert [r["D"] for r in rec.rows] == [0.0, 0.0]
    assert not rec.passed      # no ratios can be formed


def test_convergence_single_mode():
    # both truncations contain the mode and the flow never leaves it
    cfg = ExperimentConfig(kind="convergence", s=-0.15, data="single-mode", mode=(2,), amplitude=0.7,
                           Ns=(4, 8), tau=0.01, dt=1e-4, ensemble=1, verify_samples=0)
    rec = run_convergence(cfg)
    assert max(r["D"] for r in rec.rows) < 1e-13
    with pytest.raises(ValueError):
        ExperimentConfig(kind="convergence", s=-0.15, data="single-mode")


def test_convergence_is_deterministic():
    cfg = ExperimentConfig(kind="convergence", s=-0.15, Ns=(2, 4), tau=0.004, dt=2e-4, ensemble=2,
                           stride=5)
    a, b = run_convergence(cfg), run_convergence(cfg, workers=2)
    assert a.comparable() == b.comparable()
    assert len(a.rows) == 4 and all(r["D"] > 0 for r in a.rows)
    assert "median_ratio_4_2" in a.summary


def test_longtime_small_run():
    cfg = ExperimentConfig(kind="longtime", s=0.1, nu=0.2, Ns=(2,), dt=1e-3, ensemble=2, stride=10)
    rec = run_longtime(cfg)
    assert {r["N"] for r in rec.rows} == {2}
    assert all(np.isfinite(r["normalized"]) and r["normalized"] > 0 for r in rec.rows)
    assert rec.summary["T_2"] == pytest.approx(2 ** 0.2)
    assert set(rec.flags["2"]) >= {"tail_ok", "step_doubling_ok"}


def test_longtime_zero_time():
    cfg = ExperimentConfig(kind="longtime", s=0.1, nu=0.2, Ns=(4,), ensemble=3)
    dev, norm0, flags = longtime_level(cfg, 4, 0.0)
    assert np.all(dev == 0) and np.all(norm0 > 0) and flags == {}


def test_longtime_single_mode_is_gauged_linear():
    # one mode: a pure phase rotation, so the deviation has a closed form, monotone on [0, 0.5]
    cfg = ExperimentConfig(kind="longtime", s=0.1, nu=0.2, Ns=(2,), data="single-mode", mode=(1,),
                           amplitude=0.6, dt=1e-3, ensemble=1, verify_samples=0, stride=1)
    dev, norm0, _ = longtime_level(cfg, 2, 0.5)
    want = single_mode_deviation((1,), 0.6, 5, 0.1, 0.5)
    assert dev[0] == pytest.approx(float(want), rel=1e-6)


def test_empty_suites_pass():
    cfg = ExperimentConfig(kind="tensor-suite", n_bilinear=0, n_multilinear=0, n_masked=0, descent_Ms=())
    rec = run_tensor_suite(cfg)
    assert rec.passed and rec.rows == []
    assert report(None, "tensor-suite") == "# nlslab report: tensor-suite\n"


def test_small_tensor_suite():
    cfg = ExperimentConfig(kind="tensor-suite", n_bilinear=40, n_multilinear=20, n_masked=10,
                           descent_Ms=(2, 4, 8), descent_trials=20)
    rec = run_tensor_suite(cfg)
    assert rec.summary["violations"] == 0 and rec.summary["checks"] == 70
    assert "descent_slope" in rec.summary


def test_counting_suite_and_report_round_trip():
    rec = run_counting_suite(small_counting())
    assert rec.summary["schur_failures"] == 0
    parsed = parse_report(report(rec))
    assert parsed["passed"] == rec.passed
    for k, v in rec.summary.items():
        assert parsed[k] == v


def test_counting_report_golden():
    text = report(run_counting_suite(small_counting()))
    assert text == GOLDEN.read_text()


def test_execute_writes_artifacts(tmp_path):
    cfg = small_counting(count_Ms_d2=())
    rec = execute(cfg, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "complete" and man["config"]["kind"] == "counting-suite"
    assert (tmp_path / "results.csv").read_text().startswith("suite,M,count,m,Gamma\n")
    back = load_summary(tmp_path)
    assert back.summary == rec.summary and back.passed == rec.passed


def test_run_dispatch():
    rec = run(small_counting(count_Ms_d2=(), n_schur=0))
    assert isinstance(rec, RunRecord) and "slope_d1" in rec.summary
