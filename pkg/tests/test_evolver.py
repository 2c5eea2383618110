import numpy as np
import pytest
from scipy import stats

from nlslab.evolver import (SolverConfig, Trajectory, evolve, evolve_batch, gauged_linear_deviation,
                            single_mode_deviation, single_mode_solution, time_reversed)
from nlslab.lattice import LatticeField, ball_mask, sobolev_norm
from nlslab.randomdata import GaussianDataSpec, sample_data, sigma_n


def rel_h0(a, b):
    return sobolev_norm(a - b, 0) / sobolev_norm(b, 0)


def test_zero_data_stays_zero():
    cfg = SolverConfig(1, 5, 8, 1.0, dt=1e-3, tau=0.05)
    tr = evolve(cfg, LatticeField.zeros(1, 8))
    assert all(not f.coeffs.any() for f in tr.fields)


@pytest.mark.parametrize("d,k,p,sigma", [(1, 3, 5, 0.5), (1, -2, 3, 1.5), (2, (1, -2), 5, 0.7), (2, (0, 1), 3, None)])
def test_single_mode_closed_form(d, k, p, sigma):
    c = 0.8 + 0.3j
    N = 8
    f0 = LatticeField.from_modes(d, N, {k if d > 1 else k: c})
    cfg = SolverConfig(d, p, N, sigma, dt=1e-4, tau=0.1, stride=100)
    tr = evolve(cfg, f0)
    err = max(np.max(np.abs(f.coeffs - single_mode_solution(d, N, k, c, p, sigma, t).coeffs))
              for t, f in zip(tr.times, tr.fields))
    assert err < 1e-8


def test_mass_ledger_and_truncation():
    N = 16
    spec = GaussianDataSpec(3, 1, 0.8, N)
    cfg = SolverConfig(1, 5, N, sigma_n(1, 0.8, N), dt=1e-4, tau=0.02, stride=20)
    tr = evolve(cfg, sample_data(spec))
    assert tr.max_mass_drift() < 1e-8
    outside = ~ball_mask(1, N, N)
    assert all(not f.coeffs[outside].any() for f in tr.fields)
    assert len(tr.mass) == len(tr.times)
    assert tr.ledger_csv().count("\n") == len(tr.times) + 1


def test_rejects_untruncated_data():
    f = LatticeField.from_modes(1, 8, {7: 1.0})
    with pytest.raises(ValueError):
        evolve(SolverConfig(1, 3, 4, 0.0, dt=1e-3, tau=0.01), f)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(1, 4, 8, 0.0)
    with pytest.raises(ValueError):
        SolverConfig(1, 5, 8, 0.0, dt=-1)
    with pytest.raises(ValueError):
        SolverConfig(1, 5, 8, 0.0, order=2)
    with pytest.raises(ValueError):
        SolverConfig(1, 5, 8, 0.0, dt=0.03, tau=0.1).steps


def test_nan_guard():
    f = LatticeField.from_modes(1, 4, {0: 1e80})
    with pytest.raises(FloatingPointError):
        evolve(SolverConfig(1, 5, 4, None, dt=1e-3, tau=0.01, stride=1), f)


def test_trajectory_invariants():
    f = LatticeField.zeros(1, 2)
    cfg = SolverConfig(1, 3, 2, 0.0)
    with pytest.raises(ValueError):
        Trajectory(cfg, np.array([0.0, 0.0]), [f, f], np.zeros(2))
    with pytest.raises(ValueError):
        Trajectory(cfg, np.array([0.0, 1.0]), [f], np.zeros(2))


def test_time_reversal():
    spec = GaussianDataSpec(9, 1, 0.8, 16)
    f0 = sample_data(spec)
    cfg = SolverConfig(1, 5, 16, sigma_n(1, 0.8, 16), dt=1e-4, tau=0.05, stride=500)
    back = time_reversed(cfg, evolve(cfg, f0).final)
    assert rel_h0(back, f0) < 1e-6


def test_time_reversal_exact_on_single_mode():
    c = 0.6 - 0.2j
    cfg = SolverConfig(1, 3, 8, 0.4, dt=1e-4, tau=0.05, stride=500)
    f0 = LatticeField.from_modes(1, 8, {2: c})
    back = time_reversed(cfg, evolve(cfg, f0).final)
    assert rel_h0(back, f0) < 1e-9


def _order(errs, dts):
    return stats.linregress(np.log(dts), np.log(errs)).slope


def test_convergence_order_single_mode():
    c, p, sigma, k = 1.4, 5, 2.0, 1
    f0 = LatticeField.from_modes(1, 4, {k: c})
    dts = np.array([0.02, 0.01, 0.005, 0.0025])
    ref = evolve(SolverConfig(1, p, 4, sigma, dt=dts[-1] / 8, tau=0.4, stride=10 ** 6), f0).final
    errs = [rel_h0(evolve(SolverConfig(1, p, 4, sigma, dt=h, tau=0.4, stride=10 ** 6), f0).final, ref) for h in dts]
    assert 3.6 <= _order(errs, dts) <= 4.4


def test_convergence_order_random_data():
    N = 8
    f0 = sample_data(GaussianDataSpec(2, 1, 0.5, N)).scale(2.0)
    sig = sigma_n(1, 0.5, N)
    dts = np.array([0.004, 0.002, 0.001, 0.0005])
    mk = lambda h: SolverConfig(1, 3, N, sig, dt=h, tau=0.2, stride=10 ** 6)
    ref = evolve(mk(dts[-1] / 8), f0).final
    errs = [rel_h0(evolve(mk(h), f0).final, ref) for h in dts]
    assert 3.6 <= _order(errs, dts) <= 4.4


def test_step_doubling_flag():
    f0 = sample_data(GaussianDataSpec(1, 1, 0.8, 8))
    tr = evolve(SolverConfig(1, 3, 8, sigma_n(1, 0.8, 8), dt=1e-3, tau=0.02, verify=True, tol=1e-6), f0)
    assert tr.flags["step_doubling_ok"] and tr.flags["step_doubling_error"] < 1e-6
    tr = evolve(SolverConfig(1, 3, 8, sigma_n(1, 0.8, 8), dt=1e-3, tau=0.02, verify=True, tol=1e-30), f0)
    assert not tr.flags["step_doubling_ok"]


def test_batch_equals_single():
    fs = [sample_data(GaussianDataSpec(4, 1, 0.7, 8, sample=i)) for i in range(3)]
    cfg = SolverConfig(1, 5, 8, sigma_n(1, 0.7, 8), dt=1e-3, tau=0.01, stride=5)
    _, snaps, _ = evolve_batch(cfg, np.stack([f.coeffs for f in fs]), 8)
    for i, f in enumerate(fs):
        np.testing.assert_allclose(snaps[-1][i], evolve(cfg, f).final.coeffs, rtol=0, atol=1e-14)


def test_gauged_deviation_single_mode_closed_form():
    c, k, p, s = 0.9 + 0.2j, 2, 5, 0.1
    f0 = LatticeField.from_modes(1, 8, {k: c})
    tr = evolve(SolverConfig(1, p, 4, None, dt=1e-4, tau=0.2, stride=10), f0)
    dev = gauged_linear_deviation(tr, s)
    assert dev.values[0] == 0
    ref = single_mode_deviation(k, c, p, s, tr.times)
    assert np.max(np.abs(dev.values - ref)) < 1e-7
    assert ref[-1] > 1e-3


def test_gauged_deviation_reproducible():
    f0 = sample_data(GaussianDataSpec(5, 1, 0.6, 8, kind="homogeneous"))
    cfg = SolverConfig(1, 5, 8, None, dt=1e-3, tau=0.05, stride=5)
    a = gauged_linear_deviation(evolve(cfg, f0), 0.1).values
    b = gauged_linear_deviation(evolve(cfg, f0), 0.1).values
    assert np.array_equal(a, b)


def test_tail_monitor():
    f0 = sample_data(GaussianDataSpec(5, 1, 0.6, 8, kind="homogeneous"))
    tr = evolve(SolverConfig(1, 5, 8, None, dt=1e-3, tau=0.02), f0)
    assert tr.flags["tail_ok"] and tr.flags["tail_mass"] < 1e-6


def test_gauge_modulus_invariance():
    f0 = sample_data(GaussianDataSpec(5, 1, 0.6, 8, kind="homogeneous"))
    tr = evolve(SolverConfig(1, 5, 8, None, dt=1e-3, tau=0.02), f0)
    from nlslab.wick import gauge_phase
    th = gauge_phase(tr, 5, 0.0)
    for B, f in zip(th.values, tr.fields):
        np.testing.assert_allclose(np.abs(np.exp(1j * B) * f.coeffs), np.abs(f.coeffs), rtol=1e-14)


def test_verify_subset_matches_full_check_on_that_subset():
    fs = np.stack([sample_data(GaussianDataSpec(4, 1, 0.7, 8, sample=i)).coeffs for i in range(3)])
    base = dict(d=1, p=5, N=8, sigma=sigma_n(1, 0.7, 8), dt=1e-3, tau=0.01, verify=True)
    _, _, sub = evolve_batch(SolverConfig(**base, verify_samples=1), fs, 8)
    _, _, one = evolve_batch(SolverConfig(**base), fs[:1], 8)
    assert sub["step_doubling_error"] == pytest.approx(one["step_doubling_error"], rel=1e-12)
    with pytest.raises(ValueError):
        SolverConfig(**base, verify_samples=0)
