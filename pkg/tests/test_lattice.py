import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab.lattice import (LatticeField, alias_free_size, bracket, convolve_direct,
                            from_grid, grid_points, project, sobolev_norm, to_grid)


def rand_field(rng, d, K):
    c = rng.standard_normal((2 * K + 1,) * d) + 1j * rng.standard_normal((2 * K + 1,) * d)
    return LatticeField(d, K, c)


def test_bracket_values():
    assert bracket(0) == 1.0
    assert bracket((3, 4)) == pytest.approx(np.sqrt(26), rel=1e-15)
    assert bracket(2) == pytest.approx(2.2360679775, rel=1e-10)


def test_bracket_vectorised():
    ks = np.array([[0, 0], [3, 4], [1, 0]])
    np.testing.assert_allclose(bracket(ks), [1, np.sqrt(26), np.sqrt(2)])


def test_project_identity_and_low_mode():
    f = LatticeField.from_modes(1, 2, {k: 1 + k for k in range(-2, 3)})
    assert np.array_equal(project(f, 4).coeffs, f.coeffs)
    g = project(f, 1)
    assert g[0] == 1 and all(g[k] == 0 for k in (-2, -1, 1, 2))


def test_project_rejects_non_dyadic():
    f = LatticeField.zeros(1, 3)
    for N in (3, 0, 2.5, -2):
        with pytest.raises(ValueError):
            project(f, N)


def test_delta_is_difference_and_delta1_is_pi1():
    rng = np.random.default_rng(1)
    f = rand_field(rng, 2, 9)
    for N in (2, 4, 8, 16):
        diff = project(f, N).coeffs - project(f, N // 2).coeffs
        assert np.array_equal(project(f, N, "Delta").coeffs, diff)
    assert np.array_equal(project(f, 1, "Delta").coeffs, project(f, 1).coeffs)


def test_projection_algebra():
    rng = np.random.default_rng(2)
    f = rand_field(rng, 2, 8)
    for N1 in (1, 2, 4, 8):
        p = project(f, N1)
        assert np.array_equal(project(p, N1).coeffs, p.coeffs)
        for N2 in (1, 2, 4, 8):
            assert np.array_equal(project(p, N2).coeffs, project(f, min(N1, N2)).coeffs)


def test_delta_orthogonality():
    rng = np.random.default_rng(3)
    f = rand_field(rng, 1, 20)
    Ns = [1, 2, 4, 8, 16, 32]
    for N in Ns:
        for M in Ns:
            if N != M:
                ip = np.vdot(project(f, M, "Delta").coeffs, project(f, N, "Delta").coeffs)
                assert ip == 0


def test_sobolev_examples():
    assert sobolev_norm(LatticeField.zeros(1, 3), 1.0) == 0
    f = LatticeField.from_modes(2, 2, {(0, 0): 3})
    for s in (-1.0, 0.0, 2.5):
        assert sobolev_norm(f, s) == pytest.approx(3.0)
    g = LatticeField.from_modes(1, 2, {1: 1, -1: 1})
    assert sobolev_norm(g, 1.0) == pytest.approx(2.0, rel=1e-14)


def test_grid_constant_and_roundtrip():
    f = LatticeField.from_modes(2, 3, {(0, 0): 2 - 1j})
    np.testing.assert_allclose(to_grid(f, 7), 2 - 1j)
    rng = np.random.default_rng(4)
    for d, K, G in [(1, 10, 21), (1, 10, 64), (2, 6, 13), (2, 6, 30)]:
        f = rand_field(rng, d, K)
        back = from_grid(to_grid(f, G), K)
        err = np.linalg.norm(back.coeffs - f.coeffs) / np.linalg.norm(f.coeffs)
        assert err < 1e-12


def test_grid_matches_pointwise_synthesis():
    rng = np.random.default_rng(5)
    f = rand_field(rng, 1, 3)
    G = 9
    (x,) = grid_points(G, 1)
    expect = sum(f[k] * np.exp(1j * k * x) for k in range(-3, 4))
    np.testing.assert_allclose(to_grid(f, G), expect, atol=1e-12)


def test_grid_too_small_rejected():
    with pytest.raises(ValueError):
        to_grid(LatticeField.zeros(1, 5), 10)


def test_grid_product_matches_direct_convolution():
    rng = np.random.default_rng(6)
    for d, K in [(1, 5), (2, 3)]:
        a, b = rand_field(rng, d, K), rand_field(rng, d, K)
        G = 4 * K + 1
        prod = from_grid(to_grid(a, G) * np.conj(to_grid(b, G)), 2 * K)
        direct = convolve_direct([(a, 1), (b, -1)])
        np.testing.assert_allclose(prod.coeffs, direct.coeffs, atol=1e-11)


def test_parseval():
    rng = np.random.default_rng(7)
    f = rand_field(rng, 2, 5)
    u = to_grid(f, 16)
    assert np.mean(np.abs(u) ** 2) == pytest.approx(sobolev_norm(f, 0) ** 2, rel=1e-10)


def test_alias_free_size():
    assert alias_free_size(32, 5) >= 6 * 32 + 1
    assert alias_free_size(8, 3) >= 33


def test_immutable_and_csv_roundtrip():
    rng = np.random.default_rng(8)
    f = rand_field(rng, 2, 2)
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 1
    g = LatticeField.from_csv(f.to_csv())
    assert np.array_equal(g.coeffs, f.coeffs)


def test_conj_coefficients():
    rng = np.random.default_rng(9)
    f = rand_field(rng, 1, 4)
    G = 9
    np.testing.assert_allclose(to_grid(f.conj(), G), np.conj(to_grid(f, G)), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(0, 6), st.integers(0, 2 ** 32 - 1))
def test_roundtrip_property(d, K, seed):
    f = rand_field(np.random.default_rng(seed), d, K)
    G = 2 * K + 1
    back = from_grid(to_grid(f, G), K)
    assert np.allclose(back.coeffs, f.coeffs, rtol=0, atol=1e-12 * max(1, np.abs(f.coeffs).max()) * G ** d)
