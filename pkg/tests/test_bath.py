import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qme.bath import (
    BathState,
    CouplingSpec,
    bath_from_squeezing,
    bell_bath,
    coefficients_2q,
    coefficients_2q_pure,
    coefficients_nq,
    effective_rate,
    ghz_bath,
    ground_bath,
    near_bell_bath,
    product_bath,
    real_phi_bath,
    squeezing_parameter,
    w_bath,
)
from qme.core import embed, sigma_minus

from helpers import random_density, random_ket

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def coupling(n, gamma=1.0, dt=1e-3):
    return CouplingSpec.from_rates([gamma] * n, dt)


def operator_oracle(bath, cp):
    """Coefficients as expectation values of bath ladder operators."""
    n = bath.n
    rho = bath.rho.data
    s = [embed(sigma_minus(), k, (2,) * n).data for k in range(n)]
    up = [m.conj().T for m in s]
    g, lam = cp.gammas, np.asarray(cp.lambdas)

    def ev(op):
        return np.trace(rho @ op)

    gd = np.array([g[l] * ev(s[l] @ up[l]).real for l in range(n)])
    gu = np.array([g[l] * ev(up[l] @ s[l]).real for l in range(n)])
    h = np.array([lam[l] * ev(up[l]) for l in range(n)])
    gdd = np.zeros((n, n), dtype=complex)
    gdu = np.zeros((n, n), dtype=complex)
    for l in range(n):
        for m in range(l + 1, n):
            gdd[l, m] = np.sqrt(g[l] * g[m]) * ev(up[l] @ up[m])
            gdu[l, m] = np.sqrt(g[l] * g[m]) * ev(up[l] @ s[m])
    return gd, gu, gdd, gdu, h


def assert_coeffs_equal(a, b, atol=1e-12):
    for name in ("gamma_down", "gamma_up", "gamma_dd", "gamma_du", "h_eff_coeff"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), atol=atol, err_msg=name)


def test_ground_bath_gives_pure_loss():
    c = coefficients_2q(ground_bath(), coupling(2, gamma=0.7))
    np.testing.assert_allclose(c.gamma_down, [0.7, 0.7])
    np.testing.assert_allclose(c.gamma_up, 0)
    assert c.gamma_dd[0, 1] == 0 and c.gamma_du[0, 1] == 0
    np.testing.assert_allclose(c.h_eff_coeff, 0)


@pytest.mark.parametrize("phi", [0.0, np.pi, 0.4])
def test_bell_bath_coefficients(phi):
    gamma = 2.0
    c = coefficients_2q(bell_bath(phi), coupling(2, gamma))
    np.testing.assert_allclose(c.gamma_down, gamma / 2)
    np.testing.assert_allclose(c.gamma_up, gamma / 2)
    assert c.gamma_dd[0, 1] == pytest.approx(gamma / 2 * np.exp(1j * phi))
    assert c.gamma_du[0, 1] == 0
    np.testing.assert_allclose(c.h_eff_coeff, 0, atol=1e-15)


def test_product_bath_drive_amplitude():
    alpha, beta = 0.6, 0.8j
    cp = coupling(2, dt=0.01)
    c = coefficients_2q(product_bath([(alpha, beta), (1, 0)]), cp)
    assert c.h_eff_coeff[0] == pytest.approx(cp.lambdas[0] * alpha * np.conj(beta))
    assert c.h_eff_coeff[1] == 0


def test_ghz_bath_has_no_pair_terms():
    c = coefficients_nq(ghz_bath(3), coupling(3, 1.5))
    np.testing.assert_allclose(c.gamma_dd, 0)
    np.testing.assert_allclose(c.gamma_du, 0)
    np.testing.assert_allclose(c.h_eff_coeff, 0)
    np.testing.assert_allclose(c.gamma_down, 0.75)
    np.testing.assert_allclose(c.gamma_up, 0.75)


def test_w_bath_pair_coefficients():
    cp = CouplingSpec.from_rates([1.0, 2.0, 3.0], 1e-3)
    c = coefficients_nq(w_bath(3), cp)
    g = cp.gammas
    for l in range(3):
        for m in range(l + 1, 3):
            assert c.gamma_du[l, m] == pytest.approx(np.sqrt(g[l] * g[m]) / 3)


@given(seeds)
def test_two_qubit_paths_agree(seed):
    rng = np.random.default_rng(seed)
    bath = BathState.from_ket(random_ket(rng))
    cp = CouplingSpec.from_rates(rng.uniform(0.1, 2, size=2), 1e-3)
    assert_coeffs_equal(coefficients_2q(bath, cp), coefficients_nq(bath, cp), atol=1e-10)
    assert_coeffs_equal(coefficients_2q(bath, cp), coefficients_2q_pure(bath, cp), atol=1e-10)


@given(seeds, st.integers(min_value=1, max_value=4))
def test_coefficients_match_operator_expectations(seed, n):
    rng = np.random.default_rng(seed)
    bath = BathState(random_density(rng, 2**n, dims=(2,) * n))
    cp = CouplingSpec.from_rates(rng.uniform(0.1, 2, size=n), 1e-2)
    c = coefficients_nq(bath, cp)
    gd, gu, gdd, gdu, h = operator_oracle(bath, cp)
    np.testing.assert_allclose(c.gamma_down, gd, atol=1e-12)
    np.testing.assert_allclose(c.gamma_up, gu, atol=1e-12)
    np.testing.assert_allclose(c.gamma_dd, gdd, atol=1e-12)
    np.testing.assert_allclose(c.gamma_du, gdu, atol=1e-12)
    np.testing.assert_allclose(c.h_eff_coeff, h, atol=1e-10)


@given(seeds, st.integers(min_value=2, max_value=4))
def test_coefficient_matrix_is_positive(seed, n):
    rng = np.random.default_rng(seed)
    bath = BathState(random_density(rng, 2**n, rank=1 + seed % 3, dims=(2,) * n))
    k = coefficients_nq(bath, coupling(n)).kossakowski()
    np.testing.assert_allclose(k, k.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(k)[0] > -1e-12


def test_local_rates_sum_to_gamma(rng):
    bath = BathState(random_density(rng, 8, dims=(2, 2, 2)))
    cp = CouplingSpec.from_rates([0.5, 1.0, 1.5], 1e-3)
    c = coefficients_nq(bath, cp)
    np.testing.assert_allclose(c.gamma_down + c.gamma_up, cp.gammas)


def test_rate_from_coupling():
    cp = CouplingSpec((3.0,), 0.01)
    assert cp.gammas[0] == pytest.approx(0.09)


def test_strong_coupling_warns():
    with pytest.warns(UserWarning, match="weak-coupling"):
        CouplingSpec((20.0,), 0.01)


def test_weak_coupling_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        CouplingSpec((1.0,), 0.01)


def test_detuning_not_supported():
    with pytest.raises(ValueError, match="resonant"):
        CouplingSpec((1.0,), 0.01, detunings=(0.5,))


def test_coupling_size_mismatch():
    with pytest.raises(ValueError):
        coefficients_nq(ground_bath(2), coupling(3))


def test_unnormalised_bath_rejected():
    with pytest.raises(Exception):
        BathState.from_ket(np.array([1.0, 1.0, 0, 0]))


def test_coefficients_2q_needs_two_qubits():
    with pytest.raises(ValueError):
        coefficients_2q(ghz_bath(3), coupling(3))


def test_squeezing_endpoints():
    bath = bath_from_squeezing(0.0)
    assert bath.amplitude("gg") == pytest.approx(1.0)
    assert bath.amplitude("ee") == pytest.approx(0.0)
    assert effective_rate(bath, 2.0) == pytest.approx(2.0)
    assert effective_rate(real_phi_bath(1 / np.sqrt(2)), 1.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("r, b_gg", [(0.5, 0.908), (1.0, 0.796), (2.0, 0.720), (3.0, 0.709), (4.0, 0.707)])
def test_squeezing_amplitudes(r, b_gg):
    assert round(abs(bath_from_squeezing(r).amplitude("gg")), 3) == b_gg


def test_effective_rate_from_amplitude():
    b_gg = 0.796
    bath = real_phi_bath(np.sqrt(1 - b_gg**2))
    assert effective_rate(bath, 1.0) == pytest.approx(0.2672, abs=1e-4)


@given(st.floats(min_value=0, max_value=6), st.floats(min_value=-3, max_value=3))
def test_squeezing_round_trip(r, theta):
    r_back, theta_back = squeezing_parameter(bath_from_squeezing(r, theta))
    assert r_back == pytest.approx(r, abs=1e-8 * max(1, np.exp(2 * r)))
    if r > 1e-3:
        assert np.exp(1j * theta_back) == pytest.approx(np.exp(1j * theta), abs=1e-9)


def test_squeezing_parameter_needs_dominant_ground_amplitude():
    with pytest.raises(ValueError):
        squeezing_parameter(real_phi_bath(0.8))
    with pytest.raises(ValueError):
        effective_rate(bell_bath(0.0, "psi"), 1.0)


def test_near_bell_bath_is_normalised():
    bath = near_bell_bath(0.0, 1e-3)
    assert np.trace(bath.rho.data) == pytest.approx(1.0)
    assert abs(bath.amplitude("gg")) > abs(bath.amplitude("ee"))


def test_diagonal_part_drops_coherences():
    d = ghz_bath(3).diagonal_part().rho.data
    np.testing.assert_allclose(d, np.diag(np.diag(d)))
    assert d[0, 0] == pytest.approx(0.5)
