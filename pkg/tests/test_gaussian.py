import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qme.core import DensityMatrix, PhysicsError, destroy, embed
from qme.gaussian import (
    DriftDiffusion,
    GaussianState,
    covariance_from_moments,
    drift_diffusion,
    evolve_covariance,
    fock_covariance,
    gaussian_fidelity,
    jumps_to_quadrature,
    squeezing_jumps,
    symplectic_form,
    time_to_fidelity,
    tmsv_covariance,
    tmsv_ket,
)

squeeze = st.floats(min_value=0.0, max_value=2.0)
phase = st.floats(min_value=-np.pi, max_value=np.pi)


def thermal(nbar, n_modes=1):
    return GaussianState(np.zeros(2 * n_modes), (nbar + 0.5) * np.eye(2 * n_modes))


def test_loss_row():
    gamma = 0.8
    c = jumps_to_quadrature([{"a1": np.sqrt(gamma)}]).C
    np.testing.assert_allclose(c, [[np.sqrt(gamma / 2), 1j * np.sqrt(gamma / 2)]])


def test_unsqueezed_jumps_are_independent_losses():
    c = jumps_to_quadrature(squeezing_jumps(1.0, 0.0)).C
    expected = jumps_to_quadrature([{"a1": 1.0}, {"a2": 1.0}]).C
    np.testing.assert_allclose(c, expected, atol=1e-15)


def test_squeezed_rows_mix_modes():
    c = jumps_to_quadrature(squeezing_jumps(1.0, 1.0)).C
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(c[0], [s * np.cosh(1), s * np.sinh(1), 1j * s * np.cosh(1), -1j * s * np.sinh(1)])


def test_nonlinear_jump_rejected():
    with pytest.raises(ValueError, match="linear"):
        jumps_to_quadrature([{"a1 a2": 1.0}])


def test_single_mode_loss_drift_diffusion():
    gamma = 0.6
    dd = drift_diffusion(jumps_to_quadrature([{"a1": np.sqrt(gamma)}]))
    np.testing.assert_allclose(dd.A, -gamma / 2 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(dd.B, gamma / 2 * np.eye(2), atol=1e-15)


@settings(max_examples=30)
@given(squeeze, phase, st.floats(min_value=0.0, max_value=3.0))
def test_squeezing_system_relaxes_to_tmsv(r, theta, gamma):
    dd = drift_diffusion(jumps_to_quadrature(squeezing_jumps(gamma, r, theta)))
    sigma = tmsv_covariance(r, theta).cov
    np.testing.assert_allclose(dd.A, -gamma / 2 * np.eye(4), atol=1e-12 * (1 + gamma))
    np.testing.assert_allclose(dd.B, gamma * sigma, atol=1e-12 * (1 + gamma) * np.cosh(2 * r))
    lyap = dd.A @ sigma + sigma @ dd.A.T + dd.B
    assert np.max(np.abs(lyap)) < 1e-12 * np.cosh(2 * r) * (1 + gamma)


def test_zero_rate_freezes_covariance():
    dd = drift_diffusion(jumps_to_quadrature(squeezing_jumps(0.0, 1.0), n_modes=2))
    assert not dd.A.any() and not dd.B.any()
    s0 = tmsv_covariance(0.3)
    traj = evolve_covariance(dd, s0, 0.1, 1.0)
    np.testing.assert_array_equal(traj.states[-1].cov, s0.cov)


def test_non_psd_diffusion_rejected():
    with pytest.raises(PhysicsError):
        DriftDiffusion(np.zeros((2, 2)), -np.eye(2))


def test_tmsv_covariance_values():
    assert np.allclose(tmsv_covariance(0.0).cov, np.eye(4) / 2)
    cov = tmsv_covariance(1.0).cov
    np.testing.assert_allclose(np.diag(cov), np.cosh(2) / 2)
    assert cov[0, 1] == pytest.approx(-np.sinh(2) / 2)
    assert cov[2, 3] == pytest.approx(np.sinh(2) / 2)
    assert round(cov[0, 0], 3) == 1.881 and round(abs(cov[0, 1]), 3) == 1.813


@settings(max_examples=30)
@given(squeeze, phase)
def test_tmsv_is_pure(r, theta):
    assert tmsv_covariance(r, theta).is_pure()
    np.testing.assert_allclose(tmsv_covariance(r, theta).symplectic_eigenvalues(), 0.5, atol=1e-9)


def test_uncertainty_violation_rejected():
    with pytest.raises(PhysicsError):
        GaussianState(np.zeros(2), 0.2 * np.eye(2))
    with pytest.raises(PhysicsError):
        GaussianState(np.zeros(2), [[0.5, 0.1], [0.0, 0.5]])


def test_thermal_state_decays_to_vacuum():
    gamma, nbar = 0.5, 2.0
    dd = drift_diffusion(jumps_to_quadrature([{"a1": np.sqrt(gamma)}]))
    traj = evolve_covariance(dd, thermal(nbar), 0.02, 6.0, stride=25)
    for t, s in zip(traj.times, traj.states):
        expected = 0.5 + nbar * np.exp(-gamma * t)
        np.testing.assert_allclose(s.cov, expected * np.eye(2), atol=1e-10)


def test_step_bound_enforced():
    dd = drift_diffusion(jumps_to_quadrature([{"a1": 1.0}]))
    with pytest.raises(ValueError, match="exceeds"):
        evolve_covariance(dd, thermal(0.0), 0.1, 1.0)


def test_squeezing_dynamics_reach_threshold():
    r = 0.5
    dd = drift_diffusion(jumps_to_quadrature(squeezing_jumps(1.0, r)))
    target = tmsv_covariance(r)
    traj = evolve_covariance(dd, GaussianState.vacuum(2), 0.005, 20.0, stride=20)
    fid = np.array([gaussian_fidelity(s, target) for s in traj.states])
    t98 = time_to_fidelity(traj.times, fid, 0.98)
    assert 0 < t98 < 20
    assert fid[-1] > 0.9999


def test_identical_pure_states_have_unit_fidelity():
    s = tmsv_covariance(0.8, 0.4)
    assert gaussian_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30)
@given(squeeze)
def test_vacuum_fidelity(r):
    f = gaussian_fidelity(GaussianState.vacuum(2), tmsv_covariance(r))
    assert f == pytest.approx(1 / np.cosh(r) ** 2, rel=1e-10)


def test_vacuum_fidelity_at_unit_squeezing():
    assert round(gaussian_fidelity(GaussianState.vacuum(2), tmsv_covariance(1.0)), 4) == 0.4200


@settings(max_examples=30)
@given(squeeze, phase, st.floats(min_value=0.0, max_value=3.0))
def test_fidelity_symmetric(r, theta, nbar):
    a, b = tmsv_covariance(r, theta), thermal(nbar, 2)
    assert gaussian_fidelity(a, b) == pytest.approx(gaussian_fidelity(b, a), rel=1e-12)
    assert 0 < gaussian_fidelity(a, b) <= 1 + 1e-12


def test_fidelity_needs_a_pure_state():
    with pytest.raises(ValueError, match="pure"):
        gaussian_fidelity(thermal(1.0), thermal(2.0))


def test_fidelity_needs_zero_means():
    displaced = GaussianState(np.array([1.0, 0.0]), 0.5 * np.eye(2))
    with pytest.raises(ValueError, match="zero-mean"):
        gaussian_fidelity(displaced, GaussianState.vacuum(1))


def test_time_to_fidelity_interpolates():
    t = np.array([0.0, 1.0, 2.0])
    f = np.array([0.5, 0.9, 1.0])
    assert time_to_fidelity(t, f, 0.95) == pytest.approx(1.5)
    assert np.isnan(time_to_fidelity(t, f, 1.1))


@pytest.mark.parametrize("r,theta", [(0.5, 0.0), (1.0, 0.0), (0.7, 1.1)])
def test_jump_operators_annihilate_tmsv(r, theta):
    d = 30
    a1 = embed(destroy(d), 0, (d, d)).data
    a2 = embed(destroy(d), 1, (d, d)).data
    psi = tmsv_ket(r, theta, d)
    ch, sh = np.cosh(r), np.exp(1j * theta) * np.sinh(r)
    for op in (ch * a1 + sh * a2.conj().T, ch * a2 + sh * a1.conj().T):
        # the truncated creation operator drops the top Fock level
        assert np.linalg.norm(op @ psi) < 10 * np.tanh(r) ** (d - 1) * np.cosh(r)


@pytest.mark.parametrize("r,theta", [(0.5, 0.0), (1.0, 0.6)])
def test_fock_moments_of_tmsv(r, theta):
    d = 30
    psi = tmsv_ket(r, theta, d)
    cov = fock_covariance(DensityMatrix.from_ket((d, d), psi)).cov
    # renormalised truncation drops weight ~ d^2 tanh(r)^(2d)
    np.testing.assert_allclose(cov, tmsv_covariance(r, theta).cov, atol=1e-5)


def test_moments_of_vacuum():
    np.testing.assert_allclose(covariance_from_moments(np.zeros((2, 2)), np.zeros((2, 2))), np.eye(4) / 2)


def test_symplectic_form_is_antisymmetric():
    om = symplectic_form(3)
    np.testing.assert_array_equal(om, -om.T)
    np.testing.assert_array_equal(om @ om, -np.eye(6))
