import numpy as np
import pytest
from hypothesis import given, strategies as st

from qme.core import (
    DensityMatrix,
    Operator,
    PhysicsError,
    basis_ket,
    embed,
    expm_hermitian,
    identity,
    kernel_basis,
    kron,
    partial_trace,
    partial_transpose,
    qubit_ket,
    sigma_minus,
    unvec,
    vec,
)
from qme.dynamics import bell_state

from helpers import random_density

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def proj(label):
    k = qubit_ket(label)
    return np.outer(k, k.conj())


def test_kron_of_identities():
    out = kron(identity((2,)), identity((2,)))
    assert out.dims == (2, 2)
    np.testing.assert_array_equal(out.data, np.eye(4))


def test_lowering_on_first_factor_takes_eg_to_gg():
    op = kron(sigma_minus(), identity((2,)))
    np.testing.assert_allclose(op.data @ qubit_ket("eg"), qubit_ket("gg"))


def test_kron_of_projectors():
    g = Operator((2,), proj("g"))
    e = Operator((2,), proj("e"))
    np.testing.assert_allclose(kron(g, e).data, proj("ge"))


def test_embed_matches_kron():
    dims = (2, 3, 2)
    a = Operator((3,), np.arange(9).reshape(3, 3).astype(complex))
    expected = np.kron(np.kron(np.eye(2), a.data), np.eye(2))
    np.testing.assert_allclose(embed(a, 1, dims).data, expected)


def test_embed_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        embed(sigma_minus(), 1, (2, 3))


def test_operator_shape_validation():
    with pytest.raises(ValueError):
        Operator((2, 2), np.eye(3))


def test_operator_data_is_read_only():
    op = identity((2,))
    with pytest.raises(ValueError):
        op.data[0, 0] = 5


@pytest.mark.parametrize(
    "matrix, message",
    [
        (np.array([[1, 1], [0, 0]]), "Hermitian"),
        (np.eye(2), "trace"),
        (np.diag([1.5, -0.5]), "negative"),
    ],
)
def test_density_matrix_invariants(matrix, message):
    with pytest.raises(PhysicsError, match=message):
        DensityMatrix((2,), matrix)


def test_marginal_of_product(rng):
    r1 = random_density(rng, 2, dims=(2,))
    r2 = random_density(rng, 2, dims=(2,))
    np.testing.assert_allclose(partial_trace(kron(r1, r2), [0]).data, r1.data, atol=1e-14)
    np.testing.assert_allclose(partial_trace(kron(r1, r2), [1]).data, r2.data, atol=1e-14)


def test_bell_marginal_is_maximally_mixed():
    out = partial_trace(bell_state("phi+"), [0])
    assert isinstance(out, DensityMatrix)
    np.testing.assert_allclose(out.data, np.eye(2) / 2, atol=1e-15)


def test_marginal_keeps_bath_of_ground_atom(rng):
    rho_e = random_density(rng, 4)
    g = DensityMatrix((2,), proj("g"))
    out = partial_trace(kron(g, rho_e), [1, 2])
    np.testing.assert_allclose(out.data, rho_e.data, atol=1e-14)


def test_partial_trace_rejects_bad_subsystems(rng):
    with pytest.raises(ValueError):
        partial_trace(random_density(rng), [2])


def test_partial_transpose_of_bell_state():
    ev = np.linalg.eigvalsh(partial_transpose(bell_state("phi-")).data)
    np.testing.assert_allclose(ev, [-0.5, 0.5, 0.5, 0.5], atol=1e-15)


def test_partial_transpose_block_pattern():
    # populations stay put, the ee,gg coherence moves to the eg,ge slot
    m = np.zeros((4, 4), dtype=complex)
    np.fill_diagonal(m, [0.4, 0.1, 0.1, 0.4])
    m[0, 3] = m[3, 0] = 0.3
    pt = partial_transpose(Operator((2, 2), m)).data
    assert pt[1, 2] == pytest.approx(0.3)
    assert pt[0, 3] == 0
    np.testing.assert_allclose(np.diag(pt), np.diag(m))


def test_partial_transpose_requires_bipartite():
    with pytest.raises(ValueError):
        partial_transpose(identity((2, 2, 2)))


@given(seeds)
def test_partial_transpose_of_product_is_positive(seed):
    rng = np.random.default_rng(seed)
    r1 = random_density(rng, 2, dims=(2,))
    r2 = random_density(rng, 2, dims=(2,))
    prod = kron(r1, r2)
    ev = np.linalg.eigvalsh(partial_transpose(prod).data)
    np.testing.assert_allclose(ev, np.linalg.eigvalsh(prod.data), atol=1e-12)


@given(seeds)
def test_partial_transpose_either_side_same_spectrum(seed):
    rho = random_density(np.random.default_rng(seed))
    a = np.linalg.eigvalsh(partial_transpose(rho, 0).data)
    b = np.linalg.eigvalsh(partial_transpose(rho, 1).data)
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert a.sum() == pytest.approx(1.0)


@given(seeds)
def test_partial_trace_preserves_trace_and_positivity(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 8, dims=(2, 2, 2))
    for keep in ([0], [1, 2], [0, 2]):
        red = partial_trace(rho, keep)
        assert np.trace(red.data) == pytest.approx(1.0)
        assert np.linalg.eigvalsh(red.data)[0] > -1e-12


def test_expm_of_zero_is_identity():
    u = expm_hermitian(Operator((2,), np.zeros((2, 2))), 3.0)
    np.testing.assert_allclose(u.data, np.eye(2))


def test_expm_rabi_half_period():
    sx = Operator((2,), np.array([[0, 1], [1, 0]]))
    u = expm_hermitian(sx, np.pi / 2).data
    np.testing.assert_allclose(u, -1j * sx.data, atol=1e-15)
    assert abs(u[0, 1]) == pytest.approx(1.0)


def test_expm_single_exchange_amplitude():
    # system qubit (x) bath qubit, H = lambda (c s^dag + c^dag s), lambda dt = 0.1
    c = kron(sigma_minus(), identity((2,)))
    s = kron(identity((2,)), sigma_minus())
    h = c @ s.dag + c.dag @ s
    u = expm_hermitian(h * 10.0, 0.01).data
    amp = qubit_ket("ge").conj() @ u @ qubit_ket("eg")
    assert abs(amp) == pytest.approx(np.sin(0.1), abs=1e-14)


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_hermitian(sigma_minus(), 1.0)


@given(seeds, st.floats(min_value=-5, max_value=5))
def test_expm_is_unitary(seed, t):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u = expm_hermitian(Operator((4,), a + a.conj().T), t).data
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)


def test_kernel_of_identity_is_empty():
    assert kernel_basis(np.eye(5)).shape == (5, 0)


def test_kernel_of_rank_deficient_matrix():
    m = np.diag([1.0, 2.0, 0.0])
    k = kernel_basis(m)
    assert k.shape == (3, 1)
    np.testing.assert_allclose(np.abs(k[:, 0]), [0, 0, 1], atol=1e-15)


def test_kernel_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        kernel_basis(np.eye(2), 0)


def test_vec_is_column_stacking():
    a, b, x = (np.arange(4).reshape(2, 2) + k for k in range(3))
    np.testing.assert_allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x))
    np.testing.assert_array_equal(unvec(vec(x), 2), x)


def test_basis_ket_ordering():
    assert np.argmax(basis_ket((2, 3), [1, 2])) == 5
    assert np.argmax(qubit_ket("ee")) == 0
    assert np.argmax(qubit_ket("gg")) == 3
