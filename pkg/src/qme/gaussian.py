"""Covariance-matrix dynamics for linear bosonic master equations.

Quadratures are ordered (q_1, ..., q_N, p_1, ..., p_N) with
a = (q + i p)/sqrt(2), hbar = 1 and vacuum covariance I/2.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import DensityMatrix, PhysicsError

SYM_TOL = 1e-12
UNCERTAINTY_TOL = -1e-9
PURITY_TOL = 1e-6

_TERM = re.compile(r"^(a|ad)(\d+)$")


def symplectic_form(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class GaussianState:
    means: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        means = np.array(self.means, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError("covariance must be a 2N x 2N matrix")
        if means.shape != (cov.shape[0],):
            raise ValueError("means must have length 2N")
        if np.max(np.abs(cov - cov.T)) > SYM_TOL:
            raise PhysicsError("covariance matrix is not symmetric")
        omega = symplectic_form(cov.shape[0] // 2)
        lo = np.linalg.eigvalsh(cov + 0.5j * omega)[0]
        if lo < UNCERTAINTY_TOL:
            raise PhysicsError(f"uncertainty relation violated (min eigenvalue {lo:.3e})")
        cov.setflags(write=False)
        means.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "means", means)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    @classmethod
    def vacuum(cls, n_modes: int) -> "GaussianState":
        return cls(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))

    def symplectic_eigenvalues(self) -> np.ndarray:
        omega = symplectic_form(self.n_modes)
        ev = np.sort(np.abs(np.linalg.eigvals(1j * omega @ self.cov)))
        return ev[::2]

    def is_pure(self, tol: float = PURITY_TOL) -> bool:
        return bool(np.all(np.abs(self.symplectic_eigenvalues() - 0.5) < tol))


@dataclass(frozen=True)
class LinearJumpSet:
    """Rows of ``C`` give L_m = sum_l (Q_ml q_l + P_ml p_l), rates included."""

    C: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.C.shape[1] // 2


@dataclass(frozen=True)
class DriftDiffusion:
    A: np.ndarray
    B: np.ndarray = field(repr=False)

    def __post_init__(self):
        lo = np.linalg.eigvalsh(0.5 * (self.B + self.B.T))[0] if self.B.size else 0.0
        if lo < -1e-12:
            raise PhysicsError(f"diffusion matrix is not positive semidefinite ({lo:.3e})")


def jumps_to_quadrature(jumps: Sequence[Mapping[str, complex]], n_modes: Optional[int] = None) -> LinearJumpSet:
    """Convert jump operators written in mode operators to quadrature rows.

    Each jump is a mapping from terms ``"a<k>"`` / ``"ad<k>"`` (1-based mode
    index, ``ad`` = creation) to complex coefficients.  Anything else, such
    as a product of mode operators, is rejected.
    """
    parsed = []
    top = 0
    for jump in jumps:
        row = []
        for term, coef in jump.items():
            m = _TERM.match(term.replace(" ", ""))
            if m is None:
                raise ValueError(f"jump term {term!r} is not linear in the mode operators")
            mode = int(m.group(2))
            if mode < 1:
                raise ValueError("mode indices start at 1")
            top = max(top, mode)
            row.append((m.group(1), mode - 1, complex(coef)))
        parsed.append(row)
    n = n_modes or top
    c = np.zeros((len(parsed), 2 * n), dtype=complex)
    s = 1 / np.sqrt(2)
    for i, row in enumerate(parsed):
        for kind, mode, coef in row:
            if mode >= n:
                raise ValueError(f"mode {mode + 1} outside {n} modes")
            c[i, mode] += s * coef
            c[i, n + mode] += (1j if kind == "a" else -1j) * s * coef
    return LinearJumpSet(c)


def drift_diffusion(jumps: LinearJumpSet, G: Optional[np.ndarray] = None) -> DriftDiffusion:
    """Drift A = Omega (G + Im C^H C) and diffusion B = Omega Re(C^H C) Omega^T."""
    n = jumps.n_modes
    omega = symplectic_form(n)
    g = np.zeros((2 * n, 2 * n)) if G is None else np.asarray(G, dtype=float)
    cc = jumps.C.conj().T @ jumps.C
    a = omega @ (g + cc.imag)
    b = omega @ cc.real @ omega.T
    return DriftDiffusion(a, 0.5 * (b + b.T))


def squeezing_jumps(gamma_eff: float, r: float, theta: float = 0.0) -> list[dict[str, complex]]:
    """sqrt(Gamma)[cosh r a_l + e^{i theta} sinh r a_m^dag] for (l, m) = (1, 2), (2, 1)."""
    s = np.sqrt(gamma_eff)
    ch, sh = np.cosh(r), np.exp(1j * theta) * np.sinh(r)
    return [{"a1": s * ch, "ad2": s * sh}, {"a2": s * ch, "ad1": s * sh}]


def bath_jumps(b_gg: complex, b_ee: complex, gamma: float) -> list[dict[str, complex]]:
    """sqrt(gamma)(b_gg a_1 + b_ee a_2^dag) and sqrt(gamma)(b_gg a_2 + b_ee a_1^dag)."""
    s = np.sqrt(gamma)
    return [{"a1": s * b_gg, "ad2": s * b_ee}, {"a2": s * b_gg, "ad1": s * b_ee}]


def covariance_from_moments(n_mat: np.ndarray, m_mat: np.ndarray) -> np.ndarray:
    """Symmetrised covariance from N_ij = <a_i^dag a_j> and M_ij = <a_i a_j> (zero means)."""
    n_mat = np.asarray(n_mat)
    m_mat = np.asarray(m_mat)
    k = n_mat.shape[0]
    half = 0.5 * np.eye(k)
    qq = m_mat.real + n_mat.real + half
    pp = -m_mat.real + n_mat.real + half
    qp = m_mat.imag + n_mat.imag
    cov = np.block([[qq, qp], [qp.T, pp]])
    return 0.5 * (cov + cov.T)


def tmsv_covariance(r: float, theta: float = 0.0) -> GaussianState:
    """Two-mode squeezed vacuum S(r e^{i theta})|0,0>."""
    if r < 0:
        raise ValueError("squeezing amplitude must be non-negative")
    n_mat = np.sinh(r) ** 2 * np.eye(2)
    m12 = -np.exp(1j * theta) * np.cosh(r) * np.sinh(r)
    m_mat = np.array([[0, m12], [m12, 0]])
    return GaussianState(np.zeros(4), covariance_from_moments(n_mat, m_mat))


def fock_covariance(rho: DensityMatrix) -> GaussianState:
    """Covariance of a state of truncated oscillators (assumes zero means)."""
    from scipy import sparse

    dims = rho.dims
    k = len(dims)
    ops = []
    for i, d in enumerate(dims):
        factors = [sparse.identity(n, format="csr") for n in dims]
        factors[i] = sparse.diags(np.sqrt(np.arange(1, d)), 1, format="csr")
        op = factors[0]
        for f in factors[1:]:
            op = sparse.kron(op, f, format="csr")
        ops.append(op)
    rt = rho.data.T

    def expect(x):
        return complex(x.multiply(rt).sum())  # Tr(x rho)

    n_mat = np.zeros((k, k), dtype=complex)
    m_mat = np.zeros((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            n_mat[i, j] = expect(ops[i].conj().T @ ops[j])
            m_mat[i, j] = expect(ops[i] @ ops[j])
    return GaussianState(np.zeros(2 * k), covariance_from_moments(n_mat, m_mat))


@dataclass
class GaussianTrajectory:
    times: np.ndarray
    states: list[GaussianState]


def evolve_covariance(
    dd: DriftDiffusion, s0: GaussianState, dt: float, t_end: float, stride: int = 1
) -> GaussianTrajectory:
    """RK4 integration of Sigma' = A Sigma + Sigma A^T + B and x' = A x."""
    a, b = dd.A, dd.B
    norm = np.linalg.norm(a, 2)
    if norm > 0 and dt > 0.01 / norm * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds 0.01/||A|| = {0.01 / norm:.3g}")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a multiple of dt")

    def f(s):
        return a @ s + s @ a.T + b

    cov = np.array(s0.cov)
    x = np.array(s0.means)
    times, states = [0.0], [s0]
    for k in range(1, n + 1):
        k1 = f(cov)
        k2 = f(cov + 0.5 * dt * k1)
        k3 = f(cov + 0.5 * dt * k2)
        k4 = f(cov + dt * k3)
        cov = cov + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        y1 = a @ x
        y2 = a @ (x + 0.5 * dt * y1)
        y3 = a @ (x + 0.5 * dt * y2)
        y4 = a @ (x + dt * y3)
        x = x + dt / 6 * (y1 + 2 * y2 + 2 * y3 + y4)
        if k % stride == 0 or k == n:
            if np.max(np.abs(cov - cov.T)) > SYM_TOL:
                raise PhysicsError("covariance lost symmetry during integration")
            states.append(GaussianState(x, cov))
            times.append(k * dt)
    return GaussianTrajectory(np.array(times), states)


def gaussian_fidelity(a: GaussianState, b: GaussianState) -> float:
    """Fidelity of two zero-mean Gaussian states, at least one of them pure."""
    if a.cov.shape != b.cov.shape:
        raise ValueError("states have different numbers of modes")
    if np.any(a.means) or np.any(b.means):
        raise ValueError("only zero-mean states are supported")
    if not (a.is_pure() or b.is_pure()):
        raise ValueError("determinant formula needs at least one pure state")
    return float(np.linalg.det(a.cov + b.cov) ** -0.5)


def time_to_fidelity(times: np.ndarray, fidelities: np.ndarray, threshold: float) -> float:
    """First time the sampled fidelity reaches ``threshold`` (linear interpolation), or nan."""
    above = np.nonzero(fidelities >= threshold)[0]
    if above.size == 0:
        return float("nan")
    k = above[0]
    if k == 0:
        return float(times[0])
    f0, f1 = fidelities[k - 1], fidelities[k]
    return float(times[k - 1] + (threshold - f0) / (f1 - f0) * (times[k] - times[k - 1]))


def tmsv_ket(r: float, theta: float, d: int) -> np.ndarray:
    """Two-mode squeezed vacuum in a d x d Fock truncation, renormalised.

    Amplitudes follow x_n = -e^{i theta} tanh(r) x_{n-1}, the common null
    state of the squeezing jump operators.
    """
    x = (-np.exp(1j * theta) * np.tanh(r)) ** np.arange(d) / np.cosh(r)
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = x
    return psi / np.linalg.norm(psi)
