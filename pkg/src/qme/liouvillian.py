"""Compile master-equation coefficients into Liouvillian superoperators.

Vectorisation is column stacking, ``vec(A rho B) = (B^T kron A) vec(rho)``, so

    D[L] -> conj(L) kron L - 1/2 (I kron L^dag L + (L^dag L)^T kron I).

Large oscillator problems can be built as sparse matrices restricted to a
``support``: a subset of vectorised indices that the dynamics never leaves
(for example a conserved-charge sector).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .bath import BathState, CoefficientSet, CouplingSpec
from .core import Operator, destroy, embed, sigma_minus, vec

KOSSAKOWSKI_TOL = -1e-10


@dataclass(frozen=True)
class SubsystemSpec:
    """A system coupled to one bath qubit through its lowering operator."""

    kind: Literal["qubit", "oscillator"]
    dim: int = 2

    def __post_init__(self):
        if self.kind == "qubit" and self.dim != 2:
            raise ValueError("qubits have dimension 2")
        if self.kind not in ("qubit", "oscillator"):
            raise ValueError(f"unknown subsystem kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")

    @property
    def lowering(self) -> Operator:
        return sigma_minus() if self.kind == "qubit" else destroy(self.dim)


def qubit() -> SubsystemSpec:
    return SubsystemSpec("qubit", 2)


def oscillator(d: int = 30) -> SubsystemSpec:
    return SubsystemSpec("oscillator", d)


def dims_of(specs: Sequence[SubsystemSpec]) -> tuple[int, ...]:
    return tuple(s.dim for s in specs)


def lowering_ops(specs: Sequence[SubsystemSpec]) -> list[Operator]:
    dims = dims_of(specs)
    return [embed(s.lowering, i, dims) for i, s in enumerate(specs)]


@dataclass(frozen=True)
class Liouvillian:
    """Superoperator acting on column-stacked density matrices.

    ``superop`` is a dense ndarray or a scipy sparse matrix.  When ``support``
    is set, ``superop`` acts only on ``vec(rho)[support]``.
    ``rate`` is the largest total dissipation rate of any subsystem and sets
    the admissible integration step.
    """

    superop: object = field(repr=False)
    dims: tuple[int, ...]
    rate: float = 0.0
    support: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def side(self) -> int:
        return int(np.prod(self.dims))

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.superop)

    def dense(self) -> np.ndarray:
        m = self.superop
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) as a matrix (full-space Liouvillians only)."""
        if self.support is not None:
            raise ValueError("apply() needs a full-space Liouvillian")
        out = self.superop @ vec(rho)
        return np.asarray(out).reshape(self.side, self.side, order="F")

    def trace_row_residual(self) -> float:
        """max |(vec I)^dag L|, zero for trace-preserving generators."""
        ident = vec(np.eye(self.side))
        if self.support is not None:
            ident = ident[self.support]
        row = self.superop.conj().T @ ident if self.is_sparse else ident.conj() @ self.superop
        return float(np.max(np.abs(row)))


@dataclass(frozen=True)
class GeneratorSpec:
    """Effective Hamiltonian plus dissipator, in diagonal or nondiagonal form."""

    h_eff: Operator
    jump_ops: tuple[Operator, ...]
    coeffs: Optional[CoefficientSet]
    form: Literal["diagonal", "nondiagonal"]


# ---------------------------------------------------------------------------
# superoperator assembly

class _Assembler:
    """Accumulates terms coef * A rho B into a (possibly restricted) superoperator."""

    def __init__(self, side: int, sparse: bool = False, support=None):
        self.side = side
        self.sparse = sparse or support is not None
        self.support = None if support is None else np.asarray(support)
        if self.sparse:
            n = side * side if support is None else len(self.support)
            self.mat = sp.csr_matrix((n, n), dtype=complex)
        else:
            self.mat = np.zeros((side * side, side * side), dtype=complex)

    def add(self, coef: complex, a, b) -> None:
        if coef == 0:
            return
        if self.sparse:
            a = sp.csr_matrix(a)
            b = sp.csr_matrix(b)
            term = sp.kron(b.T, a, format="csr")
            if self.support is not None:
                term = term[self.support][:, self.support]
            self.mat = self.mat + coef * term
        else:
            self.mat += coef * np.kron(np.asarray(b).T, np.asarray(a))

    def hamiltonian(self, h) -> None:
        eye = self._eye()
        self.add(-1j, h, eye)
        self.add(1j, eye, h)

    def dissipator(self, rate: complex, l) -> None:
        ldl = _dag(l) @ l
        eye = self._eye()
        self.add(rate, l, _dag(l))
        self.add(-0.5 * rate, ldl, eye)
        self.add(-0.5 * rate, eye, ldl)

    def s_term(self, coef: complex, o1, o2) -> None:
        """coef * S[o1, o2] with S symmetric in its arguments."""
        if coef == 0:
            return
        anti = o1 @ o2 + o2 @ o1
        eye = self._eye()
        self.add(coef, o1, o2)
        self.add(coef, o2, o1)
        self.add(-0.5 * coef, anti, eye)
        self.add(-0.5 * coef, eye, anti)

    def _eye(self):
        return sp.identity(self.side, dtype=complex, format="csr") if self.sparse else np.eye(self.side)


def _dag(m):
    return m.conj().T


def _local_mats(specs: Sequence[SubsystemSpec], sparse: bool):
    dims = dims_of(specs)
    if not sparse:
        return [op.data for op in lowering_ops(specs)]
    mats = []
    for i, s in enumerate(specs):
        factors = [sp.identity(d, format="csr") for d in dims]
        factors[i] = sp.csr_matrix(s.lowering.data)
        m = factors[0]
        for f in factors[1:]:
            m = sp.kron(m, f, format="csr")
        mats.append(m.astype(complex))
    return mats


def effective_hamiltonian(coeffs: CoefficientSet, specs: Sequence[SubsystemSpec]) -> Operator:
    """Sum over subsystems of h_l c_l + h.c."""
    dims = dims_of(specs)
    h = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
    for hl, c in zip(coeffs.h_eff_coeff, lowering_ops(specs)):
        h += hl * c.data + np.conj(hl) * c.data.conj().T
    return Operator(dims, h)


def _effective_hamiltonian_mat(coeffs, mats):
    h = 0
    for hl, c in zip(coeffs.h_eff_coeff, mats):
        if hl != 0:
            h = h + hl * c + np.conj(hl) * _dag(c)
    return h


def jump_ops_2q(bath: BathState, specs: Sequence[SubsystemSpec], coupling: CouplingSpec) -> list[Operator]:
    """The four jump operators of the diagonal two-qubit-bath master equation.

    Defined through pure-bath amplitudes; mixed baths must use
    :func:`build_liouvillian_nondiagonal`.
    """
    if bath.n != 2 or len(specs) != 2:
        raise ValueError("jump_ops_2q needs two subsystems and a two-qubit bath")
    if bath.pure_coeffs is None:
        raise ValueError("bath is mixed; use the nondiagonal form")
    b = {k: bath.amplitude(k) for k in ("ee", "eg", "ge", "gg")}
    s1, s2 = np.sqrt(coupling.gammas)
    c1, c2 = lowering_ops(specs)
    return [
        s1 * b["gg"] * c1 + s2 * b["ee"] * c2.dag,
        s1 * b["ee"] * c1.dag + s2 * b["gg"] * c2,
        s1 * b["ge"] * c1 + s2 * b["eg"] * c2,
        s1 * b["eg"] * c1.dag + s2 * b["ge"] * c2.dag,
    ]


def build_liouvillian_diagonal(
    h_eff: Optional[Operator],
    jump_ops: Sequence[Operator],
    dims: Optional[Sequence[int]] = None,
    rate: Optional[float] = None,
) -> Liouvillian:
    """-i[H, .] + sum_m D[L_m] as a dense superoperator.

    ``rate`` defaults to sum_m ||L_m||^2, a bound on the total jump rate.
    """
    ops = list(jump_ops) + ([h_eff] if h_eff is not None else [])
    if dims is None:
        if not ops:
            raise ValueError("cannot infer dims without operators")
        dims = ops[0].dims
    dims = tuple(dims)
    for op in ops:
        if op.dims != dims:
            raise ValueError(f"operator dims {op.dims} do not match {dims}")
    asm = _Assembler(int(np.prod(dims)))
    if h_eff is not None:
        asm.hamiltonian(h_eff.data)
    for l in jump_ops:
        asm.dissipator(1.0, l.data)
    if rate is None:
        rate = float(sum(np.linalg.norm(l.data, 2) ** 2 for l in jump_ops))
    return Liouvillian(asm.mat, dims, rate)


def build_liouvillian_nondiagonal(
    coeffs: CoefficientSet,
    specs: Sequence[SubsystemSpec],
    sparse: bool = False,
    support=None,
) -> Liouvillian:
    """Local dissipators, pairwise S-terms and effective Hamiltonians."""
    if coeffs.n != len(specs):
        raise ValueError(f"{coeffs.n} coefficient channels for {len(specs)} subsystems")
    dims = dims_of(specs)
    use_sparse = sparse or support is not None
    mats = _local_mats(specs, use_sparse)
    asm = _Assembler(int(np.prod(dims)), sparse=use_sparse, support=support)
    h = _effective_hamiltonian_mat(coeffs, mats)
    if not np.isscalar(h):
        asm.hamiltonian(h)
    n = coeffs.n
    for l in range(n):
        c = mats[l]
        asm.dissipator(coeffs.gamma_down[l], c)
        asm.dissipator(coeffs.gamma_up[l], _dag(c))
    for l in range(n):
        for m in range(l + 1, n):
            cl, cm = mats[l], mats[m]
            gdd, gdu = coeffs.gamma_dd[l, m], coeffs.gamma_du[l, m]
            asm.s_term(gdd, cl, cm)
            asm.s_term(np.conj(gdd), _dag(cl), _dag(cm))
            asm.s_term(gdu, cl, _dag(cm))
            asm.s_term(np.conj(gdu), _dag(cl), cm)
    mat = asm.mat
    sup = None if support is None else np.asarray(support)
    return Liouvillian(mat, dims, coeffs.max_rate, sup)


def generator_spec(coeffs: CoefficientSet, specs: Sequence[SubsystemSpec]) -> GeneratorSpec:
    return GeneratorSpec(effective_hamiltonian(coeffs, specs), (), coeffs, "nondiagonal")


def diagonalize_dissipator(
    coeffs: CoefficientSet, specs: Sequence[SubsystemSpec], rel_tol: float = 1e-12
) -> list[Operator]:
    """Jump operators from the eigendecomposition of the coefficient matrix.

    The operator basis is (c_1, ..., c_n, c_1^dag, ..., c_n^dag).  Eigenvalues
    below ``rel_tol`` times the largest one are dropped, so the number of
    operators returned is the numerical rank.
    """
    k = coeffs.kossakowski()
    k = 0.5 * (k + k.conj().T)
    mu, u = np.linalg.eigh(k)
    if mu.size and mu[0] < KOSSAKOWSKI_TOL:
        raise ValueError(f"coefficient matrix is not positive semidefinite (eigenvalue {mu[0]:.3e})")
    cs = lowering_ops(specs)
    basis = cs + [c.dag for c in cs]
    top = mu.max() if mu.size else 0.0
    ops = []
    for val, vecs in zip(mu[::-1], u.T[::-1]):
        if top <= 0 or val <= rel_tol * top:
            continue
        data = sum(w * f.data for w, f in zip(vecs, basis))
        ops.append(Operator(basis[0].dims, np.sqrt(val) * data))
    return ops


# ---------------------------------------------------------------------------
# sectors for large oscillator problems

def charge_sector(charges: np.ndarray) -> np.ndarray:
    """Vectorised indices (i, j) with equal charge, i.e. rho_ij allowed to be nonzero.

    ``charges`` assigns an integer to every basis state.  Column stacking puts
    element (i, j) at index ``i + side * j``.
    """
    q = np.asarray(charges)
    side = q.size
    i, j = np.nonzero(q[:, None] == q[None, :])
    return np.sort(i + side * j)


def number_difference_charges(d1: int, d2: int) -> np.ndarray:
    """n1 - n2 for every state of two truncated oscillators."""
    n1, n2 = np.meshgrid(np.arange(d1), np.arange(d2), indexing="ij")
    return (n1 - n2).ravel()
