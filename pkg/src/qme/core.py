"""Dense linear-algebra primitives for multipartite operators and states.

Conventions used throughout the package:

* Subsystem 0 is the leftmost (slowest varying) tensor factor, so the ket
  ``|jk>`` of two qubits is ``|j>_0 |k>_1``.
* Inside a qubit, basis index 0 is the excited state ``|e>`` and index 1 the
  ground state ``|g>``.  The lowering operator ``|g><e|`` is therefore the
  matrix ``[[0, 0], [1, 0]]``.
* Oscillators use the Fock basis ``|0>, |1>, ..., |d-1>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

# Qubit basis
E, G = 0, 1

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-9


class PhysicsError(RuntimeError):
    """A computed object violates a physical invariant (trace, positivity...)."""


@dataclass(frozen=True)
class Operator:
    """A square matrix acting on a tensor product space with known ``dims``."""

    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        data = np.array(self.data, dtype=complex)
        side = int(np.prod(dims)) if dims else 1
        if data.shape != (side, side):
            raise ValueError(f"matrix shape {data.shape} does not match dims {dims}")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dag(self) -> "Operator":
        return Operator(self.dims, self.data.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.dims, self.data @ other.data)

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.dims, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.dims, self.data - other.data)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.dims, scalar * self.data)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.dims, -self.data)


def _check_dims(a: Operator, b: Operator) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")


@dataclass(frozen=True)
class DensityMatrix(Operator):
    """Hermitian, unit-trace, positive semidefinite operator.

    Construction validates the invariants and raises :class:`PhysicsError`
    when any of them is violated beyond the package tolerances.
    """

    def __post_init__(self):
        super().__post_init__()
        check_state(self.data)

    @classmethod
    def from_ket(cls, dims: Sequence[int], ket) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex).ravel()
        return cls(tuple(dims), np.outer(ket, ket.conj()))

    def expect(self, op: Operator | np.ndarray) -> float:
        m = op.data if isinstance(op, Operator) else np.asarray(op)
        return float(np.real(np.trace(m @ self.data)))


def check_state(m: np.ndarray) -> None:
    herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm > HERMITIAN_TOL:
        raise PhysicsError(f"state is not Hermitian (max |rho - rho^dag| = {herm:.3e})")
    tr = np.trace(m)
    if abs(tr - 1) > TRACE_TOL:
        raise PhysicsError(f"state trace {tr.real:.15g} differs from 1")
    lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lo < POSITIVITY_TOL:
        raise PhysicsError(f"state has negative eigenvalue {lo:.3e}")


# ---------------------------------------------------------------------------
# elementary operators

def identity(dims: Sequence[int]) -> Operator:
    return Operator(tuple(dims), np.eye(int(np.prod(dims))))


def sigma_minus() -> Operator:
    """Qubit lowering operator |g><e|."""
    m = np.zeros((2, 2), dtype=complex)
    m[G, E] = 1.0
    return Operator((2,), m)


def destroy(d: int) -> Operator:
    """Truncated annihilation operator with <k-1|a|k> = sqrt(k)."""
    return Operator((d,), np.diag(np.sqrt(np.arange(1, d)), 1))


def basis_ket(dims: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    idx = np.ravel_multi_index(tuple(labels), tuple(dims))
    v = np.zeros(int(np.prod(dims)), dtype=complex)
    v[idx] = 1.0
    return v


def qubit_ket(label: str) -> np.ndarray:
    """Computational ket from a string of 'e'/'g' characters, e.g. ``"eg"``."""
    return basis_ket((2,) * len(label), ["eg".index(ch) for ch in label])


def kron(*ops: Operator) -> Operator:
    """Kronecker product; the dims of the result are the concatenated dims."""
    if not ops:
        raise ValueError("kron needs at least one operator")
    return reduce(lambda a, b: Operator(a.dims + b.dims, np.kron(a.data, b.data)), ops)


def embed(op: Operator, index: int, dims: Sequence[int]) -> Operator:
    """Place a single-subsystem operator at ``index`` of the product space ``dims``."""
    dims = tuple(dims)
    if op.dims != (dims[index],):
        raise ValueError(f"operator dims {op.dims} do not fit subsystem {index} of {dims}")
    factors = [identity((d,)) for d in dims]
    factors[index] = op
    return kron(*factors)


# ---------------------------------------------------------------------------
# partial operations

def partial_trace(rho: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every subsystem not listed in ``keep``.

    The result keeps the original relative order of the retained subsystems.
    Returns a :class:`DensityMatrix` when the input is one.
    """
    dims = rho.dims
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise ValueError(f"invalid subsystem set {keep} for {len(dims)} subsystems")
    n = len(dims)
    t = rho.data.reshape(dims + dims)
    trace_out = [i for i in range(n) if i not in keep]
    # contract matching ket/bra axes, highest first so indices stay valid
    for i in sorted(trace_out, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + m)
    new_dims = tuple(dims[k] for k in keep)
    side = int(np.prod(new_dims))
    out = t.reshape(side, side)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(new_dims, out)
    return Operator(new_dims, out)


def partial_transpose(rho: Operator, subsystem: int = 1) -> Operator:
    """Transpose the chosen factor of a bipartite operator."""
    dims = rho.dims
    if len(dims) != 2:
        raise ValueError(f"partial transpose needs a bipartite operator, got dims {dims}")
    if subsystem not in (0, 1):
        raise ValueError(f"subsystem must be 0 or 1, got {subsystem}")
    da, db = dims
    t = rho.data.reshape(da, db, da, db)
    if subsystem == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return Operator(dims, t.reshape(da * db, da * db))


# ---------------------------------------------------------------------------
# spectral helpers

def expm_hermitian(h: Operator, t: float) -> Operator:
    """Return exp(-i h t) for Hermitian ``h`` via eigendecomposition."""
    m = h.data
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("expm_hermitian requires a Hermitian generator")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Operator(h.dims, u)


def kernel_basis(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical null space of ``m``.

    A right singular vector belongs to the kernel when its singular value is
    below ``tol`` times the largest singular value.  An all-zero matrix has
    the full space as kernel.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = np.asarray(m)
    _, s, vh = np.linalg.svd(m)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(m.shape[1], dtype=complex)
    null = s < tol * smax
    return vh[null].conj().T


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, side: int) -> np.ndarray:
    return np.asarray(v).reshape(side, side, order="F")
