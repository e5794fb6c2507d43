"""Entanglement and state diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DensityMatrix, Operator, partial_transpose

LN_CLAMP = 1e-12


@dataclass(frozen=True)
class EntanglementReport:
    pt_spectrum: np.ndarray
    log_negativity: float
    purity: float
    fidelity: Optional[float] = None
    target: Optional[str] = None


def _require_two_qubits(rho: Operator) -> None:
    if rho.dims != (2, 2):
        raise ValueError(f"two-qubit state required, got dims {rho.dims}")


def pt_spectrum(rho: Operator) -> np.ndarray:
    """Ascending eigenvalues of the partial transpose (on the second qubit)."""
    _require_two_qubits(rho)
    pt = partial_transpose(rho, 1).data
    return np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))


def log_negativity(rho: Operator) -> float:
    """log2 of the trace norm of the partial transpose."""
    ev = pt_spectrum(rho)
    ln = float(np.log2(np.sum(np.abs(ev))))
    if ln < 0:
        if ln < -LN_CLAMP:
            raise ValueError(f"negative logarithmic negativity {ln:.3e}; state is not normalised")
        ln = 0.0
    return ln


def purity(rho: Operator) -> float:
    m = rho.data
    return float(np.real(np.vdot(m.conj().T, m)))


def _floor(w: np.ndarray) -> np.ndarray:
    """Zero eigenvalues that are indistinguishable from roundoff before taking roots."""
    cut = 64 * np.finfo(float).eps * max(float(np.max(np.abs(w))), 1e-300)
    return np.where(w > cut, w, 0.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(_floor(w))) @ v.conj().T


def state_fidelity(rho: Operator, sigma: Operator) -> float:
    """Uhlmann-Jozsa fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2."""
    if rho.dims != sigma.dims:
        raise ValueError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    s = _psd_sqrt(rho.data)
    inner = s @ sigma.data @ s
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(_floor(w))) ** 2)


def trace_distance(rho: Operator, sigma: Operator) -> float:
    d = rho.data - sigma.data
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def entanglement_report(
    rho: DensityMatrix, target: Optional[DensityMatrix] = None, target_name: Optional[str] = None
) -> EntanglementReport:
    spec = pt_spectrum(rho)
    fid = state_fidelity(rho, target) if target is not None else None
    return EntanglementReport(spec, log_negativity(rho), purity(rho), fid, target_name)
