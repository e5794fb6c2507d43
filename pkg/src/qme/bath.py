"""Entangled qubit environments and the master-equation coefficients they induce.

Every coefficient is read from the bath density matrix, so mixed baths are
handled on the same footing as pure ones.  For a bath of ``n`` qubits each
subsystem ``l`` couples to qubit ``l``; the two-body coefficients are partial
matrix elements of ``rho_E`` with all other qubits traced out.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import E, G, DensityMatrix, qubit_ket, sigma_minus, embed, Operator

WEAK_COUPLING_WARN = 0.1


@dataclass(frozen=True)
class BathState:
    """State of the ``n`` bath qubits that meet the systems in one interval."""

    rho: DensityMatrix
    pure_coeffs: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if any(d != 2 for d in self.rho.dims):
            raise ValueError("bath subsystems must all be qubits")
        if self.pure_coeffs is not None:
            psi = np.array(self.pure_coeffs, dtype=complex).ravel()
            if abs(np.vdot(psi, psi) - 1) > 1e-10:
                raise ValueError("pure bath coefficients are not normalised")
            if np.max(np.abs(np.outer(psi, psi.conj()) - self.rho.data)) > 1e-10:
                raise ValueError("pure_coeffs inconsistent with rho")
            psi.setflags(write=False)
            object.__setattr__(self, "pure_coeffs", psi)

    @property
    def n(self) -> int:
        return len(self.rho.dims)

    @classmethod
    def from_ket(cls, psi) -> "BathState":
        psi = np.asarray(psi, dtype=complex).ravel()
        n = int(round(np.log2(psi.size)))
        if 2**n != psi.size:
            raise ValueError("ket length must be a power of two")
        return cls(DensityMatrix.from_ket((2,) * n, psi), psi)

    @classmethod
    def from_density(cls, rho) -> "BathState":
        rho = np.asarray(rho, dtype=complex)
        n = int(round(np.log2(rho.shape[0])))
        return cls(DensityMatrix((2,) * n, rho))

    @classmethod
    def from_amplitudes(cls, amps: dict[str, complex]) -> "BathState":
        """Pure bath from a mapping like ``{"ee": b_ee, "gg": b_gg}``."""
        labels = list(amps)
        n = len(labels[0])
        psi = sum(complex(amps[k]) * qubit_ket(k) for k in labels)
        if len(psi) != 2**n:
            raise ValueError("inconsistent label lengths")
        return cls.from_ket(psi)

    def amplitude(self, label: str) -> complex:
        if self.pure_coeffs is None:
            raise ValueError("bath is not pure")
        return complex(np.vdot(qubit_ket(label), self.pure_coeffs))

    def diagonal_part(self) -> "BathState":
        return BathState(DensityMatrix(self.rho.dims, np.diag(np.diag(self.rho.data))))


@dataclass(frozen=True)
class CouplingSpec:
    """Coupling strengths ``lambdas`` and interaction interval ``dt``.

    The per-subsystem rate is ``gamma_l = |lambda_l|**2 * dt``.
    """

    lambdas: tuple[float, ...]
    dt: float
    detunings: tuple[float, ...] = ()

    def __post_init__(self):
        lambdas = tuple(float(x) for x in np.atleast_1d(self.lambdas))
        det = tuple(float(x) for x in self.detunings) or (0.0,) * len(lambdas)
        if len(det) != len(lambdas):
            raise ValueError("one detuning per subsystem")
        if any(d != 0.0 for d in det):
            raise ValueError("only resonant coupling (zero detuning) is supported")
        if self.dt <= 0:
            raise ValueError("interaction interval must be positive")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "detunings", det)
        big = [abs(x) * self.dt for x in lambdas if abs(x) * self.dt > WEAK_COUPLING_WARN]
        if big:
            warnings.warn(
                f"lambda*dt = {max(big):.3g} exceeds {WEAK_COUPLING_WARN}; "
                "weak-coupling expansion may be inaccurate",
                stacklevel=2,
            )

    @classmethod
    def from_rates(cls, gammas: Sequence[float], dt: float) -> "CouplingSpec":
        """Couplings giving the requested rates at interval ``dt``."""
        gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
        if np.any(gammas < 0):
            raise ValueError("rates must be non-negative")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return cls(tuple(np.sqrt(gammas / dt)), dt)

    @property
    def gammas(self) -> np.ndarray:
        return np.abs(np.asarray(self.lambdas)) ** 2 * self.dt

    @property
    def n(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class CoefficientSet:
    """Master-equation coefficients.

    ``gamma_dd[l, m]`` and ``gamma_du[l, m]`` are filled for ``l < m`` only;
    the remaining entries are zero.  ``h_eff_coeff[l]`` multiplies ``c_l`` in
    the effective Hamiltonian ``h_l c_l + h.c.``.
    """

    gamma_down: np.ndarray
    gamma_up: np.ndarray
    gamma_dd: np.ndarray
    gamma_du: np.ndarray
    h_eff_coeff: np.ndarray
    gammas: np.ndarray

    @property
    def n(self) -> int:
        return len(self.gamma_down)

    @property
    def max_rate(self) -> float:
        return float(np.max(self.gamma_down + self.gamma_up)) if self.n else 0.0

    def kossakowski(self) -> np.ndarray:
        """Coefficient matrix over the operator basis (c_1..c_n, c_1^dag..c_n^dag)."""
        n = self.n
        k = np.zeros((2 * n, 2 * n), dtype=complex)
        for l in range(n):
            k[l, l] = self.gamma_down[l]
            k[n + l, n + l] = self.gamma_up[l]
        for l in range(n):
            for m in range(l + 1, n):
                gdd, gdu = self.gamma_dd[l, m], self.gamma_du[l, m]
                # gdd S[c_l, c_m] + gdd* S[c_l^dag, c_m^dag]
                k[l, n + m] += gdd
                k[m, n + l] += gdd
                k[n + l, m] += np.conj(gdd)
                k[n + m, l] += np.conj(gdd)
                # gdu S[c_l, c_m^dag] + gdu* S[c_l^dag, c_m]
                k[l, m] += gdu
                k[n + m, n + l] += gdu
                k[n + l, n + m] += np.conj(gdu)
                k[m, l] += np.conj(gdu)
        return k


def _partial_element(rho: np.ndarray, n: int, bra: dict[int, int], ket: dict[int, int]) -> complex:
    """Tr_rest <bra| rho |ket> where bra/ket fix the listed qubits."""
    t = rho.reshape((2,) * (2 * n))
    rest = [q for q in range(n) if q not in bra]
    total = 0.0 + 0.0j
    for bits in np.ndindex(*(2,) * len(rest)):
        row = [0] * n
        col = [0] * n
        for q, b in zip(rest, bits):
            row[q] = col[q] = b
        for q, v in bra.items():
            row[q] = v
        for q, v in ket.items():
            col[q] = v
        total += t[tuple(row) + tuple(col)]
    return total


def coefficients_nq(bath: BathState, coupling: CouplingSpec) -> CoefficientSet:
    """Local rates, pair coefficients and drive amplitudes for an n-qubit bath."""
    n = bath.n
    if n < 1:
        raise ValueError("empty bath")
    if coupling.n != n:
        raise ValueError(f"coupling has {coupling.n} channels, bath has {n} qubits")
    rho = bath.rho.data
    gam = coupling.gammas
    lam = np.asarray(coupling.lambdas)
    gd = np.zeros(n)
    gu = np.zeros(n)
    h = np.zeros(n, dtype=complex)
    gdd = np.zeros((n, n), dtype=complex)
    gdu = np.zeros((n, n), dtype=complex)
    for l in range(n):
        gd[l] = gam[l] * _partial_element(rho, n, {l: G}, {l: G}).real
        gu[l] = gam[l] * _partial_element(rho, n, {l: E}, {l: E}).real
        h[l] = lam[l] * _partial_element(rho, n, {l: G}, {l: E})
        for m in range(l + 1, n):
            s = np.sqrt(gam[l] * gam[m])
            gdd[l, m] = s * _partial_element(rho, n, {l: G, m: G}, {l: E, m: E})
            gdu[l, m] = s * _partial_element(rho, n, {l: G, m: E}, {l: E, m: G})
    return CoefficientSet(gd, gu, gdd, gdu, h, gam.copy())


def coefficients_2q(bath: BathState, coupling: CouplingSpec) -> CoefficientSet:
    """Two-qubit coefficients written out element by element from ``rho_E``."""
    if bath.n != 2:
        raise ValueError(f"coefficients_2q needs a two-qubit bath, got n={bath.n}")
    if coupling.n != 2:
        raise ValueError("coupling must have two channels")
    idx = {"ee": 0, "eg": 1, "ge": 2, "gg": 3}
    r = bath.rho.data

    def b(a, c):
        return r[idx[a], idx[c]]

    g1, g2 = coupling.gammas
    l1, l2 = coupling.lambdas
    s = np.sqrt(g1 * g2)
    gd = np.array([g1 * (b("gg", "gg") + b("ge", "ge")).real, g2 * (b("gg", "gg") + b("eg", "eg")).real])
    gu = np.array([g1 * (b("ee", "ee") + b("eg", "eg")).real, g2 * (b("ee", "ee") + b("ge", "ge")).real])
    gdd = np.zeros((2, 2), dtype=complex)
    gdu = np.zeros((2, 2), dtype=complex)
    gdd[0, 1] = s * b("gg", "ee")
    gdu[0, 1] = s * b("ge", "eg")
    h = np.array([l1 * (b("gg", "eg") + b("ge", "ee")), l2 * (b("eg", "ee") + b("gg", "ge"))])
    return CoefficientSet(gd, gu, gdd, gdu, h, np.array([g1, g2]))


def coefficients_2q_pure(bath: BathState, coupling: CouplingSpec) -> CoefficientSet:
    """Same coefficients from the pure-state amplitudes (cross-check path)."""
    b = {k: bath.amplitude(k) for k in ("ee", "eg", "ge", "gg")}
    g1, g2 = coupling.gammas
    l1, l2 = coupling.lambdas
    s = np.sqrt(g1 * g2)
    a2 = {k: abs(v) ** 2 for k, v in b.items()}
    gd = np.array([g1 * (a2["gg"] + a2["ge"]), g2 * (a2["gg"] + a2["eg"])])
    gu = np.array([g1 * (a2["ee"] + a2["eg"]), g2 * (a2["ee"] + a2["ge"])])
    gdd = np.zeros((2, 2), dtype=complex)
    gdu = np.zeros((2, 2), dtype=complex)
    gdd[0, 1] = s * b["gg"] * np.conj(b["ee"])
    gdu[0, 1] = s * b["ge"] * np.conj(b["eg"])
    h = np.array([
        l1 * (b["gg"] * np.conj(b["eg"]) + b["ge"] * np.conj(b["ee"])),
        l2 * (b["eg"] * np.conj(b["ee"]) + b["gg"] * np.conj(b["ge"])),
    ])
    return CoefficientSet(gd, gu, gdd, gdu, h, np.array([g1, g2]))


# ---------------------------------------------------------------------------
# named bath states

def ground_bath(n: int = 2) -> BathState:
    return BathState.from_ket(qubit_ket("g" * n))


def bell_bath(phi: float = 0.0, family: str = "phi") -> BathState:
    """(|ee> + e^{i phi}|gg>)/sqrt2 for ``family='phi'``, (|eg> + e^{i phi}|ge>)/sqrt2 for 'psi'."""
    a, b = _family_labels(family)
    return BathState.from_ket((qubit_ket(a) + np.exp(1j * phi) * qubit_ket(b)) / np.sqrt(2))


def near_bell_bath(phi: float, eps: float, family: str = "phi") -> BathState:
    a, b = _family_labels(family)
    psi = (qubit_ket(a) + np.exp(1j * phi) * np.sqrt(1 + eps) * qubit_ket(b)) / np.sqrt(2 + eps)
    return BathState.from_ket(psi)


def _family_labels(family: str) -> tuple[str, str]:
    try:
        return {"phi": ("ee", "gg"), "psi": ("eg", "ge")}[family]
    except KeyError:
        raise ValueError(f"unknown Bell family {family!r}") from None


def ghz_bath(n: int = 3) -> BathState:
    return BathState.from_ket((qubit_ket("e" * n) + qubit_ket("g" * n)) / np.sqrt(2))


def w_bath(n: int = 3) -> BathState:
    labels = ["g" * k + "e" + "g" * (n - k - 1) for k in range(n)]
    return BathState.from_ket(sum(qubit_ket(s) for s in labels) / np.sqrt(n))


def product_bath(qubits: Sequence[tuple[complex, complex]]) -> BathState:
    """Product of single-qubit states ``alpha|g> + beta|e>``, given as (alpha, beta)."""
    psi = np.ones(1, dtype=complex)
    for alpha, beta in qubits:
        v = np.zeros(2, dtype=complex)
        v[G], v[E] = alpha, beta
        psi = np.kron(psi, v)
    return BathState.from_ket(psi / np.linalg.norm(psi))


def real_phi_bath(b_ee: float) -> BathState:
    """b_ee|ee> + b_gg|gg> with real amplitudes and b_gg >= 0."""
    if abs(b_ee) > 1:
        raise ValueError("|b_ee| must not exceed 1")
    return BathState.from_amplitudes({"ee": b_ee, "gg": np.sqrt(1 - b_ee**2)})


def bath_from_squeezing(r: float, theta: float = 0.0) -> BathState:
    """Two-qubit bath whose cavity steady state is a TMSV of amplitude r, angle theta.

    ``b_gg`` is real and positive; ``arg(b_ee) - arg(b_gg) = theta``.
    """
    if not np.isfinite(r):
        raise ValueError("squeezing amplitude must be finite")
    r = abs(r)
    # cosh^2/cosh2r written to stay finite for large r
    b_gg = np.sqrt(0.5 * (1 + 1 / np.cosh(2 * r)))
    b_ee = np.sqrt(0.5 * (1 - 1 / np.cosh(2 * r)))
    return BathState.from_amplitudes({"gg": b_gg, "ee": b_ee * np.exp(1j * theta)})


def _gg_ee_support(bath: BathState) -> tuple[float, float]:
    if bath.n != 2:
        raise ValueError("two-qubit bath required")
    r = bath.rho.data
    off = [1, 2]
    leak = max(np.max(np.abs(r[off, :])), np.max(np.abs(r[:, off])))
    if leak > 1e-12:
        raise ValueError("bath has support outside span{|gg>, |ee>}")
    return r[3, 3].real, r[0, 0].real


def effective_rate(bath: BathState, gamma: float) -> float:
    """gamma * (|b_gg|^2 - |b_ee|^2)."""
    p_gg, p_ee = _gg_ee_support(bath)
    return gamma * (p_gg - p_ee)


def squeezing_parameter(bath: BathState) -> tuple[float, float]:
    """Recover (r, theta) from a pure bath in span{|gg>, |ee>} with |b_gg| > |b_ee|."""
    _gg_ee_support(bath)
    b_gg, b_ee = bath.amplitude("gg"), bath.amplitude("ee")
    if abs(b_gg) <= abs(b_ee):
        raise ValueError("no squeezing parameter when |b_gg| <= |b_ee|")
    # tanh r = |b_ee|/|b_gg| is the numerically stable form of cosh r = |b_gg|/sqrt(|b_gg|^2-|b_ee|^2)
    r = float(np.arctanh(abs(b_ee) / abs(b_gg)))
    theta = float(np.angle(b_ee) - np.angle(b_gg)) if abs(b_ee) > 0 else 0.0
    return r, theta


# ---------------------------------------------------------------------------
# bath-side operators, used by the collision oracle

def bath_lowering(index: int, n: int) -> Operator:
    return embed(sigma_minus(), index, (2,) * n)
