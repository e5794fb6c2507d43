"""Time evolution, stationary states and the discrete collision-map oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .bath import BathState, CouplingSpec, coefficients_nq
from .core import (
    DensityMatrix,
    Operator,
    PhysicsError,
    expm_hermitian,
    kernel_basis,
    kron,
    partial_trace,
    qubit_ket,
    unvec,
    vec,
)
from .liouvillian import (
    Liouvillian,
    SubsystemSpec,
    build_liouvillian_nondiagonal,
    dims_of,
    lowering_ops,
    qubit,
)
from .measures import trace_distance

DRIFT_LIMIT = 1e-6
KERNEL_TOL = 1e-9


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityMatrix]
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    max_trace_drift: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        self.times = t

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


@dataclass
class SteadyStateResult:
    dimension: int
    basis: list[np.ndarray]
    state: Optional[DensityMatrix]
    unique: bool
    residual: float = 0.0


# ---------------------------------------------------------------------------
# master-equation integration

def _rk4_step_matrix(m: np.ndarray, h: float) -> np.ndarray:
    """Exact one-step map of classical RK4 for the linear ODE x' = m x."""
    eye = np.eye(m.shape[0], dtype=complex)
    hm = h * m
    hm2 = hm @ hm
    return eye + hm + hm2 / 2 + hm2 @ hm / 6 + hm2 @ hm2 / 24


def _trace_preserving_power(step: np.ndarray, k: int, side: int) -> np.ndarray:
    """step**k by repeated squaring, re-imposing (vec I)^dag M = (vec I)^dag after each product.

    The exact RK4 map of a trace-preserving generator satisfies this identity;
    re-imposing it keeps roundoff from accumulating in the unit eigenvalue over
    very long horizons.
    """
    u = vec(np.eye(side)).astype(complex)

    def fix(m):
        return m + np.outer(u, u.conj() - u.conj() @ m) / side

    result = None
    base = fix(step)
    while k:
        if k & 1:
            result = base if result is None else fix(result @ base)
        k >>= 1
        if k:
            base = fix(base @ base)
    return result if result is not None else np.eye(step.shape[0], dtype=complex)


def _n_steps(dt: float, t_end: float) -> int:
    n = int(round(t_end / dt))
    if n < 0 or abs(n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    return n


def evolve_me(
    liou: Liouvillian,
    rho0: DensityMatrix,
    dt: float,
    t_end: float,
    stride: int = 1,
    observables: Optional[dict[str, Callable[[DensityMatrix], float]]] = None,
    check_step: bool = True,
) -> Trajectory:
    """Fixed-step RK4 integration of d rho/dt = L rho.

    States are recorded every ``stride`` steps (and at ``t_end``).  Every
    recorded state is validated as a density matrix; a trace drift beyond
    ``DRIFT_LIMIT`` raises :class:`PhysicsError`.
    """
    if rho0.dims != liou.dims:
        raise ValueError(f"state dims {rho0.dims} do not match Liouvillian dims {liou.dims}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check_step and liou.rate > 0 and dt > 0.01 / liou.rate * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds 0.01/rate = {0.01 / liou.rate:.3g}")
    n = _n_steps(dt, t_end)
    side = liou.side
    x = vec(rho0.data).astype(complex)
    if liou.support is not None:
        outside = np.delete(x, liou.support)
        if outside.size and np.max(np.abs(outside)) > 1e-14:
            raise ValueError("initial state has weight outside the Liouvillian support")
        x = x[liou.support]

    if liou.is_sparse:
        m = liou.superop.tocsr()

        def block(y, k):
            for _ in range(k):
                k1 = m @ y
                k2 = m @ (y + 0.5 * dt * k1)
                k3 = m @ (y + 0.5 * dt * k2)
                k4 = m @ (y + dt * k3)
                y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            return y
    else:
        step = _rk4_step_matrix(np.asarray(liou.superop), dt)
        conserving = liou.trace_row_residual() < 1e-12
        powers: dict[int, np.ndarray] = {}

        def block(y, k):
            if k not in powers:
                powers[k] = (
                    _trace_preserving_power(step, k, side) if conserving else np.linalg.matrix_power(step, k)
                )
            return powers[k] @ y

    def to_state(y) -> DensityMatrix:
        if liou.support is not None:
            full = np.zeros(side * side, dtype=complex)
            full[liou.support] = y
            y = full
        mat = unvec(y, side)
        return mat

    observables = observables or {}
    times, states = [0.0], [rho0]
    drift = 0.0
    done = 0
    while done < n:
        k = min(stride, n - done)
        x = block(x, k)
        done += k
        mat = to_state(x)
        d = abs(np.trace(mat) - 1)
        drift = max(drift, d)
        if d > DRIFT_LIMIT:
            raise PhysicsError(f"trace drift {d:.3e} at t={done * dt:.6g}; step too large")
        states.append(DensityMatrix(rho0.dims, mat))
        times.append(done * dt)
    obs = {name: np.array([f(s) for s in states]) for name, f in observables.items()}
    return Trajectory(np.array(times), states, obs, drift)


def propagator(liou: Liouvillian, dt: float, t_end: float) -> np.ndarray:
    """RK4 propagator matrix over [0, t_end] for a dense Liouvillian."""
    step = _rk4_step_matrix(liou.dense(), dt)
    return np.linalg.matrix_power(step, _n_steps(dt, t_end))


# ---------------------------------------------------------------------------
# stationary states

def steady_states(
    liou: Liouvillian, rho0: Optional[DensityMatrix] = None, tol: float = KERNEL_TOL
) -> SteadyStateResult:
    """Stationary subspace of L and, when possible, the selected steady state.

    For a degenerate kernel the state is the spectral projection of ``rho0``
    onto the kernel, built from bi-orthogonal right and left null vectors.
    """
    if liou.support is not None:
        raise ValueError("steady_states needs a full-space Liouvillian")
    m = liou.dense()
    side = liou.side
    try:
        right = kernel_basis(m, tol)
        left = kernel_basis(m.conj().T, tol)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigensolver failed") from exc
    dim = right.shape[1]
    if left.shape[1] != dim:
        raise RuntimeError(f"left/right kernel dimensions differ ({left.shape[1]} vs {dim})")
    basis = [unvec(right[:, k], side) for k in range(dim)]
    state = None
    if dim == 1:
        mat = basis[0] / np.trace(basis[0])
        state = DensityMatrix(liou.dims, 0.5 * (mat + mat.conj().T))
    elif dim > 1 and rho0 is not None:
        overlap = left.conj().T @ right
        proj = right @ np.linalg.solve(overlap, left.conj().T)
        mat = unvec(proj @ vec(rho0.data), side)
        state = DensityMatrix(liou.dims, 0.5 * (mat + mat.conj().T))
    residual = float(np.max(np.abs(m @ vec(state.data)))) if state is not None else 0.0
    return SteadyStateResult(dim, basis, state, dim == 1, residual)


def liouvillian_gap(liou: Liouvillian) -> float:
    """Smallest nonzero |Re lambda| in the spectrum (the slowest relaxation rate)."""
    ev = np.linalg.eigvals(liou.dense())
    radius = np.max(np.abs(ev))
    nonzero = ev[np.abs(ev) > KERNEL_TOL * radius]
    return float(np.min(np.abs(nonzero.real))) if nonzero.size else 0.0


def bell_steady_state_map(rho0: DensityMatrix, phi: float = 0.0) -> DensityMatrix:
    """Closed-form long-time state for two atoms under a |Phi_E^+-> bath.

    ``phi`` is 0 for the |Phi_E^+> bath and pi for |Phi_E^->.  Only the real
    part of the initial ee,gg coherence survives; its imaginary part and all
    other coherences decay.
    """
    if rho0.dims != (2, 2):
        raise ValueError("bell_steady_state_map needs a two-qubit state")
    if np.isclose(np.cos(phi), 1):
        sign = 1.0
    elif np.isclose(np.cos(phi), -1):
        sign = -1.0
    else:
        raise ValueError("phi must be 0 or pi")
    r = rho0.data
    ee, eg, ge, gg = 0, 1, 2, 3
    c = sign * r[ee, gg]
    pop_ends = (r[ee, ee] + r[gg, gg] - c.real + 0.5 * r[eg, eg] + 0.5 * r[ge, ge]).real / 3
    pop_mid = (0.5 * r[ee, ee] + 0.5 * r[gg, gg] + c.real + r[eg, eg] + r[ge, ge]).real / 3
    coh = -(r[ee, ee] + r[gg, gg] - 4 * c.real - r[eg, eg] - r[ge, ge]).real / 6
    out = np.zeros((4, 4), dtype=complex)
    out[ee, ee] = out[gg, gg] = pop_ends
    out[eg, eg] = out[ge, ge] = pop_mid
    out[ee, gg] = sign * coh
    out[gg, ee] = np.conj(out[ee, gg])
    return DensityMatrix((2, 2), out)


# ---------------------------------------------------------------------------
# collision-map oracle

def interaction_hamiltonian(specs: Sequence[SubsystemSpec], coupling: CouplingSpec) -> Operator:
    """sum_l lambda_l (c_l sigma_l^dag + c_l^dag sigma_l) on system (x) bath."""
    n = len(specs)
    if coupling.n != n:
        raise ValueError("one coupling per subsystem")
    sys_dims = dims_of(specs)
    bath_dims = (2,) * n
    cs = lowering_ops(specs)
    from .bath import bath_lowering

    eye_s = Operator(sys_dims, np.eye(int(np.prod(sys_dims))))
    eye_b = Operator(bath_dims, np.eye(2**n))
    h = None
    for l, lam in enumerate(coupling.lambdas):
        s = bath_lowering(l, n)
        term = lam * (kron(cs[l], s.dag) + kron(cs[l].dag, s))
        h = term if h is None else h + term
    if h is None:
        h = kron(eye_s, eye_b) * 0
    return h


class CollisionMap:
    """rho -> Tr_E[U (rho (x) rho_E) U^dag] with the exact interaction unitary."""

    def __init__(self, bath: BathState, coupling: CouplingSpec, specs: Optional[Sequence[SubsystemSpec]] = None):
        specs = list(specs) if specs is not None else [qubit() for _ in range(bath.n)]
        if len(specs) != bath.n:
            raise ValueError(f"{len(specs)} subsystems for a {bath.n}-qubit bath")
        self.specs = specs
        self.bath = bath
        self.dims = dims_of(specs)
        self.u = expm_hermitian(interaction_hamiltonian(specs, coupling), coupling.dt)

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.dims != self.dims:
            raise ValueError(f"state dims {rho.dims} do not match {self.dims}")
        joint = kron(rho, self.bath.rho).data
        out = self.u.data @ joint @ self.u.data.conj().T
        full = Operator(self.dims + self.bath.rho.dims, out)
        red = partial_trace(full, range(len(self.dims))).data
        return DensityMatrix(self.dims, 0.5 * (red + red.conj().T))


def collision_step(
    rho: DensityMatrix,
    bath: BathState,
    coupling: CouplingSpec,
    specs: Optional[Sequence[SubsystemSpec]] = None,
) -> DensityMatrix:
    return CollisionMap(bath, coupling, specs)(rho)


def collision_trajectory(
    rho0: DensityMatrix,
    bath: BathState,
    coupling: CouplingSpec,
    steps: int,
    specs: Optional[Sequence[SubsystemSpec]] = None,
) -> Trajectory:
    """Repeated collisions, each with a fresh copy of the bath state."""
    step = CollisionMap(bath, coupling, specs)
    states = [rho0]
    for _ in range(steps):
        states.append(step(states[-1]))
    return Trajectory(np.arange(steps + 1) * coupling.dt, states)


@dataclass
class ConvergenceResult:
    dts: np.ndarray
    errors: np.ndarray
    order: float
    monotone: bool


def convergence_order(
    rho0: DensityMatrix,
    bath: BathState,
    gamma: float,
    t_fix: float,
    dt_list: Sequence[float],
    specs: Optional[Sequence[SubsystemSpec]] = None,
    me_dt: float = 0.005,
) -> ConvergenceResult:
    """Trace distance between collision and master-equation states at ``t_fix``.

    The rate gamma = lambda^2 dt is held fixed while the interaction interval
    shrinks, so lambda = sqrt(gamma/dt).  The order is the least-squares
    slope of log(error) against log(dt).
    """
    specs = list(specs) if specs is not None else [qubit() for _ in range(bath.n)]
    errors = []
    for dt in dt_list:
        coupling = CouplingSpec.from_rates([gamma] * bath.n, dt)
        steps = _n_steps(dt, t_fix)
        coll = collision_trajectory(rho0, bath, coupling, steps, specs).final
        liou = build_liouvillian_nondiagonal(coefficients_nq(bath, coupling), specs)
        h = _me_step(liou, me_dt, t_fix)
        me = evolve_me(liou, rho0, h, t_fix, stride=_n_steps(h, t_fix)).final
        errors.append(trace_distance(coll, me))
    errors = np.array(errors)
    dts = np.asarray(dt_list, dtype=float)
    order_dts = np.argsort(dts)
    monotone = bool(np.all(np.diff(errors[order_dts]) > 0))
    if np.all(errors > 0):
        order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    else:
        order = math.inf if np.all(errors == 0) else math.nan
    return ConvergenceResult(dts, errors, order, monotone)


def _me_step(liou: Liouvillian, h_max: float, t: float) -> float:
    """A step dividing ``t`` that respects the rate bound and resolves fast terms."""
    norm = np.linalg.norm(liou.dense(), 2)
    limits = [h_max]
    if liou.rate > 0:
        limits.append(0.01 / liou.rate)
    if norm > 0:
        limits.append(0.05 / norm)
    h = min(limits)
    return t / math.ceil(t / h - 1e-9)


# ---------------------------------------------------------------------------
# named two-qubit states

def bell_ket(name: str) -> np.ndarray:
    """|Phi+->, |Psi+-> with Phi = (|ee> +- |gg>)/sqrt2 and Psi = (|eg> +- |ge>)/sqrt2."""
    table = {
        "phi+": ("ee", "gg", 1),
        "phi-": ("ee", "gg", -1),
        "psi+": ("eg", "ge", 1),
        "psi-": ("eg", "ge", -1),
    }
    a, b, s = table[name]
    return (qubit_ket(a) + s * qubit_ket(b)) / np.sqrt(2)


def bell_state(name: str) -> DensityMatrix:
    return DensityMatrix.from_ket((2, 2), bell_ket(name))


def theta_state(theta: float, family: str = "phi") -> DensityMatrix:
    """sin(theta)|X+> + cos(theta)|X-> for the Bell family X in {phi, psi}."""
    if not (-1e-12 <= theta <= np.pi / 2 + 1e-12):
        raise ValueError("theta must lie in [0, pi/2]")
    ket = np.sin(theta) * bell_ket(family + "+") + np.cos(theta) * bell_ket(family + "-")
    return DensityMatrix.from_ket((2, 2), ket)
