"""Variational dynamics: imaginary-time ground/excited search, real-time and
adiabatic evolution under the McLachlan principle, first-order error
tracking, adaptive circuit growth, and plain gradient descent.

Imaginary time integrates ``A theta_dot = -C`` with ``A_ij = Re <d_i psi|d_j
psi>`` and ``C_i = Re <d_i psi|H|psi>``. Real time integrates the
global-phase-corrected system ``M theta_dot = V`` with ``M = A - c c^T`` and
``V_i = Im <d_i psi|H|psi> + c_i <H>`` where ``c_i = Im <psi|d_i psi>``.

The first-order step error reported as ``delta2`` is the phase-corrected
quadratic form ``Var(H) + td M td - 2 td V``, which vanishes for stationary
eigenstates and whose minimizer is the M/V solution. The uncorrected form
``<H^2> + td A td - 2 td C`` is recorded alongside as ``delta2_raw``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .ansatz import Circuit, Generator, apply_block
from .hamiltonian import HamiltonianTerms
from .lattice import LatticeSpec

NEGATIVE_CLIP = -1e-10


@dataclass(frozen=True)
class LinearRamp:
    """Linear adiabatic schedule ``s(t) = t / total_time`` over ``[0, total_time]``."""

    total_time: float = 100.0
    midpoint: bool = True  # sample H(s) at the middle of each step

    def coupling_fraction(self, t: float, dt: float) -> float:
        tt = t + 0.5 * dt if self.midpoint else t + dt
        return min(tt / self.total_time, 1.0)


@dataclass
class EvolverConfig:
    """Knobs of the variational evolvers.

    ``step`` is the imaginary- or real-time increment; ``delta_cut`` the
    growth threshold of the adaptive strategy; ``deflation_strength`` the
    energy penalty ``alpha`` placed on already-found eigenstates.
    """

    step: float = 0.01
    max_steps: int = 2000
    solve_regularization: float = 1e-6
    pinv_cutoff: float = 1e-10
    delta_cut: float = 0.0
    deflation_strength: float = 8.0
    learning_rate: float = 0.1
    schedule: LinearRamp = field(default_factory=LinearRamp)
    grad_tol: float = 1e-8
    energy_tol: float = 1e-12
    energy_window: int = 10

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.solve_regularization < 0:
            raise ValueError("solve_regularization must be non-negative")


@dataclass
class McLachlanSystem:
    """A/C (imaginary time) and phase-corrected M/V (real time) blocks."""

    a: np.ndarray
    c: np.ndarray
    m: np.ndarray
    v: np.ndarray
    energy: float
    h_squared: float

    @property
    def variance(self) -> float:
        return self.h_squared - self.energy**2


@dataclass
class Trajectory:
    """Per-step records of one variational run."""

    thetas: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    delta2: list = field(default_factory=list)
    delta2_raw: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    overlaps: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    status: str = "max_steps"
    note: str = ""

    def record(self, theta, energy, d2, d2_raw, grad, overlap_row):
        self.thetas.append(np.array(theta))
        self.energies.append(float(energy))
        self.delta2.append(float(d2))
        self.delta2_raw.append(float(d2_raw))
        self.grad_norms.append(float(grad))
        self.overlaps.append([float(o) for o in overlap_row])
        self.wall_times.append(time.perf_counter())

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    @property
    def final_energy(self) -> float:
        return self.energies[-1]

    def __len__(self) -> int:
        return len(self.energies)

    def to_csv(self) -> str:
        n_ov = max((len(o) for o in self.overlaps), default=0)
        header = ["step", "energy", "delta2", "delta2_raw", "grad_norm"]
        header += [f"overlap_{j}" for j in range(n_ov)]
        lines = [",".join(header)]
        for i in range(len(self.energies)):
            row = [str(i), repr(self.energies[i]), repr(self.delta2[i]),
                   repr(self.delta2_raw[i]), repr(self.grad_norms[i])]
            row += [repr(o) for o in self.overlaps[i]] + ["nan"] * (n_ov - len(self.overlaps[i]))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "steps": len(self.energies),
            "final_energy": self.final_energy if self.energies else None,
            "final_grad_norm": self.grad_norms[-1] if self.grad_norms else None,
            "status": self.status,
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# system assembly and solves
# ---------------------------------------------------------------------------

def _assemble(psi: np.ndarray, D: np.ndarray, H) -> McLachlanSystem:
    Hpsi = H @ psi
    energy = float(np.real(np.vdot(psi, Hpsi)))
    h2 = float(np.real(np.vdot(Hpsi, Hpsi)))
    a = np.real(D.conj().T @ D)
    cc = D.conj().T @ Hpsi
    ci = np.imag(psi.conj() @ D)  # c_i = Im <psi | d_i psi>
    m = a - np.outer(ci, ci)
    v = np.imag(cc) + ci * energy
    return McLachlanSystem(a=a, c=np.real(cc), m=m, v=v, energy=energy, h_squared=h2)


def mclachlan_ac(circuit: Circuit, theta, H) -> McLachlanSystem:
    """McLachlan blocks at the given parameter point, from analytic tangents."""
    psi, D = circuit.prepare_with_derivatives(theta)
    return _assemble(psi, D, H)


def solve_linear(mat: np.ndarray, rhs: np.ndarray, regularization: float,
                 pinv_cutoff: float) -> np.ndarray:
    """Tikhonov-regularized solve with a pseudo-inverse fallback."""
    n = len(rhs)
    if n == 0:
        return np.zeros(0)
    try:
        sol = np.linalg.solve(mat + regularization * np.eye(n), rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    w, U = np.linalg.eigh(mat)
    inv = np.where(np.abs(w) > pinv_cutoff, 1.0 / np.where(w == 0, 1.0, w), 0.0)
    return U @ (inv * (U.T @ rhs))


def mclachlan_distance(system: McLachlanSystem, theta_dot) -> float:
    """Phase-corrected first-order error ``Var(H) + td M td - 2 td V``.

    Clipped at zero inside the floating-point guard; its minimizer over
    ``theta_dot`` is exactly the M/V solution.
    """
    td = np.asarray(theta_dot, dtype=float)
    val = system.variance + td @ system.m @ td - 2.0 * td @ system.v
    if val < NEGATIVE_CLIP:
        return float(val)
    return float(max(val, 0.0))


def mclachlan_distance_raw(system: McLachlanSystem, theta_dot) -> float:
    """The uncorrected form ``<H^2> + td A td - 2 td C``, recorded literally."""
    td = np.asarray(theta_dot, dtype=float)
    return float(system.h_squared + td @ system.a @ td - 2.0 * td @ system.c)


# ---------------------------------------------------------------------------
# imaginary time
# ---------------------------------------------------------------------------

def _ite_loop(circuit: Circuit, theta0, H, config: EvolverConfig,
              found_states=None, alpha: float = 0.0) -> Trajectory:
    theta = np.asarray(theta0, dtype=float).copy()
    F = (np.array([np.asarray(s, dtype=complex) for s in found_states]).T
         if found_states else np.zeros((circuit.spec.hilbert_dim, 0)))
    traj = Trajectory()
    plateau = 0
    for _ in range(config.max_steps):
        psi, D = circuit.prepare_with_derivatives(theta)
        sys_ = _assemble(psi, D, H)
        c_mod = sys_.c.copy()
        ov = F.conj().T @ psi if F.shape[1] else np.zeros(0)
        if F.shape[1] and alpha != 0.0:
            c_mod = c_mod + alpha * np.real(D.conj().T @ (F @ ov))
        grad = float(np.max(np.abs(c_mod))) if len(c_mod) else 0.0
        theta_dot = -solve_linear(sys_.a, c_mod, config.solve_regularization, config.pinv_cutoff)
        if not np.all(np.isfinite(theta_dot)):
            traj.record(theta, sys_.energy, np.nan, np.nan, grad, np.abs(ov) ** 2)
            traj.status, traj.note = "error", "singular solve beyond regularization"
            return traj
        # imaginary-time first-order residual of the driving (deflated) flow
        e_defl = sys_.energy + alpha * float(np.sum(np.abs(ov) ** 2))
        hdps = H @ psi + (alpha * (F @ ov) if F.shape[1] else 0.0)
        var_defl = float(np.real(np.vdot(hdps, hdps))) - e_defl**2
        d2 = var_defl + theta_dot @ sys_.a @ theta_dot + 2.0 * c_mod @ theta_dot
        d2 = float(max(d2, 0.0)) if d2 > NEGATIVE_CLIP else float(d2)
        traj.record(theta, sys_.energy, d2, mclachlan_distance_raw(sys_, theta_dot),
                    grad, np.abs(ov) ** 2)
        if grad < config.grad_tol:
            traj.status, traj.note = "converged", "gradient below tolerance"
            return traj
        if len(traj.energies) > 1:
            rel = abs(traj.energies[-1] - traj.energies[-2]) / max(abs(traj.energies[-1]), 1.0)
            plateau = plateau + 1 if rel < config.energy_tol else 0
            if plateau >= config.energy_window:
                traj.status, traj.note = "converged", "energy plateau"
                return traj
        theta = theta + config.step * theta_dot
    traj.thetas.append(np.array(theta))
    return traj


def vqite_run(circuit: Circuit, theta0, H, config: EvolverConfig) -> Trajectory:
    """Variational imaginary-time ground-state search, Euler steps of
    ``A theta_dot = -C``."""
    return _ite_loop(circuit, theta0, H, config)


def excited_run(circuit: Circuit, theta0, H, found_states, config: EvolverConfig) -> Trajectory:
    """Imaginary-time search under the deflated operator.

    The drive picks up ``alpha * Re(<d_i psi|psi_j><psi_j|psi>)`` per found
    state; overlaps are evaluated directly on the statevectors. Energies in
    the trajectory refer to the undeflated Hamiltonian.
    """
    found = list(found_states)
    if found:
        F = np.array([np.asarray(s, dtype=complex) for s in found]).T
        gram = F.conj().T @ F
        if np.abs(gram - np.eye(F.shape[1])).max() > 1e-8:
            raise ValueError("found states must be orthonormal")
        rng_est = _spectral_range_estimate(H)
        if config.deflation_strength <= rng_est:
            warnings.warn(
                f"deflation strength {config.deflation_strength} does not exceed the "
                f"estimated spectral range {rng_est:.3g}; higher targets may not surface",
                stacklevel=2)
    return _ite_loop(circuit, theta0, H, config,
                     found_states=found, alpha=config.deflation_strength)


def _spectral_range_estimate(H) -> float:
    if sp.issparse(H):
        diag = H.diagonal().real
        radius = np.asarray(np.abs(H).sum(axis=1)).ravel() - np.abs(diag)
        return float((diag + radius).max() - (diag - radius).min())
    return 0.0


# ---------------------------------------------------------------------------
# real time and adiabatic
# ---------------------------------------------------------------------------

def _rt_step(circuit, theta, H, config):
    psi, D = circuit.prepare_with_derivatives(theta)
    sys_ = _assemble(psi, D, H)
    theta_dot = solve_linear(sys_.m, sys_.v, config.solve_regularization, config.pinv_cutoff)
    return sys_, theta_dot


def real_time_run(circuit: Circuit, theta0, H, config: EvolverConfig) -> Trajectory:
    """Real-time evolution via the phase-corrected M/V system for
    ``max_steps`` Euler steps of size ``step``."""
    theta = np.asarray(theta0, dtype=float).copy()
    traj = Trajectory()
    for _ in range(config.max_steps):
        sys_, theta_dot = _rt_step(circuit, theta, H, config)
        if not np.all(np.isfinite(theta_dot)):
            traj.status, traj.note = "error", "singular solve beyond regularization"
            return traj
        traj.record(theta, sys_.energy, mclachlan_distance(sys_, theta_dot),
                    mclachlan_distance_raw(sys_, theta_dot),
                    float(np.max(np.abs(sys_.v), initial=0.0)), [])
        theta = theta + config.step * theta_dot
    traj.thetas.append(np.array(theta))
    traj.note = "horizon reached"
    return traj


def adiabatic_variational_run(circuit: Circuit, theta0, spec: LatticeSpec,
                              config: EvolverConfig,
                              terms: HamiltonianTerms | None = None) -> Trajectory:
    """Variational adiabatic turn-on: M/V integration under ``H(s)`` with the
    linear ramp of ``config.schedule``, starting from a free eigenstate."""
    from . import hamiltonian as ham

    terms = terms or ham.build_terms(spec)
    ramp = config.schedule
    steps = int(round(ramp.total_time / config.step))
    theta = np.asarray(theta0, dtype=float).copy()
    traj = Trajectory()
    for j in range(steps):
        s = ramp.coupling_fraction(j * config.step, config.step)
        H = terms.interpolated(s)
        sys_, theta_dot = _rt_step(circuit, theta, H, config)
        if not np.all(np.isfinite(theta_dot)):
            traj.status, traj.note = "error", "singular solve beyond regularization"
            return traj
        traj.record(theta, sys_.energy, mclachlan_distance(sys_, theta_dot),
                    mclachlan_distance_raw(sys_, theta_dot),
                    float(np.max(np.abs(sys_.v), initial=0.0)), [])
        theta = theta + config.step * theta_dot
    traj.thetas.append(np.array(theta))
    traj.note = "ramp completed"
    return traj


# ---------------------------------------------------------------------------
# adaptive circuit growth
# ---------------------------------------------------------------------------

def _optimal_delta(psi, D, H, pinv_cutoff):
    sys_ = _assemble(psi, D, H)
    if D.shape[1]:
        td = solve_linear(sys_.m, sys_.v, 0.0, pinv_cutoff)
    else:
        td = np.zeros(0)
    return max(float(sys_.variance + td @ sys_.m @ td - 2.0 * td @ sys_.v), 0.0)


def adaptive_grow(circuit: Circuit, theta, H, delta_cut: float,
                  pool: list[Generator], pinv_cutoff: float = 1e-10):
    """Greedy ansatz growth from a pool of Hamiltonian terms.

    While the first-order error exceeds ``delta_cut`` (comparison on
    ``Delta``, not its square), append the pool generator giving the largest
    decrease. Each accepted append strictly decreases ``Delta``; each pool
    term is used at most once per construction round, so the loop ends
    within ``len(pool)`` iterations. Returns ``(circuit, theta, deltas,
    status)`` with the per-append ``Delta`` history.
    """
    theta = np.asarray(theta, dtype=float).copy()
    N, d = circuit.spec.n_sites, circuit.spec.local_dim
    psi, D = circuit.prepare_with_derivatives(theta)
    deltas = [np.sqrt(_optimal_delta(psi, D, H, pinv_cutoff))]
    gens = list(circuit.generators)
    used: set[int] = set()
    status = "reached_cut"
    while deltas[-1] > delta_cut + 1e-12:
        best_idx, best_val = None, deltas[-1] ** 2
        for idx, g in enumerate(pool):
            if idx in used:
                continue
            col = apply_block(psi, N, d, g.modes, -1j * g.block).reshape(-1, 1)
            val = _optimal_delta(psi, np.hstack([D, col]), H, pinv_cutoff)
            if val < best_val - 1e-15:
                best_idx, best_val = idx, val
        if best_idx is None:
            status = "tolerance_floor"
            break
        used.add(best_idx)
        g = pool[best_idx]
        gens.append(g)
        theta = np.append(theta, 0.0)
        # new generator enters at angle zero: the state is unchanged and the
        # new tangent column is exactly -i X psi
        D = np.hstack([D, apply_block(psi, N, d, g.modes, -1j * g.block).reshape(-1, 1)])
        deltas.append(np.sqrt(best_val))
        if len(used) == len(pool):
            if deltas[-1] > delta_cut + 1e-12:
                status = "pool_exhausted"
            break
    return Circuit(circuit.spec, circuit.reference, gens), theta, deltas, status


# ---------------------------------------------------------------------------
# gradient descent and convergence-rate estimate
# ---------------------------------------------------------------------------

def gd_run(circuit: Circuit, theta0, H, config: EvolverConfig) -> Trajectory:
    """Plain gradient descent ``theta <- theta - eta * 2C`` (identity metric)."""
    theta = np.asarray(theta0, dtype=float).copy()
    traj = Trajectory()
    increases = 0
    for _ in range(config.max_steps):
        sys_ = mclachlan_ac(circuit, theta, H)
        grad = 2.0 * sys_.c
        traj.record(theta, sys_.energy, 0.0, 0.0, float(np.max(np.abs(grad), initial=0.0)), [])
        if traj.grad_norms[-1] < config.grad_tol:
            traj.status, traj.note = "converged", "gradient below tolerance"
            return traj
        if len(traj.energies) > 1 and traj.energies[-1] > traj.energies[-2] + 1e-14:
            increases += 1
            if increases >= 10:
                traj.status, traj.note = "error", "energy increased over 10 consecutive steps"
                return traj
        else:
            increases = 0
        theta = theta - config.learning_rate * grad
    traj.thetas.append(np.array(theta))
    return traj


def qntk_rate(H, learning_rate: float, n_params: int) -> float:
    """Average exponential convergence-rate estimate
    ``eta * L * tr(H^2) / dim^2`` of over-parametrized gradient descent."""
    if sp.issparse(H):
        tr_h2 = float(np.sum(np.abs(H.data) ** 2))
        dim = H.shape[0]
    else:
        Hd = np.asarray(H)
        tr_h2 = float(np.sum(np.abs(Hd) ** 2))
        dim = Hd.shape[0]
    return learning_rate * n_params * tr_h2 / dim**2
