"""Operators of the theory: free and interaction Hamiltonians, adiabatic
interpolation, deflation, translation phases, and the quadratic momentum
operator.

Conventions (fixed by matching the reference one-particle energies):
the free Hamiltonian is ``H0 = sum_k (1/L) omega(k) n_k + E0`` with unit-
normalized ladder operators, so the occupation state ``n`` has eigenvalue
``E0 + sum_k n_k omega(k)/L``. The interaction is assembled in momentum
space, ``H_int = (lambda0/4!) (1/L^3) sum_{k1 k2 k3} phi_{k1} phi_{k2}
phi_{k3} phi_{-k1-k2-k3}``, with the fourth index reduced mod N; it
conserves total momentum mod ``2*pi/a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import fock
from .lattice import LatticeSpec, mode_energies, momentum_value, vacuum_energy


def build_free(spec: LatticeSpec) -> sp.csr_matrix:
    """Diagonal free Hamiltonian including the vacuum constant ``E0``."""
    oms = np.array(mode_energies(spec))
    occ = fock.all_occupations(spec)
    diag = vacuum_energy(spec) + occ @ (oms / spec.length)
    return sp.diags(diag).tocsr()


def build_interaction(spec: LatticeSpec, coupling: float | None = None) -> sp.csr_matrix:
    """Quartic interaction in momentum space at coupling ``lambda0``.

    ``coupling=None`` uses ``spec.coupling``. The triple momentum sum runs
    over the dual lattice with the fourth mode fixed by momentum
    conservation, so each row carries O(N^3) entries.
    """
    lam = spec.coupling if coupling is None else coupling
    if lam == 0.0:
        dim = spec.hilbert_dim
        return sp.csr_matrix((dim, dim), dtype=complex)
    N = spec.n_sites
    phis = [fock.field_mode(spec, j) for j in range(N)]
    total = None
    for j1 in range(N):
        for j2 in range(N):
            left = phis[j1] @ phis[j2]
            for j3 in range(N):
                j4 = (-(j1 + j2 + j3)) % N
                term = left @ (phis[j3] @ phis[j4])
                total = term if total is None else total + term
    total = (lam / 24.0) / spec.length**3 * total
    return fock.clean(total)


@dataclass(frozen=True)
class HamiltonianTerms:
    """Free and interaction parts of one theory instance.

    ``interaction`` is built at unit coupling and scaled on demand, so a
    single instance serves every point of the adiabatic ramp.
    """

    spec: LatticeSpec
    free: sp.csr_matrix
    interaction: sp.csr_matrix  # at coupling 1, scale by lambda0 on use
    vacuum_constant: float

    def interaction_at(self, coupling: float) -> sp.csr_matrix:
        return (coupling * self.interaction).tocsr()

    def full(self, coupling: float | None = None) -> sp.csr_matrix:
        lam = self.spec.coupling if coupling is None else lam_check(coupling)
        return fock.clean(self.free + lam * self.interaction, tol=0.0)

    def interpolated(self, s: float) -> sp.csr_matrix:
        """``H(s) = H0 + s * H_int(lambda0)`` for the adiabatic turn-on."""
        if not (0.0 <= s <= 1.0):
            raise ValueError(f"interpolation parameter s={s} outside [0, 1]")
        return fock.clean(self.free + (s * self.spec.coupling) * self.interaction, tol=0.0)


def lam_check(lam: float) -> float:
    if lam < 0:
        raise ValueError("coupling must be non-negative")
    return lam


@lru_cache(maxsize=32)
def _terms_cached(spec: LatticeSpec) -> HamiltonianTerms:
    return HamiltonianTerms(
        spec=spec,
        free=build_free(spec),
        interaction=build_interaction(spec, coupling=1.0),
        vacuum_constant=vacuum_energy(spec),
    )


def build_terms(spec: LatticeSpec) -> HamiltonianTerms:
    """Build (and cache) the free/interaction pair for a spec."""
    return _terms_cached(spec)


def build_full(spec: LatticeSpec) -> sp.csr_matrix:
    """``H = H0 + H_int`` at the spec's coupling."""
    t = build_terms(spec)
    return fock.clean(t.free + spec.coupling * t.interaction, tol=0.0)


def interpolated(spec: LatticeSpec, s: float) -> sp.csr_matrix:
    """``H(s) = H0 + s * H_int(lambda0)``; ``H(0) = H0``, ``H(1)`` the full H."""
    return build_terms(spec).interpolated(s)


class DeflatedOperator:
    """``H + alpha * sum_j |psi_j><psi_j|`` kept in base + low-rank form.

    Expectation values and products with vectors never densify; the dense
    matrix is materialized only for the exact-diagonalization oracle.
    """

    def __init__(self, base, found_states, strength: float, orth_tol: float = 1e-8):
        self.base = base
        self.strength = float(strength)
        states = [np.asarray(s, dtype=complex) for s in found_states]
        self.states = np.array(states).T if states else np.zeros((base.shape[0], 0), dtype=complex)
        if self.states.shape[1]:
            gram = self.states.conj().T @ self.states
            if np.abs(gram - np.eye(self.states.shape[1])).max() > orth_tol:
                raise ValueError("found states are not orthonormal within tolerance")

    @property
    def shape(self):
        return self.base.shape

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = self.base @ vec
        if self.states.shape[1]:
            out = out + self.strength * (self.states @ (self.states.conj().T @ vec))
        return out

    def __matmul__(self, vec):
        return self.apply(vec)

    def expectation(self, state: np.ndarray) -> float:
        return float(np.real(np.vdot(state, self.apply(state))))

    def dense(self) -> np.ndarray:
        mat = np.asarray(self.base.todense() if sp.issparse(self.base) else self.base, dtype=complex)
        if self.states.shape[1]:
            mat = mat + self.strength * (self.states @ self.states.conj().T)
        return mat


def translation_phase(spec: LatticeSpec, displacement: float) -> sp.csr_matrix:
    """Diagonal translation operator ``T_x`` with phase ``exp(i x P_tot)``.

    The total momentum of each occupation state is reduced mod ``2*pi/a``;
    for lattice displacements the reduction is immaterial, which is exactly
    why ``T_a`` commutes with the momentum-conserving Hamiltonian.
    """
    steps = displacement / spec.spacing
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"displacement {displacement} is not a lattice multiple of a={spec.spacing}")
    mom_index = fock.total_momentum_index(spec)  # total momentum = (2 pi / L) * index
    phases = np.exp(1j * displacement * (2.0 * np.pi / spec.length) * mom_index)
    return sp.diags(phases).tocsr()


def momentum_quadratic(spec: LatticeSpec) -> sp.csr_matrix:
    """Momentum operator ``P = a sum_x pi(x) grad_a phi(x)``, Hermitized.

    The forward difference alone is not symmetric, hence the explicit
    ``(P + P^dag)/2``.
    """
    a = spec.spacing
    total = None
    for m in range(spec.n_sites):
        x = m * a
        x_next = ((m + 1) % spec.n_sites) * a
        grad = (fock.position_field(spec, x_next) - fock.position_field(spec, x)) / a
        term = fock.position_momentum(spec, x) @ grad
        total = term if total is None else total + term
    total = a * total
    return fock.clean(0.5 * (total + total.getH()))
