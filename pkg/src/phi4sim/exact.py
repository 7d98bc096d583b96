"""Ground truth: dense diagonalization, exact stepwise adiabatic evolution,
spectral-crowding diagnostics, adiabatically-defined particle subspaces, and
fidelity measures.

The adiabatic reference applies the exact propagator of the instantaneous
Hamiltonian at every step (no product-formula splitting), computed to
machine precision by a scaled Taylor expansion of the exponential action.
Eigenstates are followed through the ramp by maximal-overlap continuation,
which resolves crossings deterministically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fock, hamiltonian
from .lattice import (DENSE_DIM_GUARD, LatticeSpec, dispersion, mode_energies,
                      momentum_value)

DEGENERACY_TOL = 1e-8
CROWDING_TOL = 1e-6
PROJECTOR_TOL = 1e-10


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    """Full spectrum with degeneracy clusters and crowding diagnostics."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    clusters: list = field(default_factory=list)
    parity_pairs: list = field(default_factory=list)
    collisions: list = field(default_factory=list)
    free_levels: np.ndarray | None = None
    interacting_levels: np.ndarray | None = None

    def cluster_of(self, idx: int) -> list[int]:
        for members in self.clusters:
            if idx in members:
                return members
        return [idx]

    def cluster_basis(self, idx: int) -> np.ndarray:
        return self.eigenvectors[:, self.cluster_of(idx)]

    def to_csv(self) -> str:
        cluster_id = {}
        for ci, members in enumerate(self.clusters):
            for m in members:
                cluster_id[m] = ci
        lines = ["index,energy,cluster,degenerate"]
        for i, e in enumerate(self.eigenvalues):
            ci = cluster_id.get(i, -1)
            deg = len(self.clusters[ci]) > 1 if ci >= 0 else False
            lines.append(f"{i},{e!r},{ci},{int(deg)}")
        return "\n".join(lines) + "\n"


def _cluster_indices(values: np.ndarray, tol: float) -> list[list[int]]:
    clusters, current = [], [0]
    for i in range(1, len(values)):
        if values[i] - values[current[-1]] < tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    return clusters


def eigensolve(H, degeneracy_tol: float = DEGENERACY_TOL) -> SpectrumReport:
    """Dense spectrum with orthonormal eigenvectors and degeneracy clusters.

    Accepts sparse matrices, dense arrays, or deflated operators (which are
    densified here and only here).
    """
    if isinstance(H, hamiltonian.DeflatedOperator):
        mat = H.dense()
    elif sp.issparse(H):
        mat = H.toarray()
    else:
        mat = np.asarray(H)
    dim = mat.shape[0]
    if dim > DENSE_DIM_GUARD:
        raise ValueError(f"dimension {dim} exceeds the dense-solver guard {DENSE_DIM_GUARD}")
    if np.abs(mat - mat.conj().T).max() > 1e-10:
        raise ValueError("eigensolve requires a Hermitian operator")
    w, V = np.linalg.eigh(mat)
    return SpectrumReport(eigenvalues=w, eigenvectors=V,
                          clusters=_cluster_indices(w, degeneracy_tol))


def free_level_table(spec: LatticeSpec) -> list[tuple[float, tuple[int, ...]]]:
    """(energy, occupation) pairs of the diagonal free Hamiltonian, ascending."""
    diag = hamiltonian.build_free(spec).diagonal().real
    occ = fock.all_occupations(spec)
    order = np.argsort(diag, kind="stable")
    return [(float(diag[i]), tuple(int(n) for n in occ[i])) for i in order]


def crowding_report(spec: LatticeSpec, clustering_tol: float = CROWDING_TOL) -> SpectrumReport:
    """Spectrum of the interacting theory with crowding diagnostics.

    Flags the reflection (parity) degeneracies ``omega(k) = omega(-k)`` of
    one-particle levels, and accidental collisions ``n * omega(0) = omega(k)``
    on the lattice dispersion. Free and interacting level lists are attached
    for histogram-style comparison.
    """
    report = eigensolve(hamiltonian.build_full(spec), degeneracy_tol=clustering_tol)
    N = spec.n_sites
    oms = mode_energies(spec)
    for j in range(1, (N + 1) // 2):
        partner = (N - j) % N
        if partner != j:
            report.parity_pairs.append((j, partner))
    max_n = (spec.local_dim - 1) * N
    for n in range(2, max_n + 1):
        for j in range(N):
            if abs(n * oms[0] - oms[j]) < clustering_tol:
                report.collisions.append((n, j))
    report.free_levels = hamiltonian.build_free(spec).diagonal().real.copy()
    report.free_levels.sort()
    report.interacting_levels = report.eigenvalues.copy()
    return report


def tracked_levels(spec: LatticeSpec, occupations_list, n_grid: int = 100) -> list[tuple[float, np.ndarray]]:
    """Follow free levels through the turn-on ``H(s)`` to ``s=1``.

    Returns ``(energy, eigenvector)`` at the full coupling for each starting
    occupation label, using maximal-overlap continuation on an ``n_grid``
    point ramp; overlap ties break toward the lower eigenvalue index.
    """
    terms = hamiltonian.build_terms(spec)
    vecs = [fock.basis_state(spec, occ) for occ in occupations_list]
    energies = [0.0] * len(vecs)
    for s in np.linspace(0.0, 1.0, n_grid + 1)[1:]:
        w, V = np.linalg.eigh(terms.interpolated(s).toarray())
        for i, v in enumerate(vecs):
            overlaps = np.abs(V.conj().T @ v)
            best = int(np.argmax(overlaps))
            vecs[i] = V[:, best]
            energies[i] = float(w[best])
    return list(zip(energies, vecs))


# ---------------------------------------------------------------------------
# exact propagator and adiabatic reference
# ---------------------------------------------------------------------------

def expm_apply(H, psi: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t) @ psi`` to machine precision via scaled Taylor summation."""
    if H.shape[1] != psi.shape[0]:
        raise ValueError("dimension mismatch")
    norm_est = float(np.asarray(np.abs(H).sum(axis=1)).max()) * abs(t)
    n_sub = max(1, int(math.ceil(norm_est / 0.5)))
    dt = t / n_sub
    out = psi.astype(complex)
    for _ in range(n_sub):
        term = out
        acc = out.copy()
        for k in range(1, 60):
            term = (-1j * dt / k) * (H @ term)
            acc = acc + term
            if np.max(np.abs(term)) < 1e-18:
                break
        out = acc
    return out


@dataclass
class AdiabaticResult:
    """Final state and sampled path of one exact adiabatic turn-on."""

    final_state: np.ndarray
    path: list  # (s, energy, instantaneous infidelity or nan)
    steps: int
    dt: float
    final_infidelity: float = float("nan")
    target_cluster: int = 0


def adiabatic_evolve(spec: LatticeSpec, initial_occupations, steps: int, dt: float,
                     track_every: int = 0) -> AdiabaticResult:
    """Exact stepwise adiabatic turn-on from a free eigenstate.

    Applies ``exp(-i H(s_j) dt)`` for ``s_j = j/steps``, ``j = 1..steps``.
    The final infidelity is measured against the exact eigenstate reached by
    overlap tracking; degenerate targets are scored by subspace fidelity
    over their cluster. ``track_every > 0`` additionally records the
    instantaneous infidelity every that many steps.
    """
    terms = hamiltonian.build_terms(spec)
    psi = fock.basis_state(spec, initial_occupations)
    path = []
    for j in range(1, steps + 1):
        s = j / steps
        H = terms.interpolated(s)
        psi = expm_apply(H, psi, dt)
        energy = float(np.real(np.vdot(psi, H @ psi)))
        infid = float("nan")
        if track_every and (j % track_every == 0 or j == steps):
            report = eigensolve(H)
            idx = int(np.argmax(np.abs(report.eigenvectors.conj().T @ psi)))
            basis = report.cluster_basis(idx)
            infid = 1.0 - float(np.sum(np.abs(basis.conj().T @ psi) ** 2))
        path.append((s, energy, infid))
    report = eigensolve(terms.interpolated(1.0))
    idx = int(np.argmax(np.abs(report.eigenvectors.conj().T @ psi)))
    basis = report.cluster_basis(idx)
    final_infid = 1.0 - float(np.sum(np.abs(basis.conj().T @ psi) ** 2))
    return AdiabaticResult(final_state=psi, path=path, steps=steps, dt=dt,
                           final_infidelity=final_infid, target_cluster=idx)


def adiabatic_evolve_block(spec: LatticeSpec, occupations_list, steps: int, dt: float) -> np.ndarray:
    """Evolve several free eigenstates through the same ramp in one pass.

    Returns the matrix of final states as columns; used where many starting
    labels share one schedule (subspace construction).
    """
    terms = hamiltonian.build_terms(spec)
    block = np.stack([fock.basis_state(spec, occ) for occ in occupations_list], axis=1)
    for j in range(1, steps + 1):
        H = terms.interpolated(j / steps)
        block = expm_apply(H, block, dt)
    return block


# ---------------------------------------------------------------------------
# subspaces and fidelities
# ---------------------------------------------------------------------------

@dataclass
class SubspaceProjector:
    """Orthonormal basis of a reference subspace; ``Lambda = B B^dag``."""

    basis: np.ndarray  # columns
    requested_dimension: int = 0
    note: str = ""

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def fidelity(self, state: np.ndarray) -> float:
        fock.check_normalized(state)
        return float(np.sum(np.abs(self.basis.conj().T @ state) ** 2))

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "requested_dimension": self.requested_dimension,
            "note": self.note,
            "basis": [fock.state_to_json(self.basis[:, i]) for i in range(self.dimension)],
        }


def _gram_schmidt(columns: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    kept = []
    for i in range(columns.shape[1]):
        v = columns[:, i].copy()
        for u in kept:
            v -= u * (u.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > tol:
            kept.append(v / nrm)
    return np.stack(kept, axis=1) if kept else np.zeros((columns.shape[0], 0))


def particle_sector_labels(spec: LatticeSpec, n: int) -> list[tuple[int, ...]]:
    """Occupation labels with total particle number ``n``, capped by the
    local dimension; ascending free energy."""
    labels = [occ for occ in itertools.product(range(spec.local_dim), repeat=spec.n_sites)
              if sum(occ) == n]
    oms = np.array(mode_energies(spec))
    labels.sort(key=lambda occ: (float(np.dot(occ, oms)), occ))
    return labels


def n_particle_subspace(spec: LatticeSpec, n: int, steps: int = 100, dt: float = 0.5) -> SubspaceProjector:
    """Adiabatically-defined ``n``-particle subspace at the spec's coupling.

    Each free ``n``-particle basis state is carried through the turn-on and
    the images are orthonormalized. The unconstrained dimension is the
    number of weak compositions ``binom(n+N-1, n)``; the occupancy cap can
    make the sector smaller, which is reported rather than an error.
    """
    labels = particle_sector_labels(spec, n)
    full = math.comb(n + spec.n_sites - 1, n)
    note = ""
    if len(labels) < full:
        note = (f"occupancy cap {spec.local_dim - 1} leaves {len(labels)} of "
                f"{full} compositions")
    if not labels:
        raise ValueError(f"no {n}-particle states fit the occupancy cap")
    if spec.coupling == 0.0:
        block = np.stack([fock.basis_state(spec, occ) for occ in labels], axis=1)
    else:
        block = adiabatic_evolve_block(spec, labels, steps, dt)
    basis = _gram_schmidt(block)
    return SubspaceProjector(basis=basis, requested_dimension=full, note=note)


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|`` with the global phase removed; inputs must be normalized."""
    fock.check_normalized(a)
    fock.check_normalized(b)
    return float(abs(np.vdot(a, b)))


def subspace_fidelity(state: np.ndarray, projector: SubspaceProjector) -> float:
    """``<psi|Lambda|psi>``, the weight of the state inside the subspace."""
    return projector.fidelity(state)


def momentum_project(spec: LatticeSpec, state: np.ndarray, mode: int) -> np.ndarray:
    """Project onto total momentum ``2*pi*mode/L`` via phase-weighted translations.

    Applies ``(1/N) sum_x exp(i p x) T_x`` and normalizes; raises if the
    image norm is below 1e-10 (state carries no momentum-``p`` component).
    """
    if not (0 <= mode < spec.n_sites):
        raise ValueError(f"mode {mode} outside 0..{spec.n_sites - 1}")
    p = momentum_value(spec, mode)
    out = np.zeros_like(state, dtype=complex)
    for m in range(spec.n_sites):
        x = m * spec.spacing
        # T_x carries exp(+i x P); the weight exp(+i p x) then cancels the
        # phase of momentum -p components and annihilates everything but +p
        out += np.exp(1j * p * x) * (hamiltonian.translation_phase(spec, -x) @ state)
    out /= spec.n_sites
    nrm = np.linalg.norm(out)
    if nrm < 1e-10:
        raise ValueError("projection image vanishes: no momentum component at this mode")
    return out / nrm
