"""Bosonic unitary coupled-cluster circuits: single-mode excitations paired
across reflected momenta, two-mode pair excitations, state preparation, and
analytic parameter derivatives.

A generator is a Hermitian block on at most a few modes; the circuit applies
``exp(-i theta_l X_l)`` in a deterministic order (lexicographic by label).
Each single-mode excitation at mode ``k`` shares its parameter with the
mirrored excitation at ``(N-k) mod N``, which keeps every generator even
under momentum reflection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fock
from .lattice import LatticeSpec, reflection_partner
from .paulis import PAULI_MATS, PauliSum, QubitLayout, compile_modes

HERMITICITY_TOL = 1e-12
MAX_LEVEL_JUMP = 4  # quartic field lifts at most four levels per mode


def mode_orbits(n_sites: int) -> list[tuple[int, ...]]:
    """Reflection orbits ``{k, (N-k) mod N}`` in ascending order.

    Self-conjugate modes (k=0 and, for even N, k=N/2) appear as singletons.
    """
    orbits, seen = [], set()
    for k in range(n_sites):
        kt = (n_sites - k) % n_sites
        key = tuple(sorted({k, kt}))
        if key not in seen:
            seen.add(key)
            orbits.append(key)
    return orbits


def _hop(d: int, s: int, t: int) -> np.ndarray:
    m = np.zeros((d, d))
    m[s, t] = 1.0
    m[t, s] = 1.0
    return m


def _local_kron(mats: list[np.ndarray]) -> np.ndarray:
    """Tensor product over modes listed ascending, first mode least significant."""
    out = np.eye(1)
    for m in mats:
        out = np.kron(m, out)
    return out


@dataclass(frozen=True)
class Generator:
    """Hermitian rotation generator on a small set of modes.

    ``label`` is ``(modes, sources, targets)`` for excitation generators and
    an axes string for Pauli-term generators; the label fixes the
    deterministic circuit ordering.
    """

    modes: tuple[int, ...]
    block: np.ndarray
    label: tuple
    kind: str = "excitation"

    def __post_init__(self):
        blk = np.asarray(self.block, dtype=complex)
        if np.abs(blk - blk.conj().T).max() > HERMITICITY_TOL:
            raise ValueError(f"generator {self.label} is not Hermitian")
        if self.kind == "excitation":
            _, sources, targets = self.label
            for s, t in zip(sources, targets):
                if abs(s - t) > MAX_LEVEL_JUMP:
                    raise ValueError(f"level jump {abs(s - t)} exceeds {MAX_LEVEL_JUMP}")
        object.__setattr__(self, "block", blk)

    def embedded(self, spec: LatticeSpec) -> sp.csr_matrix:
        """Full-space sparse matrix of the generator."""
        eye = np.eye(spec.hilbert_dim, dtype=complex)
        mat = apply_block(eye, spec.n_sites, spec.local_dim, self.modes, self.block)
        return fock.clean(sp.csr_matrix(mat))

    def pauli_form(self, layout: QubitLayout) -> PauliSum:
        return compile_modes(self.block, layout, self.modes)

    def sort_key(self):
        return (self.kind != "excitation", self.modes, self.label[1:] if self.kind == "excitation" else self.label)


def _t1_generator(spec: LatticeSpec, orbit: tuple[int, ...], s: int, t: int) -> Generator:
    d = spec.local_dim
    if len(orbit) == 1:
        return Generator(modes=orbit, block=_hop(d, s, t), label=(orbit, (s,), (t,)))
    h = _hop(d, s, t)
    eye = np.eye(d)
    block = _local_kron([h, eye]) + _local_kron([eye, h])
    return Generator(modes=orbit, block=block, label=(orbit, (s, s), (t, t)))


def build_t1(spec: LatticeSpec, max_transition: int = 3) -> list[Generator]:
    """Single-mode excitation generators, reflection-symmetrized.

    For each mode orbit and each level pair ``s < t`` with
    ``t - s <= max_transition``, the Hermitian hopper ``|s><t| + h.c.`` acts
    at the mode and (for genuine orbits) at its reflection partner, both
    sharing one parameter.
    """
    if max_transition > spec.local_dim - 1:
        raise ValueError("max_transition exceeds the level range")
    gens = []
    for orbit in mode_orbits(spec.n_sites):
        for s in range(spec.local_dim):
            for t in range(s + 1, spec.local_dim):
                if t - s <= max_transition:
                    gens.append(_t1_generator(spec, orbit, s, t))
    return sorted(gens, key=Generator.sort_key)


def build_t2_paired(spec: LatticeSpec, max_transition: int = 3,
                    include_mirror: bool = True) -> list[Generator]:
    """Pair-excitation generators on genuine ``(k, -k)`` orbits.

    Each generator moves the two paired modes together between equal levels,
    ``|s s><t t| + h.c.``, which conserves total momentum. Self-conjugate
    modes contribute nothing here: their pair excitations degenerate to the
    single-mode hoppers already present in the single-excitation set. For
    these level-symmetric labels the mirrored term coincides with the first,
    so ``include_mirror`` only doubles the generator normalization.
    """
    if max_transition > spec.local_dim - 1:
        raise ValueError("max_transition exceeds the level range")
    d = spec.local_dim
    gens = []
    for orbit in mode_orbits(spec.n_sites):
        if len(orbit) != 2:
            continue
        for s in range(d):
            for t in range(s + 1, d):
                if t - s > max_transition:
                    continue
                block = np.zeros((d * d, d * d))
                block[s * (1 + d), t * (1 + d)] = 1.0
                block[t * (1 + d), s * (1 + d)] = 1.0
                if include_mirror:
                    block = block * 2.0
                gens.append(Generator(modes=orbit, block=block,
                                      label=(orbit, (s, s), (t, t)), kind="pair"))
    return sorted(gens, key=Generator.sort_key)


def build_t1t2(spec: LatticeSpec, max_transition: int = 3,
               include_mirror: bool = True) -> list[Generator]:
    return build_t1(spec, max_transition) + build_t2_paired(spec, max_transition, include_mirror)


def pauli_term_generator(axes: str, layout: QubitLayout) -> Generator:
    """Generator from a Pauli string of the compiled Hamiltonian."""
    nq = layout.qubits_per_mode
    modes = tuple(m for m in range(layout.n_modes)
                  if any(axes[m * nq + b] != "I" for b in range(nq)))
    if not modes:
        raise ValueError("identity string carries no rotation")
    mats = []
    for m in modes:
        mode_mat = np.eye(1, dtype=complex)
        for b in range(nq):
            mode_mat = np.kron(PAULI_MATS[axes[m * nq + b]], mode_mat)
        mats.append(mode_mat)
    return Generator(modes=modes, block=_local_kron(mats), label=axes, kind="pauli")


# ---------------------------------------------------------------------------
# block application
# ---------------------------------------------------------------------------

def apply_block(state: np.ndarray, n_modes: int, d: int, modes, matrix) -> np.ndarray:
    """Apply a local matrix over ``modes`` to a state vector or a stack of
    column vectors of the full space."""
    modes = tuple(modes)
    k = len(modes)
    is_matrix = state.ndim == 2
    cols = state.shape[1] if is_matrix else 1
    shape = [d] * n_modes + ([cols] if is_matrix else [])
    T = state.reshape(shape)
    src = [n_modes - 1 - m for m in reversed(modes)]  # axes so modes[0] is fastest
    T = np.moveaxis(T, src, range(k))
    lead = T.shape[:k]
    rest = T.shape[k:]
    T = matrix @ T.reshape(d**k, -1)
    T = np.moveaxis(T.reshape(lead + rest), range(k), src)
    return T.reshape(state.shape)


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

class Circuit:
    """Reference occupation state plus an ordered list of rotation generators."""

    def __init__(self, spec: LatticeSpec, reference, generators: list[Generator]):
        self.spec = spec
        self.reference = tuple(int(n) for n in reference)
        self.generators = list(generators)
        self._eig = []
        for g in self.generators:
            w, V = np.linalg.eigh(g.block)
            self._eig.append((g.modes, g.block, w, V))

    @property
    def n_params(self) -> int:
        return len(self.generators)

    def reference_state(self) -> np.ndarray:
        return fock.basis_state(self.spec, self.reference)

    def extended(self, extra: list[Generator]) -> "Circuit":
        return Circuit(self.spec, self.reference, self.generators + list(extra))

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        return theta

    def prepare(self, theta) -> np.ndarray:
        """Apply ``exp(-i theta_l X_l)`` in order to the reference state."""
        theta = self._check_theta(theta)
        N, d = self.spec.n_sites, self.spec.local_dim
        psi = self.reference_state()
        for i, (modes, _, w, V) in enumerate(self._eig):
            U = (V * np.exp(-1j * theta[i] * w)) @ V.conj().T
            psi = apply_block(psi, N, d, modes, U)
        return psi

    def prepare_with_derivatives(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """State and the matrix of analytic tangent vectors ``d_i |psi>``.

        The derivative of parameter ``i`` inserts ``-i X_i`` after the i-th
        exponential; all columns are pushed through the remaining gates in
        one pass per gate.
        """
        theta = self._check_theta(theta)
        N, d = self.spec.n_sites, self.spec.local_dim
        dim = self.spec.hilbert_dim
        psi = self.reference_state()
        D = np.zeros((dim, self.n_params), dtype=complex)
        for i, (modes, block, w, V) in enumerate(self._eig):
            U = (V * np.exp(-1j * theta[i] * w)) @ V.conj().T
            psi = apply_block(psi, N, d, modes, U)
            if i > 0:
                D[:, :i] = apply_block(D[:, :i], N, d, modes, U)
            D[:, i] = apply_block(psi, N, d, modes, -1j * block)  # X_i commutes with U_i
        return psi, D

    def manifest(self) -> dict:
        """Deterministic JSON-ready description of the circuit."""
        layout = QubitLayout.for_spec(self.spec)
        entries = []
        for i, g in enumerate(self.generators):
            if g.kind == "pauli":
                label = {"axes": g.label}
                pieces = [g.label]
            else:
                modes, sources, targets = g.label
                label = {"modes": list(modes), "sources": list(sources), "targets": list(targets)}
                pieces = [f"mode {m}: {s}->{t}" for m, s, t in zip(modes, sources, targets)]
            entries.append({
                "parameter": i,
                "kind": g.kind,
                "label": label,
                "shares": pieces,
                "pauli_terms": len(g.pauli_form(layout)),
            })
        return {"reference": list(self.reference), "generators": entries}

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True, separators=(",", ":"))


def prepare(circuit: Circuit, theta) -> np.ndarray:
    return circuit.prepare(theta)


def derivative(circuit: Circuit, theta, i: int) -> np.ndarray:
    """Analytic ``d/d theta_i`` of the prepared state."""
    if not (0 <= i < circuit.n_params):
        raise ValueError(f"parameter index {i} out of range")
    _, D = circuit.prepare_with_derivatives(theta)
    return D[:, i]


def initial_parameters(circuit: Circuit, seed=None, jitter: float = 0.01) -> np.ndarray:
    """All-zero start, or a seeded uniform jitter used to leave the
    stationary point that every real reference state sits on."""
    if seed is None:
        return np.zeros(circuit.n_params)
    rng = np.random.default_rng(seed)
    return rng.uniform(-jitter, jitter, circuit.n_params)


# ---------------------------------------------------------------------------
# resource counting
# ---------------------------------------------------------------------------

def rotation_axes(generators: list[Generator], layout: QubitLayout) -> frozenset[str]:
    """Distinct Pauli rotation axes across the compiled generators."""
    axes: set[str] = set()
    for g in generators:
        axes |= g.pauli_form(layout).axes_set
    return frozenset(axes)

def rotation_count(generators: list[Generator], layout: QubitLayout) -> int:
    return len(rotation_axes(generators, layout))

def single_mode_pauli_basis(d: int, max_transition: int = 3) -> frozenset[str]:
    """Distinct Pauli axes needed for any one restricted single-mode
    excitation term, on one mode's qubits."""
    layout = QubitLayout(n_modes=1, local_dim=d)
    axes: set[str] = set()
    for s in range(d):
        for t in range(s + 1, d):
            if t - s <= max_transition:
                axes |= compile_modes(_hop(d, s, t), layout, (0,)).axes_set
    return frozenset(axes)
