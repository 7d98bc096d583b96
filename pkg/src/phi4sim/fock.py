"""Truncated Fock space over the momentum modes: basis indexing, ladder and
field operators, states, and expectation values.

Basis convention: an occupation vector ``(n_0, ..., n_{N-1})`` maps to the
mixed-radix integer ``sum_j n_j * d**j`` (mode 0 least significant). All
operators are scipy CSR matrices over this basis; entries below
``ENTRY_DROP_TOL`` are dropped at construction so sparsity stays canonical.

Ladder operators are unit normalized, ``[a, a^dag] = 1`` away from the top
level; combined with the ``1/L`` weight on the number term of the free
Hamiltonian this reproduces the reference one-particle energies (see
``hamiltonian``).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lattice import LatticeSpec, mode_energies, momentum_value, reflection_partner

ENTRY_DROP_TOL = 1e-14
HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-10


# ---------------------------------------------------------------------------
# basis indexing
# ---------------------------------------------------------------------------

def index(spec: LatticeSpec, occupations) -> int:
    """Mixed-radix index of an occupation vector (mode 0 least significant)."""
    occ = list(occupations)
    if len(occ) != spec.n_sites:
        raise ValueError(f"expected {spec.n_sites} occupations, got {len(occ)}")
    d = spec.local_dim
    for n in occ:
        if not (0 <= int(n) < d):
            raise ValueError(f"occupation {n} outside 0..{d - 1}")
    return sum(int(n) * d**j for j, n in enumerate(occ))

def unindex(spec: LatticeSpec, i: int) -> tuple[int, ...]:
    """Occupation vector of basis index ``i``; inverse of :func:`index`."""
    if not (0 <= i < spec.hilbert_dim):
        raise ValueError(f"index {i} outside Fock space of dimension {spec.hilbert_dim}")
    d = spec.local_dim
    occ = []
    for _ in range(spec.n_sites):
        occ.append(i % d)
        i //= d
    return tuple(occ)

def all_occupations(spec: LatticeSpec) -> np.ndarray:
    """Array of shape (dim, N) whose row i is unindex(i)."""
    dims = [spec.local_dim] * spec.n_sites
    # unravel in C order gives the *last* axis fastest; reverse to mode order
    grid = np.unravel_index(np.arange(spec.hilbert_dim), dims)
    return np.stack(grid[::-1], axis=1)

def occupation_label(occ) -> str:
    return "|" + ",".join(str(int(n)) for n in occ) + ">"

def basis_state(spec: LatticeSpec, occupations) -> np.ndarray:
    """Statevector of the occupation basis state."""
    psi = np.zeros(spec.hilbert_dim, dtype=complex)
    psi[index(spec, occupations)] = 1.0
    return psi

def total_momentum_index(spec: LatticeSpec) -> np.ndarray:
    """Total momentum mode index ``sum_j j*n_j mod N`` for every basis state."""
    occ = all_occupations(spec)
    return occ @ np.arange(spec.n_sites) % spec.n_sites


# ---------------------------------------------------------------------------
# operator helpers
# ---------------------------------------------------------------------------

def clean(op: sp.spmatrix, tol: float = ENTRY_DROP_TOL) -> sp.csr_matrix:
    """Drop entries below ``tol`` in magnitude; canonical CSR output."""
    op = sp.csr_matrix(op)
    op.data[np.abs(op.data) < tol] = 0.0
    op.eliminate_zeros()
    op.sort_indices()
    return op

def is_hermitian(op: sp.spmatrix, tol: float = HERMITICITY_TOL) -> bool:
    diff = op - op.getH()
    return diff.nnz == 0 or np.abs(diff.data).max() < tol

def embed_mode_operator(spec: LatticeSpec, op, mode: int) -> sp.csr_matrix:
    """Embed a single-mode ``d x d`` matrix into the full space by identity."""
    d = spec.local_dim
    left = sp.identity(d ** (spec.n_sites - 1 - mode), format="csr")
    right = sp.identity(d**mode, format="csr")
    return clean(sp.kron(left, sp.kron(sp.csr_matrix(op), right)))

def ladder_single(d: int, kind: str) -> sp.csr_matrix:
    """Single-mode truncated ladder matrix: ``raise`` gives sum_s sqrt(s+1)|s+1><s|."""
    vals = np.sqrt(np.arange(1, d))
    if kind == "raise":
        return sp.csr_matrix((vals, (np.arange(1, d), np.arange(d - 1))), shape=(d, d))
    if kind == "lower":
        return sp.csr_matrix((vals, (np.arange(d - 1), np.arange(1, d))), shape=(d, d))
    raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")

def ladder(spec: LatticeSpec, mode: int, kind: str) -> sp.csr_matrix:
    """Creation/annihilation operator of one momentum mode on the full space."""
    if not (0 <= mode < spec.n_sites):
        raise ValueError(f"mode {mode} outside 0..{spec.n_sites - 1}")
    return embed_mode_operator(spec, ladder_single(spec.local_dim, kind), mode)

def number_operator(spec: LatticeSpec, mode: int) -> sp.csr_matrix:
    """Diagonal occupation-number operator of one mode."""
    if not (0 <= mode < spec.n_sites):
        raise ValueError(f"mode {mode} outside 0..{spec.n_sites - 1}")
    return embed_mode_operator(spec, sp.diags(np.arange(spec.local_dim, dtype=float)), mode)

def field_mode(spec: LatticeSpec, mode: int) -> sp.csr_matrix:
    """Momentum-space field operator ``phi_k = (a_k + a^dag_{-k}) / sqrt(2 omega_k)``."""
    if not (0 <= mode < spec.n_sites):
        raise ValueError(f"mode {mode} outside 0..{spec.n_sites - 1}")
    om = mode_energies(spec)[mode]
    partner = reflection_partner(spec, mode)
    op = ladder(spec, mode, "lower") + ladder(spec, partner, "raise")
    return clean(op / np.sqrt(2.0 * om))

def _site_expansion(spec: LatticeSpec, x: float, momentum: bool) -> sp.csr_matrix:
    if abs(x / spec.spacing - round(x / spec.spacing)) > 1e-9:
        raise ValueError(f"site {x} is not a lattice multiple of a={spec.spacing}")
    oms = mode_energies(spec)
    L = spec.length
    total = None
    for j in range(spec.n_sites):
        k = momentum_value(spec, j)
        partner = reflection_partner(spec, j)
        if momentum:
            piece = -1j * np.sqrt(oms[j] / 2.0) * (
                ladder(spec, j, "lower") - ladder(spec, partner, "raise"))
        else:
            piece = (ladder(spec, j, "lower") + ladder(spec, partner, "raise")) / np.sqrt(2.0 * oms[j])
        term = np.exp(1j * k * x) * piece
        total = term if total is None else total + term
    # 1/sqrt(L) normalization reproduces the free two-point function
    # G0(x-y) = (1/L) sum_k exp(ik(x-y)) / (2 omega_k) with unit-normalized ladders.
    return clean(total / np.sqrt(L))

def position_field(spec: LatticeSpec, x: float) -> sp.csr_matrix:
    """Field operator at lattice site ``x``; Hermitian by the k/-k pairing."""
    return _site_expansion(spec, x, momentum=False)

def position_momentum(spec: LatticeSpec, x: float) -> sp.csr_matrix:
    """Conjugate field momentum ``pi(x)``; satisfies ``[phi(x), pi(y)] = i delta_xy / a``
    on the sub-block with all occupations below the cap."""
    return _site_expansion(spec, x, momentum=True)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def check_normalized(state: np.ndarray, tol: float = NORM_TOL) -> None:
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state norm {nrm} deviates from 1 beyond {tol}")

def apply(op, state: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with a dimension guard."""
    if op.shape[1] != state.shape[0]:
        raise ValueError(f"dimension mismatch: operator {op.shape}, state {state.shape}")
    return op @ state

def expectation(op, state: np.ndarray) -> complex:
    """``<psi|O|psi>``; for Hermitian ``O`` the imaginary part is numerical noise."""
    return complex(np.vdot(state, apply(op, state)))

def two_point(spec: LatticeSpec, state: np.ndarray, x: float, y: float) -> complex:
    """Equal-time two-point function ``<psi| phi(x) phi(y) |psi>``."""
    check_normalized(state)
    return complex(np.vdot(state, position_field(spec, x) @ (position_field(spec, y) @ state)))

def free_two_point(spec: LatticeSpec, separation: float) -> complex:
    """Independent lattice sum ``G0(x-y) = (1/L) sum_k exp(ik(x-y)) / (2 omega_k)``."""
    oms = mode_energies(spec)
    ks = [momentum_value(spec, j) for j in range(spec.n_sites)]
    return sum(np.exp(1j * k * separation) / (2.0 * om) for k, om in zip(ks, oms)) / spec.length


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def state_to_json(state: np.ndarray) -> list[list[float]]:
    """Statevector as a JSON-ready list of (re, im) pairs."""
    return [[float(z.real), float(z.imag)] for z in state]

def state_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])

def operator_to_coo_text(op: sp.spmatrix) -> str:
    """Coordinate-list text dump: one ``row col re im`` line per entry."""
    coo = sp.coo_matrix(op)
    lines = [
        f"{r} {c} {v.real!r} {v.imag!r}"
        for r, c, v in sorted(zip(coo.row, coo.col, coo.data), key=lambda t: (t[0], t[1]))
    ]
    return "\n".join(lines) + "\n"
