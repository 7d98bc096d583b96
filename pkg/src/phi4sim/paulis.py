"""Compilation of truncated bosonic operators into Pauli sums, plus the
field-basis operators and the encoding-error scans.

Qubit register convention: mode ``j`` occupies qubits ``j*n_q .. (j+1)*n_q-1``
with the level's least significant bit on qubit ``j*n_q``; qubit ``q`` carries
significance ``2**q`` in the computational-basis index, so for ``d = 2**n_q``
the qubit index coincides with the mixed-radix Fock index. Axes strings are
printed with qubit 0 leftmost.

The expansion goes through the matrix-unit basis: each nonzero entry
``(i, j)`` factors over qubits into the four one-qubit units

    2 E_00 = I + Z,  2 E_01 = X + iY,  2 E_10 = X - iY,  2 E_11 = I - Z,

whose tensor products are accumulated coefficient by coefficient. This keeps
term counts identical to the counting argument behind the sparsity bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import LatticeSpec

COEFF_DROP_TOL = 1e-12

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
AXES = "IXYZ"


@dataclass(frozen=True)
class QubitLayout:
    """Mapping of the truncated modes onto a qubit register."""

    n_modes: int
    local_dim: int

    @property
    def qubits_per_mode(self) -> int:
        return max(1, math.ceil(math.log2(self.local_dim)))

    @property
    def n_qubits(self) -> int:
        return self.n_modes * self.qubits_per_mode

    @property
    def padded_dim(self) -> int:
        return 2**self.qubits_per_mode

    @classmethod
    def for_spec(cls, spec: LatticeSpec) -> "QubitLayout":
        return cls(n_modes=spec.n_sites, local_dim=spec.local_dim)


class PauliSum:
    """Canonically merged weighted sum of Pauli strings.

    Terms live in a dict keyed by the axes string; coefficients below
    ``COEFF_DROP_TOL`` are dropped on construction and after arithmetic.
    """

    def __init__(self, n_qubits: int, terms=None):
        self.n_qubits = n_qubits
        self._terms: dict[str, complex] = {}
        if terms:
            for axes, coeff in (terms.items() if isinstance(terms, dict) else terms):
                self.add(axes, coeff)

    def add(self, axes: str, coeff: complex) -> None:
        if len(axes) != self.n_qubits:
            raise ValueError(f"axes length {len(axes)} != register size {self.n_qubits}")
        new = self._terms.get(axes, 0.0) + coeff
        if abs(new) < COEFF_DROP_TOL:
            self._terms.pop(axes, None)
        else:
            self._terms[axes] = new

    @property
    def terms(self) -> list[tuple[str, complex]]:
        return sorted(self._terms.items())

    @property
    def axes_set(self) -> frozenset[str]:
        return frozenset(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("register size mismatch")
        out = PauliSum(self.n_qubits, dict(self._terms))
        for axes, coeff in other._terms.items():
            out.add(axes, coeff)
        return out

    def scaled(self, factor: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, {a: c * factor for a, c in self._terms.items()})

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) < tol for c in self._terms.values())

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for axes, coeff in self._terms.items():
            out += coeff * pauli_matrix(axes)
        return out

    def serialize(self) -> str:
        """One ``coeff_re coeff_im axes`` line per term."""
        return "\n".join(f"{c.real!r} {c.imag!r} {a}" for a, c in self.terms) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "PauliSum":
        terms = []
        for line in text.strip().splitlines():
            re_s, im_s, axes = line.split()
            terms.append((axes, complex(float(re_s), float(im_s))))
        if not terms:
            raise ValueError("empty Pauli sum text")
        return cls(len(terms[0][0]), terms)


def pauli_matrix(axes: str) -> np.ndarray:
    """Dense matrix of a Pauli string; qubit 0 (leftmost char) least significant."""
    out = np.eye(1, dtype=complex)
    for ch in axes:
        out = np.kron(PAULI_MATS[ch], out)
    return out


# ---------------------------------------------------------------------------
# matrix-unit expansion
# ---------------------------------------------------------------------------

def _unit_options(bi: int, bj: int):
    # (axis code, coefficient) pairs of the one-qubit matrix unit E_{bi bj}
    if bi == bj:
        return ((0, 0.5), (3, 0.5 if bi == 0 else -0.5))
    return ((1, 0.5), (2, 0.5j if bj == 1 else -0.5j))


def compile_matrix(matrix, n_qubits: int) -> PauliSum:
    """Exact Pauli expansion of a ``2**n_qubits`` square matrix.

    Entrywise matrix-unit route: every nonzero entry contributes
    ``2**n_qubits`` weighted strings which are merged in an accumulator
    indexed by base-4 string codes.
    """
    dim = 2**n_qubits
    mat = sp.coo_matrix(matrix)
    if mat.shape != (dim, dim):
        raise ValueError(f"matrix shape {mat.shape} incompatible with {n_qubits} qubits")
    acc = np.zeros(4**n_qubits, dtype=complex)
    for i, j, v in zip(mat.row, mat.col, mat.data):
        codes = np.zeros(1, dtype=np.int64)
        coefs = np.ones(1, dtype=complex)
        for q in range(n_qubits):
            opts = _unit_options((int(i) >> q) & 1, (int(j) >> q) & 1)
            opt_codes = np.array([o[0] for o in opts], dtype=np.int64) * 4**q
            opt_coefs = np.array([o[1] for o in opts], dtype=complex)
            codes = (codes[:, None] + opt_codes[None, :]).ravel()
            coefs = (coefs[:, None] * opt_coefs[None, :]).ravel()
        acc[codes] += v * coefs
    terms = []
    for code in np.nonzero(np.abs(acc) >= COEFF_DROP_TOL)[0]:
        axes = "".join(AXES[(int(code) >> (2 * q)) & 3] for q in range(n_qubits))
        terms.append((axes, complex(acc[code])))
    return PauliSum(n_qubits, terms)


def _pad_levels(matrix, d: int, n_modes: int, padded: int) -> sp.coo_matrix:
    """Re-index a ``d**n_modes`` matrix into the ``padded**n_modes`` qubit space."""
    mat = sp.coo_matrix(matrix)
    if d == padded:
        return mat

    def remap(idx):
        out = np.zeros_like(idx)
        scale = 1
        rem = idx.copy()
        for _ in range(n_modes):
            out += (rem % d) * scale
            rem //= d
            scale *= padded
        return out

    rows = remap(mat.row.astype(np.int64))
    cols = remap(mat.col.astype(np.int64))
    dim = padded**n_modes
    return sp.coo_matrix((mat.data, (rows, cols)), shape=(dim, dim))


def compile_modes(matrix, layout: QubitLayout, modes) -> PauliSum:
    """Compile an operator block acting on at most two modes.

    ``matrix`` is the local block over ``modes`` (ascending), with the first
    listed mode least significant, dimension ``local_dim**len(modes)``. The
    result lives on the full register with identity axes elsewhere.
    """
    modes = tuple(modes)
    if len(modes) > 2:
        raise ValueError(f"compile supports at most 2 modes, got {len(modes)}")
    if sorted(set(modes)) != sorted(modes):
        raise ValueError("modes must be distinct")
    nq = layout.qubits_per_mode
    local = _pad_levels(matrix, layout.local_dim, len(modes), layout.padded_dim)
    ps_local = compile_matrix(local, nq * len(modes))
    out = PauliSum(layout.n_qubits)
    for axes, coeff in ps_local.terms:
        full = ["I"] * layout.n_qubits
        for r, m in enumerate(modes):
            for b in range(nq):
                full[m * nq + b] = axes[r * nq + b]
        out.add("".join(full), coeff)
    return out


def unreachable_levels_silent(ps: PauliSum, layout: QubitLayout, d: int) -> bool:
    """Check that a compiled sum never connects reachable to padding levels."""
    if d == layout.padded_dim:
        return True
    mat = ps.to_matrix()
    nq = layout.qubits_per_mode
    padded = layout.padded_dim
    dim = padded**layout.n_modes
    idx = np.arange(dim)
    reachable = np.ones(dim, dtype=bool)
    rem = idx.copy()
    for _ in range(layout.n_modes):
        reachable &= (rem % padded) < d
        rem //= padded
    cross = mat[np.ix_(reachable, ~reachable)]
    return bool(np.abs(cross).max(initial=0.0) < 1e-12)


def compile_hamiltonian(spec: LatticeSpec, layout: QubitLayout | None = None) -> PauliSum:
    """Exact Pauli sum of the full Hamiltonian ``H0 + H_int``.

    Dense-entry route; guarded to the small local dimensions where it is
    exact and fast.
    """
    from . import hamiltonian as ham

    if spec.local_dim > 4:
        raise ValueError("dense compile path supports local_dim <= 4")
    layout = layout or QubitLayout.for_spec(spec)
    H = ham.build_full(spec)
    padded = _pad_levels(H, spec.local_dim, spec.n_sites, layout.padded_dim)
    return compile_matrix(padded, layout.n_qubits)


def hamiltonian_term_bound(spec: LatticeSpec) -> float:
    """Reference counting bound ``8 N^3 (d + log2 d)`` on compiled H terms."""
    return 8.0 * spec.n_sites**3 * (spec.local_dim + math.log2(spec.local_dim))


# ---------------------------------------------------------------------------
# field-basis operators and encoding-error scans
# ---------------------------------------------------------------------------

def field_basis_ops(n_q: int, phi_max: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Field-basis ``(grid, phi, pi)`` on ``2**n_q`` points.

    ``phi`` is diagonal with equally spaced eigenvalues of spacing
    ``2*phi_max/2**n_q`` centered on zero (binary Z-weights); ``pi`` is its
    conjugate under the centered discrete Fourier transform, carrying the
    dual grid spacing ``2*pi/(2**n_q * dphi)``.
    """
    if n_q < 1:
        raise ValueError("n_q must be at least 1")
    if phi_max <= 0:
        raise ValueError("phi_max must be positive")
    M = 2**n_q
    dphi = 2.0 * phi_max / M
    center = (M - 1) / 2.0
    grid = (np.arange(M) - center) * dphi
    dp = 2.0 * np.pi / (M * dphi)
    pgrid = (np.arange(M) - center) * dp
    F = np.exp(-1j * np.outer(pgrid, grid)) / np.sqrt(M)  # position -> momentum
    phi = np.diag(grid).astype(complex)
    pi = F.conj().T @ np.diag(pgrid).astype(complex) @ F
    return grid, phi, pi


def default_window(n_q: int) -> float:
    """Balanced field window: wide enough for the Gaussian tail, fine enough
    for the derivative; both error sources then shrink with ``n_q``."""
    return math.sqrt(2.0 * math.log(2.0) * n_q) + 1.0


def commutator_error_scan(n_q_values, phi_max_rule=default_window) -> list[tuple[int, float]]:
    """Deviation of ``<g|[phi, pi]|g>`` from ``i`` on the discretized Gaussian
    ground profile, per qubit count."""
    rows = []
    for n_q in n_q_values:
        grid, phi, pi = field_basis_ops(n_q, phi_max_rule(n_q))
        g = np.exp(-grid**2 / 2.0)
        g = g / np.linalg.norm(g)
        comm = g.conj() @ ((phi @ pi - pi @ phi) @ g)
        rows.append((int(n_q), float(abs(comm - 1j))))
    if not rows:
        raise ValueError("empty scan range")
    return rows


def gaussian_truncation_scan(n_q_values, resolution: float = 0.5) -> list[tuple[int, float]]:
    """Probability mass of the continuum Gaussian vacuum outside the grid
    window, at fixed resolution: the window doubles with each added qubit,
    so the log-mass falls double-exponentially.

    Returns ``(n_q, log_eps)`` rows; the log is returned directly because the
    tail underflows double precision within a few qubits.
    """
    from scipy.special import erfcx

    rows = []
    for n_q in n_q_values:
        phi_max = resolution * 2**n_q / 2.0
        # |g(phi)|^2 = exp(-phi^2)/sqrt(pi); mass outside [-phi_max, phi_max] = erfc(phi_max)
        log_eps = math.log(erfcx(phi_max)) - phi_max**2
        rows.append((int(n_q), float(log_eps)))
    if not rows:
        raise ValueError("empty scan range")
    return rows


def log_linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares line fit returning ``(slope, intercept, r_squared)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(res[0]) / ss_tot if len(res) and ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2
