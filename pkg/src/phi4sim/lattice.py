"""Spatial lattice, dual momentum lattice, and free-theory constants.

All quantities are expressed in lattice units. Momenta are handled through
their integer mode index ``j`` (the physical value ``2*pi*j/L`` is computed
on demand), which keeps dictionary keys and reflection arithmetic exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DENSE_DIM_GUARD = 2**20


@dataclass(frozen=True)
class LatticeSpec:
    """Physical and truncation parameters of one simulated theory instance.

    Parameters
    ----------
    n_sites : int
        Number of spatial sites ``N`` (equals the number of momentum modes).
    spacing : float
        Lattice spacing ``a``.
    bare_mass : float
        Bare mass ``m0`` of the free theory.
    coupling : float
        Bare quartic coupling ``lambda0``; zero gives the free theory.
    local_dim : int
        Number of retained occupation levels per momentum mode
        (occupations ``0 .. local_dim - 1``).
    """

    n_sites: int
    spacing: float = 1.0
    bare_mass: float = 1.0
    coupling: float = 0.0
    local_dim: int = 4
    length: float = field(init=False)

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be a positive integer")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.bare_mass <= 0:
            raise ValueError("bare_mass must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.local_dim < 2:
            raise ValueError("local_dim must be at least 2")
        if self.local_dim**self.n_sites > DENSE_DIM_GUARD:
            raise ValueError(
                f"Hilbert dimension {self.local_dim}**{self.n_sites} exceeds "
                f"the dense-solver guard {DENSE_DIM_GUARD}"
            )
        object.__setattr__(self, "length", self.n_sites * self.spacing)

    @property
    def hilbert_dim(self) -> int:
        return self.local_dim**self.n_sites

    def replace(self, **kwargs) -> "LatticeSpec":
        params = dict(
            n_sites=self.n_sites,
            spacing=self.spacing,
            bare_mass=self.bare_mass,
            coupling=self.coupling,
            local_dim=self.local_dim,
        )
        params.update(kwargs)
        return LatticeSpec(**params)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "spacing": self.spacing,
            "bare_mass": self.bare_mass,
            "coupling": self.coupling,
            "local_dim": self.local_dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeSpec":
        known = {"n_sites", "spacing", "bare_mass", "coupling", "local_dim"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown lattice keys: {sorted(unknown)}")
        missing = {"n_sites"} - set(data)
        if missing:
            raise ValueError(f"missing lattice keys: {sorted(missing)}")
        return cls(**data)


def reflection_partner(spec: LatticeSpec, mode: int) -> int:
    """Mode index of the reflected momentum ``-k`` of mode ``mode``."""
    return (spec.n_sites - mode) % spec.n_sites


def momentum_value(spec: LatticeSpec, mode: int) -> float:
    """Physical momentum ``2*pi*j/L`` of mode index ``j``."""
    return 2.0 * math.pi * mode / spec.length


def momentum_modes(spec: LatticeSpec) -> list[float]:
    """Momenta of the dual lattice, ``k_j = 2*pi*j/L`` for ``j = 0..N-1``."""
    return [momentum_value(spec, j) for j in range(spec.n_sites)]


def dispersion(spec: LatticeSpec, k: float) -> float:
    """Single-particle energy ``sqrt(m0^2 + (4/a^2) sin^2(a k / 2))``."""
    a = spec.spacing
    return math.sqrt(spec.bare_mass**2 + (4.0 / a**2) * math.sin(a * k / 2.0) ** 2)


def mode_energies(spec: LatticeSpec) -> list[float]:
    """Dispersion evaluated on every dual-lattice mode, in index order."""
    return [dispersion(spec, k) for k in momentum_modes(spec)]


def vacuum_energy(spec: LatticeSpec) -> float:
    """Free vacuum energy ``E0 = sum_k omega(k) / 2``."""
    return 0.5 * sum(mode_energies(spec))
