"""Inertia tensors and rigid-body mass properties.

The tensor is stored as its six independent components so symmetry holds by
construction. Packing order is fixed everywhere in the package:

    [Ixx, Ixy, Iyy, Ixz, Iyz, Izz]

All quantities are strict SI (kg, m, kg m^2). Unit conversion happens only at
I/O boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .geometry import as_vec3

__all__ = [
    "InertiaTensor",
    "PrincipalDecomposition",
    "MassProperties",
    "PointMassSet",
    "parallel_axis",
    "principal_decompose",
    "combine",
    "cuboid_inertia",
]

# vector index -> matrix position
_PACK = ((0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2))


@dataclass(frozen=True, eq=False)
class InertiaTensor:
    """Symmetric 3x3 inertia tensor stored as its packed 6-vector."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float).reshape(-1)
        if v.shape != (6,):
            raise ValueError(f"packed inertia must have 6 components, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("inertia components must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_vector(cls, packed) -> "InertiaTensor":
        return cls(np.asarray(packed, dtype=float))

    @classmethod
    def from_matrix(cls, matrix, tol: float = 1e-8) -> "InertiaTensor":
        """Build from a 3x3 matrix, rejecting asymmetry beyond `tol` (relative)."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"inertia matrix must be 3x3, got {m.shape}")
        scale = max(float(np.max(np.abs(m))), 1e-300)
        if np.max(np.abs(m - m.T)) > tol * scale:
            raise ValueError("inertia matrix is not symmetric")
        return cls(np.array([m[i][j] for i, j in _PACK]))

    @classmethod
    def from_diagonal(cls, diag) -> "InertiaTensor":
        d = as_vec3(diag, "diagonal")
        return cls(np.array([d[0], 0.0, d[1], 0.0, 0.0, d[2]]))

    @classmethod
    def zero(cls) -> "InertiaTensor":
        return cls(np.zeros(6))

    # -- views -------------------------------------------------------------

    @property
    def matrix(self) -> np.ndarray:
        ixx, ixy, iyy, ixz, iyz, izz = self.vector
        return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])

    @property
    def trace(self) -> float:
        return float(self.vector[0] + self.vector[2] + self.vector[5])

    def eigenvalues(self) -> np.ndarray:
        """Principal moments, ascending."""
        return np.linalg.eigvalsh(self.matrix)

    def is_positive_definite(self, tol: float = 0.0) -> bool:
        return bool(self.eigenvalues()[0] > tol)

    def apply(self, omega) -> np.ndarray:
        """Angular momentum I @ omega."""
        return self.matrix @ as_vec3(omega, "omega")

    def rotated(self, rotation) -> "InertiaTensor":
        """Tensor expressed in a frame rotated by R: R I R^T."""
        R = np.asarray(rotation, dtype=float)
        m = R @ self.matrix @ R.T
        return InertiaTensor.from_matrix(0.5 * (m + m.T))

    # -- arithmetic (additivity over parts with a shared reference point) --

    def __add__(self, other: "InertiaTensor") -> "InertiaTensor":
        return InertiaTensor(self.vector + other.vector)

    def __sub__(self, other: "InertiaTensor") -> "InertiaTensor":
        return InertiaTensor(self.vector - other.vector)

    def __neg__(self) -> "InertiaTensor":
        return InertiaTensor(-self.vector)

    def __mul__(self, scalar: float) -> "InertiaTensor":
        return InertiaTensor(self.vector * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "InertiaTensor":
        return InertiaTensor(self.vector / float(scalar))

    def __repr__(self) -> str:
        return f"InertiaTensor({np.array2string(self.vector, precision=6)})"


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Principal moments (ascending) and matching axes as matrix columns."""

    moments: np.ndarray
    axes: np.ndarray


def principal_decompose(tensor: InertiaTensor) -> PrincipalDecomposition:
    """Eigendecomposition with ascending moments and a right-handed axis set."""
    moments, axes = np.linalg.eigh(tensor.matrix)
    axes = np.array(axes)
    if np.linalg.det(axes) < 0.0:
        axes[:, 2] = -axes[:, 2]
    return PrincipalDecomposition(moments=moments, axes=axes)


def parallel_axis(mass: float, offset) -> InertiaTensor:
    """Inertia of `mass` concentrated at `offset` about the origin.

    m * (|d|^2 * delta_ij - d_i d_j); add to a barycentric tensor to shift the
    reference point away from the barycentre.
    """
    if mass < 0.0:
        raise ValueError("mass must be nonnegative")
    d = as_vec3(offset, "offset")
    m = mass * (float(d @ d) * np.eye(3) - np.outer(d, d))
    return InertiaTensor.from_matrix(m)


@dataclass(frozen=True)
class MassProperties:
    """Mass, barycentre position, and inertia about that barycentre."""

    mass: float
    cog: np.ndarray
    inertia: InertiaTensor

    def __post_init__(self):
        object.__setattr__(self, "cog", as_vec3(self.cog, "cog"))

    def about(self, point) -> InertiaTensor:
        """Inertia tensor about an arbitrary reference point."""
        return self.inertia + parallel_axis(self.mass, self.cog - as_vec3(point))


def combine(parts: Iterable[MassProperties]) -> MassProperties:
    """Rigidly join parts: total mass, combined barycentre, summed inertia."""
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one part")
    mass = sum(p.mass for p in parts)
    if mass <= 0.0:
        raise ValueError("combined mass must be positive")
    cog = sum(p.mass * p.cog for p in parts) / mass
    inertia = InertiaTensor.zero()
    for p in parts:
        inertia = inertia + p.inertia + parallel_axis(p.mass, p.cog - cog)
    return MassProperties(mass=mass, cog=cog, inertia=inertia)


@dataclass(frozen=True)
class PointMassSet:
    """Rigid collection of point masses at fixed positions."""

    masses: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float)
        if p.shape != (m.size, 3):
            raise ValueError(f"positions must be ({m.size}, 3), got {p.shape}")
        if np.any(m < 0.0) or m.sum() <= 0.0:
            raise ValueError("point masses must be nonnegative with positive total")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "positions", p)

    def translated(self, offset) -> "PointMassSet":
        return PointMassSet(self.masses, self.positions + as_vec3(offset))

    def rotated(self, rotation) -> "PointMassSet":
        R = np.asarray(rotation, dtype=float)
        return PointMassSet(self.masses, self.positions @ R.T)

    def mass_properties(self) -> MassProperties:
        """Total mass, barycentre, and inertia about the barycentre."""
        mass = float(self.masses.sum())
        cog = self.masses @ self.positions / mass
        inertia = InertiaTensor.zero()
        for m, x in zip(self.masses, self.positions):
            inertia = inertia + parallel_axis(float(m), x - cog)
        return MassProperties(mass=mass, cog=cog, inertia=inertia)


def cuboid_inertia(mass: float, size) -> InertiaTensor:
    """Solid uniform cuboid about its centre; `size` holds full edge lengths."""
    if mass <= 0.0:
        raise ValueError("mass must be positive")
    sx, sy, sz = as_vec3(size, "size")
    if min(sx, sy, sz) <= 0.0:
        raise ValueError("edge lengths must be positive")
    k = mass / 12.0
    return InertiaTensor.from_diagonal(
        [k * (sy * sy + sz * sz), k * (sx * sx + sz * sz), k * (sx * sx + sy * sy)]
    )
