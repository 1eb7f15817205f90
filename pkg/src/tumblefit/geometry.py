"""Small vector, rotation and quaternion helpers shared across the package.

Vectors are plain float64 numpy arrays of shape (3,); rotations are 3x3
orthonormal matrices with determinant +1; quaternions are [w, x, y, z]
(Hamilton convention, body-to-reference when used as attitude).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_vec3",
    "as_unit_vec3",
    "cross_matrix",
    "rotation_about",
    "random_rotation",
    "is_rotation",
    "quat_multiply",
    "quat_to_matrix",
    "rotate_vectors",
]


def as_vec3(value, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 array of shape (3,)."""
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite, got {v}")
    return v


def as_unit_vec3(value, name: str = "axis") -> np.ndarray:
    v = as_vec3(value, name)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError(f"{name} must be nonzero")
    return v / n


def cross_matrix(v) -> np.ndarray:
    """Skew-symmetric matrix [v]x with [v]x @ u == cross(v, u)."""
    x, y, z = as_vec3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of `angle` radians about `axis`."""
    n = as_unit_vec3(axis)
    k = cross_matrix(n)
    # Rodrigues formula
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation matrix drawn uniformly from SO(3) (via a random unit quaternion)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_matrix(q)


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    return bool(np.linalg.det(R) > 0.0)


def quat_multiply(q, r) -> np.ndarray:
    """Hamilton product q ⊗ r for [w, x, y, z] quaternions."""
    qw, qx, qy, qz = q
    rw, rx, ry, rz = r
    return np.array(
        [
            qw * rw - qx * rx - qy * ry - qz * rz,
            qw * rx + qx * rw + qy * rz - qz * ry,
            qw * ry - qx * rz + qy * rw + qz * rx,
            qw * rz + qx * ry - qy * rx + qz * rw,
        ]
    )


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion [w, x, y, z]."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotate_vectors(quats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Rotate each row of `vecs` (N,3) by the matching quaternion row (N,4).

    Uses v + 2*qv x (qv x v + w*v), which avoids building N rotation matrices.
    """
    q = np.asarray(quats, dtype=float)
    v = np.asarray(vecs, dtype=float)
    w = q[:, :1]
    qv = q[:, 1:]
    t = np.cross(qv, np.cross(qv, v) + w * v)
    return v + 2.0 * t
