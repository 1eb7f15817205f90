"""Frame-independent accuracy metrics for comparing inertia tensors.

All comparisons go through the eigenstructure: magnitudes through ascending
rank-matched eigenvalues, alignment through the geodesic distance between
principal frames with the sign ambiguity minimized away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateAxesError
from .inertia import InertiaTensor, principal_decompose

__all__ = [
    "AccuracyReport",
    "magnitude_error",
    "alignment_error",
    "principal_similarity",
    "condition_number",
    "compare",
    "DEGENERATE_AXES_TOL",
]

# below this relative moment gap the principal axes are numerically arbitrary
DEGENERATE_AXES_TOL = 1e-6

# the four proper (det +1) column sign assignments of a principal frame
_PROPER_SIGNS = (
    np.array([1.0, 1.0, 1.0]),
    np.array([1.0, -1.0, -1.0]),
    np.array([-1.0, 1.0, -1.0]),
    np.array([-1.0, -1.0, 1.0]),
)


@dataclass(frozen=True)
class AccuracyReport:
    """One estimate-vs-truth comparison.

    `kappa` and `min_delta_sigma` describe the ground-truth body (how hard
    the problem is); `axes_degenerate` marks psi as meaningless because the
    truth or the estimate has (near-)repeated moments.
    """

    epsilon: float
    psi: float
    min_delta_sigma: float
    kappa: float
    axes_degenerate: bool = False

    def __post_init__(self):
        if not (self.epsilon >= 0.0):
            raise ValueError("epsilon must be >= 0")
        if not (0.0 <= self.psi <= math.pi):
            raise ValueError("psi must be in [0, pi]")
        if not (0.0 <= self.min_delta_sigma <= 1.0):
            raise ValueError("min_delta_sigma must be in [0, 1]")
        if not (self.kappa >= 1.0):
            raise ValueError("kappa must be >= 1")


def _as_tensor(value, name: str) -> InertiaTensor:
    if isinstance(value, InertiaTensor):
        return value
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return InertiaTensor.from_matrix(arr)


def magnitude_error(i_true, i_est) -> float:
    """Relative inertial magnitude error over rank-matched principal moments.

    sqrt(sum((lam_est - lam_true)^2) / sum(lam_true^2)) with both triples
    sorted ascending; invariant to any common rotation and exactly |k - 1|
    for a uniformly scaled estimate k * I_true.
    """
    t = _as_tensor(i_true, "i_true")
    e = _as_tensor(i_est, "i_est")
    if not t.is_positive_definite():
        raise DataError("ground-truth tensor must be positive definite")
    lam_t = t.eigenvalues()
    lam_e = e.eigenvalues()
    return float(np.sqrt(np.sum((lam_e - lam_t) ** 2) / np.sum(lam_t**2)))


def _relative_gaps(moments: np.ndarray) -> float:
    scale = max(float(np.abs(moments).max()), 1e-300)
    gaps = [abs(moments[i] - moments[j]) for i in range(3) for j in range(i + 1, 3)]
    return min(gaps) / scale


def _min_geodesic(axes_true: np.ndarray, axes_est: np.ndarray) -> float:
    best = math.pi
    for signs in _PROPER_SIGNS:
        rel = axes_true.T @ (axes_est * signs)
        c = (np.trace(rel) - 1.0) / 2.0
        best = min(best, math.acos(min(1.0, max(-1.0, c))))
    return best


def alignment_error(i_true, i_est) -> float:
    """Geodesic angle between the principal frames, in radians.

    Ascending eigenvalue order pins the axis pairing; the remaining proper
    sign ambiguity (4 assignments) is minimized over, so a perfect estimate
    can never report pi by convention mismatch.
    """
    t = _as_tensor(i_true, "i_true")
    e = _as_tensor(i_est, "i_est")
    dec_t = principal_decompose(t)
    dec_e = principal_decompose(e)
    for name, moments in (("ground truth", dec_t.moments), ("estimate", dec_e.moments)):
        if _relative_gaps(moments) < DEGENERATE_AXES_TOL:
            raise DegenerateAxesError(
                f"{name} has (near-)repeated principal moments; "
                "its principal axes are not unique"
            )
    return _min_geodesic(dec_t.axes, dec_e.axes)


def principal_similarity(i) -> float:
    """Minimum relative distance between principal moments, in [0, 1].

    min over pairs of |lam_i - lam_j| / max(lam_i, lam_j); zero for a body
    with a repeated moment. Expects a positive-definite tensor.
    """
    lam = _as_tensor(i, "inertia").eigenvalues()
    return float(
        min(
            abs(lam[i] - lam[j]) / max(lam[i], lam[j])
            for i in range(3)
            for j in range(i + 1, 3)
        )
    )


def condition_number(i) -> float:
    """Ratio of largest to smallest principal moment."""
    t = _as_tensor(i, "inertia")
    if not t.is_positive_definite():
        raise DataError("condition number needs a positive-definite tensor")
    lam = t.eigenvalues()
    return float(lam[-1] / lam[0])


def compare(i_true, i_est) -> AccuracyReport:
    """Assemble the full report; degenerate axes flag psi instead of raising."""
    t = _as_tensor(i_true, "i_true")
    e = _as_tensor(i_est, "i_est")
    epsilon = magnitude_error(t, e)
    try:
        psi = alignment_error(t, e)
        degenerate = False
    except DegenerateAxesError:
        psi = _min_geodesic(principal_decompose(t).axes, principal_decompose(e).axes)
        degenerate = True
    return AccuracyReport(
        epsilon=epsilon,
        psi=psi,
        min_delta_sigma=principal_similarity(t),
        kappa=condition_number(t),
        axes_degenerate=degenerate,
    )
