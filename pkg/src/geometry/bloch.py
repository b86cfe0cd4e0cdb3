"""
Bloch-sphere primitives.

Vectors travel through the package as numpy arrays of shape (3,);
`BlochVector` is the validated record form used at the I/O boundary.
Polarization mapping: |V> = +z, |D> = +x, |L> = +y.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import DegenerateGeometryError, InvalidArgumentError

UNIT_TOL = 1e-9
ZERO_TOL = 1e-12

VectorLike = Union["BlochVector", Sequence[float], np.ndarray]


@dataclass(frozen=True)
class BlochVector:
    """Real 3-vector; a state when |v| <= 1, a measurement axis when |v| = 1"""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "BlochVector":
        x, y, z = (float(v) for v in values)
        return cls(x, y, z)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def is_state(self, tol: float = UNIT_TOL) -> bool:
        return self.norm <= 1.0 + tol

    def is_axis(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def to_dict(self):
        return {"x": self.x, "y": self.y, "z": self.z}


def as_vector(v: VectorLike) -> np.ndarray:
    """Coerce a BlochVector / sequence to a float array of shape (3,)"""
    if isinstance(v, BlochVector):
        return v.as_array()
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise InvalidArgumentError(f"Bloch vector must have 3 components, got shape {arr.shape}")
    return arr


def normalize(v: VectorLike) -> np.ndarray:
    arr = as_vector(v)
    n = np.linalg.norm(arr)
    if n < ZERO_TOL:
        raise DegenerateGeometryError("Cannot normalize a zero vector")
    return arr / n


def _require_unit(axis: np.ndarray, what: str = "axis"):
    if abs(np.linalg.norm(axis) - 1.0) > UNIT_TOL:
        raise InvalidArgumentError(f"Rotation {what} must be unit norm, |{what}| = {np.linalg.norm(axis):.12f}")


def rodrigues_rotate(v: VectorLike, axis: VectorLike, angle: float) -> np.ndarray:
    """Right-handed rotation of v about a unit axis"""
    v = as_vector(v)
    k = as_vector(axis)
    _require_unit(k)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(k, v) * s + k * np.dot(k, v) * (1.0 - c)


def rodrigues_matrix(axis: VectorLike, angle: float) -> np.ndarray:
    k = as_vector(axis)
    _require_unit(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def angle_between(u: VectorLike, v: VectorLike) -> float:
    """Angle between two non-zero vectors, stable near 0 and pi"""
    u, v = as_vector(u), as_vector(v)
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def rotate_toward(v: VectorLike, target: VectorLike, angle: float) -> np.ndarray:
    """
    Rotate unit v by `angle` along the great circle toward unit `target`.

    The step is clipped at the separation, so the result never overshoots.
    """
    v, t = as_vector(v), as_vector(target)
    if angle < 0:
        raise InvalidArgumentError(f"Rotation angle must be non-negative, got {angle}")
    _require_unit(v, "vector")
    _require_unit(t, "target")

    separation = angle_between(v, t)
    if separation < ZERO_TOL or angle == 0.0:
        return v.copy()

    cross = np.cross(v, t)
    if np.linalg.norm(cross) < ZERO_TOL:
        raise DegenerateGeometryError("Great circle undefined: vector is antiparallel to target")

    axis = cross / np.linalg.norm(cross)
    return rodrigues_rotate(v, axis, min(angle, separation))


def max_eigen_sum(axes: Sequence[VectorLike], coefficients: Sequence[float]) -> Tuple[float, Optional[np.ndarray]]:
    """
    Largest eigenvalue of sum_j c_j (b_j . sigma) and its eigenstate.

    The operator's eigenvalues are +-|sum_j c_j b_j|, so the value is the norm
    of the weighted sum and the state is its direction (None when it vanishes).
    """
    if len(axes) != len(coefficients):
        raise InvalidArgumentError("axes and coefficients differ in length")
    if len(axes) == 0:
        return 0.0, None
    total = np.sum([c * as_vector(b) for b, c in zip(axes, coefficients)], axis=0)
    value = float(np.linalg.norm(total))
    if value < ZERO_TOL:
        return 0.0, None
    return value, total / value


def bloch_to_ket(v: VectorLike) -> np.ndarray:
    """Pure qubit ket in the (|V>, |H>) basis for a unit Bloch vector"""
    x, y, z = normalize(v)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)])


def deg2rad(degrees: float) -> float:
    return float(np.deg2rad(degrees))


def rad2deg(radians: float) -> float:
    return float(np.rad2deg(radians))
