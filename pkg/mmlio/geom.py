# mmlio/geom.py
"""
3-D geometry kernel: Hamilton quaternions (scalar first), rigid transforms,
the NavState of a keyframe, and the SO(3) tangent-space helpers used by the
solvers. All value types are immutable.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

from mmlio.errors import RangeError

# Below this angle exp/log switch to their Taylor expansions.
SMALL_ANGLE = 1e-6
# Below this |w| a unit quaternion is treated as a rotation by π.
ANTIPODAL_EPS = 1e-12


def _frozen(vec, size=3):
    arr = np.array(vec, dtype=np.float64).reshape(size)
    arr.flags.writeable = False
    return arr


def skew(v):
    """Cross-product matrix [v]x."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


@dataclass(frozen=True, eq=False)
class Quaternion:
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or n < 1e-12:
            raise RangeError(f"cannot normalize quaternion with norm {n}")
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)) / n)

    # --- constructors ---

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, wxyz):
        w, x, y, z = (float(c) for c in wxyz)
        return cls(w, x, y, z)

    @classmethod
    def from_rotvec(cls, phi):
        """Exponential map from a rotation vector (rad)."""
        phi = np.asarray(phi, dtype=np.float64)
        theta = float(np.linalg.norm(phi))
        if theta < SMALL_ANGLE:
            w = 1.0 - theta * theta / 8.0
            xyz = phi * (0.5 - theta * theta / 48.0)
        else:
            w = math.cos(0.5 * theta)
            xyz = phi * (math.sin(0.5 * theta) / theta)
        return cls(w, *xyz)

    @classmethod
    def from_axis_angle(cls, axis, angle):
        axis = np.asarray(axis, dtype=np.float64)
        return cls.from_rotvec(axis / np.linalg.norm(axis) * angle)

    @classmethod
    def from_matrix(cls, R):
        x, y, z, w = Rotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat()
        return cls(w, x, y, z)

    # --- algebra ---

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other):
        """Hamilton product self ⊗ other."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self):
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate

    @cached_property
    def matrix(self):
        w, x, y, z = self.w, self.x, self.y, self.z
        R = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        R.flags.writeable = False
        return R

    def rotate(self, v):
        """Rotate a 3-vector or an (N, 3) array."""
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 1:
            return self.matrix @ v
        return v @ self.matrix.T

    def log(self):
        """Rotation vector with angle in [0, π]."""
        w = self.w
        v = np.array([self.x, self.y, self.z])
        if w < 0.0:
            w, v = -w, -v
        s = float(np.linalg.norm(v))
        if s < SMALL_ANGLE:
            # w ≈ 1 here; 2·atan(s/w)/s ≈ (2/w)(1 - s²/(3w²))
            return v * (2.0 / w) * (1.0 - s * s / (3.0 * w * w))
        if w < ANTIPODAL_EPS:
            # angle at π: the sign of w is noise, so fix the axis sign instead
            nz = np.flatnonzero(np.abs(v) > 0.0)
            if nz.size and v[nz[-1]] < 0.0:
                w, v = -w, -v
        return v * (2.0 * math.atan2(s, w) / s)

    def angle(self):
        return float(np.linalg.norm(self.log()))

    def angle_to(self, other):
        return (self.conjugate() * other).angle()

    def rotation_equal(self, other, tol=1e-9):
        """q and -q describe the same rotation."""
        return self.angle_to(other) <= tol

    def __repr__(self):
        return f"Quaternion(w={self.w:.9g}, x={self.x:.9g}, y={self.y:.9g}, z={self.z:.9g})"


# --- SO(3) helpers ---

def so3_exp(phi):
    """Rodrigues formula, rotation vector -> matrix."""
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * K @ K
    return (np.eye(3) + (math.sin(theta) / theta) * K
            + ((1.0 - math.cos(theta)) / (theta * theta)) * K @ K)


def so3_log(R):
    return Quaternion.from_matrix(R).log()


def right_jacobian(phi):
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * K + K @ K / 6.0
    t2 = theta * theta
    return (np.eye(3) - ((1.0 - math.cos(theta)) / t2) * K
            + ((theta - math.sin(theta)) / (t2 * theta)) * K @ K)


def right_jacobian_inv(phi):
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * K + K @ K / 12.0
    coeff = 1.0 / (theta * theta) - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return np.eye(3) + 0.5 * K + coeff * K @ K


def quat_boxplus(q, dtheta):
    """q ⊗ Exp(δθ), right perturbation."""
    return q * Quaternion.from_rotvec(dtheta)


def quat_boxminus(qa, qb):
    """Log(qb⁻¹ ⊗ qa), so that boxminus(boxplus(q, d), q) = d."""
    return (qb.conjugate() * qa).log()


# --- rigid transforms ---

@dataclass(frozen=True, eq=False)
class Pose:
    """T = (R, t): maps a point p of the source frame to R p + t."""

    rotation: Quaternion = field(default_factory=Quaternion.identity)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "translation", _frozen(self.translation))

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_translation(cls, t):
        return cls(Quaternion.identity(), t)

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.float64)
        return cls(Quaternion.from_matrix(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_record(cls, record):
        """From the 7-value record tx ty tz qw qx qy qz."""
        vals = [float(v) for v in record]
        if len(vals) != 7:
            raise RangeError(f"pose record needs 7 values, got {len(vals)}")
        return cls(Quaternion.from_array(vals[3:]), vals[:3])

    def as_record(self):
        t = self.translation
        q = self.rotation
        return [float(t[0]), float(t[1]), float(t[2]), q.w, q.x, q.y, q.z]

    @property
    def R(self):
        return self.rotation.matrix

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.translation
        return T

    def compose(self, other):
        """self ∘ other: applies `other` first."""
        return Pose(self.rotation * other.rotation,
                    self.rotation.rotate(other.translation) + self.translation)

    __matmul__ = compose

    def inverse(self):
        q_inv = self.rotation.conjugate()
        return Pose(q_inv, -q_inv.rotate(self.translation))

    def between(self, other):
        """Relative transform self⁻¹ ∘ other."""
        return self.inverse().compose(other)

    def apply(self, p):
        return self.rotation.rotate(p) + self.translation

    def retract(self, delta):
        """Right perturbation on rotation, additive translation; delta = [δθ, δt]."""
        delta = np.asarray(delta, dtype=np.float64)
        return Pose(quat_boxplus(self.rotation, delta[:3]), self.translation + delta[3:6])

    def angle_to(self, other):
        return self.rotation.angle_to(other.rotation)

    def distance_to(self, other):
        return float(np.linalg.norm(self.translation - other.translation))

    def __repr__(self):
        t = self.translation
        return f"Pose(t=({t[0]:.6g}, {t[1]:.6g}, {t[2]:.6g}), {self.rotation!r})"


def compose(a, b):
    return a.compose(b)


def apply(T, p):
    return T.apply(p)


# --- navigation state ---

STATE_DIM = 15
ROT, POS, VEL, BA, BG = (slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12), slice(12, 15))


@dataclass(frozen=True, eq=False)
class NavState:
    """Keyframe state [p, q, v, b_a, b_g]; tangent order [δθ, δp, δv, δb_a, δb_g]."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: Quaternion = field(default_factory=Quaternion.identity)
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("p", "v", "b_a", "b_g"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def identity(cls):
        return cls()

    @property
    def pose(self):
        return Pose(self.q, self.p)

    def with_pose(self, pose):
        return NavState(pose.translation, pose.rotation, self.v, self.b_a, self.b_g)

    def with_biases(self, b_a, b_g):
        return NavState(self.p, self.q, self.v, b_a, b_g)

    def boxplus(self, delta):
        delta = np.asarray(delta, dtype=np.float64)
        return NavState(
            self.p + delta[POS],
            quat_boxplus(self.q, delta[ROT]),
            self.v + delta[VEL],
            self.b_a + delta[BA],
            self.b_g + delta[BG],
        )

    def boxminus(self, other):
        out = np.empty(STATE_DIM)
        out[ROT] = quat_boxminus(self.q, other.q)
        out[POS] = self.p - other.p
        out[VEL] = self.v - other.v
        out[BA] = self.b_a - other.b_a
        out[BG] = self.b_g - other.b_g
        return out

    def is_finite(self):
        return bool(np.all(np.isfinite(np.concatenate(
            [self.p, self.q.as_array(), self.v, self.b_a, self.b_g]))))

    def magnitude(self):
        """Largest absolute component, used by the divergence check."""
        return float(np.max(np.abs(np.concatenate([self.p, self.v, self.b_a, self.b_g]))))
