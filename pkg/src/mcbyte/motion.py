"""Constant-velocity Kalman filter over boxes and camera motion compensation.

State layout is ``(cx, cy, aspect, h, vcx, vcy, vaspect, vh)``; noise scales
with the box height.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateGeometry, InsufficientPoints, SingularInnovation
from .geometry import BoundingBox

STD_WEIGHT_POSITION = 1.0 / 20
STD_WEIGHT_VELOCITY = 1.0 / 160

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.eye(4, 8)


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.covariance.copy())

    def to_box(self) -> BoundingBox:
        cx, cy, a, h = self.mean[:4]
        # guard against a collapsing height from a long extrapolation
        h = max(float(h), 1e-3)
        w = max(float(a) * h, 1e-3)
        return BoundingBox(float(cx) - w / 2.0, float(cy) - h / 2.0, w, h)


def kf_init(b: BoundingBox, std_weight_position=STD_WEIGHT_POSITION,
            std_weight_velocity=STD_WEIGHT_VELOCITY) -> KalmanState:
    mean = np.zeros(8)
    mean[:4] = b.to_xyah()
    h = b.h
    std = np.array([
        2 * std_weight_position * h, 2 * std_weight_position * h, 1e-2, 2 * std_weight_position * h,
        10 * std_weight_velocity * h, 10 * std_weight_velocity * h, 1e-5, 10 * std_weight_velocity * h,
    ])
    return KalmanState(mean, np.diag(std ** 2))


def kf_predict(s: KalmanState, std_weight_position=STD_WEIGHT_POSITION,
               std_weight_velocity=STD_WEIGHT_VELOCITY) -> KalmanState:
    h = s.mean[3]
    std = np.array([
        std_weight_position * h, std_weight_position * h, 1e-2, std_weight_position * h,
        std_weight_velocity * h, std_weight_velocity * h, 1e-5, std_weight_velocity * h,
    ])
    q = np.diag(std ** 2)
    mean = _F @ s.mean
    cov = _F @ s.covariance @ _F.T + q
    return KalmanState(mean, 0.5 * (cov + cov.T))


def measurement_noise(h: float, std_weight_position=STD_WEIGHT_POSITION) -> np.ndarray:
    std = np.array([std_weight_position * h, std_weight_position * h, 1e-1, std_weight_position * h])
    return np.diag(std ** 2)


def kf_update(s: KalmanState, b: BoundingBox, std_weight_position=STD_WEIGHT_POSITION,
              noise: Optional[np.ndarray] = None) -> KalmanState:
    """Correct ``s`` with the measured box ``b``.

    ``noise`` overrides the default height-scaled measurement covariance.
    Uses the Joseph form so the posterior stays symmetric PSD.
    """
    r = measurement_noise(s.mean[3], std_weight_position) if noise is None else np.asarray(noise, float)
    P = s.covariance
    S = _H @ P @ _H.T + r
    try:
        chol = scipy.linalg.cho_factor(S, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularInnovation(f"innovation covariance is not positive definite: {exc}") from None
    if np.linalg.cond(S) > 1e14:
        raise SingularInnovation("innovation covariance is numerically singular")
    gain = scipy.linalg.cho_solve(chol, _H @ P.T, check_finite=False).T
    innovation = b.to_xyah() - _H @ s.mean
    mean = s.mean + gain @ innovation
    ikh = np.eye(8) - gain @ _H
    cov = ikh @ P @ ikh.T + gain @ r @ gain.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


@dataclass(frozen=True)
class WarpMatrix:
    """Affine map ``p' = A p + t`` with ``A = [[a11, a12], [a21, a22]]``."""

    a11: float = 1.0
    a12: float = 0.0
    tx: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    ty: float = 0.0

    def __post_init__(self):
        vals = (self.a11, self.a12, self.tx, self.a21, self.a22, self.ty)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("warp entries must be finite")
        if abs(self.det) <= 1e-9:
            raise ValueError(f"warp linear part is singular (det={self.det})")

    @classmethod
    def identity(cls) -> "WarpMatrix":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "WarpMatrix":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[0, 2]),
                   float(m[1, 0]), float(m[1, 1]), float(m[1, 2]))

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, self.tx], [self.a21, self.a22, self.ty]])

    def is_identity(self) -> bool:
        return self == WarpMatrix()

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return p @ self.linear.T + self.translation

    def compose(self, other: "WarpMatrix") -> "WarpMatrix":
        """``self`` after ``other``."""
        A = self.linear @ other.linear
        t = self.linear @ other.translation + self.translation
        return WarpMatrix(A[0, 0], A[0, 1], t[0], A[1, 0], A[1, 1], t[1])

    def inverse(self) -> "WarpMatrix":
        Ainv = np.linalg.inv(self.linear)
        t = -Ainv @ self.translation
        return WarpMatrix(Ainv[0, 0], Ainv[0, 1], t[0], Ainv[1, 0], Ainv[1, 1], t[1])


@dataclass(frozen=True)
class Correspondence:
    src: tuple[float, float]
    dst: tuple[float, float]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (*self.src, *self.dst)):
            raise ValueError("correspondence coordinates must be finite")


def _fit_affine(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares 2x3 affine mapping ``src`` onto ``dst``."""
    X = np.hstack([src, np.ones((len(src), 1))])
    sol, *_ = np.linalg.lstsq(X, dst, rcond=None)
    return sol.T


def _collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(1.0, float(np.abs(pts).max()))
    return len(sv) < 2 or sv[1] <= tol * scale


def estimate_warp(points: Sequence[Correspondence], iterations: int = 200,
                  inlier_tol: float = 3.0, seed: int = 0) -> WarpMatrix:
    """Robust affine fit: RANSAC over minimal 3-point samples, then least squares on inliers.

    The consensus set is re-derived from the refit until it stops changing.
    """
    if len(points) < 3:
        raise InsufficientPoints(f"need at least 3 correspondences, got {len(points)}")
    src = np.array([p.src for p in points], dtype=float)
    dst = np.array([p.dst for p in points], dtype=float)
    if _collinear(src):
        raise DegenerateGeometry("all source points are collinear")

    rng = np.random.default_rng(seed)
    n = len(points)
    best_count, best_err, best_model = -1, math.inf, None
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        if _collinear(src[idx]):
            continue
        model = _fit_affine(src[idx], dst[idx])
        resid = np.linalg.norm(src @ model[:, :2].T + model[:, 2] - dst, axis=1)
        inliers = resid <= inlier_tol
        count = int(inliers.sum())
        err = float(resid[inliers].sum())
        if count > best_count or (count == best_count and err < best_err):
            best_count, best_err, best_model = count, err, model
    if best_model is None:
        raise DegenerateGeometry("every sampled triple was collinear")

    model = best_model
    inliers = np.linalg.norm(src @ model[:, :2].T + model[:, 2] - dst, axis=1) <= inlier_tol
    for _ in range(10):
        if inliers.sum() < 3 or _collinear(src[inliers]):
            break
        model = _fit_affine(src[inliers], dst[inliers])
        refreshed = np.linalg.norm(src @ model[:, :2].T + model[:, 2] - dst, axis=1) <= inlier_tol
        if np.array_equal(refreshed, inliers):
            break
        inliers = refreshed
    return WarpMatrix.from_matrix(model)


def apply_warp(s: KalmanState, w: WarpMatrix) -> KalmanState:
    """Move a predicted state into the current camera frame.

    Center goes through the full affine map; height scales by ``sqrt(|det A|)``
    and aspect is kept. The covariance is transformed by congruence with
    ``A`` acting on the position and position-velocity blocks only, which
    keeps it PSD.
    """
    if w.is_identity():
        return s.copy()
    A = w.linear
    scale = math.sqrt(abs(w.det))
    mean = s.mean.copy()
    mean[:2] = A @ s.mean[:2] + w.translation
    mean[3] = s.mean[3] * scale
    mean[4:6] = A @ s.mean[4:6]
    mean[7] = s.mean[7] * scale
    T = np.eye(8)
    T[:2, :2] = A
    T[4:6, 4:6] = A
    cov = T @ s.covariance @ T.T
    return KalmanState(mean, 0.5 * (cov + cov.T))
