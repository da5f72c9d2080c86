"""Point-to-point ICP against a point-set surface model.

Poses follow the sensor convention: a :class:`Pose` maps model (target)
coordinates into sensor coordinates, ``x_sensor = A(q) x_model + t``. The
registration transform that ICP refines internally is its inverse, which
carries scan points onto the model.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quat
from .errors import AlignmentAmbiguous, DegenerateCorrespondence
from .kernels import KDIndex, jacobi_eigh4

AMBIGUITY_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", quat.normalize(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @property
    def matrix(self):
        return quat.to_rotation(self.rotation)

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.matrix.T + self.translation

    def inverse(self):
        q = quat.conjugate(self.rotation)
        return Pose(q, -quat.to_rotation(q) @ self.translation)

    def then(self, other):
        """Pose equal to applying ``self`` first, then ``other``."""
        return Pose(
            quat.qmul_circledast(other.rotation, self.rotation),
            other.matrix @ self.translation + other.translation,
        )


class SurfaceModel:
    """Model point set with a nearest-point index.

    Parameters
    ----------
    points : (m, 3) array_like
        Model points in the target's reference frame, metres.
    """

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("model points must be a non-empty (m, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("model points must be finite")
        self.points = pts
        self.index = KDIndex(pts)
        self.centroid = pts.mean(axis=0)
        self.radius = float(np.max(np.linalg.norm(pts - self.centroid, axis=1)))

    def __len__(self):
        return len(self.points)

    def query(self, x):
        """Indices of, and squared distances to, the nearest model points."""
        return self.index.query(x)


@dataclass(frozen=True)
class IcpOptions:
    d_min: float = 1e-18
    max_iter: int = 50

    @classmethod
    def for_noise(cls, sigma, max_iter=50):
        """Residual floor ``(2 sigma)^2`` for sensor noise ``sigma``."""
        return cls(d_min=max((2.0 * sigma) ** 2, 1e-18), max_iter=max_iter)


@dataclass(frozen=True)
class IcpResult:
    pose: Pose
    residual: float
    iterations: int
    converged: bool
    fit_normalized: float
    history: tuple = ()


def _as_cloud(points, name):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} has non-finite coordinates")
    return pts


def nearest_correspondences(U, model, transform=None):
    """Closest model point to each transformed scan point.

    ``transform`` is the scan-to-model registration ``{A0, r0}``; ``None``
    means identity.
    """
    U = _as_cloud(U, "scan")
    X = U if transform is None else transform.apply(U)
    idx, _ = model.query(X)
    return model.points[idx]


def cross_covariance(V, U):
    """``S = mean(v u^T) - v_bar u_bar^T`` with the two centroids."""
    V = np.asarray(V, dtype=float).reshape(-1, 3)
    U = np.asarray(U, dtype=float).reshape(-1, 3)
    if len(V) != len(U):
        raise ValueError(f"correspondence sets differ in size: {len(V)} vs {len(U)}")
    if len(U) < 3:
        raise DegenerateCorrespondence("degenerate correspondence set: fewer than 3 pairs")
    m = len(U)
    vbar = V.mean(axis=0)
    ubar = U.mean(axis=0)
    S = (V.T @ U) / m - np.outer(vbar, ubar)
    return S, vbar, ubar


def alignment_matrix(S):
    """4x4 symmetric matrix whose top eigenvector encodes the rotation.

    Row/column 0 pairs with the scalar part of the quaternion.
    """
    s11, s12, s13 = S[0]
    s21, s22, s23 = S[1]
    s31, s32, s33 = S[2]
    W = np.array([
        [s11 + s22 + s33, 0.0, 0.0, 0.0],
        [s23 - s32, s11 - s22 - s33, 0.0, 0.0],
        [s31 - s13, s21 + s12, -s11 + s22 - s33, 0.0],
        [s12 - s21, s31 + s13, s23 + s32, -s11 - s22 + s33],
    ])
    return np.tril(W) + np.tril(W, -1).T


def max_eigenvector_sym4(W):
    """Largest eigenvalue of a symmetric 4x4 matrix and a unit eigenvector."""
    W = np.asarray(W, dtype=float)
    if W.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if np.max(np.abs(W - W.T)) > 1e-9 * max(1.0, np.max(np.abs(W))):
        raise ValueError("matrix is not symmetric")
    vals, vecs = jacobi_eigh4(W)
    k = int(np.argmax(vals))
    xi = vecs[:, k]
    return float(vals[k]), xi / np.linalg.norm(xi)


def horn_align(U, V):
    """Closed-form rigid alignment minimising ``mean |A u + r - v|^2``.

    Returns
    -------
    q : (4,) ndarray
        Rotation quaternion ``[q_v, q_o]``.
    r : (3,) ndarray
        Translation, metres.
    d : float
        Attained mean squared distance, m^2.
    """
    U = np.asarray(U, dtype=float).reshape(-1, 3)
    V = np.asarray(V, dtype=float).reshape(-1, 3)
    S, vbar, ubar = cross_covariance(V, U)
    W = alignment_matrix(S)
    vals, vecs = jacobi_eigh4(W)
    order = np.argsort(vals)[::-1]
    lam1, lam2 = vals[order[0]], vals[order[1]]
    if (lam1 - lam2) / max(1.0, abs(lam1)) < AMBIGUITY_TOL:
        raise AlignmentAmbiguous(
            f"alignment ambiguous: top eigenvalues {lam1:.6g} and {lam2:.6g} coincide"
        )
    xi = vecs[:, order[0]]
    xi = xi / np.linalg.norm(xi)
    # W is written for the transposed attitude matrix: flip the vector part
    q = np.array([-xi[1], -xi[2], -xi[3], xi[0]])
    A = quat.to_rotation(q)
    r = vbar - A @ ubar
    res = U @ A.T + r - V
    d = float(np.mean(np.einsum("ij,ij->i", res, res)))
    return q, r, d


def icp_register(U, model, pose0, opts=None):
    """Refine the pose of ``model`` in the sensor frame from scan ``U``.

    Each iteration pairs every scan point with its nearest model point
    under the current registration, solves the closed-form alignment, and
    composes the increment onto the running transform. Iteration stops
    when the residual reaches ``opts.d_min``, when the correspondences stop
    changing, or after ``opts.max_iter`` alignments.
    """
    opts = opts or IcpOptions()
    if opts.max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    U = _as_cloud(U, "scan")
    reg = pose0.inverse()
    history = []
    prev_idx = None
    d = np.inf
    for _ in range(opts.max_iter):
        X = reg.apply(U)
        idx, _ = model.query(X)
        if prev_idx is not None and np.array_equal(idx, prev_idx):
            break
        prev_idx = idx
        dq, dr, d = horn_align(X, model.points[idx])
        reg = reg.then(Pose(dq, dr))
        history.append(d)
        if d <= opts.d_min:
            break
    return IcpResult(
        pose=reg.inverse(),
        residual=d,
        iterations=len(history),
        converged=d <= opts.d_min,
        fit_normalized=float(np.sqrt(d) / model.radius) if model.radius > 0 else 0.0,
        history=tuple(history),
    )
