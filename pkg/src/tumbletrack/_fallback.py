"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

import math

import numpy as np
from scipy.spatial import cKDTree


class KDIndex:
    """Exact nearest-point index backed by :class:`scipy.spatial.cKDTree`.

    cKDTree does not promise which of several equidistant points it returns,
    so each query pulls a handful of candidates and resolves ties to the
    lowest index with the same distance arithmetic as the compiled kernel.
    Rows whose candidate list is saturated with ties fall back to a scan.
    """

    n_candidates = 8

    def __init__(self, points, leafsize=12):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("KDIndex needs a non-empty (m, 3) array")
        self.points = pts
        self.leafsize = leafsize
        self._tree = cKDTree(pts, leafsize=leafsize)

    def __len__(self):
        return self.points.shape[0]

    def query(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1, 3)
        k = min(self.n_candidates, len(self))
        _, cand = self._tree.query(x, k=k)
        cand = cand.reshape(len(x), k)
        diff = x[:, None, :] - self.points[cand]
        d2 = (diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]) + diff[..., 2] * diff[..., 2]
        best = d2.min(axis=1)
        # lowest index among candidates attaining the minimum
        masked = np.where(d2 == best[:, None], cand, np.iinfo(np.intp).max)
        idx = masked.min(axis=1).astype(np.intp)

        saturated = (d2[:, -1] == best) & (k < len(self))
        for i in np.flatnonzero(saturated):
            diff = x[i] - self.points
            full = (diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]) + diff[:, 2] * diff[:, 2]
            j = int(np.argmin(full))  # argmin returns the first minimum
            idx[i] = j
            best[i] = full[j]
        return idx, best


def jacobi_eigh4(W, tol=1e-13, max_sweeps=60):
    """Cyclic Jacobi eigen-decomposition of a symmetric 4x4 matrix."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (4, 4):
        raise ValueError("jacobi_eigh4 expects a 4x4 matrix")
    a = [[float(W[i, j]) for j in range(4)] for i in range(4)]
    v = [[1.0 if i == j else 0.0 for j in range(4)] for i in range(4)]
    scale = max(1.0, math.sqrt(sum(a[i][j] ** 2 for i in range(4) for j in range(4))))

    for _ in range(max_sweeps):
        off = sum(a[i][j] * a[i][j] for i in range(4) for j in range(4) if i != j)
        if math.sqrt(off) < tol * scale:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                app, aqq = a[p][p], a[q][q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1.0e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] = app - t * apq
                a[q][q] = aqq + t * apq
                a[p][q] = a[q][p] = 0.0
                for k in range(4):
                    if k != p and k != q:
                        akp, akq = a[k][p], a[k][q]
                        a[k][p] = a[p][k] = akp - s * (akq + tau * akp)
                        a[k][q] = a[q][k] = akq + s * (akp - tau * akq)
                for k in range(4):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = vkp - s * (vkq + tau * vkp)
                    v[k][q] = vkq + s * (vkp - tau * vkq)

    return np.array([a[i][i] for i in range(4)]), np.array(v)
