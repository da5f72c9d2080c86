# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: exact nearest-point search and the 4x4 Jacobi eigensolver.

Both routines mirror :mod:`tumbletrack._fallback` result-for-result; the
fallback is what runs when this extension is not built.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()


cdef class KDIndex:
    """Static k-d tree over an (m, 3) point array.

    Queries return the exact nearest point under squared Euclidean distance
    ``(dx*dx + dy*dy) + dz*dz``; equal distances resolve to the lowest
    original index.
    """

    cdef readonly cnp.ndarray points
    cdef double[:, ::1] _pts
    cdef Py_ssize_t[::1] _perm
    cdef Py_ssize_t[::1] _start, _stop, _left, _right, _dim
    cdef double[::1] _split
    cdef Py_ssize_t _nnodes
    cdef readonly Py_ssize_t leafsize

    def __init__(self, points, Py_ssize_t leafsize=12):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("KDIndex needs a non-empty (m, 3) array")
        self.points = pts
        self._pts = pts
        self.leafsize = max(1, leafsize)
        m = pts.shape[0]
        cap = 2 * m + 1
        start = np.zeros(cap, dtype=np.intp)
        stop = np.zeros(cap, dtype=np.intp)
        left = np.full(cap, -1, dtype=np.intp)
        right = np.full(cap, -1, dtype=np.intp)
        dim = np.full(cap, -1, dtype=np.intp)
        split = np.zeros(cap, dtype=np.float64)
        perm = np.arange(m, dtype=np.intp)

        # iterative build with an explicit stack of (node, lo, hi)
        nnodes = 1
        stack = [(0, 0, m)]
        while stack:
            node, lo, hi = stack.pop()
            start[node] = lo
            stop[node] = hi
            if hi - lo <= self.leafsize:
                continue
            sub = pts[perm[lo:hi]]
            spread = sub.max(axis=0) - sub.min(axis=0)
            d = int(np.argmax(spread))
            if spread[d] == 0.0:
                continue
            k = (hi - lo) // 2
            order = np.argpartition(sub[:, d], k, kind="introselect")
            perm[lo:hi] = perm[lo:hi][order]
            dim[node] = d
            split[node] = pts[perm[lo + k], d]
            left[node] = nnodes
            right[node] = nnodes + 1
            nnodes += 2
            stack.append((left[node], lo, lo + k))
            stack.append((right[node], lo + k, hi))

        self._nnodes = nnodes
        self._start = start[:nnodes].copy()
        self._stop = stop[:nnodes].copy()
        self._left = left[:nnodes].copy()
        self._right = right[:nnodes].copy()
        self._dim = dim[:nnodes].copy()
        self._split = split[:nnodes].copy()
        self._perm = perm

    cdef void _search(self, Py_ssize_t node, double qx, double qy, double qz,
                      double* best_d, Py_ssize_t* best_i) noexcept nogil:
        cdef Py_ssize_t j, idx, first, second, d
        cdef double dx, dy, dz, dist, diff, q
        d = self._dim[node]
        if d < 0:
            for j in range(self._start[node], self._stop[node]):
                idx = self._perm[j]
                dx = qx - self._pts[idx, 0]
                dy = qy - self._pts[idx, 1]
                dz = qz - self._pts[idx, 2]
                dist = dx * dx + dy * dy + dz * dz
                if dist < best_d[0] or (dist == best_d[0] and idx < best_i[0]):
                    best_d[0] = dist
                    best_i[0] = idx
            return
        if d == 0:
            q = qx
        elif d == 1:
            q = qy
        else:
            q = qz
        diff = q - self._split[node]
        if diff < 0.0:
            first = self._left[node]
            second = self._right[node]
        else:
            first = self._right[node]
            second = self._left[node]
        self._search(first, qx, qy, qz, best_d, best_i)
        # non-strict so that equidistant points across the plane are visited
        if diff * diff <= best_d[0]:
            self._search(second, qx, qy, qz, best_d, best_i)

    def query(self, x):
        """Nearest model point for every row of ``x``.

        Returns
        -------
        idx : (n,) intp ndarray
        d2 : (n,) float64 ndarray
            Squared distances.
        """
        cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64).reshape(-1, 3)
        cdef Py_ssize_t n = xv.shape[0]
        idx = np.empty(n, dtype=np.intp)
        d2 = np.empty(n, dtype=np.float64)
        cdef Py_ssize_t[::1] iv = idx
        cdef double[::1] dv = d2
        cdef Py_ssize_t i, bi
        cdef double bd
        with nogil:
            for i in range(n):
                bd = INFINITY
                bi = -1
                self._search(0, xv[i, 0], xv[i, 1], xv[i, 2], &bd, &bi)
                iv[i] = bi
                dv[i] = bd
        return idx, d2

    def __len__(self):
        return self._pts.shape[0]


def jacobi_eigh4(W, double tol=1e-13, int max_sweeps=60):
    """Cyclic Jacobi eigen-decomposition of a symmetric 4x4 matrix.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||W||_F)``.

    Returns
    -------
    eigenvalues : (4,) ndarray
    eigenvectors : (4, 4) ndarray
        Column ``k`` pairs with ``eigenvalues[k]``.
    """
    cdef double a[4][4]
    cdef double v[4][4]
    cdef int i, j, k, p, q, sweep
    cdef double off, scale, theta, t, c, s, tau, app, aqq, apq, akp, akq, vkp, vkq
    Wa = np.asarray(W, dtype=np.float64)
    if Wa.shape != (4, 4):
        raise ValueError("jacobi_eigh4 expects a 4x4 matrix")
    cdef double[:, :] wv = Wa
    scale = 0.0
    for i in range(4):
        for j in range(4):
            a[i][j] = wv[i, j]
            v[i][j] = 1.0 if i == j else 0.0
            scale += a[i][j] * a[i][j]
    scale = sqrt(scale)
    if scale < 1.0:
        scale = 1.0

    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(4):
            for j in range(4):
                if i != j:
                    off += a[i][j] * a[i][j]
        if sqrt(off) < tol * scale:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                app = a[p][p]
                aqq = a[q][q]
                theta = (aqq - app) / (2.0 * apq)
                if fabs(theta) > 1.0e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] = app - t * apq
                a[q][q] = aqq + t * apq
                a[p][q] = 0.0
                a[q][p] = 0.0
                for k in range(4):
                    if k != p and k != q:
                        akp = a[k][p]
                        akq = a[k][q]
                        a[k][p] = akp - s * (akq + tau * akp)
                        a[p][k] = a[k][p]
                        a[k][q] = akq + s * (akp - tau * akq)
                        a[q][k] = a[k][q]
                for k in range(4):
                    vkp = v[k][p]
                    vkq = v[k][q]
                    v[k][p] = vkp - s * (vkq + tau * vkp)
                    v[k][q] = vkq + s * (vkp - tau * vkq)

    vals = np.empty(4)
    vecs = np.empty((4, 4))
    for i in range(4):
        vals[i] = a[i][i]
        for j in range(4):
            vecs[i, j] = v[i][j]
    return vals, vecs
