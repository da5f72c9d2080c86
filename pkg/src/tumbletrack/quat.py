"""Quaternion algebra.

Quaternions are stored as ``[q_v, q_o]`` (vector part first, scalar last)
in plain float arrays of shape (4,). ``to_rotation(q)`` is the rotation
matrix ``(2 q_o^2 - 1) I + 2 q_o [q_v x] + 2 q_v q_v^T``, and the two
products are defined through their left-multiplication matrices::

    [q (x)] = [[-[q_v x] + q_o I, q_v], [-q_v^T, q_o]]
    [q (*)] = [[ [q_v x] + q_o I, q_v], [-q_v^T, q_o]]

With these definitions ``to_rotation(otimes(a, b)) == to_rotation(b) @
to_rotation(a)`` while ``circledast(a, b)`` composes in matrix order.
Nothing here forces ``q_o >= 0``; callers that need a canonical sign pick it.
"""

import numpy as np

from .errors import ErrorStateOverflow

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])

SMALL_ANGLE = 1e-8


def skew(v):
    """Cross-product matrix ``[v x]``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def otimes_matrix(q):
    """Left-product matrix ``[q (x)]``."""
    M = np.empty((4, 4))
    M[:3, :3] = q[3] * np.eye(3) - skew(q[:3])
    M[:3, 3] = q[:3]
    M[3, :3] = -q[:3]
    M[3, 3] = q[3]
    return M


def circledast_matrix(q):
    """Left-product matrix ``[q (*)]``."""
    M = np.empty((4, 4))
    M[:3, :3] = q[3] * np.eye(3) + skew(q[:3])
    M[:3, 3] = q[:3]
    M[3, :3] = -q[:3]
    M[3, 3] = q[3]
    return M


def _otimes_raw(a, b):
    av, ao = a[:3], a[3]
    bv, bo = b[:3], b[3]
    out = np.empty(4)
    out[:3] = ao * bv + bo * av - np.cross(av, bv)
    out[3] = ao * bo - av @ bv
    return out


def qmul_otimes(q1, q2):
    """``q1 (x) q2``, renormalised."""
    return normalize(_otimes_raw(np.asarray(q1, float), np.asarray(q2, float)))


def qmul_circledast(q1, q2):
    """``q1 (*) q2``, identical to ``q2 (x) q1``."""
    return normalize(_otimes_raw(np.asarray(q2, float), np.asarray(q1, float)))


def conjugate(q):
    q = np.asarray(q, dtype=float)
    return np.array([-q[0], -q[1], -q[2], q[3]])


def to_rotation(q):
    q = np.asarray(q, dtype=float)
    qv, qo = q[:3], q[3]
    return (2.0 * qo * qo - 1.0) * np.eye(3) + 2.0 * qo * skew(qv) + 2.0 * np.outer(qv, qv)


def from_small(v):
    """Unit quaternion ``[v, sqrt(1 - |v|^2)]`` from an error-state vector.

    Raises
    ------
    ErrorStateOverflow
        If ``|v| > 1``.
    """
    v = np.asarray(v, dtype=float)
    n2 = float(v @ v)
    if n2 > 1.0:
        raise ErrorStateOverflow(f"error-state overflow: |v| = {np.sqrt(n2):.6g} > 1")
    return np.array([v[0], v[1], v[2], np.sqrt(1.0 - n2)])


def rate_increment(omega, T):
    """Quaternion ``exp(T/2 [omega (x)])`` applied by one constant-rate step."""
    omega = np.asarray(omega, dtype=float)
    wn = float(np.linalg.norm(omega))
    angle = wn * T
    if angle < SMALL_ANGLE:
        half = 0.5 * T * omega
        return np.array([*(half * (1.0 - angle * angle / 24.0)), 1.0 - angle * angle / 8.0])
    return np.array([*(np.sin(0.5 * angle) * omega / wn), np.cos(0.5 * angle)])


def propagate_const_rate(q, omega, T):
    """Advance ``q`` under ``dq/dt = 1/2 omega (x) q`` for a constant ``omega``."""
    return qmul_otimes(rate_increment(omega, T), q)


def rotate_vec(q, v):
    """``to_rotation(q) @ v`` evaluated as the sandwich ``q* (x) v (x) q``.

    The sandwich ``q (x) v (x) q*`` therefore equals ``rotate_vec(conjugate(q), v)``.
    """
    vq = np.array([v[0], v[1], v[2], 0.0])
    return _otimes_raw(_otimes_raw(conjugate(q), vq), np.asarray(q, float))[:3]


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.array([*(np.sin(0.5 * angle) * axis), np.cos(0.5 * angle)])


def from_rotation(A):
    """Unit quaternion whose ``to_rotation`` is the given proper rotation."""
    A = np.asarray(A, dtype=float)
    tr = np.trace(A)
    # choose the numerically largest of the four squared components
    cands = np.array([A[0, 0], A[1, 1], A[2, 2], tr])
    k = int(np.argmax(cands))
    q = np.empty(4)
    if k == 3:
        q[3] = 0.5 * np.sqrt(1.0 + tr)
        f = 0.25 / q[3]
        q[0] = (A[2, 1] - A[1, 2]) * f
        q[1] = (A[0, 2] - A[2, 0]) * f
        q[2] = (A[1, 0] - A[0, 1]) * f
    else:
        i, j, l = k, (k + 1) % 3, (k + 2) % 3
        q[i] = 0.5 * np.sqrt(1.0 + 2.0 * A[i, i] - tr)
        f = 0.25 / q[i]
        q[3] = (A[l, j] - A[j, l]) * f
        q[j] = (A[j, i] + A[i, j]) * f
        q[l] = (A[l, i] + A[i, l]) * f
    return normalize(q)


def geodesic_angle(q1, q2):
    """Rotation angle in [0, pi] separating two attitudes."""
    # atan2 keeps full precision near zero, where acos of the dot product does not
    d = _otimes_raw(conjugate(normalize(q1)), normalize(q2))
    return float(2.0 * np.arctan2(np.linalg.norm(d[:3]), abs(d[3])))


def canonical(q):
    """Representative of ``+-q`` with non-negative scalar part."""
    q = np.asarray(q, dtype=float)
    return -q if q[3] < 0.0 else q.copy()


def to_euler(q):
    """Roll, pitch, yaw (rad) of ``to_rotation(q)`` in the z-y-x sequence.

    Only used to log attitude in a familiar form.
    """
    A = to_rotation(q)
    pitch = np.arcsin(np.clip(-A[2, 0], -1.0, 1.0))
    roll = np.arctan2(A[2, 1], A[2, 2])
    yaw = np.arctan2(A[1, 0], A[0, 0])
    return np.array([roll, pitch, yaw])


def random_quaternion(rng):
    """Uniformly distributed unit quaternion."""
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
