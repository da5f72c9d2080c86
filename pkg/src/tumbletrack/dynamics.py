"""Rigid-body attitude and relative orbital translation of the target.

Frames: ``{A}`` is the chaser frame (x radial-out, y along-track in the
orbit plane), ``{B}`` the target's principal axes at its centre of mass,
``{C}`` the point-of-reference frame the sensor sees. ``mu`` is the
attitude of ``{B}`` in ``{A}`` (``to_rotation(mu)`` maps ``{B}`` vectors to
``{A}``); ``eta`` that of ``{C}`` in ``{B}``; the observed attitude is
``q = eta (x) mu``. ``omega`` and ``rho`` are in ``{B}``; ``r_c`` and its
rate in ``{A}``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import quat
from .errors import NonPhysicalInertia, SingularGravity, SingularInertiaRatio
from .icp import Pose

MU_EARTH = 3.986004418e14


@dataclass(frozen=True)
class OrbitParams:
    """Circular reference orbit of the chaser. ``n = 0`` disables gravity."""

    n: float = 0.0011
    mu_e: float = MU_EARTH

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("orbital rate must be non-negative")

    @property
    def r_e(self):
        if self.n == 0.0:
            return np.zeros(3)
        return np.array([(self.mu_e / self.n**2) ** (1.0 / 3.0), 0.0, 0.0])

    @property
    def n_vec(self):
        return np.array([0.0, 0.0, self.n])


def check_inertia(I):
    I = np.asarray(I, dtype=float).reshape(3)
    if np.any(I <= 0):
        raise NonPhysicalInertia(f"principal moments must be positive, got {I}")
    a, b, c = I
    if not (a + b > c and b + c > a and a + c > b):
        raise NonPhysicalInertia(f"principal moments {I} violate the triangle inequality")
    return I


def inertia_to_ratios(I):
    """``p = ((Iy - Iz)/Ix, (Iz - Ix)/Iy, (Ix - Iy)/Iz)``."""
    Ix, Iy, Iz = check_inertia(I)
    return np.array([(Iy - Iz) / Ix, (Iz - Ix) / Iy, (Ix - Iy) / Iz])


def psi(omega, p):
    wx, wy, wz = omega
    return np.array([p[0] * wy * wz, p[1] * wx * wz, p[2] * wx * wy])


def torque_gain(p):
    """Diagonal ``J(p)`` scaling the normalised torque noise into each axis."""
    px, py, pz = p
    if abs(1.0 + px) < 1e-9 or abs(1.0 - px) < 1e-9:
        raise SingularInertiaRatio(f"singular inertia ratio: p_x = {px}")
    return np.diag([1.0, (1.0 - py) / (1.0 + px), (1.0 + pz) / (1.0 - px)])


def cw_accel(r_c, v_c, orbit):
    """Relative acceleration in ``{A}`` including the full gravity difference."""
    n = orbit.n_vec
    acc = -2.0 * np.cross(n, v_c) - np.cross(n, np.cross(n, r_c))
    if orbit.n == 0.0:
        return acc
    r_c = np.asarray(r_c, dtype=float)
    r_e = orbit.r_e
    R = r_e[0]
    dist = np.linalg.norm(r_e + r_c)
    if dist < 1.0:
        raise SingularGravity(f"singular gravity evaluation: |r_e + r_c| = {dist:.3g} m")
    # -mu (r_e + r_c)/|r_e + r_c|^3 + n^2 r_e without cancelling two ~g terms:
    # with s = (R/|r_e + r_c|)^3, it equals (mu/R^3) ((1 - s) r_e - s r_c)
    q = (2.0 * R * r_c[0] + r_c @ r_c) / R**2
    one_minus_s = -np.expm1(-1.5 * np.log1p(q))
    s = 1.0 - one_minus_s
    return acc + (orbit.mu_e / R**3) * (one_minus_s * r_e - s * r_c)


def cw_linear_accel(r_c, v_c, n):
    """Linearised (Clohessy-Wiltshire) relative acceleration."""
    K = np.diag([3 * n**2, 0.0, -(n**2)])
    return K @ r_c - 2.0 * np.cross([0.0, 0.0, n], v_c)


def attitude_rate(mu, omega, n_vec):
    """``d mu/dt = 1/2 (omega (x) mu - n (*) mu)``."""
    w = np.array([omega[0], omega[1], omega[2], 0.0])
    nq = np.array([n_vec[0], n_vec[1], n_vec[2], 0.0])
    return 0.5 * (quat.otimes_matrix(w) @ mu - quat.circledast_matrix(nq) @ mu)


@dataclass(frozen=True)
class StateVector:
    """Filter state; the two quaternions are carried whole.

    The error-state layout is ``[dmu_v, domega, dp, dr_c, dv_c, drho, deta_v]``
    (indices 0-2, 3-5, ..., 18-20).
    """

    mu: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rho: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eta: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())

    def __post_init__(self):
        for name in ("mu", "eta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(4))
        for name in ("omega", "p", "r_c", "v_c", "rho"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    def to_array(self):
        return np.concatenate([self.mu, self.omega, self.p, self.r_c, self.v_c, self.rho, self.eta])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[0:4], a[4:7], a[7:10], a[10:13], a[13:16], a[16:19], a[19:23])

    def pose(self):
        """Pose of ``{C}`` in ``{A}`` implied by this state."""
        return Pose(
            quat.qmul_otimes(self.eta, self.mu),
            self.r_c + quat.to_rotation(self.mu) @ self.rho,
        )

    def replace(self, **kw):
        return replace(self, **kw)


def state_derivative(x, orbit):
    """Noise-free time derivative of a :class:`StateVector`, flattened like ``to_array``."""
    out = np.zeros(23)
    out[0:4] = attitude_rate(x.mu, x.omega, orbit.n_vec)
    out[4:7] = psi(x.omega, x.p)
    out[10:13] = x.v_c
    out[13:16] = cw_accel(x.r_c, x.v_c, orbit)
    return out


@dataclass(frozen=True)
class TargetTruth:
    mu: np.ndarray
    omega: np.ndarray
    r_c: np.ndarray
    v_c: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    inertia: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "inertia", check_inertia(self.inertia))
        for name in ("mu", "eta"):
            object.__setattr__(self, name, quat.normalize(getattr(self, name)))
        for name in ("omega", "r_c", "v_c", "rho"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    @property
    def p(self):
        return inertia_to_ratios(self.inertia)

    def energy(self):
        return float(self.omega @ (self.inertia * self.omega))

    def momentum_norm(self):
        return float(np.linalg.norm(self.inertia * self.omega))


def _truth_rate(y, inertia, orbit):
    mu, w, r, v = y[0:4], y[4:7], y[7:10], y[10:13]
    Ix, Iy, Iz = inertia
    dy = np.empty(13)
    dy[0:4] = attitude_rate(mu, w, orbit.n_vec)
    dy[4] = (Iy - Iz) * w[1] * w[2] / Ix
    dy[5] = (Iz - Ix) * w[2] * w[0] / Iy
    dy[6] = (Ix - Iy) * w[0] * w[1] / Iz
    dy[7:10] = v
    dy[10:13] = cw_accel(r, v, orbit)
    return dy


def rk4_step(fun, y, h):
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_truth(truth, orbit, T, dt=0.01, rng=None, sigma_tau=0.0):
    """Advance the true target by ``T`` seconds with RK4 steps of at most ``dt``.

    Uses Euler's equations with the physical principal moments. When
    ``sigma_tau > 0`` and ``rng`` is given, each step adds a random angular
    velocity increment from white torque noise of that intensity
    (normalised by ``I_xx``).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < dt and not np.isclose(T, dt):
        if T == 0.0:
            return truth
        raise ValueError(f"horizon T={T} shorter than step dt={dt}")
    n_steps = int(np.ceil(T / dt - 1e-9))
    h = T / n_steps
    inertia = truth.inertia
    gain = inertia[0] / inertia
    y = np.concatenate([truth.mu, truth.omega, truth.r_c, truth.v_c])
    fun = lambda s: _truth_rate(s, inertia, orbit)  # noqa: E731
    for _ in range(n_steps):
        y = rk4_step(fun, y, h)
        y[0:4] /= np.linalg.norm(y[0:4])
        if sigma_tau > 0.0 and rng is not None:
            y[4:7] += gain * sigma_tau * np.sqrt(h) * rng.standard_normal(3)
    return replace(truth, mu=y[0:4], omega=y[4:7], r_c=y[7:10], v_c=y[10:13], t=truth.t + T)


def observed_pose(truth):
    """Pose of the point-of-reference frame ``{C}`` in the chaser frame."""
    return Pose(
        quat.qmul_otimes(truth.eta, truth.mu),
        truth.r_c + quat.to_rotation(truth.mu) @ truth.rho,
    )
