"""Multiplicative extended Kalman filter over the 21-dimensional error state.

Error-state layout (see :class:`~tumbletrack.dynamics.StateVector`)::

    0-2 dmu_v   3-5 domega   6-8 dp   9-11 dr_c   12-14 dv_c   15-17 drho   18-20 deta_v

The attitude errors are defined multiplicatively, ``dmu = mu (x) mu_bar*``
and ``deta = eta_bar* (x) eta``, so a correction is folded back as
``mu <- dmu (x) mu`` and ``eta <- eta (x) deta``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import quat
from .dynamics import StateVector, cw_accel, psi, torque_gain
from .errors import ErrorStateOverflow, FilterDivergence, MeasurementRejected, SingularInertiaRatio

N_ERR = 21
MU, OMEGA, P, RC, VC, RHO, ETA = (slice(i, i + 3) for i in range(0, 21, 3))

COND_LIMIT = 1e12


def default_measurement_cov(sigma_pos=0.01, sigma_att=0.005):
    return np.diag([sigma_pos**2] * 3 + [sigma_att**2] * 3)


def default_covariance():
    """Initial error covariance used when no prior is configured."""
    sig = [0.1, 0.1, 0.5, 0.5, 0.1, 0.2, 0.1]
    return np.diag(np.repeat(np.square(sig), 3))


@dataclass(frozen=True)
class NoiseConfig:
    sigma_tau: float = 1e-4
    sigma_f: float = 1e-4
    R: np.ndarray = field(default_factory=default_measurement_cov)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (6, 6):
            raise ValueError("R must be 6x6")
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be symmetric positive definite")
        object.__setattr__(self, "R", R)

    @property
    def Sigma(self):
        return np.diag([self.sigma_tau**2] * 3 + [self.sigma_f**2] * 3)


@dataclass(frozen=True)
class Measurement:
    r: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "q", quat.normalize(self.q))


@dataclass(frozen=True)
class FilterState:
    x: StateVector
    P: np.ndarray
    t: float = 0.0

    def pose(self):
        return self.x.pose()


def initial_state(pose, t=0.0, P0=None, omega0=None, p0=None, v0=None, rho0=None, eta0=None):
    """Filter state consistent with an observed pose of ``{C}``.

    Unspecified parameters take the uninformative defaults: zero rates, zero
    inertia ratios, zero offset, identity principal-axis attitude.
    """
    eta = quat.IDENTITY.copy() if eta0 is None else quat.normalize(eta0)
    rho = np.zeros(3) if rho0 is None else np.asarray(rho0, float)
    mu = quat.qmul_otimes(quat.conjugate(eta), pose.rotation)
    x = StateVector(
        mu=mu,
        omega=np.zeros(3) if omega0 is None else omega0,
        p=np.zeros(3) if p0 is None else p0,
        r_c=pose.translation - quat.to_rotation(mu) @ rho,
        v_c=np.zeros(3) if v0 is None else v0,
        rho=rho,
        eta=eta,
    )
    P = default_covariance() if P0 is None else np.array(P0, dtype=float)
    return FilterState(x, P, t)


def psi_jacobians(omega, p):
    """``M = d psi / d omega`` and ``N = d psi / d p``."""
    wx, wy, wz = omega
    px, py, pz = p
    M = np.array([[0.0, px * wz, px * wy], [py * wz, 0.0, py * wx], [pz * wy, pz * wx, 0.0]])
    N = np.diag([wy * wz, wx * wz, wx * wy])
    return M, N


def build_F(x, n):
    M, N = psi_jacobians(x.omega, x.p)
    F = np.zeros((N_ERR, N_ERR))
    F[MU, MU] = -quat.skew(x.omega)
    F[MU, OMEGA] = 0.5 * np.eye(3)
    F[OMEGA, OMEGA] = M
    F[OMEGA, P] = N
    F[RC, VC] = np.eye(3)
    F[VC, RC] = np.diag([3 * n**2, 0.0, -(n**2)])
    F[VC, VC] = -2.0 * quat.skew([0.0, 0.0, n])
    return F


def build_B(p):
    B = np.zeros((N_ERR, 6))
    B[OMEGA, 0:3] = torque_gain(p)
    B[VC, 3:6] = np.eye(3)
    return B


def matrix_exponential(A):
    return scipy.linalg.expm(np.asarray(A, dtype=float))


def van_loan_discretize(F, B, Sigma, T):
    """Transition matrix and process-noise covariance over a step ``T``."""
    if T <= 0:
        raise ValueError("sampling time must be positive")
    n = F.shape[0]
    G = np.zeros((2 * n, 2 * n))
    G[:n, :n] = -F
    G[:n, n:] = B @ Sigma @ B.T
    G[n:, n:] = F.T
    D = matrix_exponential(G * T)
    Phi = D[n:, n:].T
    Q = Phi @ D[:n, n:]
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    if w.min() < 0.0:
        floor = 1e-12 * max(np.trace(Q), 0.0)
        w = np.where((w < 0.0) & (w > -floor), 0.0, w)
        Q = (V * w) @ V.T
        Q = 0.5 * (Q + Q.T)
    return Phi, Q


def predict_measurement(state):
    """Predicted measurement and its sensitivity at zero attitude error.

    The orientation part of the prediction is the vector part of the
    identity error quaternion, i.e. zero.
    """
    x = state.x
    A = quat.to_rotation(x.mu)
    z = np.zeros(6)
    z[0:3] = x.r_c + A @ x.rho
    H = np.zeros((6, N_ERR))
    H[0:3, MU] = -2.0 * A @ quat.skew(x.rho)
    H[0:3, RC] = np.eye(3)
    H[0:3, RHO] = A
    H[3:6, MU] = np.eye(3)
    H[3:6, ETA] = np.eye(3)
    return z, H


def innovation(meas, state):
    x = state.x
    z, _ = predict_measurement(state)
    dq = quat.qmul_otimes(quat.qmul_otimes(quat.conjugate(x.eta), meas.q), quat.conjugate(x.mu))
    dq = quat.canonical(dq)
    y = np.empty(6)
    y[0:3] = meas.r - z[0:3]
    y[3:6] = dq[:3]
    return y


def fold(x, dx):
    """Apply an error-state correction to the carried state."""
    try:
        dmu = quat.from_small(dx[MU])
        deta = quat.from_small(dx[ETA])
    except ErrorStateOverflow as exc:
        raise FilterDivergence(f"filter divergence: {exc}") from exc
    return StateVector(
        mu=quat.qmul_otimes(dmu, x.mu),
        omega=x.omega + dx[OMEGA],
        p=x.p + dx[P],
        r_c=x.r_c + dx[RC],
        v_c=x.v_c + dx[VC],
        rho=x.rho + dx[RHO],
        eta=quat.qmul_otimes(x.eta, deta),
    )


def correct(state, meas, noise):
    """Measurement update; also returns the innovation and its covariance.

    Raises
    ------
    MeasurementRejected
        Innovation covariance condition number above ``COND_LIMIT``.
    FilterDivergence
        The attitude correction cannot be folded into a unit quaternion.
    """
    _, H = predict_measurement(state)
    y = innovation(meas, state)
    P = state.P
    S = H @ P @ H.T + noise.R
    S = 0.5 * (S + S.T)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > COND_LIMIT:
        raise MeasurementRejected("measurement rejected (ill-conditioned innovation covariance)")
    K = scipy.linalg.solve(S, H @ P, assume_a="pos").T
    dx = K @ y
    x = fold(state.x, dx)
    IKH = np.eye(N_ERR) - K @ H
    P_new = IKH @ P @ IKH.T + K @ noise.R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return replace(state, x=x, P=P_new, t=meas.t), y, S


def ekf_correct(state, meas, noise):
    return correct(state, meas, noise)[0]


def propagate_mean(x, orbit, T, substeps=10):
    """Integrate the noise-free dynamics over ``T``.

    Rates and translation use RK4. The attitude takes, per sub-step, the
    closed-form constant-rate rotation at the sub-step's Simpson-averaged
    rate on the left and the orbit-frame rotation on the right.
    """
    h = T / substeps
    p = x.p
    n_vec = np.array([0.0, 0.0, orbit.n])
    orbit_inc = quat.conjugate(quat.rate_increment(n_vec, h))

    def rate(y):
        out = np.empty(9)
        out[0:3] = psi(y[0:3], p)
        out[3:6] = y[6:9]
        out[6:9] = cw_accel(y[3:6], y[6:9], orbit)
        return out

    y = np.concatenate([x.omega, x.r_c, x.v_c])
    mu = x.mu
    for _ in range(substeps):
        w0 = y[0:3]
        k1 = rate(y)
        k2 = rate(y + 0.5 * h * k1)
        k3 = rate(y + 0.5 * h * k2)
        k4 = rate(y + h * k3)
        w_mid = y[0:3] + 0.25 * h * (k1[0:3] + k2[0:3])
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        w_avg = (w0 + 4.0 * w_mid + y[0:3]) / 6.0
        mu = quat.qmul_otimes(quat.qmul_otimes(quat.rate_increment(w_avg, h), mu), orbit_inc)
    return x.replace(mu=mu, omega=y[0:3], r_c=y[3:6], v_c=y[6:9])


def ekf_propagate(state, orbit, noise, T, substeps=10):
    """Time update over ``T`` seconds."""
    if T == 0:
        return state
    if T < 0:
        raise ValueError("cannot propagate backwards")
    x = state.x
    try:
        B = build_B(x.p)
    except SingularInertiaRatio as exc:
        raise FilterDivergence(f"filter divergence: {exc}") from exc
    F = build_F(x, orbit.n)
    # overflow is reported below as a divergence, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        if not np.all(np.isfinite(F)):
            raise FilterDivergence("filter divergence: non-finite state transition")
        Phi, Q = van_loan_discretize(F, B, noise.Sigma, T)
        P = Phi @ state.P @ Phi.T + Q
        P = 0.5 * (P + P.T)
        x_new = propagate_mean(x, orbit, T, substeps)
    if not (np.all(np.isfinite(x_new.to_array())) and np.all(np.isfinite(P))):
        raise FilterDivergence("filter divergence: non-finite state after propagation")
    return FilterState(x_new, P, state.t + T)


__all__ = [
    "NoiseConfig", "Measurement", "FilterState", "initial_state", "default_covariance",
    "default_measurement_cov", "psi_jacobians", "build_F", "build_B", "matrix_exponential",
    "van_loan_discretize", "predict_measurement", "innovation", "correct", "ekf_correct",
    "propagate_mean", "ekf_propagate",
]
