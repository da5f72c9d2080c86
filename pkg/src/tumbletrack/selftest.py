"""Built-in numerical checks run by ``tumbletrack selftest``.

Each check compares a production routine against an independent oracle
(brute force, finite differences, closed-form results or conservation
laws). Setting ``TUMBLETRACK_SELFTEST_TOL_SCALE`` multiplies every
tolerance, e.g. ``1e-12`` to confirm that failures are reported.
"""

import os
import time

import numpy as np

from . import dynamics as dyn
from . import ekf, quat
from .icp import horn_align
from .kernels import available_backends

TOL_ENV = "TUMBLETRACK_SELFTEST_TOL_SCALE"


def tol_scale():
    raw = os.environ.get(TOL_ENV, "")
    return float(raw) if raw.strip() else 1.0


def random_state(rng, r_max=10.0):
    """Random filter state; ``r_c`` stays within ``r_max`` metres of the chaser."""
    r_c = rng.normal(size=3)
    r_c *= r_max * rng.uniform(0.1, 1.0) / np.linalg.norm(r_c)
    return dyn.StateVector(
        mu=quat.random_quaternion(rng), omega=0.3 * rng.normal(size=3), p=rng.uniform(-0.9, 0.9, 3),
        r_c=r_c, v_c=0.1 * rng.normal(size=3), rho=0.2 * rng.normal(size=3),
        eta=quat.random_quaternion(rng),
    )


def error_rate(xb, dx, orbit):
    """Time derivative of the error state at ``fold(xb, dx)``, relative to ``xb``."""
    x = ekf.fold(xb, dx)
    f = dyn.state_derivative(x, orbit)
    fb = dyn.state_derivative(xb, orbit)
    # d/dt (mu (x) mu_bar*) with both quaternions moving
    ddmu = quat._otimes_raw(f[0:4], quat.conjugate(xb.mu)) + quat._otimes_raw(x.mu, quat.conjugate(fb[0:4]))
    out = np.zeros(ekf.N_ERR)
    out[ekf.MU] = ddmu[:3]
    out[ekf.OMEGA] = f[4:7] - fb[4:7]
    out[ekf.RC] = f[10:13] - fb[10:13]
    out[ekf.VC] = f[13:16] - fb[13:16]
    return out


def measurement_map(xb, dx):
    """Measurement ``[r; vec(eta_bar* (x) q (x) mu_bar*)]`` at ``fold(xb, dx)``."""
    pose = ekf.fold(xb, dx).pose()
    dq = quat._otimes_raw(quat._otimes_raw(quat.conjugate(xb.eta), pose.rotation), quat.conjugate(xb.mu))
    return np.concatenate([pose.translation, dq[:3]])


def central_jacobian(fun, n, h=1e-6):
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((fun(e) - fun(-e)) / (2 * h))
    return np.array(cols).T


def row_errors(A, J):
    """Relative row-wise mismatch, skipping rows that are zero in both."""
    out = []
    for a, j in zip(A, J):
        scale = max(np.linalg.norm(a), np.linalg.norm(j))
        if scale > 0:
            out.append(np.linalg.norm(a - j) / scale)
    return np.array(out)


def check_horn(n_trials=100, m=50, seed=11):
    rng = np.random.default_rng(seed)
    worst_r = worst_t = 0.0
    for _ in range(n_trials):
        q = quat.random_quaternion(rng)
        t = rng.normal(size=3)
        U = rng.normal(size=(m, 3))
        V = U @ quat.to_rotation(q).T + t
        q_hat, t_hat, _ = horn_align(U, V)
        worst_r = max(worst_r, quat.geodesic_angle(q, q_hat))
        worst_t = max(worst_t, np.linalg.norm(t - t_hat))
    return max(worst_r, worst_t), 1e-9


def check_kernels(seed=5):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(400, 3))
    pts[200:210] = pts[0]  # duplicates: ties resolve to the lowest index
    queries = np.vstack([rng.normal(size=(300, 3)), pts[:20]])
    d2_all = ((queries[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    idx_ref = np.argmin(d2_all, axis=1)
    mismatches = 0
    worst = 0.0
    for KD, eigh4 in available_backends().values():
        idx, _ = KD(pts).query(queries)
        mismatches += int(np.sum(idx != idx_ref))
        W = rng.normal(size=(4, 4))
        W = W + W.T
        vals, vecs = eigh4(W)
        worst = max(worst, np.abs(np.sort(vals) - np.linalg.eigvalsh(W)).max(),
                    np.abs(W @ vecs - vecs * vals).max())
    return max(float(mismatches), worst), 1e-10


def check_conservation(duration=60.0, dt=0.01):
    orbit = dyn.OrbitParams(0.0)
    tr = dyn.TargetTruth(quat.IDENTITY, [0.1, 0.2, 0.15], [0, 0, 10], [0, 0, 0], [0, 0, 0],
                         quat.IDENTITY, [4.0, 8.0, 5.0])
    e0, h0 = tr.energy(), tr.momentum_norm()
    tr = dyn.integrate_truth(tr, orbit, duration, dt)
    return max(abs(tr.energy() / e0 - 1), abs(tr.momentum_norm() / h0 - 1)), 1e-7


def check_jacobian_F(n_states=20, seed=21):
    rng = np.random.default_rng(seed)
    orbit = dyn.OrbitParams(0.0011)
    worst = 0.0
    for _ in range(n_states):
        xb = random_state(rng)
        J = central_jacobian(lambda e: error_rate(xb, e, orbit), ekf.N_ERR)
        worst = max(worst, row_errors(ekf.build_F(xb, orbit.n), J).max())
    return worst, 1e-5


def check_jacobian_H(n_states=20, seed=22):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_states):
        xb = random_state(rng)
        st = ekf.FilterState(xb, np.eye(ekf.N_ERR))
        J = central_jacobian(lambda e: measurement_map(xb, e), ekf.N_ERR)
        worst = max(worst, row_errors(ekf.predict_measurement(st)[1], J).max())
    return worst, 1e-5


def check_van_loan(T=0.5, sigma_f=0.03):
    B = ekf.build_B(np.zeros(3))
    Sigma = np.diag([1e-3] * 3 + [sigma_f**2] * 3)
    Phi, Q = ekf.van_loan_discretize(np.zeros((21, 21)), B, Sigma, T)
    err0 = max(np.abs(Phi - np.eye(21)).max(), np.abs(Q - B @ Sigma @ B.T * T).max())
    F = np.zeros((21, 21))
    F[ekf.RC, ekf.VC] = np.eye(3)
    _, Q = ekf.van_loan_discretize(F, B, Sigma, T)
    s2 = sigma_f**2
    err1 = max(abs(Q[9, 9] - s2 * T**3 / 3), abs(Q[9, 12] - s2 * T**2 / 2), abs(Q[12, 12] - s2 * T))
    return max(err0, err1), 1e-12


CHECKS = [
    ("horn alignment recovery", check_horn),
    ("kd-tree and Jacobi kernels vs brute force", check_kernels),
    ("torque-free energy/momentum conservation", check_conservation),
    ("F vs finite differences", check_jacobian_F),
    ("H vs finite differences", check_jacobian_H),
    ("van Loan closed forms", check_van_loan),
]


def run_all(verbose=True):
    scale = tol_scale()
    ok_all = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            err, tol = fn()
            ok = bool(err <= tol * scale)
            detail = f"err {err:.3e}  tol {tol * scale:.1e}"
        except Exception as exc:  # a crash is a failed check, not an aborted run
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<44} {detail}  ({time.perf_counter() - t0:.2f} s)")
    if verbose:
        print("selftest:", "all checks passed" if ok_all else "FAILURES")
    return ok_all
