import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tumbletrack import dynamics as dyn
from tumbletrack import quat
from tumbletrack.errors import NonPhysicalInertia, SingularGravity, SingularInertiaRatio

I_C = np.array([4.0, 8.0, 5.0])


@st.composite
def inertia_triples(draw):
    a = draw(st.floats(0.1, 100.0))
    b = draw(st.floats(0.1, 100.0))
    lo, hi = abs(a - b), a + b
    # keep clear of the flat-body limit, where p_x -> -1 and J(p) is singular
    margin = 1e-6 * hi
    c = draw(st.floats(lo + margin, hi - margin))
    return np.array([a, b, c])


def naive_gravity(r_c, v_c, n, mu_e=dyn.MU_EARTH):
    """Textbook relative acceleration in a rotating frame about a circular orbit."""
    R = (mu_e / n**2) ** (1 / 3)
    r_e = np.array([R, 0, 0])
    nv = np.array([0, 0, n])
    r = r_e + r_c
    return (-mu_e * r / np.linalg.norm(r) ** 3 + mu_e * r_e / R**3
            - 2 * np.cross(nv, v_c) - np.cross(nv, np.cross(nv, r_c)))


def cw_solution(r0, v0, n, t):
    """Closed-form Clohessy-Wiltshire solution (x radial, y along-track)."""
    x0, y0, z0 = r0
    vx, vy, vz = v0
    s, c = np.sin(n * t), np.cos(n * t)
    x = (4 - 3 * c) * x0 + s / n * vx + 2 / n * (1 - c) * vy
    y = 6 * (s - n * t) * x0 + y0 - 2 / n * (1 - c) * vx + (4 * s - 3 * n * t) / n * vy
    z = c * z0 + s / n * vz
    return np.array([x, y, z])


class TestInertia:
    def test_replica_values(self):
        assert tuple(dyn.inertia_to_ratios(I_C)) == (0.75, 0.125, -0.8)

    @given(inertia_triples())
    def test_ratio_identity(self, I):
        px, py, pz = dyn.inertia_to_ratios(I)
        assert abs(px + py + pz + px * py * pz) < 1e-12
        assert all(abs(v) <= 1 for v in (px, py, pz))

    @pytest.mark.parametrize("I", [[0, 1, 1], [-1, 2, 2], [1, 1, 3]])
    def test_rejects_non_physical(self, I):
        with pytest.raises(NonPhysicalInertia):
            dyn.check_inertia(I)

    def test_torque_gain(self):
        np.testing.assert_allclose(dyn.torque_gain([0.75, 0.125, -0.8]), np.diag([1, 0.5, 0.8]))
        np.testing.assert_array_equal(dyn.torque_gain(np.zeros(3)), np.eye(3))
        with pytest.raises(SingularInertiaRatio):
            dyn.torque_gain([-1.0, 0, 0])

    @given(inertia_triples())
    def test_torque_gain_equals_inertia_ratio(self, I):
        # J(p) must equal diag(I_x / I_i) for physical ratios
        np.testing.assert_allclose(np.diag(dyn.torque_gain(dyn.inertia_to_ratios(I))), I[0] / I, rtol=1e-9)

    def test_psi_matches_euler_equations(self, rng):
        for _ in range(20):
            w = rng.normal(size=3)
            Iw = I_C * w
            wdot = -np.cross(w, Iw) / I_C
            np.testing.assert_allclose(dyn.psi(w, dyn.inertia_to_ratios(I_C)), wdot, atol=1e-14)


class TestTranslation:
    def test_stable_gravity_form(self, rng):
        orbit = dyn.OrbitParams(0.0011)
        for _ in range(50):
            r, v = rng.normal(scale=100, size=3), rng.normal(size=3)
            np.testing.assert_allclose(dyn.cw_accel(r, v, orbit), naive_gravity(r, v, 0.0011),
                                       rtol=1e-6, atol=1e-12)
        assert np.all(dyn.cw_accel(np.zeros(3), np.zeros(3), orbit) == 0.0)

    def test_reduces_to_linear_near_origin(self, rng):
        orbit = dyn.OrbitParams(0.0011)
        r, v = rng.normal(scale=5, size=3), rng.normal(scale=0.01, size=3)
        lin = dyn.cw_linear_accel(r, v, 0.0011)
        # the neglected gravity terms are O(n^2 |r|^2 / R)
        bound = 3 * 0.0011**2 * (r @ r) / orbit.r_e[0]
        assert np.abs(dyn.cw_accel(r, v, orbit) - lin).max() < bound

    def test_no_gravity_when_n_zero(self):
        np.testing.assert_array_equal(dyn.cw_accel([1.0, 2, 3], [0.1, 0, 0], dyn.OrbitParams(0.0)), 0.0)

    def test_singular_gravity(self):
        orbit = dyn.OrbitParams(0.0011)
        with pytest.raises(SingularGravity):
            dyn.cw_accel(-orbit.r_e, np.zeros(3), orbit)

    def test_truth_follows_cw_solution(self):
        n = 0.0011
        orbit = dyn.OrbitParams(n)
        r0, v0 = np.array([2.0, 8.0, -1.0]), np.array([0.001, -0.002, 0.0005])
        tr = dyn.TargetTruth(quat.IDENTITY, np.zeros(3), r0, v0, np.zeros(3), quat.IDENTITY, I_C)
        tr = dyn.integrate_truth(tr, orbit, 600.0, dt=0.5)
        np.testing.assert_allclose(tr.r_c, cw_solution(r0, v0, n, 600.0), atol=2e-4)


class TestTruth:
    def test_energy_and_momentum_conserved(self):
        tr = dyn.TargetTruth(quat.IDENTITY, [0.1, 0.2, 0.15], [0, 5, 0], np.zeros(3), np.zeros(3),
                             quat.IDENTITY, I_C)
        e0, h0 = tr.energy(), tr.momentum_norm()
        tr = dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 30.0, 0.01)
        assert abs(tr.energy() / e0 - 1) < 1e-9
        assert abs(tr.momentum_norm() / h0 - 1) < 1e-9

    def test_inertial_momentum_direction_fixed(self):
        # with n = 0 frame {A} is inertial: A(mu) I omega is constant
        tr = dyn.TargetTruth(quat.IDENTITY, [0.3, 0.1, -0.2], [0, 5, 0], np.zeros(3), np.zeros(3),
                             quat.IDENTITY, I_C)
        h0 = quat.to_rotation(tr.mu) @ (I_C * tr.omega)
        tr = dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 20.0, 0.01)
        np.testing.assert_allclose(quat.to_rotation(tr.mu) @ (I_C * tr.omega), h0, atol=1e-8)

    def test_principal_axis_spin(self):
        w = np.array([0.0, 0.0, 0.4])
        tr = dyn.TargetTruth(quat.IDENTITY, w, [0, 5, 0], np.zeros(3), np.zeros(3), quat.IDENTITY, I_C)
        out = dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 5.0, 0.01)
        np.testing.assert_allclose(out.mu, quat.propagate_const_rate(quat.IDENTITY, w, 5.0), atol=1e-12)

    def test_zero_horizon_and_bad_step(self):
        tr = dyn.TargetTruth(quat.IDENTITY, np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3), quat.IDENTITY, I_C)
        assert dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 0.0) is tr
        with pytest.raises(ValueError):
            dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 1.0, dt=0.0)

    def test_process_noise_reproducible(self):
        tr = dyn.TargetTruth(quat.IDENTITY, [0.1, 0, 0], np.zeros(3), np.zeros(3), np.zeros(3), quat.IDENTITY, I_C)
        a = dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 1.0, rng=np.random.default_rng(1), sigma_tau=1e-3)
        b = dyn.integrate_truth(tr, dyn.OrbitParams(0.0), 1.0, rng=np.random.default_rng(1), sigma_tau=1e-3)
        np.testing.assert_array_equal(a.omega, b.omega)
        assert not np.array_equal(a.omega, tr.omega)


class TestStateVector:
    def test_roundtrip(self, rng):
        a = rng.normal(size=23)
        np.testing.assert_array_equal(dyn.StateVector.from_array(a).to_array(), a)

    def test_pose_composition(self, rng):
        x = dyn.StateVector(mu=quat.random_quaternion(rng), r_c=rng.normal(size=3),
                            rho=rng.normal(size=3), eta=quat.random_quaternion(rng))
        p = x.pose()
        # {C} to {A} is {C} to {B} followed by {B} to {A}
        np.testing.assert_allclose(quat.to_rotation(p.rotation),
                                   quat.to_rotation(x.mu) @ quat.to_rotation(x.eta), atol=1e-12)
        np.testing.assert_allclose(p.translation, x.r_c + quat.to_rotation(x.mu) @ x.rho)

    def test_attitude_rate_frame_terms(self, rng):
        # A(mu) evolves as A (omega x) - (n x) A
        mu, w, n = quat.random_quaternion(rng), rng.normal(size=3), np.array([0, 0, 0.3])
        h = 1e-6
        dmu = dyn.attitude_rate(mu, w, n)
        dA = (quat.to_rotation(mu + h * dmu) - quat.to_rotation(mu - h * dmu)) / (2 * h)
        A = quat.to_rotation(mu)
        np.testing.assert_allclose(dA, A @ quat.skew(w) - quat.skew(n) @ A, atol=1e-8)
