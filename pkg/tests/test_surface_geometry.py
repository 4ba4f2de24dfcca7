import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hc3kit.errors import GeometryError, HC3Error
from hc3kit.surface_geometry import (TraceParams, check_assumptions, gamma_hat, gamma_tilde,
                                     normal_and_shape, normal_curvature, shape_form,
                                     trace_gamma)
from hc3kit.surfaces import capsule, ellipsoid, expression_surface, sphere

from conftest import rotation

TILT = (math.sin(0.3), 0.0, math.cos(0.3))


# --- independent oracles -----------------------------------------------------

def outward_normal_implicit(x, axes):
    g = np.asarray(x) / np.asarray(axes, float) ** 2
    return g / np.linalg.norm(g)


def shape_fd(x, X, Y, axes, h=1e-6):
    """K(X, Y) = (D n_out)[X] . Y from the implicit-gradient Gauss map."""
    dn = (outward_normal_implicit(x + h * X, axes)
          - outward_normal_implicit(x - h * X, axes)) / (2 * h)
    return float(dn @ Y)


def plane_section_length(axes, beta, n=200_000):
    """Gamma of an ellipsoid is the section by the plane p.x = 0, p = beta / axes^2."""
    a = np.asarray(axes, float)
    p = np.asarray(beta, float) / a**2
    p /= np.linalg.norm(p)
    e1 = np.cross(p, [1.0, 0, 0] if abs(p[0]) < 0.9 else [0, 1.0, 0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    phi = np.linspace(0, 2 * np.pi, n + 1)
    d = np.outer(np.cos(phi), e1) + np.outer(np.sin(phi), e2)
    t = 1.0 / np.sqrt(np.sum((d / a) ** 2, axis=1))
    P = d * t[:, None]
    return float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))


def _chart_point(surf, u, v):
    return surf.point(u, v), surf.partials(u, v)


# --- local geometry -----------------------------------------------------------

class TestShape:
    def test_unit_sphere_identity(self):
        s = sphere()
        for u, v in [(0.7, 0.2), (1.3, 4.0), (2.2, 1.1)]:
            _, K = normal_and_shape(s, u, v)
            ru, rv = s.partials(u, v)
            G = np.array([[ru @ ru, ru @ rv], [rv @ ru, rv @ rv]])
            assert np.allclose(np.linalg.solve(G, K), np.eye(2), atol=1e-12)

    def test_sphere_scaling(self):
        s = sphere(2.5)
        _, K = normal_and_shape(s, 1.0, 1.0)
        ru, rv = s.partials(1.0, 1.0)
        G = np.array([[ru @ ru, ru @ rv], [rv @ ru, rv @ rv]])
        assert np.allclose(np.linalg.solve(G, K), np.eye(2) / 2.5, atol=1e-12)

    @pytest.mark.parametrize("axes", [(2.0, 1.0, 1.0), (1.5, 0.8, 0.6), (1.0, 2.0, 3.0)])
    def test_principal_curvatures_at_a_vertex(self, axes):
        a, b, c = axes
        s = ellipsoid(a, b, c)
        _, K = normal_and_shape(s, math.pi / 2, 0.0)
        ru, rv = s.partials(math.pi / 2, 0.0)
        G = np.array([[ru @ ru, ru @ rv], [rv @ ru, rv @ rv]])
        k = np.sort(np.linalg.eigvals(np.linalg.solve(G, K)).real)
        x = np.array([a, 0.0, 0.0])
        fd = sorted([shape_fd(x, np.array([0, 1.0, 0]), np.array([0, 1.0, 0]), axes),
                     shape_fd(x, np.array([0, 0, 1.0]), np.array([0, 0, 1.0]), axes)])
        assert np.allclose(k, sorted([a / b**2, a / c**2]), atol=1e-12)
        assert np.allclose(k, fd, atol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.2, 2.9), st.floats(0.0, 6.28), st.floats(0, 6.28), st.floats(0, 6.28))
    def test_shape_form_matches_gauss_map(self, u, v, t1, t2):
        axes = (1.7, 1.1, 0.7)
        s = ellipsoid(*axes)
        x = s.point(u, v)
        ru, rv = s.partials(u, v)
        e1 = ru / np.linalg.norm(ru)
        e2 = rv - (rv @ e1) * e1
        e2 /= np.linalg.norm(e2)
        X = math.cos(t1) * e1 + math.sin(t1) * e2
        Y = math.cos(t2) * e1 + math.sin(t2) * e2
        assert shape_form(s, u, v, X, Y) == pytest.approx(shape_fd(x, X, Y, axes), abs=1e-6)

    def test_degenerate_chart_point(self):
        with pytest.raises(GeometryError):
            sphere().interior_normal(0.0, 0.0)

    def test_bad_semi_axes(self):
        with pytest.raises(ValueError):
            ellipsoid(1.0, -1.0, 1.0)


# --- the tangency curve -------------------------------------------------------

class TestTrace:
    def test_sphere_equator(self, consts):
        (c,) = trace_gamma(sphere(), (0, 0, 1), constants=consts)
        assert c.length == pytest.approx(2 * math.pi, abs=1e-6)
        assert np.max(np.abs(c.points[:, 2])) < 1e-9
        assert np.allclose(np.abs(c.kn), 1.0, atol=1e-9)
        assert c.check_invariants()

    def test_sphere_radius_scaling(self):
        (c,) = trace_gamma(sphere(3.0), (0, 0, 1))
        assert np.allclose(np.abs(c.kn), 1 / 3.0, atol=1e-9)
        assert c.length == pytest.approx(6 * math.pi, abs=1e-5)

    def test_axis_aligned_ellipsoid_equator(self):
        (c,) = trace_gamma(ellipsoid(2.0, 1.0, 0.5), (0, 0, 1))
        assert np.max(np.abs(c.points[:, 2])) < 1e-9
        on = (c.points[:, 0] / 2) ** 2 + c.points[:, 1] ** 2
        assert np.allclose(on, 1.0, atol=1e-9)

    def test_tilted_length_against_plane_section(self):
        curves = trace_gamma(ellipsoid(2.0, 1.0, 1.0), TILT)
        assert len(curves) == 1
        ref = plane_section_length((2.0, 1.0, 1.0), TILT)
        assert curves[0].length == pytest.approx(ref, abs=1e-4)

    @pytest.mark.parametrize("a,c", [(1.0, 0.5), (1.0, 2.0), (1.5, 0.8)])
    def test_spheroid_equator_kn(self, a, c):
        (cv,) = trace_gamma(ellipsoid(a, a, c), (0, 0, 1))
        # meridian ellipse (a cos t, c sin t) has curvature a / c^2 at t = 0
        assert np.max(np.abs(np.abs(cv.kn) - a / c**2)) < 1e-6

    def test_reversed_orientation(self, consts):
        (c,) = trace_gamma(ellipsoid(2.0, 1.0, 1.0), TILT, constants=consts)
        r = c.reversed()
        assert np.allclose(r.kn, -c.kn[::-1])
        assert np.allclose(r.gamma_tilde, c.gamma_tilde[::-1])
        assert r.length == pytest.approx(c.length)

    def test_normal_curvature_pointwise(self):
        (c,) = trace_gamma(ellipsoid(2.0, 1.0, 1.0), TILT)
        for i in range(0, len(c), max(1, len(c) // 7)):
            u, v = c.uv[i]
            assert normal_curvature(c._surface, u, v, TILT, c.T[i]) == pytest.approx(
                c.kn[i], abs=1e-10)

    def test_off_gamma_rejected(self):
        with pytest.raises(GeometryError):
            normal_curvature(sphere(), 0.5, 0.0, (0, 0, 1))

    def test_csv_columns(self, tmp_path, consts):
        (c,) = trace_gamma(sphere(), (0, 0, 1), constants=consts)
        p = tmp_path / "g.csv"
        c.to_csv(p)
        head = p.read_text().splitlines()[0]
        assert head == "s,x,y,z,Tx,Ty,Tz,Nx,Ny,Nz,kn,tbeta,gamma_tilde"
        assert np.loadtxt(p, delimiter=",", skiprows=1).shape == (len(c), 13)

    def test_expression_surface_matches_builtin(self, consts):
        e = expression_surface("2*sin(u)*cos(v)", "sin(u)*sin(v)", "cos(u)")
        a = gamma_hat(trace_gamma(e, (0, 0, 1), constants=consts), consts)[0]
        b = gamma_hat(trace_gamma(ellipsoid(2, 1, 1), (0, 0, 1), constants=consts), consts)[0]
        assert a == pytest.approx(b, rel=1e-8)


# --- gamma functional ---------------------------------------------------------

class TestGammaTilde:
    def test_unit_kn(self, consts, sphere_gamma):
        assert gamma_tilde(1.0, 0.0, consts) == pytest.approx(sphere_gamma, rel=1e-15)
        assert gamma_tilde(-1.0, 0.0, consts) == pytest.approx(sphere_gamma, rel=1e-15)

    def test_zero_kn(self, consts):
        assert gamma_tilde(0.0, 0.4, consts) == 0.0

    def test_tangent_beta(self, consts):
        ref = 2 ** (-2 / 3) * consts.nu0_hat * consts.delta0 ** (1 / 3)
        assert gamma_tilde(1.0, 1.0, consts) == pytest.approx(ref, rel=1e-14)

    @given(st.floats(-5, 5), st.floats(-1, 1), st.floats(0.1, 10))
    def test_homogeneity_in_kn(self, kn, tb, lam):
        from hc3kit.model_operators import ModelConstants
        c = ModelConstants(0.59, 0.768, 0.5855, math.sqrt(0.5855), 0.9045, 0.35)
        assert gamma_tilde(lam * kn, tb, c) == pytest.approx(
            lam ** (2 / 3) * gamma_tilde(kn, tb, c), rel=1e-12, abs=1e-300)


class TestGammaHat:
    def test_sphere_constant_along_equator(self, consts, sphere_gamma):
        curves = trace_gamma(sphere(), (0, 0, 1), constants=consts)
        g = curves[0].gamma_tilde
        assert np.ptp(g) / g.mean() < 1e-8
        val, where = gamma_hat(curves, consts)
        assert val == pytest.approx(sphere_gamma, rel=1e-8)
        (cid, (a, b)), = where
        assert a == pytest.approx(0.0, abs=1e-9) and b == pytest.approx(curves[0].length, rel=1e-9)

    def test_radius_two_scaling(self, consts):
        g1 = gamma_hat(trace_gamma(sphere(1.0), (0, 0, 1), constants=consts), consts)[0]
        g2 = gamma_hat(trace_gamma(sphere(2.0), (0, 0, 1), constants=consts), consts)[0]
        assert g2 / g1 == pytest.approx(2 ** (-2 / 3), rel=1e-9)

    def test_ellipsoid_minimisers_dense_oracle(self, consts):
        curves = trace_gamma(ellipsoid(2, 1, 1), (0, 0, 1), constants=consts)
        val, where = gamma_hat(curves, consts)
        # equator (2 cos t, sin t, 0): k_n in the e_z direction is 1 / |(x/a^2, y/b^2)|
        t = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
        x, y = 2 * np.cos(t), np.sin(t)
        kn = 1.0 / np.hypot(x / 4, y)
        k = np.flatnonzero(kn <= kn.min() * (1 + 1e-9))
        oracle_pts = {(round(float(x[i]), 4), round(float(y[i]), 4)) for i in k}
        assert oracle_pts == {(0.0, 1.0), (0.0, -1.0)}
        assert val == pytest.approx(gamma_tilde(kn.min(), 0.0, consts), rel=1e-8)
        c = curves[0]
        got = []
        for cid, (a, b) in where:
            assert abs(b - a) < 1e-6 * c.length
            p = np.array([np.interp(a, c.s, c.points[:, j]) for j in range(3)])
            got.append(p)
        assert len(got) == 2
        # compare the ellipse parameter; chord interpolation shrinks the radius
        angles = sorted(math.atan2(p[1], p[0] / 2) for p in got)
        assert angles == pytest.approx([-math.pi / 2, math.pi / 2], abs=1e-6)

    @settings(max_examples=4, deadline=None)
    @given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 1)),
           st.floats(0.1, 3.0))
    def test_rotation_invariance(self, axis, angle):
        from hc3kit.model_operators import compute_model_constants
        consts = compute_model_constants()
        Q = rotation(axis, angle)
        e = ellipsoid(2, 1, 1)
        ref = gamma_hat(trace_gamma(e, TILT, constants=consts), consts)[0]
        rot = gamma_hat(trace_gamma(e.rotated(Q), Q @ np.array(TILT), constants=consts),
                        consts)[0]
        assert rot == pytest.approx(ref, rel=1e-8)

    def test_empty_gamma(self, consts):
        with pytest.raises(HC3Error):
            gamma_hat([], consts)


class TestAssumptions:
    def test_sphere(self, consts):
        rep = check_assumptions(sphere(), (0, 0, 1), consts)
        assert rep.all_pass
        assert rep.tangency_point_count == 0
        assert rep.details[0]["gamma_tilde_nonconstant"] is False

    def test_ellipsoid(self, consts):
        rep = check_assumptions(ellipsoid(2, 1, 1), (0, 0, 1), consts)
        assert rep.all_pass
        assert rep.details[0]["gamma_tilde_nonconstant"] is True

    def test_tilted_ellipsoid_passes(self, consts):
        assert check_assumptions(ellipsoid(2, 1, 1), TILT, consts).all_pass

    def test_capsule_with_cylinder_along_beta_fails(self, consts):
        rep = check_assumptions(capsule(1.0, 1.0), (0, 0, 1), consts)
        assert rep.gamma_regular is False
        assert not rep.all_pass

    def test_report_json(self, consts):
        import json
        rep = check_assumptions(sphere(), (0, 0, 1), consts)
        d = json.loads(rep.to_json())
        assert d["all_pass"] is True and d["kn_threshold"] == 1e-6

    def test_zero_beta(self, consts):
        with pytest.raises(ValueError):
            check_assumptions(sphere(), (0, 0, 0), consts)
