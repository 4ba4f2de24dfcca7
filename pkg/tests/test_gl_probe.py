import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hc3kit.gl_probe import (GLState, _projectors, _random_state, dump_state, energy_mod,
                             f_omega, gradient, minimize, minimizer_inequality_check,
                             normal_state, spectral_root, trial_state, write_transition_csv)
from hc3kit.magnetic_eigensolver import DiscreteDomain, build_operator, lowest_eigenpair
from hc3kit.errors import BracketError

from conftest import GL_H_NONTRIVIAL, GL_KAPPA


@pytest.fixture(scope="module")
def small():
    return DiscreteDomain.disc_cylinder(1.5, 1.0, 8, 32, 8)


class TestEnergy:
    def test_normal_state_zero(self, gl_domain):
        assert energy_mod(normal_state(gl_domain, 2.0, 3.0)).total == 0.0

    def test_constant_order_parameter(self, gl_domain):
        st_ = normal_state(gl_domain, 1.0, 0.0)
        st_.psi[:] = 1.0
        vol = gl_domain.lattice.volumes.sum()
        assert energy_mod(st_).total == pytest.approx(-vol / 2, rel=1e-13)
        assert vol == pytest.approx(math.pi * 4 * 1.6, rel=1e-12)

    @pytest.mark.parametrize("H", [0.5, 2.0, 3.5, 4.5])
    def test_trial_state_identity(self, gl_domain, H):
        k = GL_KAPPA
        st_, lam, psi1 = trial_state(gl_domain, k, H)
        eta = abs(st_.psi[0] / psi1[0])
        vol = gl_domain.lattice.volumes
        l4 = np.sum(vol * np.abs(psi1) ** 4)
        ref = eta**2 * (lam - k * k) + 0.5 * k * k * eta**4 * l4
        assert energy_mod(st_).total == pytest.approx(ref, rel=1e-10)

    def test_kinetic_is_eigensolver_form(self, small):
        st_ = _random_state(small, 2.0, 1.5, seed=5)
        st_.a[:] = 0.0
        op = build_operator(small, 3.0)
        assert energy_mod(st_).kinetic == pytest.approx(op.form(st_.psi), rel=1e-13)

    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 10_000))
    def test_gauge_invariance(self, seed):
        dom = DiscreteDomain.disc_cylinder(1.5, 1.0, 8, 32, 8)
        st_ = _random_state(dom, 2.0, 1.5, seed)
        lat = dom.lattice
        chi = np.random.default_rng(seed).uniform(-2, 2, lat.n_cells)
        kH = st_.kappa * st_.H
        g = GLState(st_.psi * np.exp(1j * chi),
                    st_.a - (chi[lat.head] - chi[lat.tail]) / kH,
                    st_.kappa, st_.H, dom)
        # gradient links carry no circulation, so every term is unchanged
        assert energy_mod(g).total == pytest.approx(energy_mod(st_).total, rel=1e-11)


class TestGradient:
    def test_directional_derivative_fd(self, small):
        st_ = _random_state(small, 2.0, 2.5, seed=1)
        gpsi, ga = gradient(st_)
        Pa, _ = _projectors(small.lattice)
        rng = np.random.default_rng(0)
        n, m = small.lattice.n_cells, small.lattice.n_links
        worst = 0.0
        for _ in range(20):
            dpsi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            da = Pa(rng.standard_normal(m))
            exact = float(np.real(np.vdot(gpsi, dpsi)) + ga @ da)
            h = 1e-6

            def E(t):
                return energy_mod(GLState(st_.psi + t * dpsi, st_.a + t * da,
                                          st_.kappa, st_.H, small)).total

            fd = (E(h) - E(-h)) / (2 * h)
            worst = max(worst, abs(fd - exact) / abs(exact))
        assert worst <= 1e-6

    def test_projected_gradient_divergence_free(self, small):
        st_ = _random_state(small, 2.0, 2.5, seed=2)
        _, ga = gradient(st_)
        lat = small.lattice
        div = lat.incidence().T @ (lat.cond * ga)
        assert np.max(np.abs(div)) < 1e-10 * max(1, np.max(np.abs(ga)))

    def test_random_state_is_coulomb(self, small):
        st_ = _random_state(small, 2.0, 2.5, seed=3)
        assert np.max(np.abs(st_.divergence())) < 1e-12


class TestMinimize:
    def test_normal_init_is_critical(self, gl_domain):
        r = minimize(2.0, 3.0, "normal", gl_domain)
        assert r.converged and r.energy.total == 0.0
        assert r.iterations <= 1

    def test_above_onset_goes_normal(self, gl_normal_regime):
        r = gl_normal_regime
        assert r.converged
        assert np.max(np.abs(r.state.psi)) < 1e-4
        assert r.energy.total >= -1e-8

    def test_below_onset_nontrivial(self, gl_domain, gl_nontrivial):
        lam = lowest_eigenpair(build_operator(gl_domain, GL_KAPPA * GL_H_NONTRIVIAL)).eigenvalue
        assert lam < GL_KAPPA**2
        assert gl_nontrivial.converged
        assert gl_nontrivial.energy.total < 0

    def test_minimizer_stays_coulomb(self, gl_nontrivial):
        assert np.max(np.abs(gl_nontrivial.state.divergence())) < 1e-10

    def test_descent_lowers_energy(self, gl_nontrivial, gl_deep):
        for r in (gl_nontrivial, gl_deep):
            assert r.energy.total <= r.history["initial_total"]

    def test_bad_init(self, small):
        with pytest.raises(ValueError):
            minimize(2.0, 1.0, "sideways", small)

    def test_deterministic(self, small):
        a = minimize(2.0, 1.5, "random", small, seed=4, maxiter=50)
        b = minimize(2.0, 1.5, "random", small, seed=4, maxiter=50)
        assert np.array_equal(a.state.psi, b.state.psi) and np.array_equal(a.state.a, b.state.a)


class TestInequalities:
    def test_normal_state(self, gl_domain):
        rep = minimizer_inequality_check(normal_state(gl_domain, 2.0, 3.0))
        assert rep.all_pass
        for part in (rep.linfty, rep.quad_form, rep.curl, rep.l4_l2):
            assert part["lhs"] == 0.0

    def test_nontrivial_minimizer(self, gl_nontrivial, gl_deep):
        assert gl_deep.converged
        assert minimizer_inequality_check(gl_nontrivial.state).all_pass
        assert minimizer_inequality_check(gl_deep.state).all_pass

    def test_doubled_order_parameter_fails(self, gl_deep):
        st_ = gl_deep.state
        assert np.max(np.abs(st_.psi)) > 0.5
        rep = minimizer_inequality_check(st_.scaled(2.0))
        assert not rep.linfty["pass"] and not rep.all_pass


class TestCriticalField:
    def test_spectral_root_bracket_error(self, small):
        with pytest.raises(BracketError):
            spectral_root(2.0, (0.1, 0.2), small)

    def test_f_omega(self, small):
        F = f_omega(small)
        x = small.lattice.centres
        assert np.allclose(F[:, 0], -x[:, 1] / 2) and np.allclose(F[:, 2], 0)
        with pytest.raises(ValueError):
            f_omega(DiscreteDomain.box(1, 1, 1, 8, 8, 8))


class TestOutput:
    def test_dump(self, tmp_path, gl_nontrivial):
        ineq = minimizer_inequality_check(gl_nontrivial.state)
        base = tmp_path / "s"
        dump_state(gl_nontrivial, base, ineq)
        psi = np.fromfile(f"{base}.psi", "<c16")
        a = np.fromfile(f"{base}.a", "<f8")
        assert np.array_equal(psi, gl_nontrivial.state.psi)
        assert np.array_equal(a, gl_nontrivial.state.a)
        meta = json.loads((tmp_path / "s.json").read_text())
        assert meta["inequalities"]["all_pass"] is True
        assert meta["energy"]["total"] == gl_nontrivial.energy.total

    def test_transition_csv(self, tmp_path):
        p = tmp_path / "t.csv"
        write_transition_csv([(3.9, 0.0, False), (3.5, -0.1, True)], p)
        assert p.read_text().splitlines() == [
            "H,best_total,nontrivial_flag", "3.5,-0.10000000000000001,1", "3.8999999999999999,0,0"]
