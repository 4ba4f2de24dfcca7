import math

import numpy as np
import pytest

from hc3kit.model_operators import compute_model_constants


@pytest.fixture(scope="session")
def consts():
    return compute_model_constants()


@pytest.fixture(scope="session")
def sphere_gamma(consts):
    return 2 ** (-2 / 3) * consts.nu0_hat * consts.delta0 ** (2 / 3)


def rotation(axis, angle):
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, float)
    k = k / np.linalg.norm(k)
    Kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * Kx + (1 - math.cos(angle)) * Kx @ Kx


# --- shared Ginzburg-Landau runs (each takes seconds to tens of seconds) ------

GL_KAPPA = 2.0
GL_H_NONTRIVIAL = 3.5


@pytest.fixture(scope="session")
def gl_domain():
    from hc3kit.gl_probe import default_gl_domain
    return default_gl_domain()


@pytest.fixture(scope="session")
def gl_normal_regime(consts, gl_domain):
    """Random init above the onset field: H = 1.2 kappa / theta0."""
    from hc3kit.gl_probe import minimize
    H = 1.2 * GL_KAPPA / consts.theta0
    return minimize(GL_KAPPA, H, "random", gl_domain, seed=0)


@pytest.fixture(scope="session")
def gl_nontrivial(gl_domain):
    from hc3kit.gl_probe import minimize
    return minimize(GL_KAPPA, GL_H_NONTRIVIAL, "trial", gl_domain)


@pytest.fixture(scope="session")
def gl_estimate(gl_domain):
    from hc3kit.gl_probe import estimate_hc3_mod
    return estimate_hc3_mod(GL_KAPPA, (3.4, 4.2), 12, gl_domain)


@pytest.fixture(scope="session")
def gl_spectral_root(gl_domain):
    from hc3kit.gl_probe import spectral_root
    return spectral_root(GL_KAPPA, (3.4, 4.2), gl_domain)


@pytest.fixture(scope="session")
def gl_deep(gl_domain):
    """Well below onset, where max |psi| exceeds 1/2."""
    from hc3kit.gl_probe import minimize
    return minimize(GL_KAPPA, 2.0, "trial", gl_domain)


def dense_mu(s, n=8192, t_max=20.0):
    """Vertex-centred oracle for the half-line Neumann problem.

    The ghost point ``u_{-1} = u_1`` gives a boundary row with half mass;
    rescaling ``u_0`` by sqrt(2) makes the matrix symmetric tridiagonal.
    """
    from scipy.linalg import eigh_tridiagonal
    h = t_max / n
    t = h * np.arange(n)
    d = 2.0 / h**2 + (t - s) ** 2
    off = np.full(n - 1, -1.0 / h**2)
    off[0] = -math.sqrt(2.0) / h**2
    w = eigh_tridiagonal(d, off, select="i", select_range=(0, 0), eigvals_only=True,
                         tol=1e-300)
    return float(w[0])


# --- acceptance summary lines -----------------------------------------------

ACCEPTANCE_LINES = []


def acceptance_line(number, title, ok, detail):
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
