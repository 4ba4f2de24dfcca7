"""Universal constants from the reduced model operators.

Three families are solved here:

* the de Gennes family ``h(s) = D_t^2 + (t - s)^2`` on the half-line with a
  Neumann condition at ``t = 0``; its band function ``mu(s)`` gives
  ``theta0 = min mu``, the argmin ``s0`` and ``delta0 = mu''(s0) / 2``;
* the tilted half-space model, reduced to the 2D operator
  ``D_s^2 + D_t^2 + (t cos(theta) - s sin(theta))^2`` on ``{t > 0}``, whose
  ground energy is ``sigma(theta)``;
* the Montgomery family ``D_x^2 + (x^2 - xi)^2`` on the line, whose minimal
  ground energy over ``xi`` is ``nu0_hat``.

All 1D problems use cell-centred second-order differences, so eigenvalue
errors expand in even powers of the spacing and one Richardson step
``(4 l(h/2) - l(h)) / 3`` removes the leading term.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse.linalg import eigsh

from .errors import BracketError, ConvergenceError, HC3Error, TruncationWarning

__all__ = [
    "DiscParams1D",
    "Disc2D",
    "MontgomeryDisc",
    "Eigenpair",
    "ModelConstants",
    "SpectralCurve",
    "de_gennes_mu",
    "de_gennes_dmu",
    "find_theta0",
    "compute_delta0",
    "sigma",
    "montgomery_lambda",
    "montgomery_nu0",
    "compute_model_constants",
    "mu_curve",
    "sigma_curve",
    "montgomery_curve",
]

# Only used to centre the 2D box; never enters a reported value.
_S0_CENTRE = 0.7682


@dataclass(frozen=True)
class DiscParams1D:
    """Half-line truncation ``[0, t_max]`` with ``n`` cells, Dirichlet at ``t_max``."""

    t_max: float = 20.0
    n: int = 8192
    richardson: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.n < 16:
            raise ValueError(f"n must be at least 16, got {self.n}")

    def refined(self, factor=2):
        return DiscParams1D(self.t_max, self.n * factor, self.richardson)


@dataclass(frozen=True)
class Disc2D:
    """Grid and box controls for the reduced tilted half-space operator.

    ``h`` is the normal (t) spacing; the tangential spacing is ``2 h`` scaled
    up with the tangential localisation length.  ``t_max``/``s_half`` override
    the automatic box.  ``solver_tol`` is the truncation-sensitivity threshold;
    the doubled-box comparison runs at spacing ``2 h``.
    """

    h: float = 0.15
    richardson: bool = True
    t_max: float | None = None
    s_half: float | None = None
    check_truncation: bool = True
    solver_tol: float = 2e-3


@dataclass(frozen=True)
class MontgomeryDisc:
    """Line truncation ``[-x_max, x_max]`` (Dirichlet) and the xi search window."""

    x_max: float = 6.0
    n: int = 4000
    window: tuple[float, float] = (-1.0, 2.0)
    n_scan: int = 31
    tol: float = 1e-9
    richardson: bool = True

    def __post_init__(self):
        if self.n < 16 or not self.x_max > 0:
            raise ValueError("invalid Montgomery discretisation")
        if not self.window[0] < self.window[1]:
            raise ValueError("window must be increasing")

    def refined(self, factor=2):
        return MontgomeryDisc(self.x_max, self.n * factor, self.window,
                              self.n_scan, self.tol, self.richardson)


class Eigenpair(NamedTuple):
    value: float
    grid: np.ndarray
    vector: np.ndarray


@dataclass
class SpectralCurve:
    """A sampled scalar function of one parameter."""

    grid: np.ndarray
    values: np.ndarray
    solver_tol: float
    description: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ValueError("grid and values must be 1D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# {self.description} solver_tol={self.solver_tol:.17g}\n")
            fh.write("parameter,value\n")
            for x, y in zip(self.grid, self.values):
                fh.write(f"{x:.17g},{y:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            head = fh.readline()
        if not head.startswith("# "):
            raise ValueError(f"{path}: missing curve header")
        desc, _, tol = head[2:].strip().rpartition(" solver_tol=")
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        return cls(data[:, 0], data[:, 1], float(tol), desc)


@dataclass
class ModelConstants:
    theta0: float
    s0: float
    delta0: float
    alpha1: float
    nu0_hat: float
    xi_min: float
    resolutions: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.5 < self.theta0 < 1.0:
            raise HC3Error(f"theta0={self.theta0} outside (1/2, 1)")
        if not 0.0 < self.delta0 < 1.0:
            raise HC3Error(f"delta0={self.delta0} outside (0, 1)")
        if not self.s0 > 0 or not self.nu0_hat > 0:
            raise HC3Error("s0 and nu0_hat must be positive")
        if abs(self.alpha1 - math.sqrt(self.delta0)) > 1e-12:
            raise HC3Error("alpha1 must equal sqrt(delta0)")

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source):
        if isinstance(source, str) and source.lstrip().startswith("{"):
            data = json.loads(source)
        else:
            with open(source) as fh:
                data = json.load(fh)
        return cls(**data)


# ---------------------------------------------------------------------------
# de Gennes family


def _half_line_ground(s, t_max, n):
    h = t_max / n
    t = (np.arange(n) + 0.5) * h
    diag = 2.0 / h**2 + (t - s) ** 2
    diag[0] -= 1.0 / h**2  # mirror ghost: Neumann at t = 0
    diag[-1] += 1.0 / h**2  # odd ghost: Dirichlet at t_max
    off = np.full(n - 1, -1.0 / h**2)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    u = v[:, 0] / math.sqrt(h)
    if u[0] < 0:
        u = -u
    return float(w[0]), t, u, h


def _richardson(coarse, fine):
    return (4.0 * fine - coarse) / 3.0


def de_gennes_mu(s, disc=DiscParams1D()):
    """Lowest Neumann eigenvalue of ``D_t^2 + (t - s)^2`` on the half-line.

    Returns an :class:`Eigenpair`; the vector is sampled at the cell centres
    of ``disc``, L2-normalised and nonnegative at ``t = 0``.  With
    ``disc.richardson`` the eigenvalue is extrapolated from ``n`` and ``2n``.
    """
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    lam, t, u, _ = _half_line_ground(s, disc.t_max, disc.n)
    if disc.richardson:
        lam = _richardson(lam, _half_line_ground(s, disc.t_max, 2 * disc.n)[0])
    return Eigenpair(lam, t, u)


def de_gennes_dmu(s, disc=DiscParams1D()):
    """``mu'(s)`` by the Hellmann-Feynman formula ``-2 <(t - s) u, u>``."""

    def one(n):
        _, t, u, h = _half_line_ground(s, disc.t_max, n)
        return -2.0 * h * np.sum((t - s) * u * u)

    d = one(disc.n)
    if disc.richardson:
        d = _richardson(d, one(2 * disc.n))
    return float(d)


def _mu(s, disc):
    return de_gennes_mu(s, disc).value


def _scan_bracket(f, window, n_scan):
    xs = np.linspace(window[0], window[1], n_scan)
    ys = np.array([f(x) for x in xs])
    k = int(np.argmin(ys))
    if k == 0 or k == n_scan - 1:
        raise BracketError(
            f"minimum at the edge of the search window {window}; widen it")
    # unimodality on the scanned window: decreasing then increasing
    if np.any(np.diff(ys[: k + 1]) > 0) or np.any(np.diff(ys[k:]) < 0):
        raise BracketError("function is not unimodal on the search window")
    return xs[k - 1], xs[k], xs[k + 1]


@lru_cache(maxsize=32)
def find_theta0(disc=DiscParams1D(), tol=1e-10, window=(-0.5, 2.5), n_scan=31):
    """Minimise ``mu`` over ``s``; returns ``(theta0, s0)``.

    A coarse scan brackets the minimum, golden-section narrows it, and the
    argmin is polished as the root of the Hellmann-Feynman derivative, which
    is far better conditioned than the flat minimum of ``mu`` itself.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = lambda s: _mu(s, disc)  # noqa: E731
    a, b, c = _scan_bracket(f, window, n_scan)
    res = minimize_scalar(f, bracket=(a, b, c), method="golden",
                          options={"xtol": max(tol, 1e-8)})
    s_g = float(res.x)
    lo, hi = max(a, s_g - 1e-3), min(c, s_g + 1e-3)
    g = lambda s: de_gennes_dmu(s, disc)  # noqa: E731
    if g(lo) < 0 < g(hi):
        s0 = brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    else:
        s0 = s_g
    theta0 = f(s0)
    if not 0.5 < theta0 < 1.0:
        raise HC3Error(f"theta0={theta0} outside (1/2, 1): discretisation too coarse")
    return float(theta0), float(s0)


def compute_delta0(s0, disc=DiscParams1D(), step=1e-2):
    """Half the second derivative of ``mu`` at ``s0``.

    Central second differences at ``step`` and ``step / 2`` are combined by
    one Richardson step.
    """
    m0 = _mu(s0, disc)

    def d2(h):
        return (_mu(s0 + h, disc) - 2.0 * m0 + _mu(s0 - h, disc)) / h**2

    curv = _richardson(d2(step), d2(step / 2))
    if curv <= 0:
        raise HC3Error(f"non-positive curvature {curv} at s0; refine the grid")
    delta0 = 0.5 * curv
    if not 0 < delta0 < 1:
        raise HC3Error(f"delta0={delta0} outside (0, 1)")
    return float(delta0)


def mu_curve(s_grid, disc=DiscParams1D()):
    vals = [_mu(s, disc) for s in s_grid]
    return SpectralCurve(s_grid, vals, _tol_1d(disc), "mu(s) de Gennes band function")


def _tol_1d(disc):
    h = disc.t_max / disc.n
    return h**4 if disc.richardson else h**2


# ---------------------------------------------------------------------------
# tilted half-space model


def _lap1d(n, h, left, right):
    main = np.full(n, 2.0)
    main[0] += -1.0 if left == "N" else 1.0
    main[-1] += -1.0 if right == "N" else 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def _sigma_box(theta, disc):
    sn, cs = math.sin(theta), math.cos(theta)
    # tangential localisation length of the ground state (harmonic approximation)
    width = (0.765 * max(sn, 0.01)) ** -0.5
    t_max = disc.t_max if disc.t_max is not None else 10.0 + 30.0 * sn**2
    s_lo = disc.s_half if disc.s_half is not None else 6.0 * width + 4.0
    s_hi = s_lo + min(t_max * cs / max(sn, 1e-12), t_max)
    return t_max, s_lo, s_hi, width


def _sigma_solve(theta, ht, t_max, s_lo, s_hi, width):
    sn, cs = math.sin(theta), math.cos(theta)
    hs0 = 2.0 * ht * max(1.0, width / 4.0)
    ns = max(8, int(round((s_lo + s_hi) / hs0)))
    nt = max(8, int(round(t_max / ht)))
    hs, ht = (s_lo + s_hi) / ns, t_max / nt
    s = -s_lo + (np.arange(ns) + 0.5) * hs
    t = (np.arange(nt) + 0.5) * ht
    # constant shift along s places the minimum near s = 0 (spectrum unchanged)
    shift = _S0_CENTRE * cs / sn
    S, T = np.meshgrid(s, t, indexing="ij")
    V = (T * cs - (S + shift) * sn) ** 2
    H = (sp.kron(_lap1d(ns, hs, "D", "D"), sp.identity(nt))
         + sp.kron(sp.identity(ns), _lap1d(nt, ht, "N", "D"))
         + sp.diags(V.ravel()))
    v0 = np.exp(-0.5 * (S**2 / width**2 + (T - 1.0) ** 2)).ravel()
    try:
        w = eigsh(H.tocsc(), k=1, sigma=0.0, which="LM", v0=v0,
                  return_eigenvectors=False)
    except Exception as exc:  # ARPACK failures surface as several types
        raise ConvergenceError(f"sigma({theta}) eigensolve failed: {exc}") from exc
    return float(w[0])


def sigma(theta, disc2d=Disc2D(), disc1d=DiscParams1D()):
    """Ground energy of the half-space model with the field tilted by ``theta``.

    ``theta = 0`` is the de Gennes case and returns ``theta0``.  The function
    is even, so negative angles are folded.  A :class:`TruncationWarning` is
    issued when doubling the box moves the value by more than
    ``disc2d.solver_tol``.
    """
    theta = abs(float(theta))
    if theta > math.pi / 2 + 1e-12:
        raise ValueError("theta must lie in [-pi/2, pi/2]")
    if theta == 0.0:
        return find_theta0(disc1d)[0]
    t_max, s_lo, s_hi, width = _sigma_box(theta, disc2d)
    coarse = _sigma_solve(theta, disc2d.h, t_max, s_lo, s_hi, width)
    val = coarse
    if disc2d.richardson:
        val = _richardson(coarse, _sigma_solve(theta, disc2d.h / 2, t_max, s_lo, s_hi, width))
    if disc2d.check_truncation:
        h2 = 2 * disc2d.h
        base = _sigma_solve(theta, h2, t_max, s_lo, s_hi, width)
        big = _sigma_solve(theta, h2, 2 * t_max, 2 * s_lo, 2 * s_hi, width)
        if abs(big - base) > disc2d.solver_tol:
            warnings.warn(
                f"sigma({theta:.4g}): doubling the box moved the value by "
                f"{abs(big - base):.2e}", TruncationWarning, stacklevel=2)
    return float(val)


def sigma_curve(thetas, disc2d=Disc2D(), disc1d=DiscParams1D()):
    vals = [sigma(th, disc2d, disc1d) for th in thetas]
    return SpectralCurve(thetas, vals, disc2d.solver_tol, "sigma(theta) tilted half-space")


# ---------------------------------------------------------------------------
# Montgomery family


def _montgomery_ground(xi, x_max, n):
    h = 2.0 * x_max / (n + 1)
    x = -x_max + h * np.arange(1, n + 1)
    diag = 2.0 / h**2 + (x * x - xi) ** 2
    off = np.full(n - 1, -1.0 / h**2)
    w = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0),
                         eigvals_only=True)
    return float(w[0])


def montgomery_lambda(xi, disc=MontgomeryDisc()):
    """Lowest eigenvalue of ``D_x^2 + (x^2 - xi)^2`` on the line."""
    lam = _montgomery_ground(xi, disc.x_max, disc.n)
    if disc.richardson:
        lam = _richardson(lam, _montgomery_ground(xi, disc.x_max, 2 * disc.n))
    return lam


@lru_cache(maxsize=32)
def montgomery_nu0(disc=MontgomeryDisc()):
    """Minimise ``montgomery_lambda`` over ``xi``; returns ``(nu0_hat, xi_min)``.

    Only the minimum found in ``disc.window`` is reported; uniqueness of the
    minimiser is not claimed.
    """
    f = lambda xi: montgomery_lambda(xi, disc)  # noqa: E731
    a, b, c = _scan_bracket(f, disc.window, disc.n_scan)
    res = minimize_scalar(f, bracket=(a, b, c), method="golden",
                          options={"xtol": max(disc.tol, 1e-8)})
    xi = float(res.x)
    lo, hi = disc.window
    if min(xi - lo, hi - xi) < 1e-6 * (hi - lo):
        raise BracketError("Montgomery minimiser at the window edge")
    return float(res.fun), xi


def montgomery_curve(xi_grid, disc=MontgomeryDisc()):
    vals = [montgomery_lambda(x, disc) for x in xi_grid]
    return SpectralCurve(xi_grid, vals, disc.tol, "lambda(xi) Montgomery family")


# ---------------------------------------------------------------------------


def compute_model_constants(disc1d=DiscParams1D(), mdisc=MontgomeryDisc(),
                            fd_step=1e-2):
    """Compute every universal constant and package it with its resolutions."""
    theta0, s0 = find_theta0(disc1d)
    delta0 = compute_delta0(s0, disc1d, fd_step)
    nu0, xi_min = montgomery_nu0(mdisc)
    return ModelConstants(
        theta0=theta0,
        s0=s0,
        delta0=delta0,
        alpha1=math.sqrt(delta0),
        nu0_hat=nu0,
        xi_min=xi_min,
        resolutions={
            "de_gennes": {"t_max": disc1d.t_max, "n": disc1d.n,
                          "richardson": disc1d.richardson},
            "montgomery": {"x_max": mdisc.x_max, "n": mdisc.n,
                           "richardson": mdisc.richardson},
            "delta0_fd_step": fd_step,
        },
        tolerances={
            "theta0": _tol_1d(disc1d),
            "s0": 1e-7,
            "delta0": 1e-5,
            "nu0_hat": mdisc.tol,
        },
    )
