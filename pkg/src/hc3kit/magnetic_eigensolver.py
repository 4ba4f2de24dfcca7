"""Lowest eigenvalue of the magnetic Neumann Laplacian ``(-i grad + B F)^2``.

Two discretizations are offered:

* a link-phase finite-volume operator on a :class:`~hc3kit.lattice.Lattice`
  (axis-aligned box or polar disc-cylinder), exactly gauge invariant;
* for the disc-cylinder with the field along its axis, the angular-momentum
  reduction to a family of radial Sturm-Liouville problems, which reaches
  far larger ``B`` at the same cost.

The field is ``beta = e_3`` and ``F = (-x2, x1, 0) / 2`` throughout.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .asymptotics import Lambda1Evaluator
from .errors import CoarseGridWarning, ConvergenceError
from .lattice import Lattice, box_lattice, cylinder_lattice

__all__ = [
    "DiscreteDomain",
    "DiscreteOperator",
    "SpectralResult",
    "RadialGroundState",
    "LocalizationReport",
    "InteriorBoundResult",
    "build_operator",
    "lowest_eigenpair",
    "disc_cylinder_ground_state",
    "disc_cylinder_lambda1",
    "disc_cylinder_evaluator",
    "lattice_evaluator",
    "default_m_max",
    "localization_report",
    "interior_bound_check",
    "lambda1_sweep",
    "write_sweep_csv",
    "dump_eigenvector",
]

COARSE_LIMIT = 0.5


@dataclass(frozen=True)
class DiscreteDomain:
    """Box ``[-Lx/2, Lx/2] x [-Ly/2, Ly/2] x [-Lz/2, Lz/2]`` or disc-cylinder
    ``{r < R, 0 < z < L}`` with its grid sizes.

    For the disc-cylinder ``grid`` is ``(nr, nphi, nz)`` of the polar
    lattice, and ``radial_n``/``m_max`` control the angular reduction.
    """

    kind: str
    dims: tuple
    grid: tuple
    radial_n: int | None = None
    m_max: int | None = None

    def __post_init__(self):
        if self.kind not in ("box", "disc_cylinder"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        want = 3 if self.kind == "box" else 2
        if len(self.dims) != want or any(not d > 0 for d in self.dims):
            raise ValueError(f"{self.kind} needs {want} positive dimensions, got {self.dims}")
        if len(self.grid) != 3 or any(int(g) < 8 for g in self.grid):
            raise ValueError(f"grid sizes must be at least 8, got {self.grid}")
        if self.radial_n is not None and self.radial_n < 8:
            raise ValueError("radial_n must be at least 8")
        if self.m_max is not None and self.m_max < 0:
            raise ValueError("m_max must be nonnegative")

    @classmethod
    def box(cls, Lx, Ly, Lz, nx, ny, nz):
        return cls("box", (float(Lx), float(Ly), float(Lz)), (int(nx), int(ny), int(nz)))

    @classmethod
    def disc_cylinder(cls, R, L, nr=32, nphi=64, nz=8, radial_n=None, m_max=None):
        return cls("disc_cylinder", (float(R), float(L)), (int(nr), int(nphi), int(nz)),
                   radial_n, m_max)

    @cached_property
    def lattice(self) -> Lattice:
        if self.kind == "box":
            return box_lattice(*self.dims, *self.grid)
        return cylinder_lattice(*self.dims, *self.grid)

    @property
    def volume(self):
        if self.kind == "box":
            return float(np.prod(self.dims))
        R, L = self.dims
        return math.pi * R * R * L


@dataclass
class DiscreteOperator:
    """``H = M^(-1/2) K M^(-1/2)`` where ``u* K u`` is the discrete form and
    ``M`` the diagonal cell volumes."""

    H: sp.csr_matrix
    K: sp.csr_matrix
    volumes: np.ndarray
    phases: np.ndarray          # exp(i B phi_e) per link
    lattice: Lattice
    B: float
    coarse: bool
    boundary_tags: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.H.shape[0]

    def hermitian_defect(self):
        d = self.H - self.H.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def form(self, u):
        """Discrete ``Q_B(u)`` for a cell field ``u``."""
        u = np.asarray(u, complex)
        return float(np.real(np.vdot(u, self.K @ u)))

    def norm2(self, u):
        return float(np.sum(self.volumes * np.abs(u) ** 2))


@dataclass
class SpectralResult:
    eigenvalue: float
    eigenvector: np.ndarray     # cell values, sum(vol |u|^2) = 1
    residual: float
    iterations: int
    B: float = 0.0
    lattice: Lattice | None = None


@dataclass
class RadialGroundState:
    """Ground state of the angular reduction: ``u(r) exp(i m phi)``, constant in z."""

    eigenvalue: float
    m: int
    r: np.ndarray
    profile: np.ndarray         # normalized: 2 pi L sum r_i h u_i^2 = 1
    residual: float
    R: float
    L: float
    B: float


def _stencil(lat: Lattice, B, gauge=None):
    total = B * lat.phase_F
    if gauge is not None:
        g = np.asarray(gauge, float)
        total = total + (g[lat.head] - g[lat.tail])
    return np.exp(1j * total)


def build_operator(domain: DiscreteDomain, B, gauge=None):
    """Assemble the link-phase operator at field strength ``B``.

    ``gauge`` is an optional cell field ``chi``; it adds ``chi_head - chi_tail``
    to every link phase, the lattice image of ``A -> A + grad chi``.
    """
    if B < 0:
        raise ValueError("B must be nonnegative")
    lat = domain.lattice
    n = lat.n_cells
    ph = _stencil(lat, B, gauge)
    c = lat.cond
    diag = np.bincount(lat.tail, c, n) + np.bincount(lat.head, c, n)
    rows = np.concatenate([lat.tail, lat.head, np.arange(n)])
    cols = np.concatenate([lat.head, lat.tail, np.arange(n)])
    vals = np.concatenate([-c * ph, -c * np.conj(ph), diag.astype(complex)])
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    s = 1.0 / np.sqrt(lat.volumes)
    Dm = sp.diags(s)
    H = (Dm @ K @ Dm).tocsr()
    h = lat.max_spacing
    coarse = B * h * h > COARSE_LIMIT
    if coarse:
        warnings.warn(f"B h^2 = {B * h * h:.3g} exceeds {COARSE_LIMIT}; grid too coarse "
                      "for the magnetic length", CoarseGridWarning, stacklevel=2)
    tags = {"all_faces": "neumann"}
    return DiscreteOperator(H, K, lat.volumes, ph, lat, float(B), bool(coarse), tags)


def lowest_eigenpair(op: DiscreteOperator, tol=1e-9, seed=0, max_solves=500):
    """Smallest eigenpair of ``op.H`` by shift-invert Lanczos plus inverse-iteration polish.

    The shift sits just below the spectrum (which is nonnegative), the start
    vector comes from ``seed`` and the LU factorization is computed once, so
    repeated calls return bit-identical results.  ``tol`` bounds
    ``||(H - lam) w|| / max(1, |lam|)`` for the unit vector ``w``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    H = op.H
    n = H.shape[0]
    shift = -1e-2 * (1.0 + op.B)
    lu = splu((H - shift * sp.identity(n, dtype=complex, format="csc")).tocsc(),
              permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    count = [0]

    def solve(x):
        count[0] += 1
        if count[0] > max_solves:
            raise ConvergenceError("solve budget exceeded", residual=None)
        return lu.solve(np.asarray(x, complex))

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    opinv = LinearOperator((n, n), matvec=solve, dtype=complex)
    try:
        _, vecs = eigsh(H, k=1, sigma=shift, which="LM", OPinv=opinv, v0=v0,
                        tol=tol * 1e-3, maxiter=max_solves)
        w = vecs[:, 0]
    except ConvergenceError:
        w = v0
    except Exception as exc:  # ARPACK no-convergence carries partial results
        w = getattr(exc, "eigenvectors", None)
        w = v0 if w is None or w.size == 0 else w[:, 0]

    def rq(w):
        w = w / np.linalg.norm(w)
        Hw = H @ w
        lam = float(np.real(np.vdot(w, Hw)))
        return w, lam, float(np.linalg.norm(Hw - lam * w)) / max(1.0, abs(lam))

    w, lam, res = rq(w)
    best = res
    while res > tol:
        if count[0] >= max_solves:
            raise ConvergenceError(f"residual {best:.3e} above tol {tol:.1e}", residual=best)
        w, lam, res = rq(solve(w))
        best = min(best, res)
    # fix the global phase so dumps are reproducible
    k = int(np.argmax(np.abs(w)))
    w = w * (abs(w[k]) / w[k])
    u = w / np.sqrt(op.volumes)
    return SpectralResult(lam, u, res, count[0], op.B, op.lattice)


# ---------------------------------------------------------------------------
# disc-cylinder via angular momentum


def default_m_max(B, R):
    """Angular-momentum cut-off.

    The surface mode carries ``m ~ B R^2 / 2 - s0 R sqrt(B)``, just under
    the flux through the disc, so the flux plus a margin is always enough.
    """
    return int(math.ceil(B * R * R / 2.0)) + 20


def _radial_matrix(m, B, R, n):
    h = R / n
    r = (np.arange(n) + 0.5) * h
    rf = r[:-1] + 0.5 * h
    w = rf / h
    diag = np.zeros(n)
    diag[:-1] += w
    diag[1:] += w
    mass = r * h
    V = (m / r - 0.5 * B * r) ** 2
    d = diag / mass + V
    e = -w / np.sqrt(mass[:-1] * mass[1:])
    return r, h, mass, d, e


def _radial_ground(m, B, R, n):
    r, h, mass, d, e = _radial_matrix(m, B, R, n)
    lam, v = eigh_tridiagonal(d, e, select="i", select_range=(0, 0),
                              tol=1e-300)
    return float(lam[0]), v[:, 0], r, h, mass, d, e


def disc_cylinder_ground_state(R, L, B, radial_n=2000, m_max=None):
    """Minimize the radial ground energy over ``m in [0, m_max]``.

    Raises :class:`ValueError` if the minimizing ``m`` equals ``m_max``.
    """
    if B < 0:
        raise ValueError("B must be nonnegative")
    if m_max is None:
        m_max = default_m_max(B, R)
    best = None
    for m in range(int(m_max) + 1):
        lam = _radial_ground(m, B, R, radial_n)[0]
        if best is None or lam < best[0]:
            best = (lam, m)
    lam, m = best
    if m == m_max and m_max > 0:
        raise ValueError(f"minimizing angular momentum hit m_max={m_max}; increase m_max")
    lam, v, r, h, mass, d, e = _radial_ground(m, B, R, radial_n)
    Tv = d * v
    Tv[:-1] += e * v[1:]
    Tv[1:] += e * v[:-1]
    res = float(np.linalg.norm(Tv - lam * v)) / max(1.0, abs(lam))
    u = v / np.sqrt(mass)
    u = u * np.sign(u[np.argmax(np.abs(u))])
    u = u / math.sqrt(2 * math.pi * L * np.sum(mass * u * u))
    return RadialGroundState(lam, m, r, u, res, float(R), float(L), float(B))


def disc_cylinder_lambda1(R, L, B, radial_n=2000, m_max=None):
    """``lambda1(B)`` of the disc-cylinder; the axial Neumann mode adds nothing."""
    return disc_cylinder_ground_state(R, L, B, radial_n, m_max).eigenvalue


def disc_cylinder_evaluator(R, L=1.0, radial_n=2000, tol=1e-9):
    return Lambda1Evaluator(lambda B: disc_cylinder_lambda1(R, L, B, radial_n),
                            name=f"disc_cylinder(R={R}, n={radial_n})", cost="moderate", tol=tol)


def lattice_evaluator(domain, tol=1e-9, seed=0):
    def f(B):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CoarseGridWarning)
            op = build_operator(domain, B)
        return lowest_eigenpair(op, tol, seed).eigenvalue
    return Lambda1Evaluator(f, name=f"{domain.kind}{domain.grid}", cost="expensive", tol=tol)


# ---------------------------------------------------------------------------
# localization


@dataclass
class LocalizationReport:
    B: float
    moments: dict               # n -> M_n
    scaled_moments: dict        # n -> M_n B^(n/2)
    boundary_distance: float
    boundary_mass_fraction: float

    def to_dict(self):
        return {"B": self.B, "moments": {str(k): v for k, v in self.moments.items()},
                "scaled_moments": {str(k): v for k, v in self.scaled_moments.items()},
                "boundary_distance": self.boundary_distance,
                "boundary_mass_fraction": self.boundary_mass_fraction}


def _cap_average(a, L, n):
    """``(1/L) int_0^L min(a, z, L - z)^n dz`` for ``a >= 0`` (vectorized in ``a``)."""
    a = np.minimum(a, L / 2)
    return (2 * a ** (n + 1) / (n + 1) + a ** n * (L - 2 * a)) / L


def _cap_fraction(a, d, L):
    """Fraction of ``z in (0, L)`` with ``min(a, z, L - z) < d``."""
    if a < d:
        return 1.0
    return min(1.0, 2 * d / L)


def localization_report(result, domain=None, B=None, c=2.0, orders=(1, 2, 3, 4)):
    """Moments ``M_n = int t^n |psi|^2`` with ``t`` the distance to the boundary.

    Accepts a lattice :class:`SpectralResult` or a :class:`RadialGroundState`.
    The boundary-mass fraction uses the layer ``t < c / sqrt(B)``.
    """
    B = float(result.B if B is None else B)
    d = c / math.sqrt(B) if B > 0 else math.inf
    if isinstance(result, RadialGroundState):
        R, L = result.R, result.L
        h = R / len(result.r)
        a = R - result.r
        dens = 2 * math.pi * L * result.r * h * result.profile ** 2
        tot = dens.sum()
        mom = {n: float(np.sum(dens * _cap_average(a, L, n)) / tot) for n in orders}
        frac = float(sum(w * _cap_fraction(ai, d, L) for w, ai in zip(dens, a)) / tot)
    else:
        lat = result.lattice if result.lattice is not None else domain.lattice
        dens = lat.volumes * np.abs(result.eigenvector) ** 2
        tot = dens.sum()
        mom = {n: float(np.sum(dens * lat.dist ** n) / tot) for n in orders}
        frac = float(dens[lat.dist < d].sum() / tot)
    scaled = {n: mom[n] * B ** (n / 2) for n in orders}
    return LocalizationReport(B, mom, scaled, d, frac)


# ---------------------------------------------------------------------------
# interior lower bound


@dataclass
class InteriorBoundResult:
    quotient: float
    passed: bool
    tolerance: float            # relative, 10 B h^2
    deficit: float              # (B - quotient)_+
    h: float


def _bump(lat, centre, w_xy, w_z, rho, zeta):
    x = lat.centres - np.asarray(centre, float)
    q = (x[:, 0] ** 2 + x[:, 1] ** 2) / rho ** 2 + x[:, 2] ** 2 / zeta ** 2
    cut = np.zeros(len(q))
    inside = q < 1
    cut[inside] = np.exp(1 - 1 / (1 - q[inside]))
    g = np.exp(-(x[:, 0] ** 2 + x[:, 1] ** 2) / (2 * w_xy ** 2) - x[:, 2] ** 2 / (2 * w_z ** 2))
    return g * cut


def interior_bound_check(domain, B, centre=(0.0, 0.0, 0.0), w_xy=None, w_z=None,
                         rho=None, zeta=None):
    """Quotient ``Q_B(phi) / ||phi||^2`` of a smooth compactly supported bump.

    ``phi`` is an anisotropic Gaussian (widths ``w_xy``, ``w_z``) times the
    C-infinity cutoff ``exp(1 - 1/(1 - q))`` on the ellipsoid ``q < 1`` with
    semi-axes ``rho`` (horizontal) and ``zeta`` (vertical).  Defaults give
    the lowest Landau profile ``w_xy = sqrt(2/B)`` and a flat vertical profile.
    """
    if domain.kind != "box":
        raise ValueError("interior_bound_check needs a box domain")
    lat = domain.lattice
    Lx, Ly, Lz = domain.dims
    h = lat.max_spacing
    margin = 3 * h
    if rho is None:
        rho = min(Lx, Ly) / 2 - margin - 1e-12
    if zeta is None:
        zeta = Lz / 2 - margin - 1e-12
    if w_xy is None:
        w_xy = math.sqrt(2 / B) if B > 0 else rho / 3
    if w_z is None:
        w_z = zeta
    cx, cy, cz = centre
    if (min(Lx / 2 - abs(cx), Ly / 2 - abs(cy)) - rho < margin - 1e-9
            or Lz / 2 - abs(cz) - zeta < margin - 1e-9):
        raise ValueError("bump support must stay 3 cells away from the boundary")
    phi = _bump(lat, centre, w_xy, w_z, rho, zeta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoarseGridWarning)
        op = build_operator(domain, B)
    q = op.form(phi) / op.norm2(phi)
    tol = 10 * B * h * h
    return InteriorBoundResult(q, bool(q >= B * (1 - tol)), tol, max(B - q, 0.0), h)


# ---------------------------------------------------------------------------
# sweeps and dumps


def lambda1_sweep(domain, B_grid, tol=1e-9, seed=0):
    """Rows ``(B, lambda1, residual, m_argmin)``.

    Disc-cylinders with ``radial_n`` set use the angular reduction (and
    report the minimizing ``m``); everything else uses the lattice solver.
    """
    rows = []
    for B in B_grid:
        B = float(B)
        if domain.kind == "disc_cylinder" and domain.radial_n:
            R, L = domain.dims
            gs = disc_cylinder_ground_state(R, L, B, domain.radial_n, domain.m_max)
            rows.append((B, gs.eigenvalue, gs.residual, gs.m))
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CoarseGridWarning)
                op = build_operator(domain, B)
            res = lowest_eigenpair(op, tol, seed)
            rows.append((B, res.eigenvalue, res.residual, None))
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("B,lambda1,residual,m_argmin\n")
        for B, lam, res, m in rows:
            fh.write(f"{B:.17g},{lam:.17g},{res:.6e},{'' if m is None else m}\n")


def dump_eigenvector(result: SpectralResult, path):
    """Write ``path`` (complex128, little endian) and ``path + '.json'``.

    Layout is first-axis fastest: ``(x, y, z)`` for boxes and ``(r, phi, z)``
    for disc-cylinders.
    """
    lat = result.lattice
    arr = np.asarray(result.eigenvector, "<c16").reshape(lat.shape)
    arr.transpose(2, 1, 0).tofile(path)
    axes = ["x", "y", "z"] if lat.kind == "box" else ["r", "phi", "z"]
    meta = {
        "kind": lat.kind, "shape": list(lat.shape), "axes": axes,
        "layout": "first axis fastest", "dtype": "complex128 little-endian",
        "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in lat.params.items()},
        "B": result.B, "eigenvalue": result.eigenvalue, "residual": result.residual,
        "normalization": "sum(volume * |u|^2) = 1",
    }
    with open(str(path) + ".json", "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta
