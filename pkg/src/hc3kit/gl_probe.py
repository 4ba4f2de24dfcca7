"""Discrete modified Ginzburg-Landau functional on the disc-cylinder.

With ``A = F + a`` the energy is

    sum_e c_e |exp(i kappa H (phi_e + a_e)) psi_j - psi_i|^2
      - kappa^2 sum vol |psi|^2 + kappa^2/2 sum vol |psi|^4
      + kappa^2 H^2 sum_p (circ_p a)^2 dual_p / area_p

where ``a_e`` is the line integral of ``A - F`` along link ``e``.  ``F`` has
curl ``e_3``, zero divergence and zero normal trace on the disc-cylinder, so
``curl A - beta`` is the plaquette circulation of ``a`` alone.  ``a`` is kept
in the discrete Coulomb space: zero lattice divergence, and zero normal
trace because boundary faces carry no link.

The kinetic term is literally the quadratic form of
:func:`~hc3kit.magnetic_eigensolver.build_operator` at ``B = kappa H``, which
makes the trial-state identity hold to rounding error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BracketError, ConvergenceError
from .magnetic_eigensolver import DiscreteDomain, build_operator, lowest_eigenpair

__all__ = [
    "GLState",
    "EnergyBreakdown",
    "MinimizeResult",
    "InequalityReport",
    "HC3ModEstimate",
    "default_gl_domain",
    "f_omega",
    "energy_mod",
    "gradient",
    "normal_state",
    "trial_state",
    "minimize",
    "minimizer_inequality_check",
    "estimate_hc3_mod",
    "spectral_root",
    "dump_state",
    "write_transition_csv",
]


def default_gl_domain():
    """``R = 2``, ``L = 1.6`` on a 16 x 64 x 8 polar lattice (8192 cells)."""
    return DiscreteDomain.disc_cylinder(2.0, 1.6, 16, 64, 8)


# ---------------------------------------------------------------------------
# geometry helpers


def f_omega(domain):
    """``F = (-x2, x1, 0) / 2`` at the cell centres, shape ``(n, 3)``."""
    if domain.kind != "disc_cylinder":
        raise ValueError("f_omega is only available on the disc-cylinder")
    x = domain.lattice.centres
    return 0.5 * np.stack([-x[:, 1], x[:, 0], np.zeros(len(x))], -1)


class _Projector:
    """Orthogonal projection onto ``ker(Gt diag(w))`` in the Euclidean metric.

    ``D D^T`` is a weighted graph Laplacian whose kernel is the constants;
    grounding one cell makes it invertible on the range of ``D``.
    """

    def __init__(self, lat, w):
        G = lat.incidence()
        self.D = (G.T @ sp.diags(w)).tocsr()
        S = (self.D @ self.D.T).tocsc()
        self.lu = splu(S[1:, 1:].tocsc(), permc_spec="MMD_AT_PLUS_A",
                       options={"SymmetricMode": True})

    def __call__(self, x):
        y = self.D @ x
        z = np.zeros(len(y))
        z[1:] = self.lu.solve(y[1:])
        return x - self.D.T @ z


_PROJ_CACHE: dict = {}


def _projectors(lat):
    key = id(lat)
    if key not in _PROJ_CACHE:
        c = lat.cond
        # Euclidean in a (reported gradient) and in alpha = sqrt(c) a (optimizer)
        _PROJ_CACHE[key] = (lat, _Projector(lat, c), _Projector(lat, np.sqrt(c)))
    return _PROJ_CACHE[key][1:]


# ---------------------------------------------------------------------------
# state and energy


@dataclass
class GLState:
    psi: np.ndarray             # complex, per cell
    a: np.ndarray               # real, per link: line integral of A - F
    kappa: float
    H: float
    domain: DiscreteDomain

    @property
    def lattice(self):
        return self.domain.lattice

    def divergence(self):
        lat = self.lattice
        return lat.incidence().T @ (lat.cond * self.a)

    def scaled(self, factor):
        return GLState(self.psi * factor, self.a.copy(), self.kappa, self.H, self.domain)


@dataclass
class EnergyBreakdown:
    kinetic: float
    condensation: float
    quartic: float
    field: float
    total: float

    def as_dict(self):
        return asdict(self)


def _parts(state):
    lat = state.lattice
    k, H = state.kappa, state.H
    psi = state.psi
    theta = k * H * (lat.phase_F + state.a)
    D = np.exp(1j * theta) * psi[lat.head] - psi[lat.tail]
    rho = np.abs(psi) ** 2
    circ = lat.curl() @ state.a
    wp = lat.dual_length / lat.plaq_area
    kin = float(np.sum(lat.cond * np.abs(D) ** 2))
    con = float(-k * k * np.sum(lat.volumes * rho))
    qua = float(0.5 * k * k * np.sum(lat.volumes * rho * rho))
    fld = float(k * k * H * H * np.sum(wp * circ * circ))
    return kin, con, qua, fld, theta, circ, wp


def energy_mod(state: GLState) -> EnergyBreakdown:
    kin, con, qua, fld = _parts(state)[:4]
    return EnergyBreakdown(kin, con, qua, fld, kin + con + qua + fld)


def _raw_gradient(state):
    """``(2 dE/dconj(psi), dE/da)`` without projection."""
    lat = state.lattice
    k, H = state.kappa, state.H
    psi = state.psi
    kin, con, qua, fld, theta, circ, wp = _parts(state)
    e = np.exp(1j * theta)
    c = lat.cond
    n = lat.n_cells
    # d/dconj(psi) of c |e psi_h - psi_t|^2
    D = e * psi[lat.head] - psi[lat.tail]
    gh = c * np.conj(e) * D
    gt = -c * D
    g = (np.bincount(lat.head, gh.real, n) + np.bincount(lat.tail, gt.real, n)
         + 1j * (np.bincount(lat.head, gh.imag, n) + np.bincount(lat.tail, gt.imag, n)))
    rho = np.abs(psi) ** 2
    gpsi = 2 * g - 2 * k * k * lat.volumes * psi + 2 * k * k * lat.volumes * rho * psi
    ga = 2 * k * H * c * np.imag(e * psi[lat.head] * np.conj(psi[lat.tail]))
    ga = ga + 2 * k * k * H * H * (lat.curl().T @ (wp * circ))
    total = kin + con + qua + fld
    return total, gpsi, ga


def gradient(state: GLState):
    """Exact gradient of :func:`energy_mod`.

    ``dpsi`` is ``2 dE/dconj(psi)``, so ``dE = Re(sum conj(dpsi) dpsi_dir)``;
    ``da`` is projected onto the divergence-free link fields.
    """
    _, gpsi, ga = _raw_gradient(state)
    Pa, _ = _projectors(state.lattice)
    return gpsi, Pa(ga)


def normal_state(domain, kappa, H):
    lat = domain.lattice
    return GLState(np.zeros(lat.n_cells, complex), np.zeros(lat.n_links), float(kappa),
                   float(H), domain)


def trial_state(domain, kappa, H, tol=1e-10, eta=None, seed=0):
    """``(eta psi1, F)`` with ``psi1`` the discrete ground state at ``B = kappa H``.

    Returns ``(state, lambda1, psi1)``.  By default
    ``eta = sqrt((kappa^2 - lambda1) / kappa^2)`` clipped to ``(0, 1]``.
    """
    res = lowest_eigenpair(build_operator(domain, kappa * H), tol, seed)
    lam = res.eigenvalue
    if eta is None:
        eta = math.sqrt(max((kappa * kappa - lam) / (kappa * kappa), 0.0))
        eta = min(max(eta, 1e-3), 1.0)
    st = normal_state(domain, kappa, H)
    st.psi = eta * res.eigenvector
    return st, lam, res.eigenvector


# ---------------------------------------------------------------------------
# descent


@dataclass
class MinimizeResult:
    state: GLState
    energy: EnergyBreakdown
    converged: bool
    grad_max: float
    iterations: int
    init: str
    history: dict = field(default_factory=dict)


def _random_state(domain, kappa, H, seed, amp=0.5, modes=8, kmax=2.0):
    """Seeded smooth random state: a few plane waves in psi, a small projected
    smooth field in a."""
    lat = domain.lattice
    rng = np.random.default_rng(seed)
    x = lat.centres
    psi = np.zeros(lat.n_cells, complex)
    for _ in range(modes):
        kv = rng.uniform(-kmax, kmax, 3)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        psi += c * np.exp(1j * (x @ kv))
    psi *= amp / np.max(np.abs(psi))
    coef = rng.standard_normal((3, 3)) * 0.05
    mid = 0.5 * (x[lat.head] + x[lat.tail])
    chord = x[lat.head] - x[lat.tail]
    a = np.einsum("ij,ej,ei->e", coef, np.sin(mid), chord)
    Pa, _ = _projectors(lat)
    return GLState(psi, Pa(a), float(kappa), float(H), domain)


_PREC_CACHE: dict = {}


def _preconditioner(domain, kappa, H):
    """Approximate inverse Hessian blocks.

    psi: ``2 (K_{kappa H} + kappa^2 M)``, the magnetic form itself shifted
    to be positive definite (complex Hermitian, so it acts on ``Re``/``Im``
    as a real symmetric block).  a: Jacobi on ``2 kappa^2 H^2 (curl^T W curl
    + diag(c))``; a sparse LU there costs more than it saves.
    """
    lat = domain.lattice
    key = (id(lat), float(kappa), float(H))
    if key not in _PREC_CACHE:
        if len(_PREC_CACHE) > 8:
            _PREC_CACHE.clear()
        import warnings
        from .errors import CoarseGridWarning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CoarseGridWarning)
            K = build_operator(domain, kappa * H).K
        lu = splu((K + kappa * kappa * sp.diags(lat.volumes)).tocsc(),
                  permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        C = lat.curl()
        W = lat.dual_length / lat.plaq_area
        dg = np.asarray(C.multiply(C).T @ W).ravel() + lat.cond
        dg *= 2 * max(kappa * kappa * H * H, 1e-8)
        _PREC_CACHE[key] = (lat, lu, dg)
    return _PREC_CACHE[key][1:]


def _descend(state, gtol, maxiter, memory=20, stop_below=None):
    """Preconditioned L-BFGS with a backtracking line search.

    Unknowns are ``(Re psi, Im psi, a)`` with ``a`` kept divergence free by
    projecting gradients and directions.  A step is accepted on the Armijo
    condition, or, once energy differences are at rounding level, on the
    approximate Wolfe condition of Hager and Zhang (derivative decrease with
    the energy not rising by more than ``1e-13 |E|``).
    """
    lat = state.lattice
    n = lat.n_cells
    sv = np.sqrt(lat.volumes)
    sc = np.sqrt(lat.cond)
    Pa, _ = _projectors(lat)
    k, H, dom = state.kappa, state.H, state.domain
    lu, dg = _preconditioner(dom, k, H)

    def unpack(x):
        return GLState(x[:n] + 1j * x[n:2 * n], x[2 * n:], k, H, dom)

    def fun(x):
        e, gpsi, ga = _raw_gradient(unpack(x))
        return e, np.concatenate([gpsi.real, gpsi.imag, Pa(ga)])

    def gmax(g):
        return float(max(np.max(np.abs(g[:n] / sv)), np.max(np.abs(g[n:2 * n] / sv)),
                         np.max(np.abs(g[2 * n:] / sc))))

    def precond(q):
        z = 0.5 * lu.solve(q[:n] + 1j * q[n:2 * n])
        return np.concatenate([z.real, z.imag, Pa(Pa(q[2 * n:]) / dg)])

    x = np.concatenate([state.psi.real, state.psi.imag, Pa(state.a)])
    e, g = fun(x)
    e0 = e
    S, Y = [], []
    it = 0
    while gmax(g) > gtol and it < maxiter:
        if stop_below is not None and e < stop_below:
            break
        it += 1
        q = g.copy()
        alphas = []
        for s_, y_ in zip(reversed(S), reversed(Y)):
            a_ = (s_ @ q) / (y_ @ s_)
            alphas.append(a_)
            q -= a_ * y_
        r = precond(q)
        if S:
            r *= (S[-1] @ Y[-1]) / (Y[-1] @ precond(Y[-1]))
        for (s_, y_), a_ in zip(zip(S, Y), reversed(alphas)):
            r += s_ * (a_ - (y_ @ r) / (y_ @ s_))
        d = -r
        slope = g @ d
        if not slope < 0:
            S, Y = [], []
            d = -precond(g)
            slope = g @ d
        ef = 1e-13 * abs(e) + 1e-300
        t = 1.0
        ok = False
        for _ in range(40):
            e_new, g_new = fun(x + t * d)
            if e_new <= e + 1e-4 * t * slope and e_new < e:
                ok = True
                break
            if e_new <= e + ef and 0.9 * slope <= g_new @ d <= -0.8 * slope:
                ok = True
                break
            t *= 0.5
        if not ok:
            if S:
                S, Y = [], []
                continue
            break
        s_ = t * d
        y_ = g_new - g
        if y_ @ s_ > 1e-12 * np.linalg.norm(s_) * np.linalg.norm(y_):
            S.append(s_)
            Y.append(y_)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        x = x + s_
        e, g = e_new, g_new
    if e > e0 + 1e-13 * abs(e0):
        raise ConvergenceError(f"energy increased from {e0:.6e} to {e:.6e}", residual=gmax(g))
    return unpack(x), it, gmax(g), e


def minimize(kappa, H, init="random", domain=None, seed=0, gtol=1e-8, maxiter=3000,
             stop_below=None):
    """Minimize the discrete energy from one initial state by L-BFGS.

    ``init`` is ``"normal"``, ``"trial"``, ``"random"`` or a :class:`GLState`.
    The convergence test ``grad_max <= gtol`` uses the gradient with respect
    to ``sqrt(vol) psi`` and ``sqrt(c) a``, which does not scale with the cells.
    """
    domain = default_gl_domain() if domain is None else domain
    if isinstance(init, GLState):
        st, name = init, "given"
    elif init == "normal":
        st, name = normal_state(domain, kappa, H), "normal"
    elif init == "trial":
        st, name = trial_state(domain, kappa, H)[0], "trial"
    elif init == "random":
        st, name = _random_state(domain, kappa, H, seed), f"random[{seed}]"
    else:
        raise ValueError(f"unknown init {init!r}")
    e_init = energy_mod(st).total
    final, nit, gmax, _ = _descend(st, gtol, maxiter, stop_below=stop_below)
    en = energy_mod(final)
    return MinimizeResult(final, en, gmax <= gtol, gmax, nit, name,
                          {"initial_total": e_init})


def minimize_best(kappa, H, domain=None, seeds=(1, 2), **kw):
    """Run the normal, trial and seeded random inits and return ``(best, all)``."""
    runs = [minimize(kappa, H, "normal", domain, **kw), minimize(kappa, H, "trial", domain, **kw)]
    runs += [minimize(kappa, H, "random", domain, seed=s, **kw) for s in seeds]
    best = min(runs, key=lambda r: r.energy.total)
    return best, runs


__all__.append("minimize_best")


# ---------------------------------------------------------------------------
# checks


@dataclass
class InequalityReport:
    linfty: dict
    quad_form: dict
    curl: dict
    l4_l2: dict
    rough_decay: dict | None
    all_pass: bool

    def to_dict(self):
        return asdict(self)


def _ineq(lhs, rhs, tol):
    return {"lhs": float(lhs), "rhs": float(rhs), "pass": bool(lhs <= rhs + tol)}


def minimizer_inequality_check(state, kappa=None, H=None, tol=1e-6):
    """The four a-priori bounds satisfied by minimizers with nonpositive energy.

    * ``max |psi| <= 1``
    * ``||p psi||_2 <= kappa ||psi||_2``
    * ``H ||curl A - beta||_2 <= ||psi||_2``
    * ``||psi||_4^2 <= ||psi||_2``

    plus, when ``kappa (H - kappa) >= 1/2``, the fraction of ``|psi|^2`` in
    the layer ``t < 1/sqrt(kappa (H - kappa))`` next to the boundary.
    """
    kappa = state.kappa if kappa is None else kappa
    H = state.H if H is None else H
    lat = state.lattice
    en = energy_mod(state)
    rho = np.abs(state.psi) ** 2
    l2 = math.sqrt(np.sum(lat.volumes * rho))
    l4sq = math.sqrt(np.sum(lat.volumes * rho * rho))
    curl_l2 = math.sqrt(en.field) / (kappa * H) if H > 0 else 0.0
    rep = {
        "linfty": _ineq(np.max(np.sqrt(rho)) if rho.size else 0.0, 1.0, tol),
        "quad_form": _ineq(math.sqrt(max(en.kinetic, 0.0)), kappa * l2, tol),
        "curl": _ineq(H * curl_l2, l2, tol),
        "l4_l2": _ineq(l4sq, l2, tol),
    }
    rough = None
    if kappa * (H - kappa) >= 0.5:
        d = 1 / math.sqrt(kappa * (H - kappa))
        tot = np.sum(lat.volumes * rho)
        frac = float(np.sum((lat.volumes * rho)[lat.dist < d]) / tot) if tot > 0 else float("nan")
        rough = {"distance": d, "boundary_mass_fraction": frac}
    ok = all(v["pass"] for v in rep.values())
    return InequalityReport(rep["linfty"], rep["quad_form"], rep["curl"], rep["l4_l2"], rough, ok)


# ---------------------------------------------------------------------------
# modified critical field


@dataclass
class HC3ModEstimate:
    H_estimate: float
    bracket: tuple
    log: list                   # (H, best_total, nontrivial)
    eps_energy: float
    monotone: bool


def spectral_root(kappa, window, domain=None, tol=1e-10, xtol=1e-8):
    """Root of ``lambda1(kappa H) = kappa^2`` for the same discrete operator."""
    from scipy.optimize import brentq
    domain = default_gl_domain() if domain is None else domain
    f = lambda H: lowest_eigenpair(build_operator(domain, kappa * H), tol).eigenvalue - kappa ** 2  # noqa: E731
    lo, hi = window
    if not f(lo) < 0 < f(hi):
        raise BracketError("spectral window does not bracket the root")
    return brentq(f, lo, hi, xtol=xtol)


def estimate_hc3_mod(kappa, window, budget=12, domain=None, eps_energy=None, gtol=1e-8,
                     maxiter=600):
    """Bisection on "descent from the trial state reaches ``total < -eps``".

    Both window ends are first checked from all four inits.  Ties at the
    threshold count as trivial.  A descent stops as soon as it crosses
    ``-eps`` since the energy never rises afterwards.
    """
    domain = default_gl_domain() if domain is None else domain
    if eps_energy is None:
        eps_energy = 1e-8 * kappa ** 2 * domain.volume
    lo, hi = map(float, window)
    log = []

    def nontrivial(H, all_inits=False):
        if all_inits:
            best, _ = minimize_best(kappa, H, domain, gtol=gtol, maxiter=maxiter,
                                    stop_below=-eps_energy)
        else:
            best = minimize(kappa, H, "trial", domain, gtol=gtol, maxiter=maxiter,
                            stop_below=-eps_energy)
        t = best.energy.total
        flag = t < -eps_energy
        log.append((H, t, bool(flag)))
        return flag

    if not nontrivial(lo, True) or nontrivial(hi, True):
        raise BracketError(f"window {window} does not bracket the transition at kappa={kappa}")
    for _ in range(int(budget)):
        mid = 0.5 * (lo + hi)
        if nontrivial(mid):
            lo = mid
        else:
            hi = mid
    yes = [h for h, _, f in log if f]
    no = [h for h, _, f in log if not f]
    mono = max(yes) < min(no)
    return HC3ModEstimate(0.5 * (lo + hi), (lo, hi), log, eps_energy, bool(mono))


# ---------------------------------------------------------------------------
# output


def dump_state(result: MinimizeResult, path, inequality=None):
    """``path.psi`` (complex128), ``path.a`` (float64) and ``path.json``."""
    st = result.state
    lat = st.lattice
    np.asarray(st.psi, "<c16").tofile(f"{path}.psi")
    np.asarray(st.a, "<f8").tofile(f"{path}.a")
    meta = {
        "grid": {"kind": lat.kind, "shape": list(lat.shape),
                 "psi_layout": "cell index (r slowest, z fastest)",
                 "a_layout": "link index: radial, angular, axial blocks",
                 "params": lat.params},
        "kappa": st.kappa, "H": st.H, "init": result.init,
        "converged": result.converged, "grad_max": result.grad_max,
        "energy": result.energy.as_dict(),
        "inequalities": None if inequality is None else inequality.to_dict(),
    }
    with open(f"{path}.json", "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def write_transition_csv(log, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("H,best_total,nontrivial_flag\n")
        for H, t, f in sorted(log):
            fh.write(f"{H:.17g},{t:.17g},{int(f)}\n")
