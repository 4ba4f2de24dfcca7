"""Tangency curve of a constant field on a closed surface and its functionals.

``Gamma = {x : beta . N(x) = 0}`` is traced by predictor-corrector
continuation in chart coordinates.  Along it we evaluate the normal
curvature ``k_n = K(T x N, beta)``, the pointwise functional ``gamma_tilde``
and its infimum ``gamma_hat`` together with the set where it is attained.

Conventions: ``N`` is the interior unit normal and ``K_ij = r_ij . N`` in the
chart basis, so a convex surface has a positive definite ``K``.  Each
component is oriented by ``T = grad_S(beta . N) x N / |...|``, which makes
``T x n_out`` point into ``{beta . N > 0}``; only ``|k_n|`` and ``|T . beta|``
enter the reported functionals.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import GammaNotRegularError, GeometryError, HC3Error

__all__ = [
    "TraceParams",
    "TangencyCurve",
    "AssumptionReport",
    "normal_and_shape",
    "shape_form",
    "trace_gamma",
    "normal_curvature",
    "gamma_tilde",
    "gamma_hat",
    "check_assumptions",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class TraceParams:
    step: float = 1e-2          # predictor step, fraction of the surface diameter
    corrector_tol: float = 1e-10
    seed_grid: int = 128
    grad_min: float = 1e-6      # regularity threshold on |grad_S (beta . N)|
    max_steps: int = 200_000
    pole_tol: float = 1e-3
    tangency_tol: float = 1e-6


def _unit(beta):
    beta = np.asarray(beta, float)
    n = np.linalg.norm(beta)
    if not n > 0:
        raise ValueError("beta must be nonzero")
    return beta / n


# ---------------------------------------------------------------------------
# local differential geometry


def normal_and_shape(surface, u, v):
    """Interior unit normal and second fundamental form at ``(u, v)``.

    ``K`` is returned as the symmetric 2x2 matrix ``[[L, M], [M, N]]`` in the
    chart basis ``(r_u, r_v)``.
    """
    N = surface.interior_normal(u, v)
    ruu, ruv, rvv = surface.second_partials(u, v)
    L, M, Nn = (np.sum(x * N, axis=-1) for x in (ruu, ruv, rvv))
    K = np.stack([np.stack([L, M], -1), np.stack([M, Nn], -1)], -2)
    return N, K


def _first_form(surface, u, v):
    ru, rv = surface.partials(u, v)
    J = np.stack([ru, rv], axis=-1)  # (..., 3, 2)
    G = np.swapaxes(J, -1, -2) @ J
    return J, G


def shape_form(surface, u, v, X, Y):
    """``K(X, Y)`` for 3D vectors, after projecting both onto the tangent plane."""
    J, G = _first_form(surface, u, v)
    _, K = normal_and_shape(surface, u, v)
    Gi = np.linalg.inv(G)
    a = Gi @ (J.T @ np.asarray(X, float))
    b = Gi @ (J.T @ np.asarray(Y, float))
    return float(a @ K @ b)


def _f_and_grad(surface, beta, u, v):
    """``f = beta . N``, its chart gradient, and the surface gradient norm."""
    J, G = _first_form(surface, u, v)
    N, K = normal_and_shape(surface, u, v)
    Gi = np.linalg.inv(G)
    f = float(beta @ N)
    # Weingarten: N_i = -J G^{-1} K e_i
    g = -(beta @ J) @ Gi @ K
    gs = math.sqrt(max(float(g @ Gi @ g), 0.0))
    return f, g, Gi, J, N, K, gs


def _correct(surface, beta, u, v, tol, max_iter=30):
    for _ in range(max_iter):
        f, g, Gi, *_rest, gs = _f_and_grad(surface, beta, u, v)
        if gs == 0.0:
            raise GammaNotRegularError(f"grad(beta.N) vanishes at u={u}, v={v}")
        d = -f * (Gi @ g) / gs**2
        u, v = u + d[0], v + d[1]
        if abs(f) < tol:
            # one more quadratic step already applied; done
            return u, v, True
    return u, v, False


# ---------------------------------------------------------------------------
# the curve


@dataclass
class TangencyCurve:
    """Closed sampled component of Gamma.

    Arrays share a leading sample axis.  The last sample repeats the first
    (``s[-1]`` is the length), so the closure can be checked directly.
    """

    curve_id: int
    s: np.ndarray
    points: np.ndarray
    T: np.ndarray
    N: np.ndarray
    kn: np.ndarray
    tbeta: np.ndarray
    gamma_tilde: np.ndarray
    uv: np.ndarray
    grad_norm: np.ndarray
    beta: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def length(self):
        return float(self.s[-1])

    def __len__(self):
        return len(self.s)

    def reversed(self):
        """Opposite orientation: ``T`` and ``k_n`` flip sign, ``gamma_tilde`` does not."""
        L = self.length
        rev = lambda a: a[::-1].copy()  # noqa: E731
        return TangencyCurve(
            self.curve_id, L - self.s[::-1], rev(self.points), -rev(self.T),
            rev(self.N), -rev(self.kn), -rev(self.tbeta), rev(self.gamma_tilde),
            rev(self.uv), rev(self.grad_norm), self.beta,
            dict(self.meta, reversed=not self.meta.get("reversed", False)))

    def check_invariants(self, tol=1e-10, trace_tol=1e-8):
        nT = np.linalg.norm(self.T, axis=1)
        nN = np.linalg.norm(self.N, axis=1)
        ok = (np.all(abs(nT - 1) < tol) and np.all(abs(nN - 1) < tol)
              and np.all(abs(np.sum(self.T * self.N, 1)) < tol)
              and np.all(abs(self.N @ self.beta) < trace_tol)
              and np.linalg.norm(self.points[-1] - self.points[0]) < trace_tol)
        return bool(ok)

    def to_csv(self, path):
        cols = ["s", "x", "y", "z", "Tx", "Ty", "Tz", "Nx", "Ny", "Nz",
                "kn", "tbeta", "gamma_tilde"]
        data = np.column_stack([self.s, self.points, self.T, self.N,
                                self.kn, self.tbeta, self.gamma_tilde])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in data:
                w.writerow([f"{x:.17g}" for x in row])


def _frame(surface, beta, u, v):
    f, g, Gi, J, N, K, gs = _f_and_grad(surface, beta, u, v)
    grad3 = J @ (Gi @ g)  # surface gradient as a 3D tangent vector
    T = np.cross(grad3, N)
    T /= np.linalg.norm(T)
    # keep T exactly orthogonal to N
    T -= (T @ N) * N
    T /= np.linalg.norm(T)
    tau = Gi @ (J.T @ T)  # chart velocity with unit 3D speed
    return T, N, K, J, Gi, gs, tau


def normal_curvature(surface, u, v, beta, T=None, trace_tol=1e-8):
    """``k_n = K(T x N, beta)`` at a point of Gamma.

    ``beta`` is projected to the tangent plane first; off Gamma (``|beta.N|``
    above ``trace_tol``) a :class:`GeometryError` is raised.
    """
    beta = _unit(beta)
    Tf, N, K, J, Gi, _, _ = _frame(surface, beta, u, v)
    if abs(beta @ N) > trace_tol:
        raise GeometryError(f"sample off Gamma: |beta.N| = {abs(beta @ N):.3e}")
    if T is None:
        T = Tf
    X = np.cross(T, N)
    bt = beta - (beta @ N) * N
    a = Gi @ (J.T @ X)
    b = Gi @ (J.T @ bt)
    return float(a @ K @ b)


def gamma_tilde(kn, tbeta, constants):
    """Pointwise coefficient functional on Gamma (vectorised over samples)."""
    d = constants.delta0
    kn = np.abs(np.asarray(kn, float))
    tb = np.asarray(tbeta, float)
    val = (2.0 ** (-2.0 / 3.0) * constants.nu0_hat * d ** (1.0 / 3.0)
           * kn ** (2.0 / 3.0) * (d + (1.0 - d) * tb * tb) ** (1.0 / 3.0))
    return float(val) if val.ndim == 0 else val


def _seeds(surface, beta, n):
    hu = (surface.u_range[1] - surface.u_range[0]) / n
    hv = surface.v_period / n
    u = surface.u_range[0] + (np.arange(n) + 0.5) * hu
    v = surface.v_range[0] + np.arange(n) * hv
    U, V = np.meshgrid(u, v, indexing="ij")
    F = surface.interior_normal(U, V) @ beta
    seeds = []
    # edges along u (non-periodic) and along v (periodic)
    for i in range(n):
        for j in range(n):
            a = F[i, j]
            for i2, j2 in ((i + 1, j), (i, j + 1)):
                if i2 >= n:
                    continue
                jj = j2 % n
                b = F[i2, jj]
                if a * b < 0 or (a == 0.0) != (b == 0.0):
                    w = a / (a - b) if a != b else 0.0
                    du = (i2 - i) * hu * w
                    dv = (j2 - j) * hv * w
                    seeds.append((U[i, j] + du, V[i, j] + dv))
    return seeds


def _trace_component(surface, beta, u0, v0, prm, ds):
    u, v, ok = _correct(surface, beta, u0, v0, prm.corrector_tol)
    if not ok:
        raise GammaNotRegularError("corrector did not converge at a seed")
    pts, uvs = [surface.point(u, v)], [(u, v)]
    start = pts[0]
    travelled = 0.0
    h = ds
    for _ in range(prm.max_steps):
        T, N, K, J, Gi, gs, tau = _frame(surface, beta, u, v)
        if gs < prm.grad_min:
            raise GammaNotRegularError(
                f"|grad_S(beta.N)| = {gs:.2e} below {prm.grad_min:g} on Gamma")
        while True:
            un, vn = u + h * tau[0], v + h * tau[1]
            try:
                un, vn, ok = _correct(surface, beta, un, vn, prm.corrector_tol, 8)
            except GammaNotRegularError:
                ok = False
            p = surface.point(un, vn)
            step_len = np.linalg.norm(p - pts[-1])
            if ok and 0.5 * h < step_len < 1.5 * h:
                break
            h *= 0.5
            if h < 1e-8 * ds:
                raise GammaNotRegularError("continuation step collapsed")
        u, v = un, vn
        travelled += step_len
        gap = np.linalg.norm(p - start)
        if travelled > 3 * ds and gap < 1.5 * ds:
            if gap > 0.5 * ds:
                pts.append(p)
                uvs.append((u, v))
            break
        pts.append(p)
        uvs.append((u, v))
        h = min(ds, 1.5 * h)
        if surface.near_pole(u, prm.pole_tol):
            raise GeometryError("Gamma passes within pole_tol of a chart pole")
    else:
        raise HC3Error("curve did not close within max_steps")
    return np.array(pts), np.array(uvs)


def _close_and_spline(surface, pts, uvs):
    """Periodic splines of position and chart coordinates in chord parameter."""
    P = np.vstack([pts, pts[:1]])
    c = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    per = surface.v_period
    uv = np.vstack([uvs, uvs[:1]])
    wind = round((uvs[-1, 1] - uvs[0, 1]) / per)
    uv[-1, 1] = uvs[0, 1] + wind * per  # unwrapped end value
    lin = wind * per * c / c[-1]
    sp_p = CubicSpline(c, P, bc_type="periodic")
    sp_u = CubicSpline(c, uv[:, 0], bc_type="periodic")
    sp_v = CubicSpline(c, uv[:, 1] - lin, bc_type="periodic")

    def uv_at(x):
        return sp_u(x), sp_v(x) + wind * per * x / c[-1]

    dP = sp_p.derivative()
    seg = np.diff(c)
    mids = 0.5 * (c[:-1] + c[1:])
    xs = mids[:, None] + 0.5 * seg[:, None] * _GL_X[None, :]
    speed = np.linalg.norm(dP(xs.ravel()), axis=1).reshape(xs.shape)
    arcs = 0.5 * seg * (speed @ _GL_W)
    s = np.concatenate([[0.0], np.cumsum(arcs)])
    return c, s, uv_at, dP


def _sample_fields(surface, beta, uv, constants):
    n = len(uv)
    out = {k: np.empty((n, 3)) for k in ("T", "N")}
    kn = np.empty(n)
    tb = np.empty(n)
    gn = np.empty(n)
    for i, (u, v) in enumerate(uv):
        T, N, K, J, Gi, gs, _ = _frame(surface, beta, u, v)
        out["T"][i], out["N"][i] = T, N
        X = np.cross(T, N)
        bt = beta - (beta @ N) * N
        kn[i] = (Gi @ (J.T @ X)) @ K @ (Gi @ (J.T @ bt))
        tb[i] = T @ beta
        gn[i] = gs
    gt = gamma_tilde(kn, tb, constants) if constants is not None else np.full(n, np.nan)
    return out["T"], out["N"], kn, tb, gt, gn


def trace_gamma(surface, beta, params=TraceParams(), constants=None):
    """All closed components of ``{beta . N = 0}``.

    Components are seeded from sign changes of ``beta . N`` on a
    ``seed_grid``-square chart grid and returned in seed order.  With
    ``constants`` the ``gamma_tilde`` column is filled.

    Raises :class:`GammaNotRegularError` if the zero set is degenerate.
    """
    beta = _unit(beta)
    surface = surface.repoled(beta)
    ds = params.step * surface.diameter()
    seeds = _seeds(surface, beta, params.seed_grid)
    curves = []
    covered_pts = []
    for (su, sv) in seeds:
        p = surface.point(su, sv)
        if any(np.min(np.linalg.norm(cp - p, axis=1)) < 2 * ds for cp in covered_pts):
            continue
        pts, uvs = _trace_component(surface, beta, su, sv, params, ds)
        covered_pts.append(pts)
        c, s, uv_at, _ = _close_and_spline(surface, pts, uvs)
        uv = np.column_stack(uv_at(c))
        uv[-1] = uv[0]
        T, N, kn, tb, gt, gn = _sample_fields(surface, beta, uv, constants)
        pts_c = surface.point(uv[:, 0], uv[:, 1])
        curve = TangencyCurve(len(curves), s, pts_c, T, N, kn, tb, gt, uv, gn, beta,
                              meta={"chord": c, "surface": surface.name})
        curve._uv_at = uv_at
        curve._surface = surface
        curves.append(curve)
    if not curves:
        raise HC3Error("beta.N never vanishes on a closed surface: inconsistent chart")
    return curves


# ---------------------------------------------------------------------------
# infimum and minimiser set


def _gt_at_chord(curve, x, constants, tol):
    surface, beta = curve._surface, curve.beta
    u, v = curve._uv_at(x)
    u, v, _ = _correct(surface, beta, float(u), float(v), tol)
    kn = normal_curvature(surface, u, v, beta, trace_tol=1e-6)
    T = _frame(surface, beta, u, v)[0]
    return gamma_tilde(kn, T @ beta, constants)


def gamma_hat(curves, constants, value_tol=1e-9, params=TraceParams()):
    """Infimum of ``gamma_tilde`` over Gamma and the loci attaining it.

    The minimum over samples is refined by a bounded 1D minimisation along
    each curve.  The minimiser set lists, per curve, arc-length intervals
    ``(s_lo, s_hi)`` whose values are within ``value_tol`` (relative) of the
    minimum; isolated minimisers appear as degenerate intervals.
    """
    if not curves:
        raise HC3Error("empty Gamma")
    gmin = min(float(cv.gamma_tilde[:-1].min()) for cv in curves)
    tol_abs = value_tol * max(abs(gmin), 1e-300)
    cands = []
    for cv in curves:
        g = cv.gamma_tilde[:-1]
        n = len(g)
        if np.ptp(g) <= tol_abs:
            loc = [int(np.argmin(g))]
        else:
            loc = [k for k in range(n)
                   if g[k] <= g[k - 1] and g[k] <= g[(k + 1) % n]
                   and g[k] <= gmin + 1e-3 * abs(gmin)]
        cands.append((cv, g, loc))
    refined = []
    best = gmin
    for cv, g, loc in cands:
        c = cv.meta["chord"]
        for k in loc:
            lo = c[k - 1] if k > 0 else c[k] - (c[-1] - c[-2])
            hi = c[k + 1]
            res = minimize_scalar(lambda x: _gt_at_chord(cv, x % c[-1], constants,
                                                         params.corrector_tol),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-10 * c[-1]})
            if res.fun < g[k]:
                xs, val = float(res.x) % c[-1], float(res.fun)
            else:
                xs, val = float(c[k]), float(g[k])
            refined.append((cv.curve_id, xs, val))
            best = min(best, val)
    tol_abs = value_tol * max(abs(best), 1e-300)
    mset = []
    for cv, g, _ in cands:
        s = cv.s
        inside = g <= best + tol_abs
        intervals = _runs(inside, s)
        for cid, x, val in refined:
            if cid != cv.curve_id or val > best + tol_abs:
                continue
            sx = float(np.interp(x, cv.meta["chord"], s))
            if not any(a - 1e-12 <= sx <= b + 1e-12 for a, b in intervals):
                intervals.append((sx, sx))
        for a, b in _merge(intervals, s[-1]):
            mset.append((cv.curve_id, (a, b)))
    return float(best), mset


def _runs(mask, s):
    n = len(mask)
    if mask.all():
        return [(0.0, float(s[-1]))]
    out = []
    k = 0
    while k < n:
        if mask[k]:
            j = k
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((float(s[k]), float(s[j])))
            k = j + 1
        else:
            k += 1
    # join a run that wraps through s = 0
    if len(out) > 1 and mask[0] and mask[-1]:
        first, last = out[0], out.pop()
        out[0] = (last[0], first[1] + float(s[-1]))
    return out


def _merge(intervals, length):
    intervals = sorted(intervals)
    out = []
    for a, b in intervals:
        if out and a <= out[-1][1] + 1e-12:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# assumptions


@dataclass
class AssumptionReport:
    gamma_regular: bool
    min_abs_kn: float
    kn_nonvanishing: bool
    tangency_point_count: int
    tangency_finite: bool
    details: list = field(default_factory=list)
    kn_threshold: float = 1e-6

    @property
    def all_pass(self):
        return self.gamma_regular and self.kn_nonvanishing and self.tangency_finite

    def to_json(self, path=None):
        d = asdict(self)
        d["all_pass"] = self.all_pass
        text = json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _tangency_points(curve, tol):
    a = np.abs(curve.tbeta[:-1])
    n = len(a)
    hot = a > 1 - tol
    if not hot.any():
        return 0, True
    runs = _runs(hot, curve.s[:-1] if n else curve.s)
    step = curve.length / n
    finite = all((b - a_) <= 1.5 * step for a_, b in runs)
    return len(runs), finite


def check_assumptions(surface, beta, constants, params=TraceParams(), kn_threshold=1e-6,
                      curves=None):
    """Evaluate the genericity assumptions for ``(surface, beta)``.

    Never raises on geometric failure: a degenerate tangency set is reported
    with ``gamma_regular = False``.
    """
    beta = _unit(beta)
    try:
        if curves is None:
            curves = trace_gamma(surface, beta, params, constants)
    except (GammaNotRegularError, GeometryError) as exc:
        return AssumptionReport(False, float("nan"), False, 0, False,
                                details=[{"error": str(exc)}],
                                kn_threshold=kn_threshold)
    regular = all(float(c.grad_norm.min()) >= params.grad_min for c in curves)
    min_kn = min(float(np.abs(c.kn).min()) for c in curves)
    ghat, _ = gamma_hat(curves, constants, params=params)
    count = 0
    finite = True
    details = []
    for c in curves:
        k, fin = _tangency_points(c, params.tangency_tol)
        count += k
        finite &= fin
        gmax = float(np.max(c.gamma_tilde))
        details.append({
            "curve_id": c.curve_id,
            "length": c.length,
            "samples": len(c),
            "min_grad_norm": float(c.grad_norm.min()),
            "min_abs_kn": float(np.abs(c.kn).min()),
            "max_abs_tbeta": float(np.abs(c.tbeta).max()),
            "gamma_tilde_min": float(np.min(c.gamma_tilde)),
            "gamma_tilde_max": gmax,
            # hypothesis of the monotonicity theorem on this component
            "gamma_tilde_nonconstant": bool(gmax > ghat * (1 + 1e-6)),
        })
    return AssumptionReport(regular, min_kn, min_kn > kn_threshold, count, finite,
                            details=details, kn_threshold=kn_threshold)
