"""Parametric closed surfaces with analytic first and second derivatives.

A surface is a chart ``(u, v) -> R^3`` on ``[u0, u1] x [v0, v1]``, periodic in
``v`` and collapsing to a pole at each end of ``u``.  The constructors below
fix the orientation so that :meth:`ParametricSurface.interior_normal` points
into the enclosed body.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import GeometryError

__all__ = ["ParametricSurface", "sphere", "ellipsoid", "capsule", "expression_surface"]


class ParametricSurface:
    """Chart evaluator plus first and second partials.

    Parameters
    ----------
    r, d1, d2 : callables
        ``r(u, v) -> (..., 3)``; ``d1`` returns ``(r_u, r_v)``; ``d2`` returns
        ``(r_uu, r_uv, r_vv)``.  All accept broadcastable arrays.
    u_range, v_range : pairs of floats
        Chart domain; ``v`` is periodic.
    orientation : +1 or -1
        Sign such that ``orientation * (r_u x r_v)`` is the outward normal.
        ``None`` detects it from the signed enclosed volume.
    repole : callable, optional
        ``repole(beta) -> ParametricSurface`` giving an equivalent chart whose
        poles sit where the normal is parallel to ``beta``.
    """

    def __init__(self, r, d1, d2, u_range, v_range=(0.0, 2 * math.pi), *,
                 orientation=None, name="surface", params=None, repole=None,
                 rotation=None):
        self._r, self._d1, self._d2 = r, d1, d2
        self.u_range = tuple(float(x) for x in u_range)
        self.v_range = tuple(float(x) for x in v_range)
        self.name = name
        self.params = dict(params or {})
        self._repole = repole
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, float)
        if orientation is None:
            orientation = 1 if self._signed_volume() > 0 else -1
        self.orientation = int(orientation)

    # evaluation -------------------------------------------------------
    def point(self, u, v):
        return self._r(u, v) @ self.rotation.T

    def partials(self, u, v):
        ru, rv = self._d1(u, v)
        R = self.rotation.T
        return ru @ R, rv @ R

    def second_partials(self, u, v):
        R = self.rotation.T
        return tuple(x @ R for x in self._d2(u, v))

    @property
    def v_period(self):
        return self.v_range[1] - self.v_range[0]

    def diameter(self, n=64):
        u = np.linspace(*self.u_range, n)
        v = np.linspace(*self.v_range, n, endpoint=False)
        P = self.point(*np.meshgrid(u, v, indexing="ij")).reshape(-1, 3)
        return float(np.linalg.norm(np.ptp(P, axis=0)))

    def _signed_volume(self, n=96):
        # divergence theorem on a midpoint grid: V = 1/3 * int r . (r_u x r_v)
        hu = (self.u_range[1] - self.u_range[0]) / n
        hv = (self.v_range[1] - self.v_range[0]) / n
        u = self.u_range[0] + (np.arange(n) + 0.5) * hu
        v = self.v_range[0] + (np.arange(n) + 0.5) * hv
        U, V = np.meshgrid(u, v, indexing="ij")
        ru, rv = self._d1(U, V)
        return float(np.sum(self._r(U, V) * np.cross(ru, rv)) * hu * hv / 3.0)

    def interior_normal(self, u, v):
        ru, rv = self.partials(u, v)
        c = np.cross(ru, rv)
        nrm = np.linalg.norm(c, axis=-1)
        if np.any(nrm < 1e-14):
            raise GeometryError(f"degenerate chart point at u={u}, v={v}")
        return -self.orientation * c / nrm[..., None]

    # transformations -------------------------------------------------------
    def rotated(self, Q):
        """The same surface moved by the rigid rotation ``Q``."""
        Q = np.asarray(Q, float)
        repole = None
        if self._repole is not None:
            inner = self._repole
            repole = lambda beta: inner(Q.T @ beta).rotated(Q)  # noqa: E731
        return ParametricSurface(self._r, self._d1, self._d2, self.u_range,
                                 self.v_range, orientation=self.orientation,
                                 name=self.name, params=self.params,
                                 repole=repole, rotation=Q @ self.rotation)

    def repoled(self, beta):
        """Equivalent chart with poles away from ``{beta . N = 0}``, if available."""
        if self._repole is None:
            return self
        return self._repole(np.asarray(beta, float))

    def near_pole(self, u, tol=1e-3):
        u = np.asarray(u)
        return np.minimum(u - self.u_range[0], self.u_range[1] - u) < tol


# ---------------------------------------------------------------------------
# built-ins


def _unit_sphere_chart():
    def w(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        su = np.sin(u)
        return np.stack([su * np.cos(v), su * np.sin(v), np.cos(u)], axis=-1)

    def d1(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        wu = np.stack([cu * cv, cu * sv, -su], axis=-1)
        wv = np.stack([-su * sv, su * cv, np.zeros_like(u)], axis=-1)
        return wu, wv

    def d2(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        wuu = np.stack([-su * cv, -su * sv, -cu], axis=-1)
        wuv = np.stack([-cu * sv, cu * cv, np.zeros_like(u)], axis=-1)
        wvv = np.stack([-su * cv, -su * sv, np.zeros_like(u)], axis=-1)
        return wuu, wuv, wvv

    return w, d1, d2


def _frame_with_axis(q):
    """Rotation matrix whose third column is the unit vector ``q``."""
    q = np.asarray(q, float)
    q = q / np.linalg.norm(q)
    a = np.array([1.0, 0.0, 0.0]) if abs(q[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - (a @ q) * q
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(q, e1)
    return np.column_stack([e1, e2, q])


def ellipsoid(a, b, c, pole=(0.0, 0.0, 1.0)):
    """Axis-aligned ellipsoid ``x^2/a^2 + y^2/b^2 + z^2/c^2 = 1``.

    The chart is ``diag(a, b, c) P w(u, v)`` with ``w`` the unit-sphere chart
    and ``P`` a rotation of the parameter sphere taking ``e_z`` to ``pole``.
    """
    if min(a, b, c) <= 0:
        raise ValueError("semi-axes must be positive")
    D = np.diag([a, b, c]).astype(float)
    M = D @ _frame_with_axis(pole)
    w, wd1, wd2 = _unit_sphere_chart()

    def r(u, v):
        return w(u, v) @ M.T

    def d1(u, v):
        return tuple(x @ M.T for x in wd1(u, v))

    def d2(u, v):
        return tuple(x @ M.T for x in wd2(u, v))

    def repole(beta):
        # the point whose outward normal is parallel to beta sits at D q
        return ellipsoid(a, b, c, pole=D @ beta)

    orient = 1 if np.linalg.det(M) > 0 else -1
    return ParametricSurface(r, d1, d2, (0.0, math.pi), orientation=orient,
                             name="ellipsoid", params={"a": a, "b": b, "c": c},
                             repole=repole)


def sphere(radius=1.0, pole=(0.0, 0.0, 1.0)):
    s = ellipsoid(radius, radius, radius, pole=pole)
    s.name, s.params = "sphere", {"r": radius}
    inner = s._repole
    s._repole = lambda beta: _renamed(inner(beta), "sphere", {"r": radius})
    return s


def _renamed(surf, name, params):
    surf.name, surf.params = name, params
    return surf


def capsule(radius=1.0, half_length=1.0):
    """Cylinder of the given radius along ``e_z`` closed by hemispherical caps.

    The lateral wall is a cylindrical patch with axis ``e_z``; with the field
    along the axis the tangency set is the whole wall.
    """
    rad, hl = float(radius), float(half_length)
    q = 0.5 * math.pi * rad
    total = 2 * q + 2 * hl

    def profile(u):
        u = np.asarray(u, float)
        rho = np.empty_like(u)
        z = np.empty_like(u)
        drho, dz, d2rho, d2z = (np.empty_like(u) for _ in range(4))
        lo = u <= q
        hi = u >= q + 2 * hl
        mid = ~(lo | hi)
        p = u[lo] / rad
        rho[lo], z[lo] = rad * np.sin(p), -hl - rad * np.cos(p)
        drho[lo], dz[lo] = np.cos(p), np.sin(p)
        d2rho[lo], d2z[lo] = -np.sin(p) / rad, np.cos(p) / rad
        rho[mid], z[mid] = rad, -hl + (u[mid] - q)
        drho[mid], dz[mid], d2rho[mid], d2z[mid] = 0.0, 1.0, 0.0, 0.0
        p = (u[hi] - q - 2 * hl) / rad
        rho[hi], z[hi] = rad * np.cos(p), hl + rad * np.sin(p)
        drho[hi], dz[hi] = -np.sin(p), np.cos(p)
        d2rho[hi], d2z[hi] = -np.cos(p) / rad, -np.sin(p) / rad
        return rho, z, drho, dz, d2rho, d2z

    def r(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        rho, z, *_ = profile(u)
        return np.stack([rho * np.cos(v), rho * np.sin(v), z], axis=-1)

    def d1(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        rho, z, drho, dz, _, _ = profile(u)
        cv, sv = np.cos(v), np.sin(v)
        ru = np.stack([drho * cv, drho * sv, dz], axis=-1)
        rv = np.stack([-rho * sv, rho * cv, np.zeros_like(u)], axis=-1)
        return ru, rv

    def d2(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        rho, z, drho, dz, d2rho, d2z = profile(u)
        cv, sv = np.cos(v), np.sin(v)
        ruu = np.stack([d2rho * cv, d2rho * sv, d2z], axis=-1)
        ruv = np.stack([-drho * sv, drho * cv, np.zeros_like(u)], axis=-1)
        rvv = np.stack([-rho * cv, -rho * sv, np.zeros_like(u)], axis=-1)
        return ruu, ruv, rvv

    return ParametricSurface(r, d1, d2, (0.0, total), name="capsule",
                             params={"radius": rad, "half_length": hl})


def expression_surface(x_expr, y_expr, z_expr, u_range=(0.0, math.pi),
                       v_range=(0.0, 2 * math.pi), constants=None):
    """Surface from arithmetic expressions in ``u`` and ``v``.

    Expressions are parsed with sympy, differentiated symbolically and
    compiled with numpy.  ``constants`` maps extra symbol names to numbers.
    """
    import sympy

    u, v = sympy.symbols("u v", real=True)
    local = {"u": u, "v": v, "pi": sympy.pi}
    local.update({k: sympy.Float(val) for k, val in (constants or {}).items()})
    try:
        exprs = [sympy.sympify(e, locals=local) for e in (x_expr, y_expr, z_expr)]
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise GeometryError(f"cannot parse chart expression: {exc}") from exc
    free = set().union(*(e.free_symbols for e in exprs)) - {u, v}
    if free:
        raise GeometryError(f"unknown symbols in chart: {sorted(map(str, free))}")

    def compile_(es):
        fns = [sympy.lambdify((u, v), e, "numpy") for e in es]

        def f(U, V):
            U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
            return np.stack([np.broadcast_to(fn(U, V), U.shape).astype(float)
                             for fn in fns], axis=-1)

        return f

    r = compile_(exprs)
    ru = compile_([sympy.diff(e, u) for e in exprs])
    rv = compile_([sympy.diff(e, v) for e in exprs])
    ruu = compile_([sympy.diff(e, u, 2) for e in exprs])
    ruv = compile_([sympy.diff(e, u, v) for e in exprs])
    rvv = compile_([sympy.diff(e, v, 2) for e in exprs])
    return ParametricSurface(
        r, lambda a, b: (ru(a, b), rv(a, b)),
        lambda a, b: (ruu(a, b), ruv(a, b), rvv(a, b)),
        u_range, v_range, name="expression",
        params={"x": str(x_expr), "y": str(y_expr), "z": str(z_expr)})
