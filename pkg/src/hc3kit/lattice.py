"""Cell-centred finite-volume lattices carrying link variables.

A lattice is a set of cells (volume, centre) and the oriented links between
face-adjacent cells.  Each link carries a conductance ``c_e = area / length``
and the line integral of the reference potential ``F = (-x2, x1, 0) / 2``
along it.  Boundary faces carry no link, which is exactly the natural
(Neumann) condition of the quadratic form

    Q(u) = sum_e c_e |exp(i B phi_e) u_j - u_i|^2 .

Plaquettes (elementary closed loops of four links) are kept for the discrete
curl used by the Ginzburg-Landau probe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = ["Lattice", "box_lattice", "cylinder_lattice"]


@dataclass
class Lattice:
    kind: str
    shape: tuple
    centres: np.ndarray        # (n, 3)
    volumes: np.ndarray        # (n,)
    dist: np.ndarray           # distance of each centre to the boundary
    tail: np.ndarray           # link start cell
    head: np.ndarray           # link end cell
    cond: np.ndarray           # area / length
    length: np.ndarray
    phase_F: np.ndarray        # line integral of F along the link
    plaq_links: np.ndarray     # (p, 4) link ids around each plaquette
    plaq_signs: np.ndarray     # (p, 4) orientation of each link in the loop
    plaq_area: np.ndarray
    plaq_normal_flux_F: np.ndarray  # flux of curl F = e_z through each plaquette
    dual_length: np.ndarray    # length of the dual edge through each plaquette
    max_spacing: float
    params: dict = field(default_factory=dict)

    @property
    def n_cells(self):
        return len(self.volumes)

    @property
    def n_links(self):
        return len(self.tail)

    @property
    def total_volume(self):
        return float(self.volumes.sum())

    def incidence(self):
        """Signed link-to-cell incidence ``G`` with ``(G u)_e = u_head - u_tail``."""
        return self._incidence

    def curl(self):
        """Plaquette circulation of a link field (sparse ``p x m``)."""
        return self._curl

    @cached_property
    def _incidence(self):
        m = self.n_links
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate([self.head, self.tail])
        vals = np.concatenate([np.ones(m), -np.ones(m)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n_cells))

    @cached_property
    def _curl(self):
        p = len(self.plaq_area)
        rows = np.repeat(np.arange(p), 4)
        return sp.csr_matrix((self.plaq_signs.ravel(), (rows, self.plaq_links.ravel())),
                             shape=(p, self.n_links))


def _index(shape):
    return np.arange(int(np.prod(shape))).reshape(shape)


def box_lattice(Lx, Ly, Lz, nx, ny, nz):
    """Uniform cell-centred grid on the box ``[-L/2, L/2]^3`` (per axis)."""
    if min(nx, ny, nz) < 2 or min(Lx, Ly, Lz) <= 0:
        raise ValueError("invalid box lattice")
    hx, hy, hz = Lx / nx, Ly / ny, Lz / nz
    x = -Lx / 2 + (np.arange(nx) + 0.5) * hx
    y = -Ly / 2 + (np.arange(ny) + 0.5) * hy
    z = -Lz / 2 + (np.arange(nz) + 0.5) * hz
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    idx = _index((nx, ny, nz))
    centres = np.stack([X, Y, Z], -1).reshape(-1, 3)
    vol = np.full(idx.size, hx * hy * hz)
    dist = np.minimum.reduce([Lx / 2 - abs(X), Ly / 2 - abs(Y), Lz / 2 - abs(Z)]).ravel()

    tails, heads, conds, lens, phs = [], [], [], [], []
    # x links: F . e_x = -y / 2
    tails.append(idx[:-1].ravel()); heads.append(idx[1:].ravel())
    conds.append(np.full(heads[-1].size, hy * hz / hx)); lens.append(np.full(heads[-1].size, hx))
    phs.append((-0.5 * Y[:-1] * hx).ravel())
    # y links: F . e_y = x / 2
    tails.append(idx[:, :-1].ravel()); heads.append(idx[:, 1:].ravel())
    conds.append(np.full(heads[-1].size, hx * hz / hy)); lens.append(np.full(heads[-1].size, hy))
    phs.append((0.5 * X[:, :-1] * hy).ravel())
    # z links
    tails.append(idx[:, :, :-1].ravel()); heads.append(idx[:, :, 1:].ravel())
    conds.append(np.full(heads[-1].size, hx * hy / hz)); lens.append(np.full(heads[-1].size, hz))
    phs.append(np.zeros(heads[-1].size))
    off = np.cumsum([0] + [t.size for t in tails])
    lid = [np.arange(off[k], off[k + 1]).reshape(s) for k, s in enumerate(
        [(nx - 1, ny, nz), (nx, ny - 1, nz), (nx, ny, nz - 1)])]

    # plaquettes: xy (normal z), yz (normal x), zx (normal y)
    pl, sg, ar, fl, da = [], [], [], [], []
    ex, ey, ez = lid
    # xy at (i, j, k): x(i,j) + y(i+1,j) - x(i,j+1) - y(i,j)
    a = np.stack([ex[:, :-1, :], ey[1:, :, :], ex[:, 1:, :], ey[:-1, :, :]], -1).reshape(-1, 4)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.full(len(a), hx * hy)); fl.append(np.full(len(a), hx * hy))
    da.append(np.full(len(a), hz))
    # yz at (i, j, k): y(j,k) + z(j+1,k) - y(j,k+1) - z(j,k)
    a = np.stack([ey[:, :, :-1], ez[:, 1:, :], ey[:, :, 1:], ez[:, :-1, :]], -1).reshape(-1, 4)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.full(len(a), hy * hz)); fl.append(np.zeros(len(a)))
    da.append(np.full(len(a), hx))
    # zx at (i, j, k): z(i,k) + x(i,k+1) - z(i+1,k) - x(i,k)
    a = np.stack([ez[:-1, :, :], ex[:, :, 1:], ez[1:, :, :], ex[:, :, :-1]], -1).reshape(-1, 4)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.full(len(a), hz * hx)); fl.append(np.zeros(len(a)))
    da.append(np.full(len(a), hy))

    return Lattice(
        "box", (nx, ny, nz), centres, vol, dist,
        np.concatenate(tails), np.concatenate(heads), np.concatenate(conds),
        np.concatenate(lens), np.concatenate(phs),
        np.concatenate(pl), np.concatenate(sg).astype(float), np.concatenate(ar),
        np.concatenate(fl), np.concatenate(da), max(hx, hy, hz),
        params={"Lx": Lx, "Ly": Ly, "Lz": Lz, "h": (hx, hy, hz)})


def cylinder_lattice(R, L, nr, nphi, nz):
    """Polar finite-volume grid on ``{x1^2 + x2^2 < R^2, 0 < x3 < L}``.

    Cells are annular sectors; the innermost ring consists of wedges meeting
    at the axis, whose inner face has zero area and therefore no link.
    Angular links follow arcs, so ``F`` (tangential, ``|F| = r / 2``) has the
    exact line integral ``r^2 dphi / 2`` and plaquette fluxes equal areas.
    """
    if min(nr, nphi, nz) < 2 or R <= 0 or L <= 0:
        raise ValueError("invalid cylinder lattice")
    dr, dphi, dz = R / nr, 2 * math.pi / nphi, L / nz
    r = (np.arange(nr) + 0.5) * dr
    phi = (np.arange(nphi) + 0.5) * dphi
    z = (np.arange(nz) + 0.5) * dz
    Rr, P, Z = np.meshgrid(r, phi, z, indexing="ij")
    idx = _index((nr, nphi, nz))
    centres = np.stack([Rr * np.cos(P), Rr * np.sin(P), Z], -1).reshape(-1, 3)
    vol = (Rr * dr * dphi * dz).ravel()
    dist = np.minimum.reduce([R - Rr, Z, L - Z]).ravel()

    tails, heads, conds, lens, phs = [], [], [], [], []
    # radial links (phase 0: F is tangential)
    rf = r[:-1] + 0.5 * dr
    tails.append(idx[:-1].ravel()); heads.append(idx[1:].ravel())
    conds.append(np.broadcast_to((rf * dphi * dz / dr)[:, None, None], (nr - 1, nphi, nz)).ravel())
    lens.append(np.full(heads[-1].size, dr)); phs.append(np.zeros(heads[-1].size))
    # angular links, periodic
    tails.append(idx.ravel()); heads.append(np.roll(idx, -1, axis=1).ravel())
    conds.append(np.broadcast_to((dr * dz / (r * dphi))[:, None, None], idx.shape).ravel())
    lens.append(np.broadcast_to((r * dphi)[:, None, None], idx.shape).ravel())
    phs.append(np.broadcast_to((0.5 * r * r * dphi)[:, None, None], idx.shape).ravel())
    # axial links
    tails.append(idx[:, :, :-1].ravel()); heads.append(idx[:, :, 1:].ravel())
    conds.append(np.broadcast_to((r * dr * dphi / dz)[:, None, None], (nr, nphi, nz - 1)).ravel())
    lens.append(np.full(heads[-1].size, dz)); phs.append(np.zeros(heads[-1].size))
    off = np.cumsum([0] + [t.size for t in tails])
    er = np.arange(off[0], off[1]).reshape(nr - 1, nphi, nz)
    ep = np.arange(off[1], off[2]).reshape(nr, nphi, nz)
    ez = np.arange(off[2], off[3]).reshape(nr, nphi, nz - 1)

    pl, sg, ar, fl, da = [], [], [], [], []
    # r-phi plaquettes between rings i, i+1 and angles j, j+1 (normal +z)
    a = np.stack([er, ep[1:], np.roll(er, -1, axis=1), ep[:-1]], -1).reshape(-1, 4)
    area = (rf * dr * dphi)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.broadcast_to(area[:, None, None], (nr - 1, nphi, nz)).ravel())
    fl.append(ar[-1].copy())
    da.append(np.full(len(a), dz))
    # phi-z plaquettes at ring i (normal +r)
    a = np.stack([ep[:, :, :-1], np.roll(ez, -1, axis=1), ep[:, :, 1:], ez], -1).reshape(-1, 4)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.broadcast_to((r * dphi * dz)[:, None, None], (nr, nphi, nz - 1)).ravel())
    fl.append(np.zeros(len(a)))
    da.append(np.full(len(a), dr))
    # z-r plaquettes at angle j (normal +phi)
    a = np.stack([ez[:-1], er[:, :, 1:], ez[1:], er[:, :, :-1]], -1).reshape(-1, 4)
    pl.append(a); sg.append(np.tile([1, 1, -1, -1], (len(a), 1)))
    ar.append(np.full(len(a), dz * dr)); fl.append(np.zeros(len(a)))
    da.append(np.broadcast_to((rf * dphi)[:, None, None], (nr - 1, nphi, nz - 1)).ravel())

    return Lattice(
        "disc_cylinder", (nr, nphi, nz), centres, vol, dist,
        np.concatenate(tails), np.concatenate(heads), np.concatenate(conds),
        np.concatenate(lens), np.concatenate(phs),
        np.concatenate(pl), np.concatenate(sg).astype(float), np.concatenate(ar),
        np.concatenate(fl), np.concatenate(da), max(dr, R * dphi, dz),
        params={"R": R, "L": L, "dr": dr, "dphi": dphi, "dz": dz})
