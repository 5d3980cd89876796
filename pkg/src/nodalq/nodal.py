"""Nodal geometry on grids: sign fields, nodal domains, frame cells and the
approximate nodal domain Omega' (component of Omega intersect Omega_2 holding Omega_1)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.ndimage

from .domain_eig import FOUR_CONNECTED
from .lattice import DomainError, LatticeIndex, RectangleSpec
from .spectral import GridField

MARGIN_FACTOR = 3.9
MARGIN_EXPONENT = 15.0 / 16.0
DEFAULT_ZERO_TOL = 1e-3


class MarginTooLarge(DomainError):
    pass


class SignChangeInOmega1(RuntimeError):
    pass


class EmptyFrame(RuntimeError):
    pass


@dataclass(frozen=True)
class SignField:
    field: GridField
    signs: np.ndarray  # int8 in {-1, 0, 1}
    zero_tol: float

    @property
    def values(self):
        return self.field.values


def sign_field(field: GridField, zero_tol: Optional[float] = None) -> SignField:
    """Ternary sign per node; |value| < zero_tol counts as zero, boundary is zero.

    Default tolerance is 1e-3 of the field's sup norm.
    """
    vals = field.values
    if zero_tol is None:
        zero_tol = DEFAULT_ZERO_TOL * float(np.max(np.abs(vals), initial=0.0))
    if zero_tol < 0:
        raise DomainError("zero_tol must be non-negative")
    signs = np.sign(vals).astype(np.int8)
    signs[np.abs(vals) < zero_tol] = 0
    if zero_tol == 0.0:
        signs[vals == 0.0] = 0
    signs[0, :] = signs[-1, :] = 0
    signs[:, 0] = signs[:, -1] = 0
    return SignField(field, signs, float(zero_tol))


@dataclass(frozen=True)
class NodalDomains:
    labels: np.ndarray  # 0 = no component, else 1..count
    count: int
    signs: tuple[int, ...]  # sign of label k at position k-1


def nodal_domains(sf: SignField) -> NodalDomains:
    """4-connected components of same-sign nonzero nodes, labelled in row-major discovery order."""
    pos, npos = scipy.ndimage.label(sf.signs > 0, structure=FOUR_CONNECTED)
    neg, nneg = scipy.ndimage.label(sf.signs < 0, structure=FOUR_CONNECTED)
    merged = np.where(pos > 0, pos, np.where(neg > 0, neg + npos, 0))
    flat = merged.ravel()
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq > 0
    uniq, first = uniq[keep], first[keep]
    order = uniq[np.argsort(first, kind="stable")]
    relabel = np.zeros(npos + nneg + 1, dtype=np.int64)
    relabel[order] = np.arange(1, len(order) + 1)
    labels = relabel[merged]
    signs = tuple(1 if old <= npos else -1 for old in order)
    return NodalDomains(labels, len(order), signs)


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box |x - cx| < hx, |y - cy| < hy."""

    cx: float
    cy: float
    hx: float
    hy: float

    @property
    def bounds(self):
        return (self.cx - self.hx, self.cx + self.hx, self.cy - self.hy, self.cy + self.hy)

    def contains(self, x, y):
        return (np.abs(np.asarray(x) - self.cx) < self.hx) & (np.abs(np.asarray(y) - self.cy) < self.hy)

    def clipped(self, rect: RectangleSpec) -> "Box":
        x0, x1, y0, y1 = self.bounds
        x0, x1 = max(x0, 0.0), min(x1, rect.width)
        y0, y1 = max(y0, 0.0), min(y1, rect.height)
        return Box(0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.5 * (x1 - x0), 0.5 * (y1 - y0))


def margin(alpha: LatticeIndex) -> float:
    """d = 1 / (3.9 |alpha|^(15/16))."""
    return 1.0 / (MARGIN_FACTOR * alpha.norm ** MARGIN_EXPONENT)


@dataclass(frozen=True)
class CellFrame:
    index: LatticeIndex
    n1: int
    m1: int
    d: float
    d1: float
    d2: float
    omega0: Box
    omega1: Box
    omega2: Box

    @property
    def center(self) -> tuple[float, float]:
        return self.omega0.cx, self.omega0.cy


def build_frames(alpha: LatticeIndex, rect: RectangleSpec) -> list[CellFrame]:
    """All n*m nodal cells of u_alpha0 with their shrunk and expanded boxes."""
    n, m = alpha.n, alpha.m
    d = margin(alpha)
    d1 = d / (rect.a * n)
    d2 = d / m
    hw = math.pi / (2 * rect.a * n)
    hh = math.pi / (2 * m)
    if not (d1 < hw and d2 < hh):
        raise MarginTooLarge(f"margin d={d:.4g} empties Omega_1 for {alpha}")
    frames = []
    for n1 in range(n):
        for m1 in range(m):
            cx = (n1 + 0.5) * math.pi / (rect.a * n)
            cy = (m1 + 0.5) * math.pi / m
            frames.append(CellFrame(
                alpha, n1, m1, d, d1, d2,
                Box(cx, cy, hw, hh),
                Box(cx, cy, hw - d1, hh - d2),
                Box(cx, cy, hw + d1, hh + d2).clipped(rect),
            ))
    return frames


@dataclass(frozen=True)
class ApproxNodalDomain:
    """Omega' as a boolean window ``mask`` placed at ``offset`` in the parent grid."""

    frame: CellFrame
    mask: np.ndarray
    offset: tuple[int, int]
    component_sign: int
    omega1_nodes: np.ndarray  # boolean window, same placement as mask
    omega2_nodes: np.ndarray
    spills: Optional[bool] = None  # does the full nodal domain leave Omega_2?

    @property
    def area_cells(self) -> int:
        return int(self.mask.sum())

    def full_mask(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        i0, j0 = self.offset
        out[i0:i0 + self.mask.shape[0], j0:j0 + self.mask.shape[1]] = self.mask
        return out

    def node_coordinates(self, field: GridField):
        i0, j0 = self.offset
        ii, jj = np.nonzero(self.mask)
        return field.x[ii + i0], field.y[jj + j0]


def _index_window(coords: np.ndarray, lo: float, hi: float) -> tuple[int, int]:
    i0 = int(np.searchsorted(coords, lo, side="left"))
    i1 = int(np.searchsorted(coords, hi, side="right"))
    return max(i0 - 1, 0), min(i1 + 1, len(coords))


def build_approx_domain(sf: SignField, frame: CellFrame,
                        domains: Optional[NodalDomains] = None) -> ApproxNodalDomain:
    """Flood-fill from Omega_1 through same-sign nodes, staying inside Omega_2."""
    x, y = sf.field.x, sf.field.y
    x0, x1, y0, y1 = frame.omega2.bounds
    i0, i1 = _index_window(x, x0, x1)
    j0, j1 = _index_window(y, y0, y1)
    xs = x[i0:i1, None]
    ys = y[None, j0:j1]
    in2 = frame.omega2.contains(xs, ys)
    in1 = frame.omega1.contains(xs, ys)
    if not in1.any():
        raise EmptyFrame(f"Omega_1 of frame ({frame.n1},{frame.m1}) holds no grid nodes")
    signs = sf.signs[i0:i1, j0:j1]
    s1 = np.unique(signs[in1])
    if len(s1) != 1 or s1[0] == 0:
        raise SignChangeInOmega1(
            f"u changes sign or vanishes in Omega_1 of frame ({frame.n1},{frame.m1}) for {frame.index}")
    s = int(s1[0])
    lab, _ = scipy.ndimage.label(in2 & (signs == s), structure=FOUR_CONNECTED)
    hit = np.unique(lab[in1])
    # Omega_1 is a box of same-sign nodes, hence inside a single component
    mask = lab == hit[0]
    spills = None
    if domains is not None:
        gl = np.unique(domains.labels[i0:i1, j0:j1][in1])
        full = domains.labels == gl[0]
        inside = np.zeros_like(full)
        inside[i0:i1, j0:j1] = in2
        spills = bool((full & ~inside).any())
    return ApproxNodalDomain(frame, mask, (i0, j0), s, in1, in2, spills)


def aligned_grid_shape(alpha: LatticeIndex, per_cell: int) -> tuple[int, int]:
    """Intervals (Nx, Ny) putting every nodal line of u_alpha0 on grid lines."""
    return alpha.n * per_cell, alpha.m * per_cell


def boundary_fractions(sf: SignField, domain: ApproxNodalDomain, theta_min: float = 1e-8) -> np.ndarray:
    """Distance from each Omega' node to the boundary of Omega', per direction, in grid spacings.

    Order +x, -x, +y, -y. Across a sign change the crossing is located by
    linear interpolation of the field; where Omega_2 clips the domain the box
    edge is used. Directions whose neighbour is inside Omega' get 1.
    """
    i0, j0 = domain.offset
    mask = domain.mask
    nx, ny = mask.shape
    vals = sf.values
    s = domain.component_sign
    fx, fy = sf.field.x, sf.field.y
    hx, hy = sf.field.hx, sf.field.hy
    x0, x1, y0, y1 = domain.frame.omega2.bounds
    out = np.ones((4,) + mask.shape)
    ii, jj = np.nonzero(mask)
    gi, gj = ii + i0, jj + j0
    u = s * vals[gi, gj]
    steps = ((1, 0, 0), (-1, 0, 1), (0, 1, 2), (0, -1, 3))
    for di, dj, k in steps:
        ni, nj = ii + di, jj + dj
        inside_win = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
        nb_in = np.zeros(len(ii), dtype=bool)
        nb_in[inside_win] = mask[ni[inside_win], nj[inside_win]]
        sel = ~nb_in
        if not sel.any():
            continue
        gni = np.clip(gi[sel] + di, 0, vals.shape[0] - 1)
        gnj = np.clip(gj[sel] + dj, 0, vals.shape[1] - 1)
        un = s * vals[gni, gnj]
        ui = u[sel]
        theta = np.ones(int(sel.sum()))
        cross = un <= 0
        theta[cross] = ui[cross] / (ui[cross] - un[cross])
        # Omega_2 edge between this node and its neighbour
        if di:
            pos = fx[gi[sel]]
            edge = x1 if di > 0 else x0
            t_edge = np.abs(edge - pos) / hx
            nb_pos = fx[gni]
            beyond = np.abs(nb_pos - domain.frame.omega2.cx) >= domain.frame.omega2.hx
        else:
            pos = fy[gj[sel]]
            edge = y1 if dj > 0 else y0
            t_edge = np.abs(edge - pos) / hy
            nb_pos = fy[gnj]
            beyond = np.abs(nb_pos - domain.frame.omega2.cy) >= domain.frame.omega2.hy
        theta = np.where(beyond, np.minimum(theta, t_edge), theta)
        out[k, ii[sel], jj[sel]] = np.clip(theta, theta_min, 1.0)
    return out
