"""First Dirichlet eigenvalue of -Lap on a grid-masked domain.

5-point finite differences. By default Dirichlet data is imposed by node
exclusion (nodes outside the mask are zero) and the smallest eigenvalue comes
from inverse power iteration with preconditioned conjugate gradients.

When the distance from a boundary node to the true boundary is known as a
fraction of the spacing, the Shortley-Weller stencil places the boundary
there instead. That operator is not symmetric, so its inverse iteration
solves with a sparse LU factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft
import scipy.ndimage
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import DomainError
from .spectral import NonConvergence

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class NotConnected(DomainError):
    pass


def is_connected(mask: np.ndarray) -> bool:
    _, count = scipy.ndimage.label(mask, structure=FOUR_CONNECTED)
    return count == 1


class MaskedLaplacian:
    """-Lap_h on the True nodes of ``mask``, zero Dirichlet data outside.

    ``fractions`` (shape (4, *mask.shape), order +x, -x, +y, -y) give the
    distance to the boundary in units of the spacing for nodes whose
    neighbour in that direction is excluded; 1 everywhere is plain exclusion.
    """

    def __init__(self, mask: np.ndarray, hx: float, hy: float,
                 fractions: Optional[np.ndarray] = None):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise DomainError("mask must be two-dimensional")
        if not mask.any():
            raise DomainError("mask is empty")
        # pad by one so every masked node has four (possibly excluded) neighbours
        self.mask = np.pad(mask, 1)
        self.hx = float(hx)
        self.hy = float(hy)
        self.nodes = np.flatnonzero(self.mask)
        self.size = len(self.nodes)
        number = -np.ones(self.mask.size, dtype=np.int64)
        number[self.nodes] = np.arange(self.size)
        stride = self.mask.shape[1]

        theta = np.ones((4, self.size))
        if fractions is not None:
            fractions = np.asarray(fractions, dtype=float)
            if fractions.shape != (4,) + mask.shape:
                raise DomainError("fractions must have shape (4, *mask.shape)")
            theta = np.stack([np.pad(f, 1, constant_values=1.0).ravel()[self.nodes]
                              for f in fractions])
            if np.any(theta <= 0) or np.any(theta > 1):
                raise DomainError("boundary fractions must lie in (0, 1]")
        self.symmetric = bool(np.all(theta == 1.0))

        idx = np.arange(self.size)
        rows, cols, vals = [], [], []
        diag = np.zeros(self.size)
        for plus, minus, shift, h in ((0, 1, stride, self.hx), (2, 3, 1, self.hy)):
            hr = theta[plus] * h
            hl = theta[minus] * h
            diag += 2.0 / (hl * hr)
            for sh, hh in ((shift, hr), (-shift, hl)):
                nb = number[self.nodes + sh]
                keep = nb >= 0
                rows.append(idx[keep])
                cols.append(nb[keep])
                vals.append((-2.0 / (hh * (hl + hr)))[keep])
        rows.append(idx)
        cols.append(idx)
        vals.append(diag)
        self.matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size))
        self._box_eigs = None

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def rayleigh(self, v: np.ndarray) -> float:
        return float(v @ self.apply(v)) / float(v @ v)

    def to_grid(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mask.size)
        out[self.nodes] = v
        return out.reshape(self.mask.shape)[1:-1, 1:-1]

    def box_solve(self, r: np.ndarray) -> np.ndarray:
        """Exact inverse of -Lap_h on the bounding box, restricted back to the mask.

        Fast sine transforms diagonalise the box operator; as a preconditioner
        R A_box^{-1} R^T it is symmetric positive definite.
        """
        if self._box_eigs is None:
            nx, ny = self.mask.shape[0] - 2, self.mask.shape[1] - 2
            kx = np.arange(1, nx + 1)
            ky = np.arange(1, ny + 1)
            ex = 4.0 / self.hx ** 2 * np.sin(kx * math.pi / (2 * (nx + 1))) ** 2
            ey = 4.0 / self.hy ** 2 * np.sin(ky * math.pi / (2 * (ny + 1))) ** 2
            self._box_eigs = ex[:, None] + ey[None, :]
        g = np.zeros(self.mask.size)
        g[self.nodes] = r
        g = g.reshape(self.mask.shape)[1:-1, 1:-1]
        s = scipy.fft.dstn(g, type=1, norm="ortho") / self._box_eigs
        s = scipy.fft.idstn(s, type=1, norm="ortho")
        return np.pad(s, 1).ravel()[self.nodes]


def conjugate_gradient(op: MaskedLaplacian, b: np.ndarray, x0: np.ndarray, rtol: float,
                       maxiter: int, precondition: bool = True):
    """Preconditioned CG for op x = b; returns (x, iterations, converged)."""
    x = x0.copy()
    r = b - op.apply(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, True
    target = rtol * bnorm
    if np.linalg.norm(r) <= target:
        return x, 0, True
    z = op.box_solve(r) if precondition else r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        ap = op.apply(p)
        curv = p @ ap
        if not curv > 0.0:
            # residual at round-off level: no further progress possible
            return x, it, False
        step = rz / curv
        x += step * p
        r -= step * ap
        if np.linalg.norm(r) <= target:
            return x, it, True
        z = op.box_solve(r) if precondition else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, False


@dataclass(frozen=True)
class Lambda1Result:
    lambda1: float
    mode: np.ndarray
    iterations: int
    inner_iterations: int


def lambda1(mask: np.ndarray, hx: float, hy: float, tol: float = 1e-10,
            max_outer: int = 200, precondition: bool = True,
            fractions: Optional[np.ndarray] = None, shift: Optional[float] = None) -> Lambda1Result:
    """Smallest eigenvalue of the masked 5-point Laplacian by inverse iteration.

    Stops when successive Rayleigh-type estimates agree to ``tol`` relative.
    ``shift`` (used on the LU path only) should be a guess closer to lambda_1
    than to lambda_2; iterating with (A - shift)^-1 then converges in a few steps.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DomainError("mask is empty")
    if not is_connected(mask):
        raise NotConnected("mask is not 4-connected")
    op = MaskedLaplacian(mask, hx, hy, fractions)
    v = np.ones(op.size)
    v /= np.linalg.norm(v)
    inner_total = 0
    if op.symmetric:
        max_inner = int(10 * math.sqrt(op.size)) + 100
        rho = op.rayleigh(v)

        def step(v, rho):
            w, k, ok = conjugate_gradient(op, v, v / rho, tol / 10, max_inner, precondition)
            if not ok:
                raise NonConvergence(f"inner CG stalled after {k} steps at tol {tol / 10:.3g}")
            return w, k
    else:
        sigma = 0.0 if shift is None else float(shift)
        mat = op.matrix - sigma * sp.identity(op.size, format="csr")
        # the pattern is symmetric, so a symmetric ordering keeps the fill low
        lu = spla.splu(mat.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        rho = float(np.linalg.norm(op.apply(v)))

        def step(v, rho):
            return lu.solve(v), 1

    for it in range(1, max_outer + 1):
        w, k = step(v, rho)
        inner_total += k
        if op.symmetric:
            v = w / np.linalg.norm(w)
            rho_new = op.rayleigh(v)
        else:
            # v has unit norm and w -> v / (lambda_1 - sigma) along the iteration
            rho_new = sigma + 1.0 / float(v @ w)
            v = w / np.linalg.norm(w)
        if abs(rho_new - rho) <= tol * rho_new:
            rho = rho_new
            break
        rho = rho_new
    else:
        raise NonConvergence(f"inverse iteration did not converge in {max_outer} steps")
    mode = op.to_grid(v)
    if mode.sum() < 0:
        mode = -mode
    return Lambda1Result(rho, mode, it, inner_total)


def rectangle_lambda1(nx_intervals: int, ny_intervals: int, hx: float, hy: float) -> float:
    """Closed-form first eigenvalue of the 5-point Laplacian on a full rectangle grid."""
    return (4.0 / hx ** 2 * math.sin(math.pi / (2 * nx_intervals)) ** 2
            + 4.0 / hy ** 2 * math.sin(math.pi / (2 * ny_intervals)) ** 2)
