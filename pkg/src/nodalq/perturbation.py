"""First-order eigenfunction correction and the L-infinity diagnostics around it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import LatticeIndex, RectangleSpec
from .nodal import margin
from .spectral import Eigenpair, GalerkinSystem, synthesize, uniform_grid


class DegenerateDenominator(RuntimeError):
    pass


def first_order_correction(sys: GalerkinSystem, alpha: LatticeIndex,
                           min_denominator: float = 1e-9) -> np.ndarray:
    """Coefficients (q u_alpha0, u_beta0) / (|alpha|^2 - |beta|^2) for beta != alpha."""
    k = sys.position(alpha)
    denom = alpha.norm_sq - sys.norms_sq
    denom[k] = np.inf
    if np.min(np.abs(denom)) < min_denominator:
        j = int(np.argmin(np.abs(denom)))
        raise DegenerateDenominator(f"|alpha|^2 - |beta|^2 vanishes for {alpha} vs {sys.basis[j]}")
    coupling = np.array(sys.matrix[k, :], dtype=float)
    out = coupling / denom
    out[k] = 0.0
    return out


@dataclass(frozen=True)
class CorrectionReport:
    index: LatticeIndex
    correction_linf: float
    residual_linf: float
    deviation_linf: float  # ||u_aq - u_a0||_inf
    bound_15_16: float
    bound_15_8: float
    corner_max: float
    grid: tuple[int, int]

    def row(self) -> dict:
        return {
            "n": self.index.n, "m": self.index.m, "norm": self.index.norm,
            "correction_linf": self.correction_linf, "residual_linf": self.residual_linf,
            "deviation_linf": self.deviation_linf, "bound_15_16": self.bound_15_16,
            "bound_15_8": self.bound_15_8, "corner_max": self.corner_max,
            "nx": self.grid[0], "ny": self.grid[1],
        }


def corner_nodes(alpha: LatticeIndex, rect: RectangleSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Nodes inside the d1-by-d2 ellipses around interior nodal crossings of u_alpha0."""
    d = margin(alpha)
    d1 = d / (rect.a * alpha.n)
    d2 = d / alpha.m
    out = np.zeros((len(x), len(y)), dtype=bool)
    for k in range(1, alpha.n):
        xk = k * math.pi / (rect.a * alpha.n)
        ex = ((x - xk) / d1) ** 2
        for l in range(1, alpha.m):
            yl = l * math.pi / alpha.m
            ey = ((y - yl) / d2) ** 2
            out |= (ex[:, None] + ey[None, :]) <= 1.0
    return out


def theorem1_report(pair: Eigenpair, correction: np.ndarray, rect: RectangleSpec,
                    grid: Optional[tuple[int, int]] = None, per_cell: int = 16) -> CorrectionReport:
    """Residual u_aq - u_a0 - correction on a grid with >= 8 samples per oscillation.

    The default grid has ``per_cell`` intervals across each nodal cell so the
    nodal crossings of u_alpha0 are grid nodes.
    """
    alpha = pair.index
    if grid is None:
        grid = (per_cell * alpha.n, per_cell * alpha.m)
    x, y = uniform_grid(rect, *grid)
    k = [(b.n, b.m) for b in pair.basis].index((alpha.n, alpha.m))
    # a pair given with the opposite sign convention is flipped back, together with its correction
    s = -1.0 if pair.coeffs[k] < 0 else 1.0
    coeffs = s * np.asarray(pair.coeffs)
    base = np.zeros(len(pair.basis))
    base[k] = 1.0
    dev = synthesize(coeffs - base, pair.basis, rect, x, y)
    corr = synthesize(s * np.asarray(correction), pair.basis, rect, x, y)
    uq = synthesize(coeffs, pair.basis, rect, x, y)
    corners = corner_nodes(alpha, rect, x, y)
    root_a = math.sqrt(rect.a)
    return CorrectionReport(
        index=alpha,
        correction_linf=float(np.max(np.abs(corr))),
        residual_linf=float(np.max(np.abs(dev - corr))),
        deviation_linf=float(np.max(np.abs(dev))),
        bound_15_16=root_a * alpha.norm ** (-15.0 / 16.0),
        bound_15_8=root_a * alpha.norm ** (-15.0 / 8.0),
        corner_max=float(np.max(np.abs(uq[corners]), initial=0.0)),
        grid=tuple(grid),
    )
