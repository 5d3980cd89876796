"""Sine-basis Galerkin discretisation of -Lap + q on R and its eigenpairs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lattice import DomainError, LatticeIndex, RectangleSpec, enumerate_indices
from .potentials import DEFAULT_QUAD, CosineMoments, Potential, mode_norm

BASIS_CAP = 4000


class ResourceError(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


class NoDominantMode(RuntimeError):
    """No eigenvector carries more than half its weight on the target mode."""


@dataclass(frozen=True)
class GalerkinSystem:
    rect: RectangleSpec
    basis: tuple[LatticeIndex, ...]
    matrix: np.ndarray
    potential: Potential
    cutoff: float

    def position(self, alpha: LatticeIndex) -> int:
        try:
            return self._lookup[(alpha.n, alpha.m)]
        except KeyError:
            raise DomainError(f"index {alpha} is not in the Galerkin basis") from None

    @property
    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {(b.n, b.m): i for i, b in enumerate(self.basis)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    @property
    def norms_sq(self) -> np.ndarray:
        return np.array([b.norm_sq for b in self.basis])

    @property
    def ns(self) -> np.ndarray:
        return np.array([b.n for b in self.basis])

    @property
    def ms(self) -> np.ndarray:
        return np.array([b.m for b in self.basis])


def assemble(rect: RectangleSpec, pot: Potential, cutoff: float = math.inf, *,
             box: Optional[tuple[int, int]] = None, quad: int = DEFAULT_QUAD,
             cap: int = BASIS_CAP) -> GalerkinSystem:
    """H[b, c] = |b|^2 delta_bc + (q u_b, u_c) over the basis |b| < cutoff.

    With ``box=(N, M)`` the basis is the tensor set 1 <= n <= N, 1 <= m <= M
    instead (ordered the same way), which separable potentials need.
    """
    if box is None:
        if not math.isfinite(cutoff):
            raise DomainError("a finite cutoff is required unless a box basis is given")
        basis = enumerate_indices(rect, cutoff)
    else:
        basis = sorted((LatticeIndex.make(rect, n, m) for n in range(1, box[0] + 1)
                        for m in range(1, box[1] + 1)), key=LatticeIndex.sort_key)
        cutoff = math.inf
    if len(basis) > cap:
        raise ResourceError(f"basis size {len(basis)} exceeds cap {cap}")
    if not basis:
        raise DomainError(f"cutoff {cutoff} admits no basis functions")
    ns = np.array([b.n for b in basis])
    ms = np.array([b.m for b in basis])
    diag = np.array([b.norm_sq for b in basis])
    if pot.kind == "zero":
        mat = np.diag(diag)
    else:
        mom = CosineMoments.compute(pot, 2 * int(ns.max()), 2 * int(ms.max()), grid=quad)
        mat = mom.coupling(ns[:, None], ms[:, None], ns[None, :], ms[None, :])
        mat = 0.5 * (mat + mat.T)
        mat[np.diag_indices_from(mat)] += diag
    mat.setflags(write=False)
    return GalerkinSystem(rect, tuple(basis), mat, pot, float(cutoff))


@dataclass(frozen=True)
class Decomposition:
    values: np.ndarray
    vectors: np.ndarray  # columns

    def __iter__(self):
        for k in range(len(self.values)):
            yield self.values[k], self.vectors[:, k]

    def __len__(self):
        return len(self.values)


def eigensolve(sys: GalerkinSystem, method: str = "lapack", **kw) -> Decomposition:
    """Full symmetric eigendecomposition, eigenvalues ascending."""
    if method == "lapack":
        w, v = np.linalg.eigh(np.asarray(sys.matrix))
    elif method == "jacobi":
        w, v = jacobi_eigh(np.asarray(sys.matrix), **kw)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return Decomposition(w, v)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """Cyclic Jacobi rotations for a dense symmetric matrix.

    Slow (O(n^3) per sweep in pure numpy row ops) but independent of LAPACK;
    used to cross-check small systems.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True)
class Eigenpair:
    index: LatticeIndex
    lam: float
    coeffs: np.ndarray
    overlap: float
    basis: tuple[LatticeIndex, ...]

    @property
    def gap(self) -> float:
        return abs(self.lam - self.index.norm_sq)


def match_eigenpair(sys: GalerkinSystem, dec: Decomposition, alpha: LatticeIndex) -> Eigenpair:
    """The eigenvector dominated by u_alpha0, sign-fixed so its alpha coefficient is positive."""
    if alpha.norm > sys.cutoff / 2 + 1e-12:
        raise DomainError(f"index {alpha} exceeds half the Galerkin cutoff {sys.cutoff}")
    k = sys.position(alpha)
    row = np.abs(dec.vectors[k, :])
    j = int(np.argmax(row))
    if not row[j] > 0.5:
        raise NoDominantMode(f"no eigenvector has overlap > 1/2 with {alpha} (best {row[j]:.3f})")
    vec = dec.vectors[:, j].copy()
    vec /= np.linalg.norm(vec)
    if vec[k] < 0:
        vec = -vec
    vec.setflags(write=False)
    return Eigenpair(alpha, float(dec.values[j]), vec, float(abs(vec[k])), sys.basis)


def unperturbed_pair(rect: RectangleSpec, alpha: LatticeIndex, basis: Sequence[LatticeIndex]) -> Eigenpair:
    coeffs = np.array([1.0 if (b.n, b.m) == (alpha.n, alpha.m) else 0.0 for b in basis])
    return Eigenpair(alpha, alpha.norm_sq, coeffs, 1.0, tuple(basis))


@dataclass(frozen=True)
class GridField:
    """Samples values[i, j] at (x[i], y[j]) on a uniform tensor grid over R."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])


def uniform_grid(rect: RectangleSpec, nx: int, ny: int):
    """nx x ny intervals, nodes on both boundaries."""
    if nx < 1 or ny < 1:
        raise DomainError("grid needs at least one interval per axis")
    return np.linspace(0.0, rect.width, nx + 1), np.linspace(0.0, rect.height, ny + 1)


def coefficient_grid(coeffs, basis: Sequence[LatticeIndex]) -> np.ndarray:
    nmax = max(b.n for b in basis)
    mmax = max(b.m for b in basis)
    c = np.zeros((nmax, mmax))
    for v, b in zip(coeffs, basis):
        c[b.n - 1, b.m - 1] = v
    return c


def synthesize(coeffs, basis: Sequence[LatticeIndex], rect: RectangleSpec,
               x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sum_b coeffs[b] u_b0(x_i, y_j) as an array over (i, j)."""
    c = coefficient_grid(coeffs, basis)
    sx = np.sin(rect.a * np.outer(x, np.arange(1, c.shape[0] + 1)))
    sy = np.sin(np.outer(y, np.arange(1, c.shape[1] + 1)))
    out = mode_norm(rect) * (sx @ c @ sy.T)
    # sin(k pi) is not exactly 0 in floating point
    if x[0] == 0.0:
        out[0, :] = 0.0
    if np.isclose(x[-1], rect.width, rtol=0, atol=1e-14):
        out[-1, :] = 0.0
    if y[0] == 0.0:
        out[:, 0] = 0.0
    if np.isclose(y[-1], rect.height, rtol=0, atol=1e-14):
        out[:, -1] = 0.0
    return out


def evaluate_eigenfunction(pair: Eigenpair, rect: RectangleSpec, grid: tuple[int, int]) -> GridField:
    x, y = uniform_grid(rect, *grid)
    return GridField(x, y, synthesize(pair.coeffs, pair.basis, rect, x, y))
