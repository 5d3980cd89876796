"""Pointwise potential estimates q_hat = |alpha|^2 - lambda_1(Omega') and sweeps over good indices."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .domain_eig import NotConnected, lambda1, rectangle_lambda1
from .lattice import (DomainError, GoodIndexCriteria, IndexGap, LatticeIndex, RectangleSpec,
                      select_good_indices, sparse_subsequence)
from .nodal import (ApproxNodalDomain, CellFrame, EmptyFrame, MarginTooLarge, SignChangeInOmega1,
                    SignField, boundary_fractions, build_approx_domain, build_frames, margin,
                    nodal_domains, sign_field)
from .potentials import Potential, evaluate
from .spectral import (Decomposition, GalerkinSystem, GridField, NoDominantMode, NonConvergence,
                       ResourceError, assemble, eigensolve, match_eigenpair, synthesize,
                       uniform_grid)

NOISE_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class GridPolicy:
    per_cell: int = 32          # grid intervals across each nodal cell, per axis
    per_unit_norm: float = 0.0  # if > 0, at least this many times |alpha| intervals per cell
    max_axis: int = 4096        # cap on intervals along either axis of R
    min_per_cell: int = 16
    zero_tol: Optional[float] = None  # relative to sup|u|; None picks one per boundary mode
    reference: str = "discrete"  # or "continuum"
    boundary: str = "interpolated"  # or "exclude"
    lambda_tol: float = 1e-10

    def __post_init__(self):
        if self.per_cell < self.min_per_cell or self.per_cell % 2:
            raise DomainError(f"per_cell must be even and >= {self.min_per_cell}")
        if self.reference not in ("discrete", "continuum"):
            raise DomainError("reference must be 'discrete' or 'continuum'")
        if self.boundary not in ("interpolated", "exclude"):
            raise DomainError("boundary must be 'interpolated' or 'exclude'")
        if not self.per_unit_norm >= 0:
            raise DomainError("per_unit_norm must be non-negative")

    def cells(self, alpha: LatticeIndex) -> int:
        want = max(self.per_cell, math.ceil(self.per_unit_norm * alpha.norm))
        p = min(want, self.max_axis // max(alpha.n, alpha.m))
        p -= p % 2
        if p < self.min_per_cell:
            raise ResourceError(f"grid cap {self.max_axis} leaves {p} nodes per cell for {alpha}")
        return p

    def relative_zero_tol(self, alpha: LatticeIndex) -> float:
        if self.zero_tol is not None:
            return self.zero_tol
        if self.boundary == "interpolated":
            # only float noise counts as zero; the interpolated boundary finds the crossing
            return NOISE_ZERO_TOL
        # node exclusion: stay below what u_alpha0 takes at Omega_1's corners
        # (sin(d)^2 of the peak) and at the first off-line node (sin(pi/P)^2)
        p = self.cells(alpha)
        return min(1e-3, 0.25 * math.sin(margin(alpha)) ** 2, 0.25 * math.sin(math.pi / p) ** 2)


@dataclass(frozen=True)
class ReconstructionSample:
    index: LatticeIndex
    frame: tuple[int, int]
    point: tuple[float, float]
    q_hat: float
    q_true_at_point: float
    err_at_point: float
    err_min_over_domain: float
    bound: float
    lambda1: float
    reference_lambda: float
    area_nodes: int
    status: str = "ok"

    def row(self) -> dict:
        return {
            "n": self.index.n, "m": self.index.m, "n1": self.frame[0], "m1": self.frame[1],
            "x": self.point[0], "y": self.point[1], "q_hat": self.q_hat,
            "q_true": self.q_true_at_point, "err_at_point": self.err_at_point,
            "err_min": self.err_min_over_domain, "bound": self.bound, "status": self.status,
        }


@dataclass(frozen=True)
class SkippedFrame:
    index: LatticeIndex
    frame: tuple[int, int]
    point: tuple[float, float]
    reason: str

    def row(self) -> dict:
        nan = math.nan
        return {
            "n": self.index.n, "m": self.index.m, "n1": self.frame[0], "m1": self.frame[1],
            "x": self.point[0], "y": self.point[1], "q_hat": nan, "q_true": nan,
            "err_at_point": nan, "err_min": nan, "bound": self.index.norm ** -1.75,
            "status": self.reason,
        }


CSV_COLUMNS = ("n", "m", "n1", "m1", "x", "y", "q_hat", "q_true", "err_at_point", "err_min",
               "bound", "status")


def reconstruct_frame(alpha: LatticeIndex, frame: CellFrame, domain: ApproxNodalDomain,
                      pot: Potential, sf: SignField, policy: GridPolicy = GridPolicy()
                      ) -> ReconstructionSample:
    """q_hat = |alpha|^2 - lambda_1(Omega') for one nodal cell.

    With ``policy.reference == "discrete"`` the |alpha|^2 term is replaced by
    the 5-point eigenvalue of the cell on the same grid, which tends to
    |alpha|^2 as the grid is refined and cancels the stencil's O(h^2) bias.
    With ``policy.boundary == "interpolated"`` the edge of Omega' sits at the
    linearly interpolated zero of u between grid nodes rather than on them.
    """
    field = sf.field
    hx, hy = field.hx, field.hy
    fractions = None
    if policy.boundary == "interpolated":
        fractions = boundary_fractions(sf, domain)
    if policy.reference == "discrete":
        px = int(round(2 * frame.omega0.hx / hx))
        py = int(round(2 * frame.omega0.hy / hy))
        ref = rectangle_lambda1(px, py, hx, hy)
    else:
        ref = alpha.norm_sq
    # the cell eigenvalue is a good shift: lambda_2 of Omega' sits near 2.5 times higher
    res = lambda1(domain.mask, hx, hy, tol=policy.lambda_tol, fractions=fractions, shift=ref)
    q_hat = ref - res.lambda1
    cx, cy = frame.center
    q_c = float(evaluate(pot, cx, cy))
    xs, ys = domain.node_coordinates(field)
    q_nodes = np.asarray(evaluate(pot, xs, ys), dtype=float)
    err_min = float(np.min(np.abs(q_nodes - q_hat)))
    err_pt = abs(q_c - q_hat)
    return ReconstructionSample(
        alpha, (frame.n1, frame.m1), (cx, cy), float(q_hat), q_c, float(err_pt),
        min(err_min, err_pt), alpha.norm ** -1.75, float(res.lambda1), float(ref),
        domain.area_cells)


@dataclass
class IndexRun:
    index: LatticeIndex
    samples: list[ReconstructionSample] = field(default_factory=list)
    skipped: list[SkippedFrame] = field(default_factory=list)
    grid_field: Optional[GridField] = None
    domains: list[ApproxNodalDomain] = field(default_factory=list)


def _skip_all(alpha: LatticeIndex, rect: RectangleSpec, reason: str) -> IndexRun:
    run = IndexRun(alpha)
    try:
        frames = build_frames(alpha, rect)
    except MarginTooLarge:
        run.skipped.append(SkippedFrame(alpha, (-1, -1), rect.center, reason))
        return run
    for fr in frames:
        run.skipped.append(SkippedFrame(alpha, (fr.n1, fr.m1), fr.center, reason))
    return run


def reconstruct_index(sys: GalerkinSystem, dec: Decomposition, alpha: LatticeIndex,
                      policy: GridPolicy = GridPolicy(), threads: int = 1,
                      keep_geometry: bool = False) -> IndexRun:
    """Run every frame of one index through Omega' and lambda_1."""
    rect, pot = sys.rect, sys.potential
    try:
        pair = match_eigenpair(sys, dec, alpha)
    except NoDominantMode:
        return _skip_all(alpha, rect, "NoDominantMode")
    try:
        frames = build_frames(alpha, rect)
    except MarginTooLarge:
        return _skip_all(alpha, rect, "MarginTooLarge")
    p = policy.cells(alpha)
    x, y = uniform_grid(rect, alpha.n * p, alpha.m * p)
    fld = GridField(x, y, synthesize(pair.coeffs, pair.basis, rect, x, y))
    scale = float(np.max(np.abs(fld.values)))
    sf = sign_field(fld, policy.relative_zero_tol(alpha) * scale)
    comps = nodal_domains(sf) if keep_geometry else None

    def work(fr: CellFrame):
        try:
            dom = build_approx_domain(sf, fr, comps)
            return reconstruct_frame(alpha, fr, dom, pot, sf, policy), dom
        except SignChangeInOmega1:
            return SkippedFrame(alpha, (fr.n1, fr.m1), fr.center, "SignChangeInOmega1"), None
        except EmptyFrame:
            return SkippedFrame(alpha, (fr.n1, fr.m1), fr.center, "EmptyFrame"), None
        except NotConnected:
            return SkippedFrame(alpha, (fr.n1, fr.m1), fr.center, "NotConnected"), None
        except NonConvergence:
            return SkippedFrame(alpha, (fr.n1, fr.m1), fr.center, "NonConvergence"), None

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(work, frames))
    else:
        results = [work(fr) for fr in frames]
    run = IndexRun(alpha, grid_field=fld if keep_geometry else None)
    for res, dom in results:
        if isinstance(res, SkippedFrame):
            run.skipped.append(res)
        else:
            run.samples.append(res)
            if keep_geometry:
                run.domains.append(dom)
    return run


def galerkin_for(rect: RectangleSpec, pot: Potential, max_norm: float,
                 cutoff: Optional[float] = None) -> tuple[GalerkinSystem, Decomposition]:
    """One Galerkin solve that reaches every index with |alpha| <= max_norm.

    The default cutoff 2 max_norm + (frequency content of q) leaves room for
    the spectrum of q u_alpha beyond the target index; with only 2 max_norm
    the truncated tail leaks into the q = 0 regions and biases q_hat there.
    """
    b = cutoff if cutoff is not None else 2.0 * max_norm + pot.frequency_content() + 1e-9
    sys = assemble(rect, pot, b)
    return sys, eigensolve(sys)


@dataclass
class SweepResult:
    max_norm: float
    indices: list[IndexGap]
    samples: list[ReconstructionSample]
    skipped: list[SkippedFrame]

    def rows(self) -> list[dict]:
        items = list(self.samples) + list(self.skipped)
        items.sort(key=lambda s: (s.index.norm_sq, s.index.n, s.index.m) + tuple(s.frame))
        return [s.row() for s in items]

    def coverage(self, probes: np.ndarray, indices: Optional[Sequence[LatticeIndex]] = None) -> float:
        return coverage_radius(self.points(indices), probes)

    def points(self, indices: Optional[Sequence[LatticeIndex]] = None) -> np.ndarray:
        keys = None if indices is None else {(a.n, a.m) for a in indices}
        pts = [s.point for s in self.samples
               if keys is None or (s.index.n, s.index.m) in keys]
        return np.array(pts, dtype=float).reshape(-1, 2)

    def sparse_indices(self, ratio: float = 1.15) -> list[LatticeIndex]:
        ok = {(s.index.n, s.index.m) for s in self.samples}
        usable = [g for g in self.indices if (g.index.n, g.index.m) in ok]
        return [g.index for g in sparse_subsequence(usable, ratio)]


def sweep(rect: RectangleSpec, pot: Potential, criteria: GoodIndexCriteria,
          policy: GridPolicy = GridPolicy(), threads: int = 1, min_norm: float = 0.0,
          system: Optional[tuple[GalerkinSystem, Decomposition]] = None) -> SweepResult:
    """Reconstruct at every frame of every good index with min_norm <= |alpha| <= max_norm."""
    good = [g for g in select_good_indices(rect, criteria) if g.index.norm >= min_norm]
    if system is None:
        system = galerkin_for(rect, pot, criteria.max_norm)
    sys, dec = system
    samples: list[ReconstructionSample] = []
    skipped: list[SkippedFrame] = []

    def one(g: IndexGap) -> IndexRun:
        return reconstruct_index(sys, dec, g.index, policy)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(one, good))
    else:
        runs = [one(g) for g in good]
    for run in runs:
        samples.extend(run.samples)
        skipped.extend(run.skipped)
    return SweepResult(criteria.max_norm, good, samples, skipped)


def probe_points(rect: RectangleSpec, count: int = 64, seed: Optional[int] = None) -> np.ndarray:
    """Reference probes over R: a uniform count x count node grid, or seeded random points."""
    if seed is None:
        xs = np.linspace(0.0, rect.width, count)
        ys = np.linspace(0.0, rect.height, count)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(0, rect.width, count * count),
                            rng.uniform(0, rect.height, count * count)])


def coverage_radius(points: np.ndarray, probes: np.ndarray) -> float:
    """max over probes of the distance to the nearest sample point."""
    if len(points) == 0:
        return math.inf
    dist, _ = cKDTree(points).query(probes)
    return float(np.max(dist))
