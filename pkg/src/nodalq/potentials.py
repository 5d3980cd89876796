"""Synthetic mean-zero test potentials on R and their quadrature.

Kinds:
  zero            q = 0
  cosine-product  q = sum_i A_i cos(p_i a x) cos(r_i y), (p_i, r_i) != (0, 0)
  bump-difference q = A (phi(x - c+) - phi(x - c-)), phi the standard mollifier
  grid-sampled    bilinear interpolation of node samples, mean removed
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lattice import DomainError, LatticeIndex, RectangleSpec

KINDS = ("zero", "cosine-product", "bump-difference", "grid-sampled")
DEFAULT_QUAD = 1024


class PrecisionError(ValueError):
    """Quadrature grid too coarse for the requested integrand."""


@dataclass(frozen=True)
class Potential:
    kind: str
    parameters: dict = field(hash=False)
    mean_tolerance: float = 1e-10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if "a" not in self.parameters:
            raise DomainError("potential parameters must carry the rectangle parameter 'a'")

    @property
    def rect(self) -> RectangleSpec:
        return RectangleSpec(float(self.parameters["a"]))

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def scaled(self, factor: float) -> "Potential":
        p = dict(self.parameters)
        if self.kind == "cosine-product":
            p["terms"] = [[factor * t[0], t[1], t[2]] for t in p["terms"]]
        elif self.kind == "bump-difference":
            p["amplitude"] = factor * p["amplitude"]
        elif self.kind == "grid-sampled":
            p["values"] = (factor * np.asarray(p["values"], dtype=float)).tolist()
        return Potential(self.kind, p, self.mean_tolerance)

    def frequency_content(self) -> int:
        """Rough highest mode number of q along either axis, for aliasing checks."""
        if self.kind == "zero":
            return 0
        if self.kind == "cosine-product":
            return int(max(max(abs(t[1]), abs(t[2])) for t in self.parameters["terms"]))
        if self.kind == "bump-difference":
            return int(math.ceil(8.0 / self.parameters["radius"]))
        vals = np.asarray(self.parameters["values"])
        return max(vals.shape) // 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": _plain(self.parameters)}

    @classmethod
    def from_dict(cls, d: dict, a: float | None = None) -> "Potential":
        unknown = set(d) - {"kind", "parameters", "mean_tolerance"}
        if unknown:
            raise DomainError(f"unknown potential keys: {sorted(unknown)}")
        params = dict(d.get("parameters", {}))
        if a is not None:
            if "a" in params and not math.isclose(float(params["a"]), a, rel_tol=1e-15):
                raise DomainError(f"potential was built for a={params['a']}, run uses a={a}")
            params["a"] = a
        kind = d["kind"]
        if kind == "bump-difference":
            rect = RectangleSpec(float(params["a"]))
            return make_mean_zero_bump(rect, params["center_plus"], params["center_minus"],
                                       params["radius"], params["amplitude"])
        if kind == "grid-sampled":
            rect = RectangleSpec(float(params["a"]))
            return grid_sampled(rect, np.asarray(params["values"], dtype=float))
        if kind == "cosine-product":
            rect = RectangleSpec(float(params["a"]))
            return cosine_product(rect, params["terms"])
        return Potential(kind, params, d.get("mean_tolerance", 1e-10))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def zero_potential(rect: RectangleSpec) -> Potential:
    return Potential("zero", {"a": rect.a})


def cosine_product(rect: RectangleSpec, terms: Sequence[Sequence[float]]) -> Potential:
    """Sum of amp * cos(p a x) cos(r y) with integer (p, r) != (0, 0).

    Every such term integrates to zero over R, so the sum is mean-zero. These
    are not compactly supported; use them for solver checks only.
    """
    clean = []
    for t in terms:
        amp, p, r = float(t[0]), int(t[1]), int(t[2])
        if p < 0 or r < 0 or (p == 0 and r == 0):
            raise DomainError(f"cosine term needs non-negative (p, r) != (0, 0), got {(p, r)}")
        clean.append([amp, p, r])
    if not clean:
        raise DomainError("cosine-product needs at least one term")
    return Potential("cosine-product", {"a": rect.a, "terms": clean})


def mollifier(r, radius: float):
    """exp(-1/(1 - (r/radius)^2)) inside the ball, 0 outside."""
    r = np.asarray(r, dtype=float)
    s = (r / radius) ** 2
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return out


def make_mean_zero_bump(rect: RectangleSpec, center_plus, center_minus,
                        radius: float, amplitude: float) -> Potential:
    """amplitude * (phi(. - center_plus) - phi(. - center_minus)).

    Both bumps are translates of one mollifier, so the integral over R is
    zero exactly. Each support must keep at least one radius of clearance
    from the boundary of R, and the two supports must not overlap.
    """
    cp = (float(center_plus[0]), float(center_plus[1]))
    cm = (float(center_minus[0]), float(center_minus[1]))
    radius = float(radius)
    if not radius > 0:
        raise DomainError("bump radius must be positive")
    if radius > 0.5 * min(rect.width, rect.height):
        raise DomainError("bump radius exceeds half the rectangle's short side")
    for c in (cp, cm):
        clearance = min(c[0], rect.width - c[0], c[1], rect.height - c[1])
        if not clearance >= 2.0 * radius:
            raise DomainError(f"bump at {c} comes within one radius of the boundary of R")
    if not math.dist(cp, cm) > 2.0 * radius:
        raise DomainError("bump supports overlap")
    return Potential("bump-difference", {
        "a": rect.a, "center_plus": list(cp), "center_minus": list(cm),
        "radius": radius, "amplitude": float(amplitude),
    })


def standard_bump(rect: RectangleSpec, amplitude: float = 0.5, offset: Optional[float] = None,
                  radius: Optional[float] = None) -> Potential:
    """Bump pair placed point-symmetrically about the centre of R (vertical offset).

    Defaults: radius min(0.5, 0.99 * width / 4), offset 1.1 * radius, which
    keeps both supports one radius away from the boundary for every a > 1.
    """
    if radius is None:
        radius = min(0.5, 0.99 * rect.width / 4.0)
    if offset is None:
        offset = 1.1 * radius
    cx, cy = rect.center
    return make_mean_zero_bump(rect, (cx, cy + offset), (cx, cy - offset), radius, amplitude)


def grid_sampled(rect: RectangleSpec, values: np.ndarray) -> Potential:
    """Bilinear interpolant of node samples on a uniform grid over R, mean removed."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or min(values.shape) < 2:
        raise DomainError("grid-sampled potential needs a 2-D array with >= 2 nodes per axis")
    base = Potential("grid-sampled", {"a": rect.a, "values": values.tolist()})
    nx = max(2 * values.shape[0], 256)
    ny = max(2 * values.shape[1], 256)
    mean = mean_value(base, nx + nx % 2, ny + ny % 2)
    return Potential("grid-sampled", {"a": rect.a, "values": (values - mean).tolist()})


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(pot: Potential, x, y, check_domain: bool = True):
    """q(x, y); broadcasts over array arguments."""
    rect = pot.rect
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if check_domain and not np.all(rect.contains(x, y)):
        raise DomainError("evaluation point outside R")
    p = pot.parameters
    if pot.kind == "zero":
        return np.zeros(np.broadcast(x, y).shape)[()]
    if pot.kind == "cosine-product":
        out = 0.0
        for amp, kx, ky in p["terms"]:
            out = out + amp * np.cos(kx * rect.a * x) * np.cos(ky * y)
        return np.broadcast_to(out, np.broadcast(x, y).shape).copy()[()]
    if pot.kind == "bump-difference":
        (xp, yp), (xm, ym) = p["center_plus"], p["center_minus"]
        rad = p["radius"]
        plus = mollifier(np.hypot(x - xp, y - yp), rad)
        minus = mollifier(np.hypot(x - xm, y - ym), rad)
        return (p["amplitude"] * (plus - minus))[()]
    return _bilinear(np.asarray(p["values"], dtype=float), rect, x, y)


def _bilinear(vals: np.ndarray, rect: RectangleSpec, x, y):
    nx, ny = vals.shape[0] - 1, vals.shape[1] - 1
    fx = np.clip(x / rect.width * nx, 0.0, nx)
    fy = np.clip(y / rect.height * ny, 0.0, ny)
    i = np.minimum(np.floor(fx).astype(int), nx - 1)
    j = np.minimum(np.floor(fy).astype(int), ny - 1)
    tx = fx - i
    ty = fy - j
    return ((1 - tx) * (1 - ty) * vals[i, j] + tx * (1 - ty) * vals[i + 1, j]
            + (1 - tx) * ty * vals[i, j + 1] + tx * ty * vals[i + 1, j + 1])[()]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def simpson_weights(n_intervals: int, length: float) -> np.ndarray:
    if n_intervals < 2 or n_intervals % 2:
        raise PrecisionError(f"composite Simpson needs an even interval count, got {n_intervals}")
    h = length / n_intervals
    w = np.full(n_intervals + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def quadrature_grid(rect: RectangleSpec, nx: int, ny: int):
    x = np.linspace(0.0, rect.width, nx + 1)
    y = np.linspace(0.0, rect.height, ny + 1)
    return x, y, simpson_weights(nx, rect.width), simpson_weights(ny, rect.height)


def sample(pot: Potential, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """q on the tensor grid x (rows) by y (columns)."""
    return np.asarray(evaluate(pot, x[:, None], y[None, :]), dtype=float).reshape(len(x), len(y))


def integrate(values: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> float:
    return float(wx @ values @ wy)


def mean_value(pot: Potential, nx: int = 512, ny: int = 512) -> float:
    rect = pot.rect
    x, y, wx, wy = quadrature_grid(rect, nx, ny)
    return integrate(sample(pot, x, y), wx, wy) / (rect.width * rect.height)


def sup_norm(pot: Potential, nx: int = 512, ny: int = 512) -> float:
    if pot.kind == "zero":
        return 0.0
    if pot.kind == "cosine-product":
        return float(sum(abs(t[0]) for t in pot.parameters["terms"]))
    if pot.kind == "bump-difference":
        return abs(pot.parameters["amplitude"]) * math.exp(-1.0)
    return float(np.max(np.abs(pot.parameters["values"])))


def mode_norm(rect: RectangleSpec) -> float:
    """L2 normalisation 2 sqrt(a)/pi of the sine modes on R."""
    return 2.0 * math.sqrt(rect.a) / math.pi


def coupling(pot: Potential, rect: RectangleSpec, alpha: LatticeIndex, beta: LatticeIndex,
             grid: int = DEFAULT_QUAD) -> float:
    """(q u_alpha, u_beta) by tensor composite Simpson on a grid x grid mesh."""
    need = 4 * (max(alpha.n + beta.n, alpha.m + beta.m) + pot.frequency_content())
    if grid < need:
        raise PrecisionError(f"quadrature grid {grid} under-resolves integrand (need >= {need})")
    if pot.kind == "zero":
        return 0.0
    x, y, wx, wy = quadrature_grid(rect, grid, grid)
    q = sample(pot, x, y)
    fx = wx * np.sin(rect.a * alpha.n * x) * np.sin(rect.a * beta.n * x)
    fy = wy * np.sin(alpha.m * y) * np.sin(beta.m * y)
    return mode_norm(rect) ** 2 * float(fx @ q @ fy)


@dataclass
class CosineMoments:
    """Table C[k, l] = integral over R of q cos(k a x) cos(l y).

    Sine-mode couplings reduce to four table lookups via product-to-sum, so
    a whole Galerkin matrix costs one quadrature pass.
    """

    rect: RectangleSpec
    table: np.ndarray
    grid: tuple[int, int]

    @classmethod
    def compute(cls, pot: Potential, kmax: int, lmax: int, grid: int = DEFAULT_QUAD) -> "CosineMoments":
        rect = pot.rect
        need = 4 * (max(kmax, lmax) + pot.frequency_content())
        if grid < need:
            raise PrecisionError(f"quadrature grid {grid} under-resolves moments up to {max(kmax, lmax)}"
                                 f" (need >= {need})")
        if pot.kind == "zero":
            return cls(rect, np.zeros((kmax + 1, lmax + 1)), (grid, grid))
        x, y, wx, wy = quadrature_grid(rect, grid, grid)
        q = sample(pot, x, y)
        cx = np.cos(np.outer(np.arange(kmax + 1), rect.a * x)) * wx
        cy = np.cos(np.outer(np.arange(lmax + 1), y)) * wy
        return cls(rect, cx @ q @ cy.T, (grid, grid))

    def coupling(self, n1, m1, n2, m2):
        """Vectorised (q u_(n1,m1), u_(n2,m2))."""
        t = self.table
        dn = np.abs(np.asarray(n1) - n2)
        sn = np.asarray(n1) + n2
        dm = np.abs(np.asarray(m1) - m2)
        sm = np.asarray(m1) + m2
        val = t[dn, dm] - t[dn, sm] - t[sn, dm] + t[sn, sm]
        return 0.25 * mode_norm(self.rect) ** 2 * val
