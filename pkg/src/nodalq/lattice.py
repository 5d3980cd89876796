"""Rectangle geometry, the eigenvalue lattice and Diophantine screening of a.

The rectangle is R = [0, pi/a] x [0, pi]. Its q = 0 Dirichlet eigenvalues are
a^2 n^2 + m^2, labelled by lattice points alpha = (a n, m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

import mpmath
import numpy as np

# Upper end of the admissible exponent window for delta.
DELTA_MAX = 1.0 / 24.0


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class RectangleSpec:
    a: float

    def __post_init__(self):
        if not (self.a > 1.0) or not math.isfinite(self.a):
            raise DomainError(f"rectangle parameter a must be > 1, got {self.a!r}")

    @property
    def width(self) -> float:
        return math.pi / self.a

    @property
    def height(self) -> float:
        return math.pi

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * self.width, 0.5 * self.height

    def contains(self, x, y, tol: float = 1e-12):
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= -tol) & (x <= self.width + tol) & (y >= -tol) & (y <= self.height + tol)

    @classmethod
    def from_a_sq(cls, a_sq: float) -> "RectangleSpec":
        if not a_sq > 1.0:
            raise DomainError(f"a^2 must be > 1, got {a_sq!r}")
        return cls(math.sqrt(a_sq))


@dataclass(frozen=True, order=False)
class LatticeIndex:
    n: int
    m: int
    norm_sq: float = field(compare=False)

    @classmethod
    def make(cls, rect: RectangleSpec, n: int, m: int) -> "LatticeIndex":
        if n < 1 or m < 1:
            raise DomainError(f"lattice indices need n, m >= 1, got ({n}, {m})")
        return cls(int(n), int(m), rect.a * rect.a * n * n + m * m)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def sort_key(self):
        return (self.norm_sq, self.n, self.m)

    def __str__(self):
        return f"({self.n},{self.m})"


def enumerate_indices(rect: RectangleSpec, r: float) -> list[LatticeIndex]:
    """All lattice points with |alpha| < r, ascending by |alpha|^2 then (n, m)."""
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    r_sq = r * r
    a_sq = rect.a * rect.a
    out = []
    n = 1
    while a_sq * n * n + 1 < r_sq:
        m = 1
        while True:
            nsq = a_sq * n * n + m * m
            if nsq >= r_sq:
                break
            out.append(LatticeIndex(n, m, nsq))
            m += 1
        n += 1
    out.sort(key=LatticeIndex.sort_key)
    return out


# ---------------------------------------------------------------------------
# Diophantine screening
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    p: int
    den: int
    gap: float


@dataclass
class DiophantineReport:
    a_sq: float
    max_denominator_scanned: int
    worst_violation: Optional[Violation]
    fitted_delta: Optional[float]
    fitted_k: Optional[float]
    verdict: str  # "accepted" | "rejected" | "exact-rational"
    violations: list[Violation] = field(default_factory=list)
    convergents: list[tuple[int, int, float]] = field(default_factory=list)
    fitted_exponent: Optional[float] = None

    def to_dict(self) -> dict:
        wv = self.worst_violation
        return {
            "a_sq": self.a_sq,
            "max_denominator_scanned": self.max_denominator_scanned,
            "verdict": self.verdict,
            "worst_violation": None if wv is None else {"p": wv.p, "den": wv.den, "gap": wv.gap},
            "violations": [{"p": v.p, "den": v.den, "gap": v.gap} for v in self.violations],
            "fitted_delta": self.fitted_delta,
            "fitted_k": self.fitted_k,
            "fitted_exponent": self.fitted_exponent,
            "convergents": [{"p": p, "den": q, "gap": g} for p, q, g in self.convergents],
        }


Number = Union[float, int, Fraction, str, "mpmath.mpf"]


def parse_real(value: Number, dps: int = 250):
    """Turn a float, Fraction or expression string into (mpf, working dps).

    Strings are evaluated with mpmath at high precision, so that things like
    ``"sqrt(2)"`` or ``"1 + 10**-1 + 10**-2"`` keep digits a double would lose.
    Plain floats are taken exactly as the binary value they hold.
    """
    if isinstance(value, str):
        with mpmath.workdps(dps):
            names = {k: getattr(mpmath, k) for k in
                     ("sqrt", "exp", "log", "pi", "e", "cbrt", "root", "factorial", "mpf")}
            expr = value.replace("^", "**")
            try:
                x = eval(expr, {"__builtins__": {}}, names)  # noqa: S307 - restricted namespace
            except Exception as exc:  # pragma: no cover - message passthrough
                raise DomainError(f"cannot parse real expression {value!r}: {exc}") from exc
            x = mpmath.mpf(x)
        return x, dps
    if isinstance(value, Fraction):
        with mpmath.workdps(dps):
            return mpmath.mpf(value.numerator) / value.denominator, dps
    if isinstance(value, mpmath.mpf):
        return value, mpmath.mp.dps
    # float / int: exact binary value, double-precision significance
    return mpmath.mpf(float(value)), 17


def _convergents(x, dps: int, max_den: int) -> Iterator[tuple[int, int]]:
    with mpmath.workdps(dps):
        h0, h1 = 0, 1
        k0, k1 = 1, 0
        y = x
        while True:
            ai = int(mpmath.floor(y))
            h0, h1 = h1, ai * h1 + h0
            k0, k1 = k1, ai * k1 + k0
            if k1 > max_den:
                return
            yield h1, k1
            frac = y - ai
            if frac == 0:
                return
            y = 1 / frac


def check_admissible(a_sq: Number, max_denominator: int, *, min_den: int = 100,
                     violation_k: float = 0.1, rational_rtol: Optional[float] = None,
                     ) -> DiophantineReport:
    """Falsification screen for a^2 against the badly-approximable window.

    Scans continued-fraction convergents p/den of ``a_sq`` up to
    ``max_denominator``. A convergent with den >= ``min_den`` is a violation
    when ``|a_sq - p/den| < violation_k * den**-(2 + 1/24)``. Two or more
    violations reject; a convergent that hits a_sq to working precision marks
    it rational. Passing proves nothing about membership, it only fails to
    refute it.
    """
    x, dps = parse_real(a_sq)
    if not x > 1:
        raise DomainError(f"a_sq must exceed 1, got {a_sq!r}")
    if max_denominator < 2:
        raise DomainError("max_denominator must be >= 2")
    if rational_rtol is None:
        rational_rtol = 1e-14 if dps <= 17 else float(mpmath.mpf(10) ** (2 - dps))

    threshold_exp = 2.0 + DELTA_MAX
    convs: list[tuple[int, int, float]] = []
    violations: list[Violation] = []
    rational_hit: Optional[Violation] = None
    with mpmath.workdps(dps):
        for p, q in _convergents(x, dps, max_denominator):
            gap_mp = abs(x - mpmath.mpf(p) / q)
            gap = float(gap_mp)
            convs.append((p, q, gap))
            hit = gap_mp <= rational_rtol * x
            if hit:
                gap = 0.0
                convs[-1] = (p, q, 0.0)
                rational_hit = Violation(p, q, 0.0)
            if q >= min_den and (hit or gap < violation_k * q ** -threshold_exp):
                violations.append(Violation(p, q, gap))
            if hit:
                break

    def exponent(v: Violation) -> float:
        if v.gap == 0.0:
            return math.inf
        return -math.log(v.gap) / math.log(v.den)

    if len(violations) >= 2:
        verdict = "rejected"
        worst = max(violations, key=exponent)
    elif rational_hit is not None:
        verdict = "exact-rational"
        worst = rational_hit
    else:
        verdict = "accepted"
        worst = violations[0] if violations else None

    report = DiophantineReport(
        a_sq=float(x), max_denominator_scanned=max_denominator, worst_violation=worst,
        fitted_delta=None, fitted_k=None, verdict=verdict, violations=violations,
        convergents=convs,
    )
    if verdict == "accepted":
        _fit_exponent(report)
    return report


def _fit_exponent(report: DiophantineReport) -> None:
    pts = [(q, g) for _, q, g in report.convergents if q >= 2 and g > 0]
    if len(pts) >= 2:
        lq = np.log([q for q, _ in pts])
        lg = np.log([g for _, g in pts])
        slope, _ = np.polyfit(lq, lg, 1)
        report.fitted_exponent = float(-slope)
        delta = min(max(report.fitted_exponent - 2.0, DELTA_MAX / 8), DELTA_MAX / 2)
    else:
        delta = DELTA_MAX / 2
    # k is the largest constant (halved for strictness) consistent with every scanned convergent
    ks = [g * q ** (2.0 + delta) for _, q, g in report.convergents if g > 0]
    report.fitted_delta = delta
    report.fitted_k = 0.5 * min(ks) if ks else 1.0


# ---------------------------------------------------------------------------
# Good-index selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoodIndexCriteria:
    min_gap_exponent: float = -15.0 / 16.0
    gap_constant: float = 2.0
    comparability_c: float = 0.3
    max_norm: float = 12.0

    def __post_init__(self):
        if not 0.0 < self.comparability_c < 1.0:
            raise DomainError("comparability_c must lie in (0, 1)")
        if not self.gap_constant > 0.0:
            raise DomainError("gap_constant must be positive")
        if not self.max_norm > 0.0:
            raise DomainError("max_norm must be positive")


@dataclass(frozen=True)
class IndexGap:
    index: LatticeIndex
    gap: float
    good: bool


def nearest_gaps(indices: list[LatticeIndex], neighbours: list[LatticeIndex]) -> np.ndarray:
    """min over beta != alpha of ||alpha|^2 - |beta|^2| for each alpha."""
    if not indices:
        return np.zeros(0)
    vals = np.array([b.norm_sq for b in neighbours])
    keys = [(b.n, b.m) for b in neighbours]
    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    out = np.empty(len(indices))
    for k, al in enumerate(indices):
        pos = int(np.searchsorted(sv, al.norm_sq))
        best = math.inf
        for j in range(max(pos - 3, 0), min(pos + 4, len(sv))):
            if keys[order[j]] == (al.n, al.m):
                continue
            best = min(best, abs(sv[j] - al.norm_sq))
        out[k] = best
    return out


def classify_indices(rect: RectangleSpec, criteria: GoodIndexCriteria) -> list[IndexGap]:
    """Gap report for every index with |alpha| <= max_norm, flagged good/not."""
    pool = enumerate_indices(rect, criteria.max_norm + 1.0)
    cands = [al for al in pool if al.norm_sq <= criteria.max_norm ** 2]
    gaps = nearest_gaps(cands, pool)
    c = criteria.comparability_c
    out = []
    for al, g in zip(cands, gaps):
        ratio = al.m / (rect.a * al.n)
        need = criteria.gap_constant * al.norm ** criteria.min_gap_exponent
        good = bool(g >= need and c <= ratio <= 1.0 / c)
        out.append(IndexGap(al, float(g), good))
    return out


def select_good_indices(rect: RectangleSpec, criteria: GoodIndexCriteria) -> list[IndexGap]:
    """Heuristic stand-in for L(a) minus the exceptional set.

    Keeps indices whose nearest eigenvalue neighbour is at least
    ``gap_constant * |alpha|**min_gap_exponent`` away and whose (n, m) are
    comparable, ``c <= m/(a n) <= 1/c``.
    """
    return [g for g in classify_indices(rect, criteria) if g.good]


def sparse_subsequence(good: list[IndexGap], ratio: float = 1.15) -> list[IndexGap]:
    """Greedy subsequence alpha^k with |alpha^{k+1}| >= ratio |alpha^k|."""
    out: list[IndexGap] = []
    for g in sorted(good, key=lambda g: g.index.sort_key()):
        if not out or g.index.norm >= ratio * out[-1].index.norm:
            out.append(g)
    return out
