"""Cantor-set constructions and geometric estimators.

Builds the thin (zero measure) and fat (positive measure) Cantor sets from
their generative descriptions, and provides the geometric probes used by
the removability criteria: gap census, porosity certificates, regularity
ratios, box dimension, and the dilation coefficient check.

All constructions carry exact rational endpoints; estimators that involve
a power law (census, regularity, dilation coefficient) convert to float
only in the final ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidSpecError
from .intervals import Interval, IntervalSet, Scalar, as_fraction

if TYPE_CHECKING:  # pragma: no cover
    from .measure import StaircaseMeasure


# ---------------------------------------------------------------------------
# parameter bookkeeping
# ---------------------------------------------------------------------------

def similarity_dimension(ratio: Scalar) -> float:
    """Similarity dimension log 2 / log(1/ratio) of a two-branch Cantor set."""
    r = float(as_fraction(ratio))
    if not 0 < r < 0.5:
        raise InvalidSpecError("ratio must lie in (0, 1/2)")
    return math.log(2.0) / math.log(1.0 / r)


def critical_exponent(s: float) -> float:
    """The transition exponent (2 - s) / (1 - s) for a dimension-s factor."""
    if not 0 < s < 1:
        raise InvalidSpecError("dimension must lie in (0, 1)")
    return (2.0 - s) / (1.0 - s)


def salli_dimension(alpha: float) -> float:
    """Dimension bound log 2 / log((2 - a)/(1 - a)) for an a-porous set."""
    if not 0 < alpha < 1:
        raise InvalidSpecError("porosity constant must lie in (0, 1)")
    return math.log(2.0) / math.log((2.0 - alpha) / (1.0 - alpha))


def porous_removability_threshold(alpha: float) -> float:
    """Exponent above which a uniformly lower alpha-porous factor is removable.

    Derived, not tabulated: the dimension bound for an alpha-porous set is
    fed into the critical exponent.
    """
    return critical_exponent(salli_dimension(alpha))


@dataclass(frozen=True)
class ParamSet:
    """Exponent bookkeeping (s, p, q, alpha) plus the working radius R."""

    s: float
    p: float
    radius_R: float = 2.0
    q: float = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise InvalidSpecError("s must lie in (0, 1)")
        if self.p < 1:
            raise InvalidSpecError("p must be >= 1")
        if self.radius_R <= 1:
            raise InvalidSpecError("radius R must exceed 1")
        q = self.p / (self.p - 1.0) if self.p > 1 else math.inf
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha", (1.0 - self.s) * (self.p - 1.0))

    @property
    def p_star(self) -> float:
        return critical_exponent(self.s)


# ---------------------------------------------------------------------------
# generative specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThinCantorSpec:
    """Two-branch self-similar Cantor set: contraction ratio and depth."""

    base: Interval
    ratio: Fraction
    depth: int

    def __post_init__(self):
        object.__setattr__(self, "ratio", as_fraction(self.ratio))
        if not (0 < self.ratio < Fraction(1, 2)):
            raise InvalidSpecError("ratio must lie in (0, 1/2)")
        if self.depth < 0 or self.depth != int(self.depth):
            raise InvalidSpecError("depth must be a non-negative integer")
        if self.base.length <= 0:
            raise InvalidSpecError("base interval must have positive length")

    @property
    def dimension(self) -> float:
        return similarity_dimension(self.ratio)

    @classmethod
    def middle_thirds(cls, depth: int, base: Interval | None = None) -> "ThinCantorSpec":
        return cls(base or Interval(0, 1), Fraction(1, 3), depth)

    def normalized(self) -> "ThinCantorSpec":
        return ThinCantorSpec(Interval(0, 1), self.ratio, self.depth)

    def at_depth(self, depth: int) -> "ThinCantorSpec":
        return ThinCantorSpec(self.base, self.ratio, depth)


@dataclass(frozen=True)
class FatCantorSpec:
    """Fat Cantor set: at generation k, 2^(k-1) centred gaps of length g_k."""

    base: Interval
    gap_lengths: tuple
    depth: int

    def __post_init__(self):
        gaps = tuple(as_fraction(g) for g in self.gap_lengths)
        object.__setattr__(self, "gap_lengths", gaps)
        if self.depth < 0:
            raise InvalidSpecError("depth must be non-negative")
        if len(gaps) < self.depth:
            raise InvalidSpecError("gap schedule shorter than requested depth")
        if any(g < 0 for g in gaps):
            raise InvalidSpecError("gap lengths must be non-negative")
        # The schedule must never exhaust a surviving interval.
        length = self.base.length
        for k in range(self.depth):
            if gaps[k] >= length:
                raise InvalidSpecError(
                    f"generation {k + 1} gap {gaps[k]} exhausts surviving length {length}"
                )
            length = (length - gaps[k]) / 2

    @classmethod
    def geometric(cls, first_gap: Scalar, gap_ratio: Scalar, depth: int,
                  base: Interval | None = None) -> "FatCantorSpec":
        """Schedule g_k = first_gap * gap_ratio**(k-1)."""
        g0 = as_fraction(first_gap)
        r = as_fraction(gap_ratio)
        gaps = tuple(g0 * r ** k for k in range(depth))
        return cls(base or Interval(0, 1), gaps, depth)

    def retained_length(self, generation: int | None = None) -> Fraction:
        """Exact measure of the retained set after `generation` steps."""
        n = self.depth if generation is None else generation
        removed = sum((2 ** k * self.gap_lengths[k] for k in range(n)), Fraction(0))
        return self.base.length - removed


def build_thin_cantor(spec: ThinCantorSpec) -> IntervalSet:
    """The 2**depth surviving closed intervals of the ratio construction."""
    parts = [(spec.base.lo, spec.base.hi)]
    r = spec.ratio
    for _ in range(spec.depth):
        nxt = []
        for lo, hi in parts:
            ell = (hi - lo) * r
            nxt.append((lo, lo + ell))
            nxt.append((hi - ell, hi))
        parts = nxt
    return IntervalSet(parts)


def build_fat_cantor(spec: FatCantorSpec) -> tuple[IntervalSet, IntervalSet]:
    """Retained set and removed (open) gaps after `depth` generations."""
    parts = [(spec.base.lo, spec.base.hi)]
    gaps = []
    for k in range(spec.depth):
        g = spec.gap_lengths[k]
        nxt = []
        for lo, hi in parts:
            if g == 0:
                nxt.append((lo, hi))
                continue
            mid = (lo + hi) / 2
            nxt.append((lo, mid - g / 2))
            nxt.append((mid + g / 2, hi))
            gaps.append((mid - g / 2, mid + g / 2))
        parts = nxt
    return IntervalSet(parts), IntervalSet(gaps)


def dist_to_set(y: Scalar, set_complement_gaps: IntervalSet, base: Interval) -> float:
    """Distance from y to base minus the given open gaps.

    Outside the base the nearest point is the corresponding base endpoint
    (gaps are interior, so endpoints survive).
    """
    yf = as_fraction(y)
    if yf < base.lo:
        return float(base.lo - yf)
    if yf > base.hi:
        return float(yf - base.hi)
    for g in set_complement_gaps.parts:
        if g.lo < yf < g.hi:
            return float(min(yf - g.lo, g.hi - yf))
    return 0.0


# ---------------------------------------------------------------------------
# gap census
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapCensus:
    window: Interval
    delta: float
    count: int
    fitted_c_s: float


def gap_census(C_approx: IntervalSet, window: Interval, delta: Scalar, s: float) -> GapCensus:
    """Count complement components of length strictly above delta*|window|.

    The comparison is exact: component lengths and the threshold are
    rationals, so no component is ever misclassified at the boundary.
    """
    d = as_fraction(delta)
    if not 0 < d <= 1:
        raise InvalidSpecError("delta must lie in (0, 1]")
    if window.length <= 0:
        raise InvalidSpecError("census window must have positive length")
    threshold = d * window.length
    components = C_approx.complement_within(window)
    count = sum(1 for c in components.parts if c.length > threshold)
    return GapCensus(window, float(d), count, count * float(d) ** s)


# ---------------------------------------------------------------------------
# porosity
# ---------------------------------------------------------------------------

def largest_hole(C_approx: IntervalSet, x: Scalar, r: Scalar) -> tuple[Fraction, Fraction]:
    """Largest ball inside B(x, r) avoiding the set; exact maximisation.

    Returns (center, radius) maximising min(dist(y, C), r - |y - x|) over
    y in [x - r, x + r].  The objective is piecewise linear, so evaluating
    it on structural breakpoints plus piece crossings is exact.
    """
    x = as_fraction(x)
    r = as_fraction(r)
    if r <= 0:
        raise InvalidSpecError("hole search radius must be positive")
    w_lo, w_hi = x - r, x + r
    if not C_approx.parts:
        return x, r

    # Only parts within reach of the window can shape the objective there.
    reach_lo, reach_hi = w_lo - 2 * r, w_hi + 2 * r
    near = [p for p in C_approx.parts if p.hi >= reach_lo and p.lo <= reach_hi]

    # Breakpoints of the objective: window edges, tent apex, part endpoints,
    # gap midpoints between consecutive near parts.
    candidates = {w_lo, w_hi, x}
    anchors = []
    for p in near:
        anchors.append(p.lo)
        if p.hi != p.lo:
            anchors.append(p.hi)
    for a in anchors:
        if w_lo <= a <= w_hi:
            candidates.add(a)
    for prev, nxt in zip(near, near[1:]):
        m = (prev.hi + nxt.lo) / 2
        if w_lo <= m <= w_hi:
            candidates.add(m)
    # Crossings of the rising/falling distance pieces |y - a| with the tent
    # branches r -+ (y - x): both slope +-1, so crossings sit at midpoints
    # of the anchor with the opposite window edge.
    for a in anchors:
        for y in ((a + w_hi) / 2, (a + w_lo) / 2):
            if w_lo <= y <= w_hi:
                candidates.add(y)

    def objective(y: Fraction) -> Fraction:
        return min(C_approx.distance(y), r - abs(y - x))

    best_y, best_v = x, Fraction(-1)
    for y in candidates:
        v = objective(y)
        if v > best_v:
            best_y, best_v = y, v
    return best_y, max(best_v, Fraction(0))


def porosity_estimate(C_approx: IntervalSet, scales: Sequence[Scalar],
                      sample_points: int) -> float:
    """Certified lower porosity over sampled (x, r) pairs.

    For every sampled center x (part endpoints, evenly subsampled) and
    every scale r, the largest contained hole is found exactly; the
    certificate is the minimum over pairs of hole_radius / r.
    """
    if sample_points <= 0:
        raise InvalidSpecError("sample_points must be positive")
    if not scales:
        raise InvalidSpecError("at least one scale is required")
    if not C_approx.parts:
        raise InvalidSpecError("porosity of the empty set is undefined")
    diam = C_approx.diameter
    scales_f = [as_fraction(sc) for sc in scales]
    for sc in scales_f:
        if sc <= 0:
            raise InvalidSpecError("scales must be positive")
        if diam > 0 and sc > diam:
            raise InvalidSpecError(f"scale {sc} exceeds the set diameter {diam}")

    endpoints = []
    for p in C_approx.parts:
        endpoints.append(p.lo)
        if p.hi != p.lo:
            endpoints.append(p.hi)
    stride = max(1, len(endpoints) // sample_points)
    xs = endpoints[::stride][:sample_points]

    worst = None
    for x in xs:
        for r in scales_f:
            _, hole = largest_hole(C_approx, x, r)
            ratio = hole / r
            if worst is None or ratio < worst:
                worst = ratio
    return float(worst)


# ---------------------------------------------------------------------------
# regularity and dimension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularityBounds:
    c_lower: float
    c_upper: float
    clipped: bool


def regularity_constants(C_approx: IntervalSet, mu: "StaircaseMeasure", s: float,
                         scales: Sequence[float]) -> RegularityBounds:
    """Min and max of mu(B(x, r)) / r^s over part endpoints and scales."""
    if not C_approx.parts:
        raise InvalidSpecError("regularity of the empty set is undefined")
    diam = float(C_approx.diameter)
    xs = np.array(sorted({float(p.lo) for p in C_approx.parts}
                         | {float(p.hi) for p in C_approx.parts}))
    clipped = False
    lo, hi = math.inf, 0.0
    for r in scales:
        r = float(r)
        if r <= 0:
            raise InvalidSpecError("scales must be positive")
        if r > diam > 0:
            r = diam
            clipped = True
        ratios = mu.ball_mass_many(xs, r) / r ** s
        lo = min(lo, float(ratios.min()))
        hi = max(hi, float(ratios.max()))
    return RegularityBounds(lo, hi, clipped)


def box_dimension_estimate(set_approx: IntervalSet, scales: Sequence[Scalar]) -> float:
    """Least-squares slope of log(box count) against log(1/scale)."""
    if len(scales) < 3:
        raise InvalidSpecError("need at least 3 scales")
    vals = [as_fraction(sc) for sc in scales]
    if any(v <= 0 for v in vals):
        raise InvalidSpecError("scales must be positive")
    span = max(vals) / min(vals)
    if span < 100:
        raise InvalidSpecError("scales must span at least two decades")
    counts = [set_approx.box_count(v) for v in vals]
    if any(c <= 0 for c in counts):
        raise DegenerateDataError("box count vanished at some scale")
    xs = np.log([1.0 / float(v) for v in vals])
    ys = np.log(counts)
    if np.ptp(xs) == 0:
        raise DegenerateDataError("degenerate regression: identical scales")
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# dilation coefficient (porous-set length bound)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DilationCheck:
    lhs: float
    rhs_coeff: float
    s_salli: float


def salli_check(C_approx: IntervalSet, window: Interval, delta: Scalar,
                alpha_porosity: float) -> DilationCheck:
    """Length of the (delta/2)|window|-dilation of C within the window.

    lhs is exact (interval dilation, union, clip); rhs_coeff normalises it
    by |window| * delta^(1 - s(alpha)) so that boundedness across delta is
    the checkable claim.
    """
    d = as_fraction(delta)
    if not 0 < d <= 1:
        raise InvalidSpecError("delta must lie in (0, 1]")
    if not 0 < alpha_porosity < 1:
        raise InvalidSpecError("porosity constant must lie in (0, 1)")
    radius = d * window.length / 2
    dilated = C_approx.clip(window).dilate(radius).clip(window)
    lhs = float(dilated.total_length)
    s_a = salli_dimension(alpha_porosity)
    rhs_coeff = lhs / (float(window.length) * float(d) ** (1.0 - s_a))
    return DilationCheck(lhs, rhs_coeff, s_a)
