"""Curve-condition probes for product sets C x F.

The sufficient condition for removability integrates a negative power of
the distance to E = C x F along a connecting curve:

    integral over gamma of dist(z, E)^(1/(1-p)) ds
        <= c * |z1 - z2|^((p-2)/(p-1)),   p > 2.

Candidate curves are three axis-aligned segments routed through a certified
porosity hole of C, mirroring the constructive side of the condition.  The
product structure makes the distance exactly separable:

    dist((x, y), C x F)^2 = dist(x, C)^2 + dist(y, F)^2.

Failure to meet a budget is always reported as evidence, never as proof:
the condition quantifies over all curves and we only construct one family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CertificateError, InvalidSpecError
from .geometry import ParamSet, largest_hole
from .intervals import Interval, IntervalSet, as_fraction
from .witness import _leggauss


@dataclass(frozen=True)
class PathPolyline:
    """Axis-aligned polyline: consecutive vertices differ in one coordinate."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple((float(a), float(b)) for a, b in self.vertices)
        object.__setattr__(self, "vertices", vs)
        for (x0, y0), (x1, y1) in zip(vs, vs[1:]):
            if x0 != x1 and y0 != y1:
                raise InvalidSpecError("polyline segments must be axis-aligned")

    @property
    def segments(self) -> list:
        return [(a, b) for a, b in zip(self.vertices, self.vertices[1:]) if a != b]

    @property
    def length(self) -> float:
        return sum(abs(b[0] - a[0]) + abs(b[1] - a[1]) for a, b in self.segments)


class ProductDistanceField:
    """Exact distance to C x F via the separable formula."""

    def __init__(self, C_approx: IntervalSet, F_retained: IntervalSet):
        if not C_approx.parts or not F_retained.parts:
            raise InvalidSpecError("product distance needs non-empty factors")
        self.C = C_approx
        self.F = F_retained

    def dist(self, x, y) -> np.ndarray:
        dx = self.C.distance_many(np.asarray(x, dtype=float))
        dy = self.F.distance_many(np.asarray(y, dtype=float))
        return np.hypot(dx, dy)

    def nudge_height(self, y: float) -> float:
        """Deterministic displacement of y off F: nearest gap midpoint.

        Gaps are complement components of F within its bounds; heights
        already off F (outside the bounds or inside a gap, where they sit at
        that gap's midpoint after the nudge) move to the closest midpoint.
        A gap-free F pushes the height just below its lower bound.
        """
        yf = as_fraction(y)
        b = self.F.bounds()
        if yf < b.lo or yf > b.hi:
            return float(y)
        gaps = self.F.complement_within(b).parts
        best_mid, best_d = None, None
        for g in gaps:
            if g.lo < yf < g.hi:
                return float(g.midpoint)
            d = min(abs(g.lo - yf), abs(g.hi - yf))
            if best_d is None or d < best_d:
                best_d, best_mid = d, g.midpoint
        if best_mid is None:
            return float(b.lo - b.length / 10)
        return float(best_mid)


def build_three_segment_path(z1, z2, C_approx: IntervalSet, alpha: float) -> PathPolyline:
    """Horizontal-vertical-horizontal route through a porosity hole of C.

    The vertical segment sits at the center of the largest certified hole
    in B(x1, |z1 - z2|); building fails if the hole is smaller than
    alpha * |z1 - z2|.
    """
    (x1, y1), (x2, y2) = (float(z1[0]), float(z1[1])), (float(z2[0]), float(z2[1]))
    r = math.hypot(x2 - x1, y2 - y1)
    if r == 0:
        return PathPolyline(((x1, y1),))
    if not C_approx.parts:
        xh = x1
    else:
        center, hole = largest_hole(C_approx, x1, r)
        if float(hole) < alpha * r:
            raise CertificateError(
                f"porosity certificate failure: hole {float(hole):.3g} < {alpha:.3g} * {r:.3g}")
        xh = float(center)
    return PathPolyline(((x1, y1), (xh, y1), (xh, y2), (x2, y2)))


@dataclass(frozen=True)
class CurveIntegral:
    value: float
    error: float
    divergent: bool = False


def curve_integral(path: PathPolyline, E_dist: ProductDistanceField, p: float,
                   tol: float = 1e-6, order: int = 8) -> CurveIntegral:
    """Integral of dist(z, E)^(1/(1-p)) along an axis-aligned path.

    Each segment is panelised at the kinks of the relevant factor distance,
    with geometric grading toward panel endpoints where the distance
    vanishes (the exponent lies in (-1, 0) for p > 2, so endpoint zeros are
    integrable).  A segment overlapping E on positive length is flagged
    divergent.
    """
    if p <= 2:
        raise InvalidSpecError("the curve condition needs p > 2")
    expo = 1.0 / (1.0 - p)
    total, err = 0.0, 0.0
    for (ax, ay), (bx, by) in path.segments:
        if ay == by:  # horizontal
            fixed = float(E_dist.F.distance_many(np.array([ay]))[0])
            moving = E_dist.C
            lo, hi = min(ax, bx), max(ax, bx)
        else:
            fixed = float(E_dist.C.distance_many(np.array([ax]))[0])
            moving = E_dist.F
            lo, hi = min(ay, by), max(ay, by)
        v, e, div = _segment_integral(moving, fixed, lo, hi, expo, order)
        if div:
            return CurveIntegral(math.inf, math.inf, True)
        total += v
        err += e
    return CurveIntegral(total, err, False)


def _segment_integral(moving: IntervalSet, fixed: float, lo: float, hi: float,
                      expo: float, order: int) -> tuple[float, float, bool]:
    """1-D integral of (fixed^2 + dist(t, moving)^2)^(expo/2) over [lo, hi]."""
    if hi <= lo:
        return 0.0, 0.0, False
    if fixed == 0.0:
        # overlap with the moving factor means the segment touches E
        covered = moving.clip(Interval(as_fraction(lo), as_fraction(hi))).total_length
        if covered > 0:
            return math.inf, math.inf, True
    gx, gw = _leggauss(order)
    # panel at kinks of the moving distance: part endpoints and gap midpoints
    cuts = {lo, hi}
    prev = None
    for part in moving.parts:
        for t in (float(part.lo), float(part.hi)):
            if lo < t < hi:
                cuts.add(t)
        if prev is not None:
            m = (prev + float(part.lo)) / 2
            if lo < m < hi:
                cuts.add(m)
        prev = float(part.hi)
    edges = np.array(sorted(cuts))

    def eval_nodes(ts):
        d = moving.distance_many(ts)
        return (fixed * fixed + d * d) ** (expo / 2.0)

    g2x, g2w = _leggauss(max(2, order // 2))
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        width = b - a
        if width <= 0:
            continue
        deff_a = math.hypot(fixed, float(moving.distance_many(np.array([a]))[0]))
        deff_b = math.hypot(fixed, float(moving.distance_many(np.array([b]))[0]))
        if deff_a == 0.0 and deff_b == 0.0:
            mid_d = math.hypot(fixed, float(moving.distance_many(np.array([(a + b) / 2]))[0]))
            if mid_d == 0.0:
                return math.inf, math.inf, True
        # grade toward whichever endpoint sits close to (or on) the set
        d_small = min(deff_a, deff_b)
        if d_small < width / 4.0:
            start = max(d_small, width * 1e-13) / width
            frac = np.concatenate(([0.0], np.geomspace(start, 1.0, 40)))
            if deff_a <= deff_b:
                sub_edges = a + width * frac
            else:
                sub_edges = b - width * frac[::-1]
        else:
            sub_edges = np.array([a, b])
        coarse = fine = 0.0
        for sa, sb in zip(sub_edges[:-1], sub_edges[1:]):
            if sb <= sa:
                continue
            mid, half = 0.5 * (sb + sa), 0.5 * (sb - sa)
            fine += float(np.sum(half * gw * eval_nodes(mid + half * gx)))
            coarse += float(np.sum(half * g2w * eval_nodes(mid + half * g2x)))
        total += fine
        err += abs(fine - coarse)
    return total, err, False


# ---------------------------------------------------------------------------
# sweeps and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioRow:
    z1: tuple
    z2: tuple
    scale: float
    integral: float
    ratio: float


@dataclass
class RatioReport:
    p: float
    rows: list
    max_ratio_per_scale: dict
    growth_exponent: float


def curve_condition_sweep(C_approx: IntervalSet, F_retained: IntervalSet,
                          params: ParamSet, n_pairs: int, scales,
                          seed: int = 0, alpha_min: float = 0.05) -> RatioReport:
    """Three-segment curve ratios for random pairs at each scale.

    Pairs anchor near C horizontally (endpoints of parts) with heights
    nudged to gap midpoints of F; the recorded ratio divides the integral
    by |z1 - z2|^((p-2)/(p-1)).  Boundedness of the per-scale maxima across
    scales is the qualitative removability signal; growth is reported via a
    log-log slope, not asserted.
    """
    p = params.p
    if p <= 2:
        raise InvalidSpecError("the curve condition needs p > 2")
    field = ProductDistanceField(C_approx, F_retained)
    rng = np.random.default_rng(seed)
    endpoints = [float(q.lo) for q in C_approx.parts] + [float(q.hi) for q in C_approx.parts]
    fb = F_retained.bounds()
    y_lo, y_hi = float(fb.lo), float(fb.hi)
    rows = []
    expo = (p - 2.0) / (p - 1.0)
    for scale in scales:
        scale = float(scale)
        for _ in range(n_pairs):
            x1 = endpoints[rng.integers(0, len(endpoints))]
            y1 = rng.uniform(y_lo, y_hi)
            angle = rng.uniform(0, 2 * math.pi)
            x2 = x1 + scale * math.cos(angle)
            y2 = y1 + scale * math.sin(angle)
            y1n = field.nudge_height(y1)
            y2n = field.nudge_height(y2)
            z1, z2 = (x1, y1n), (x2, y2n)
            sep = math.hypot(z2[0] - z1[0], z2[1] - z1[1])
            if sep == 0:
                continue
            try:
                path = build_three_segment_path(z1, z2, C_approx, alpha_min)
            except CertificateError:
                continue
            ci = curve_integral(path, field, p)
            if ci.divergent:
                continue
            rows.append(RatioRow(z1, z2, scale, ci.value, ci.value / sep ** expo))
    per_scale = {}
    for row in rows:
        per_scale[row.scale] = max(per_scale.get(row.scale, 0.0), row.ratio)
    if len(per_scale) >= 2:
        xs = np.log(sorted(per_scale))
        ys = np.log([per_scale[s] for s in sorted(per_scale)])
        slope, _ = np.polyfit(xs, ys, 1)
        growth = float(-slope)  # positive growth = ratios blow up at small scales
    else:
        growth = math.nan
    return RatioReport(p, rows, per_scale, growth)


@dataclass(frozen=True)
class PorosityProbeRow:
    x: float
    r: float
    d_measured: float
    d_required: float
    budget_met: bool
    skipped: bool


def porosity_necessity_probe(C_approx: IntervalSet, F_retained: IntervalSet,
                             params: ParamSet, c_gamma: float,
                             density_points, scales,
                             alpha_min: float = 0.05, max_centers: int = 8) -> list:
    """Necessity direction: budget-satisfying curves must stay coarse.

    For each (x in C, r) below the density scale of F at y, a candidate
    three-segment curve is built between nudged points straddling x.  When
    its integral meets the budget c_gamma * |z1 - z2|^((p-2)/(p-1)), the
    maximal distance to E along the curve inside the control box
    B(x, 7r/8) x B(y, r/2) must be at least 2 * c_gamma^(1-p) * r.
    Rows report the comparison; budget failures are evidence, not errors.
    """
    p = params.p
    if p <= 2:
        raise InvalidSpecError("the probe needs p > 2")
    field = ProductDistanceField(C_approx, F_retained)
    eps = math.sqrt(2.0) * c_gamma ** (1.0 - p)
    expo = (p - 2.0) / (p - 1.0)
    rows = []
    all_xs = [float(q.lo) for q in C_approx.parts]
    stride = max(1, len(all_xs) // max_centers)
    xs = all_xs[::stride][:max_centers]
    for y in density_points:
        y = float(y)
        for r in scales:
            r = float(r)
            # density gate: complement mass below eps * r at this scale
            window = Interval(as_fraction(y - r), as_fraction(y + r))
            comp = IntervalSet([window]).difference(F_retained.clip(window))
            if float(comp.total_length) >= eps * r:
                rows.append(PorosityProbeRow(math.nan, r, math.nan,
                                             2 * c_gamma ** (1 - p) * r, False, True))
                continue
            for x in xs:
                z1 = (x - r / 2, field.nudge_height(y))
                z2 = (x + r / 2, field.nudge_height(y))
                try:
                    path = build_three_segment_path(z1, z2, C_approx, alpha_min)
                except CertificateError:
                    continue
                ci = curve_integral(path, field, p)
                sep = math.hypot(z2[0] - z1[0], z2[1] - z1[1])
                budget = ci.value <= c_gamma * sep ** expo
                d_req = 2.0 * c_gamma ** (1.0 - p) * r
                d_meas = _max_dist_in_box(path, field, x, y, r)
                rows.append(PorosityProbeRow(x, r, d_meas, d_req, bool(budget), False))
    return rows


def _max_dist_in_box(path: PathPolyline, field: ProductDistanceField,
                     x: float, y: float, r: float, n: int = 512) -> float:
    best = 0.0
    for (ax, ay), (bx, by) in path.segments:
        ts = np.linspace(0.0, 1.0, n)
        pxs = ax + (bx - ax) * ts
        pys = ay + (by - ay) * ts
        inside = (np.abs(pxs - x) <= 7 * r / 8) & (np.abs(pys - y) <= r / 2)
        if inside.any():
            best = max(best, float(field.dist(pxs[inside], pys[inside]).max()))
    return best
