"""Oscillation control on covers: curves, height maps, and the scale chain.

Given a cover of the thin set C by small open intervals J_i, the machinery
bounds the oscillation of a trace f = u(., y) over each J_i by a constant
times |J_i|^(s/q) times the gradient norm of u on the square
Q_i = J_i x B(y, |J_i|/2).  The route runs through a curve family: three
axis-aligned segments whose horizontal level y(t) distributes according to
normalised length measure on the complement K = B(y, |I|) minus F, plus a
dyadic chain of nested subintervals connecting a point to the average.

The per-scale constant is assembled from the proof route, with each factor
evaluated honestly for the given family:

  vertical segments:  (1 + 2^(1-1/q)) * |J|^(2/q - 1)
  horizontal segment: |J|^(1/q) * len(K)^(-1/p)

and the chained constant folds the geometric sums over the dyadic scales
(requires p > 2 so the vertical sum converges).  The inequality tests are
genuine inequalities: no constant is fitted to the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificateError, InvalidSpecError
from .intervals import Interval, IntervalSet, as_fraction


# ---------------------------------------------------------------------------
# covers
# ---------------------------------------------------------------------------

@dataclass
class Cover:
    delta: float
    intervals: list            # open J_i as Interval records
    y_center: float
    hausdorff_sum: float       # sum |J_i|^s
    s: float

    @property
    def squares(self) -> list:
        """Q_i = J_i x B(y_center, |J_i| / 2)."""
        out = []
        for J in self.intervals:
            half = float(J.length) / 2.0
            out.append((J, (self.y_center - half, self.y_center + half)))
        return out


def build_cover(C_approx: IntervalSet, s: float, delta, hausdorff_budget: float,
                y_center: float = 0.0) -> Cover:
    """Greedy cover of C by open intervals shorter than delta.

    Sweeps the parts left to right, packing as many as fit under the length
    budget; each cover interval is padded so the parts it covers are
    interior.  The packing keeps multiplicity 1 and, for self-similar C at
    near-cylinder scales, reproduces the cylinder cover, so the Hausdorff
    sum stays within a factor of the natural cover value.
    """
    d = as_fraction(delta)
    if d <= 0:
        raise InvalidSpecError("delta must be positive")
    if not C_approx.parts:
        return Cover(float(d), [], y_center, 0.0, s)

    groups = []
    cur_lo, cur_hi = C_approx.parts[0].lo, C_approx.parts[0].hi
    for part in C_approx.parts[1:]:
        if part.hi - cur_lo < d:
            cur_hi = max(cur_hi, part.hi)
        else:
            groups.append((cur_lo, cur_hi))
            cur_lo, cur_hi = part.lo, part.hi
    groups.append((cur_lo, cur_hi))

    intervals = []
    for i, (lo, hi) in enumerate(groups):
        room = d - (hi - lo)
        if room <= 0:
            raise CertificateError(
                f"a component of C has diameter {hi - lo} >= delta {d}")
        pad = min(room, d / 50)
        if i > 0:
            pad = min(pad, lo - groups[i - 1][1])
        if i + 1 < len(groups):
            pad = min(pad, groups[i + 1][0] - hi)
        intervals.append(Interval(lo - pad / 4, hi + pad / 4))

    hsum = float(sum(float(J.length) ** s for J in intervals))
    if hsum > 2.0 * hausdorff_budget:
        raise CertificateError(
            f"cover sum {hsum:.6g} exceeds twice the budget {hausdorff_budget:.6g} at delta {float(d):.3g}")
    return Cover(float(d), intervals, y_center, hsum, s)


def cover_multiplicity(cover: Cover) -> int:
    """Maximum number of cover intervals containing a common point (sweep)."""
    events = []
    for J in cover.intervals:
        events.append((J.lo, 1))
        events.append((J.hi, -1))
    depth = best = 0
    for _, step in sorted(events, key=lambda e: (e[0], -e[1])):
        depth += step
        best = max(best, depth)
    return best


# ---------------------------------------------------------------------------
# height map and curve families
# ---------------------------------------------------------------------------

def height_map(K: IntervalSet, y_lo, y_hi, t: float) -> float:
    """Generalised inverse of the normalised cumulative length of K.

    Pushes uniform t in [0, 1] forward to length measure on K within
    [y_lo, y_hi].  t = 0 returns inf K (the continuity limit of the
    formula's infimum).
    """
    return float(height_map_many(K, y_lo, y_hi, np.array([t]))[0])


def height_map_many(K: IntervalSet, y_lo, y_hi, ts: np.ndarray) -> np.ndarray:
    window = Interval(as_fraction(y_lo), as_fraction(y_hi))
    Kw = K.clip(window)
    total = float(Kw.total_length)
    if total <= 0:
        raise InvalidSpecError("the complement set K has zero length in the window")
    ts = np.asarray(ts, dtype=float)
    if np.any((ts < 0) | (ts > 1)):
        raise InvalidSpecError("curve parameter t must lie in [0, 1]")
    lo = np.array([float(p.lo) for p in Kw.parts])
    lens = np.array([float(p.length) for p in Kw.parts])
    cum = np.concatenate(([0.0], np.cumsum(lens)))
    target = ts * total
    idx = np.clip(np.searchsorted(cum, target, side="left") - 1, 0, len(lens) - 1)
    # t = 0 maps to inf K; targets on a part boundary resolve to that part's end
    return lo[idx] + np.minimum(target - cum[idx], lens[idx])


@dataclass(frozen=True)
class CurveFamily:
    """Three-segment curves joining the averages over J and I (|J| = 2|I|)."""

    J: Interval
    I: Interval
    K: IntervalSet
    y_center: float

    def __post_init__(self):
        if 2 * self.I.length != self.J.length:
            raise InvalidSpecError("curve family needs |J| = 2 |I|")
        if not (self.J.lo <= self.I.lo and self.I.hi <= self.J.hi):
            raise InvalidSpecError("curve family needs I inside J")


def make_curve_family(J: Interval, I: Interval, F_retained: IntervalSet,
                      y_center: float) -> CurveFamily:
    half = float(I.length)
    window = Interval(as_fraction(y_center - half), as_fraction(y_center + half))
    K = IntervalSet([window]).difference(F_retained.clip(window))
    return CurveFamily(J, I, K, y_center)


def sample_curve(fam: CurveFamily, t: float) -> np.ndarray:
    """Vertices of the three-segment curve at parameter t (4 x 2 array)."""
    if not 0 <= t <= 1:
        raise InvalidSpecError("curve parameter t must lie in [0, 1]")
    a, b = float(fam.J.lo), float(fam.J.hi)
    c, d = float(fam.I.lo), float(fam.I.hi)
    x1 = a + t * (b - a)
    x2 = c + t * (d - c)
    half = float(fam.I.length)
    yt = height_map(fam.K, fam.y_center - half, fam.y_center + half, t)
    y0 = fam.y_center
    return np.array([[x1, y0], [x1, yt], [x2, yt], [x2, y0]])


class CurveFamilyBuilder:
    """Factory for curve families over a fixed complement structure.

    Carries the density data of F at the working height: the exponent
    `alpha` and the certified constant `c_y` with len(K) >= c_y * |I|^alpha
    over the scales in play.
    """

    def __init__(self, F_retained: IntervalSet, y_center: float, alpha: float,
                 c_y: float):
        if c_y <= 0:
            raise InvalidSpecError("density constant must be positive")
        self.F_retained = F_retained
        self.y_center = y_center
        self.alpha = alpha
        self.c_y = c_y

    def __call__(self, J: Interval, I: Interval) -> CurveFamily:
        return make_curve_family(J, I, self.F_retained, self.y_center)

    @classmethod
    def with_certified_density(cls, F_retained: IntervalSet, y_center: float,
                               alpha: float, scales) -> "CurveFamilyBuilder":
        """Estimate c_y as the worst ratio len(B(y, r) \\ F) / r^alpha."""
        worst = math.inf
        for r in scales:
            r = float(r)
            window = Interval(as_fraction(y_center - r), as_fraction(y_center + r))
            K = IntervalSet([window]).difference(F_retained.clip(window))
            ratio = float(K.total_length) / r ** alpha
            worst = min(worst, ratio)
        if not worst > 0:
            raise CertificateError("density certificate failed: empty complement at some scale")
        return cls(F_retained, y_center, alpha, worst)


# ---------------------------------------------------------------------------
# the one-scale estimate
# ---------------------------------------------------------------------------

def one_scale_constant(J_len: float, K_len: float, p: float) -> float:
    """Constant in  |avg_I f - avg_J f| <= const * ||grad u||_{L^p(Q)}.

    Assembled from the three segment estimates: two vertical terms with the
    exact window Jacobians and the horizontal term through the height-map
    pushforward.  Dimensionally exact: scaling lengths by L multiplies the
    constant by L^(2/q - 1) resp. L^(1/q - alpha/p) pieces coherently.
    """
    if p <= 1:
        raise InvalidSpecError("the estimate needs p > 1")
    q = p / (p - 1.0)
    vertical = (1.0 + 2.0 ** (1.0 - 1.0 / q)) * J_len ** (2.0 / q - 1.0)
    horizontal = J_len ** (1.0 / q) * K_len ** (-1.0 / p)
    return vertical + horizontal


def average_difference_bound(u_field, fam: CurveFamily, p: float,
                             n_t: int = 4096) -> tuple[float, float]:
    """Both sides of the one-scale estimate for a concrete field and family.

    lhs: |avg_I u(., y) - avg_J u(., y)| by composite midpoint quadrature
    with n_t nodes per interval.  rhs: the assembled constant times the
    gradient norm over J x B(y, |I|).
    """
    y0 = fam.y_center
    lhs_parts = []
    for iv in (fam.I, fam.J):
        a, b = float(iv.lo), float(iv.hi)
        xs = a + (np.arange(n_t) + 0.5) * (b - a) / n_t
        lhs_parts.append(float(np.mean(u_field.trace(xs, y0))))
    lhs = abs(lhs_parts[0] - lhs_parts[1])

    half = float(fam.I.length)
    norm = u_field.grad_lp_norm(float(fam.J.lo), float(fam.J.hi),
                                y0 - half, y0 + half, p)
    const = one_scale_constant(float(fam.J.length), float(fam.K.total_length), p)
    return lhs, const * norm


# ---------------------------------------------------------------------------
# oscillation over a cover
# ---------------------------------------------------------------------------

@dataclass
class OscillationRow:
    J: Interval
    osc: float
    rhs: float
    grad_norm: float
    chained_constant: float

    @property
    def holds(self) -> bool:
        return self.osc <= self.rhs * (1.0 + 1e-9)


@dataclass
class OscillationResult:
    rows: list
    sum_osc: float
    aggregate_bound: float
    delta: float
    p: float

    @property
    def all_hold(self) -> bool:
        return all(r.holds for r in self.rows)


def chained_constant(J_len: float, p: float, alpha: float, c_y: float) -> float:
    """Scale-chain constant: the one-scale bounds summed over the dyadic chain.

    Each chain level k has |I_k| = 2^(1-k) |J| and uses the density bound
    len(K_k) >= c_y |I_{k+1}|^alpha.  Requires p > 2 so the vertical
    geometric sum converges, and 1/q > alpha/p so the horizontal one does
    (when alpha = (1-s)(p-1) the horizontal exponent is exactly s/q); the
    whole chain is then twice the sum, one run per extremal point.
    """
    if p <= 2:
        raise InvalidSpecError("the chained estimate needs p > 2")
    q = p / (p - 1.0)
    e_vert = 2.0 / q - 1.0
    e_horiz = 1.0 / q - alpha / p
    if e_horiz <= 0:
        raise InvalidSpecError("density exponent too large: the chain does not sum")
    vert_head = (1.0 + 2.0 ** (1.0 - 1.0 / q)) * J_len ** e_vert
    vert_sum = vert_head / (1.0 - 2.0 ** (-e_vert))
    horiz_head = 2.0 ** (alpha / p) * c_y ** (-1.0 / p) * J_len ** e_horiz
    horiz_sum = horiz_head / (1.0 - 2.0 ** (-e_horiz))
    return 2.0 * (vert_sum + horiz_sum)


def oscillation_check(u_field, cover: Cover, fam_builder: CurveFamilyBuilder,
                      p: float, trace_samples: int = 4096) -> OscillationResult:
    """Per-interval oscillation against the chained bound, plus aggregates.

    osc_i is the sampled sup - inf of the trace over J_i (dense grid plus
    the staircase breakpoints when the field exposes them); rhs_i is the
    chained constant times the gradient norm over Q_i.  The aggregate bound
    is the Hoelder combination of the per-square norms with the cover's
    Hausdorff sum and multiplicity 2.
    """
    y0 = cover.y_center
    rows = []
    for J, (b_lo, b_hi) in cover.squares:
        a, b = float(J.lo), float(J.hi)
        xs = np.linspace(a, b, trace_samples)
        extra = getattr(u_field, "trace_breakpoints", None)
        if extra is not None:
            pts = extra(a, b)
            if len(pts):
                xs = np.unique(np.concatenate([xs, pts]))
        vals = u_field.trace(xs, y0)
        osc = float(vals.max() - vals.min())
        norm = u_field.grad_lp_norm(a, b, b_lo, b_hi, p)
        const = chained_constant(float(J.length), p, fam_builder.alpha,
                                 fam_builder.c_y)
        rows.append(OscillationRow(J, osc, const * norm, norm, const))

    sum_osc = float(sum(r.osc for r in rows))
    if rows:
        half = max(float(J.length) for J, _ in cover.squares) / 2.0
        strip_norm = u_field.grad_lp_norm(-math.inf, math.inf, y0 - half, y0 + half, p)
        q = p / (p - 1.0)
        cmax = max(r.chained_constant for r in rows)
        aggregate = cover.hausdorff_sum ** (1.0 / q) * cmax * 2.0 ** (1.0 / p) * strip_norm
    else:
        aggregate = 0.0
    return OscillationResult(rows, sum_osc, aggregate, cover.delta, p)


class SmoothField:
    """Analytic 2-D field with a callable gradient; an oracle for the bounds.

    `fn(x, y)` and `grad_fn(x, y) -> (ux, uy)` must accept numpy arrays.
    Gradient norms use tensor Gauss-Legendre panels, plenty for smooth
    integrands; infinite x-bounds clip to the declared support.
    """

    def __init__(self, fn, grad_fn, x_support=(-2.0, 2.0)):
        self.fn = fn
        self.grad_fn = grad_fn
        self.x_support = x_support

    def trace(self, xs, y0: float):
        xs = np.asarray(xs, dtype=float)
        return self.fn(xs, np.full_like(xs, y0))

    def grad_lp_norm(self, x0: float, x1: float, y0: float, y1: float, p: float,
                     panels: int = 4, order: int = 8) -> float:
        x0 = self.x_support[0] if not math.isfinite(x0) else x0
        x1 = self.x_support[1] if not math.isfinite(x1) else x1
        gx, gw = np.polynomial.legendre.leggauss(order)
        xe = np.linspace(x0, x1, panels + 1)
        ye = np.linspace(y0, y1, panels + 1)
        total = 0.0
        for xa, xb in zip(xe[:-1], xe[1:]):
            xs = 0.5 * (xb + xa) + 0.5 * (xb - xa) * gx
            wx = 0.5 * (xb - xa) * gw
            for ya, yb in zip(ye[:-1], ye[1:]):
                ys = 0.5 * (yb + ya) + 0.5 * (yb - ya) * gx
                wy = 0.5 * (yb - ya) * gw
                X, Y = np.meshgrid(xs, ys, indexing="ij")
                ux, uy = self.grad_fn(X, Y)
                W = np.outer(wx, wy)
                total += float(np.sum(W * (ux * ux + uy * uy) ** (p / 2.0)))
        return total ** (1.0 / p)
