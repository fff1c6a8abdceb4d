"""The non-removability witness and its Sobolev-energy quadrature.

The witness is u(x, y) = v(x, dist(y, F)) where v is the running-average
extension of the staircase CDF f:

    v(x, y) = (1 / 2y) * integral of f over (x - y, x + y),

with closed-form gradient

    grad v = (f(x+y) - f(x-y), f(x+y) + f(x-y) - 2 v(x, y)) / (2y).

Strip energies  integral_0^r integral_R |grad v|^p dx dy  are computed by a
mesh geometrically graded in y toward 0, where the integrand concentrates.
Two structural facts keep this cheap and exact-in-depth:

* the depth-n staircase splits into two rescaled depth-(n-1) copies, so for
  y below half the first gap the x-integral of |grad v|^p at depth n equals
  (2 rho)^(1-p) times the depth-(n-1) integral at y / rho.  Iterating folds
  any small-y band into a fixed moderate band [y_split, y_split / rho],
  evaluated once per effective depth and reused;
* within a complement gap of F, dist(y, F) folds the two half-gaps onto
  [0, |gap|/2], so a gap energy is exactly twice a strip energy.

Evaluation depth is capped (`eval_depth_cap`): staircase detail below that
level shifts band values by O(2**-cap), which the refinement-based error
estimate absorbs.  The non-integrable regime (s-1)(p-1) <= -1 is flagged,
never summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidSpecError
from .geometry import FatCantorSpec, ParamSet, build_fat_cantor
from .intervals import Interval, as_fraction
from .measure import StaircaseMeasure, frostman_constant

_T_EVAL_FLOOR = 1e-9  # below this height the average window cancels in floats


@dataclass(frozen=True)
class QuadratureSpec:
    """Mesh controls for the graded strip/rectangle quadrature."""

    grade_ratio: float = 0.5        # geometric panel ratio toward the singular edge
    gauss_order: int = 6            # Gauss-Legendre nodes per panel
    points_per_scale: int = 6       # x panels per height unit y
    max_x_panels: int = 4096        # cap on x panels per height
    eval_depth_cap: int = 14        # staircase table depth used in quadrature
    refine: bool = True             # second pass at doubled resolution for errors

    def __post_init__(self):
        if not 0 < self.grade_ratio < 1:
            raise InvalidSpecError("grade_ratio must lie in (0, 1)")
        if self.gauss_order < 2 or self.points_per_scale < 1:
            raise InvalidSpecError("quadrature orders must be positive")


@dataclass(frozen=True)
class StripResult:
    value: float
    error: float
    divergent: bool = False


@dataclass(frozen=True)
class GapEnergy:
    gap_length: float
    numeric: float
    bound: float
    error: float
    divergent: bool = False


@dataclass(frozen=True)
class GapRow:
    generation: int
    gap_id: str
    gap_length: float
    numeric_energy: float
    analytic_bound: float

    @property
    def ratio(self) -> float:
        return self.numeric_energy / self.analytic_bound if self.analytic_bound else math.nan


@dataclass
class EnergyReport:
    params: ParamSet
    rows: list
    generation_sums: list      # (generation, sum of gap energies)
    partial_sums: list         # cumulative, non-decreasing
    exponent_fit: float
    verdict: str               # convergent | divergent | inconclusive
    ratio_estimate: float
    margin: float
    divergent_integrand: bool = False


def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_edges(lo: float, hi: float, grade: float, refine: int = 1) -> np.ndarray:
    """Log-uniform panel edges over [lo, hi], density set by `grade`."""
    n = max(1, math.ceil(math.log(hi / lo) / math.log(1.0 / grade))) * refine
    return np.geomspace(lo, hi, n + 1)


class _Grid:
    """Flattened quadrature nodes for one y-band: |grad v|^2 and weights."""

    __slots__ = ("sq", "w", "_powers")

    def __init__(self, sq: np.ndarray, w: np.ndarray):
        self.sq = sq
        self.w = w
        self._powers: dict[float, float] = {}

    def energy(self, p: float) -> float:
        val = self._powers.get(p)
        if val is None:
            val = float(np.sum(self.w * self.sq ** (p / 2.0)))
            self._powers[p] = val
        return val


class StripIntegrator:
    """Multi-exponent strip energies for one staircase measure.

    Works in coordinates normalised to base [0, 1]; callers rescale.
    Band grids are memoised per effective depth, so a parameter scan over
    many exponents or gap generations reuses every node evaluation.
    """

    def __init__(self, measure: StaircaseMeasure, quad: QuadratureSpec | None = None):
        self.quad = quad or QuadratureSpec()
        self.measure = measure.normalized()
        self.depth = measure.depth
        self.rho = float(measure.spec.ratio)
        self.s = measure.dimension
        self.y_split = (1.0 - 2.0 * self.rho) / 2.0
        self._grids: dict[tuple, tuple[_Grid, _Grid]] = {}

    # -- node construction -------------------------------------------------

    def _band_grid(self, y_lo: float, y_hi: float, table_depth: int, refine: int) -> _Grid:
        quad = self.quad
        tab = self.measure.table(table_depth)
        gx, gw = _leggauss(quad.gauss_order)
        y_edges = _panel_edges(y_lo, y_hi, quad.grade_ratio, refine)
        sq_parts, w_parts = [], []
        pps = quad.points_per_scale * refine
        for ya, yb in zip(y_edges[:-1], y_edges[1:]):
            ys = 0.5 * (yb + ya) + 0.5 * (yb - ya) * gx
            wys = 0.5 * (yb - ya) * gw
            for y, wy in zip(ys, wys):
                xs, wxs = _x_nodes(tab, y, None, None, y / pps, quad.max_x_panels, gx, gw)
                if xs is None:
                    continue
                sq_parts.append(self._grad_sq(tab, xs, y))
                w_parts.append(wxs * wy)
        return _Grid(np.concatenate(sq_parts), np.concatenate(w_parts))

    @staticmethod
    def _grad_sq(tab, xs: np.ndarray, y: float) -> np.ndarray:
        y = max(y, _T_EVAL_FLOOR)
        fp = tab.f(xs + y)
        fm = tab.f(xs - y)
        v = (tab.F(xs + y) - tab.F(xs - y)) / (2.0 * y)
        dvx = (fp - fm) / (2.0 * y)
        dvy = (fp + fm - 2.0 * v) / (2.0 * y)
        return dvx * dvx + dvy * dvy

    def _grids_for(self, y_lo: float, y_hi: float, table_depth: int) -> tuple[_Grid, _Grid]:
        key = (round(y_lo, 15), round(y_hi, 15), table_depth)
        got = self._grids.get(key)
        if got is None:
            coarse = self._band_grid(y_lo, y_hi, table_depth, 1)
            fine = self._band_grid(y_lo, y_hi, table_depth, 2) if self.quad.refine else coarse
            got = (coarse, fine)
            self._grids[key] = got
        return got

    # -- strip energies ------------------------------------------------------

    def kappa(self, p: float) -> float:
        """Profile rescaling: I_d(y) = kappa * I_{d-1}(y / rho) below y_split."""
        return (2.0 * self.rho) ** (1.0 - p)

    def gamma(self, p: float) -> float:
        return 1.0 + (self.s - 1.0) * (p - 1.0)

    def strip_multi(self, r: float, ps: Sequence[float]) -> dict[float, StripResult]:
        if r <= 0:
            raise InvalidSpecError("strip height must be positive")
        ps = list(ps)
        out = {p: 0.0 for p in ps}
        err = {p: 0.0 for p in ps}
        live = {p for p in ps if self.gamma(p) > 0}
        factor = {p: 1.0 for p in ps}
        cap = self.quad.eval_depth_cap
        d = self.depth
        rr = float(r)
        while True:
            if rr > self.y_split:
                coarse, fine = self._grids_for(self.y_split, rr, min(d, cap))
                for p in live:
                    vf, vc = fine.energy(p), coarse.energy(p)
                    out[p] += factor[p] * vf
                    err[p] += factor[p] * abs(vf - vc)
                rr = self.y_split
            if d == 0:
                coarse, fine = self._grids_for(rr * 1e-4, rr, 0)
                for p in live:
                    vf, vc = fine.energy(p), coarse.energy(p)
                    # the integrand is bounded on [0, rr*1e-4]; closing sliver
                    sliver = fine.energy(p) / (rr * (1 - 1e-4)) * rr * 1e-4
                    out[p] += factor[p] * (vf + sliver)
                    err[p] += factor[p] * (abs(vf - vc) + sliver)
                break
            for p in live:
                factor[p] *= self.kappa(p) * self.rho
            d -= 1
            rr = rr / self.rho
        results = {}
        for p in ps:
            if p in live:
                results[p] = StripResult(out[p], err[p], False)
            else:
                results[p] = StripResult(math.nan, math.nan, True)
        return results


class WitnessField:
    """Witness u(x, y) = v(x, dist(y, F)) for a product set C x F."""

    def __init__(self, measure: StaircaseMeasure, fat: FatCantorSpec,
                 params: ParamSet, quad: QuadratureSpec | None = None):
        self.measure = measure
        self.fat = fat
        self.params = params
        self.quad = quad or QuadratureSpec()
        self.F_retained, self.F_gaps = build_fat_cantor(fat)
        self._integrator = StripIntegrator(measure, self.quad)
        self._base_scale = float(measure.spec.base.length)
        self._c_frostman: float | None = None

    # -- pointwise evaluation --------------------------------------------------

    def eval_v(self, x, y):
        """Average of f over (x - y, x + y); requires y > 0."""
        ya = np.asarray(y, dtype=float)
        if np.any(ya <= 0):
            raise InvalidSpecError("v(x, y) requires y > 0")
        tab = self.measure.table()
        out = (tab.F(np.asarray(x, float) + ya) - tab.F(np.asarray(x, float) - ya)) / (2.0 * ya)
        return float(out) if np.isscalar(x) and np.isscalar(y) else out

    def grad_v(self, x, y):
        """Closed-form gradient of the extension; requires y > 0."""
        ya = np.asarray(y, dtype=float)
        if np.any(ya <= 0):
            raise InvalidSpecError("grad v(x, y) requires y > 0")
        xa = np.asarray(x, dtype=float)
        tab = self.measure.table()
        fp = tab.f(xa + ya)
        fm = tab.f(xa - ya)
        v = (tab.F(xa + ya) - tab.F(xa - ya)) / (2.0 * ya)
        dvx = (fp - fm) / (2.0 * ya)
        dvy = (fp + fm - 2.0 * v) / (2.0 * ya)
        if np.isscalar(x) and np.isscalar(y):
            return float(dvx), float(dvy)
        return dvx, dvy

    def eval_u(self, x, y):
        """u = v(x, dist(y, F)); on F-lines u(x, y) = f(x)."""
        xa = np.asarray(x, dtype=float)
        ya = np.asarray(y, dtype=float)
        d = self.F_retained.distance_many(np.atleast_1d(ya))
        d = d.reshape(ya.shape) if ya.shape else d[0]
        tab = self.measure.table()
        da = np.asarray(d, dtype=float)
        safe = np.maximum(da, _T_EVAL_FLOOR)
        v = (tab.F(xa + safe) - tab.F(xa - safe)) / (2.0 * safe)
        out = np.where(da == 0.0, tab.f(xa), v)
        return float(out) if np.isscalar(x) and np.isscalar(y) else out

    def trace(self, xs, y0: float):
        """Values of u along the horizontal line at height y0."""
        return self.eval_u(xs, y0)

    def trace_breakpoints(self, a: float, b: float) -> np.ndarray:
        """Staircase breakpoints inside [a, b] (dense sup/inf sampling aid)."""
        tab = self.measure.table()
        i0, i1 = np.searchsorted(tab.breaks, [a, b])
        return tab.breaks[i0:i1]

    # -- energies ----------------------------------------------------------------

    def frostman(self) -> float:
        if self._c_frostman is None:
            self._c_frostman = frostman_constant(self.measure)
        return self._c_frostman

    def strip_energy(self, r: float, p: float | None = None) -> StripResult:
        """Energy of grad v over (-R, R) x (0, r) at exponent p."""
        p = self.params.p if p is None else p
        return self.strip_energy_multi(r, [p])[p]

    def strip_energy_multi(self, r: float, ps: Sequence[float]) -> dict[float, StripResult]:
        B = self._base_scale
        raw = self._integrator.strip_multi(r / B, ps)
        out = {}
        for p, res in raw.items():
            scale = B ** (2.0 - p)
            if res.divergent:
                out[p] = res
            else:
                out[p] = StripResult(res.value * scale, res.error * scale, False)
        return out

    def gap_bound(self, gap_length: float, p: float | None = None) -> float:
        """Closed-form per-gap bound c(p, s) * c_F * |gap|^(1 - (1-s)(p-1))."""
        p = self.params.p if p is None else p
        s = self.measure.dimension
        c_ps = 2.0 ** (1.0 + p / 2.0 - s * (p - 1.0))
        beta = 1.0 - (1.0 - s) * (p - 1.0)
        return c_ps * self.frostman() * gap_length ** beta

    def gap_energy(self, gap: Interval, p: float | None = None) -> GapEnergy:
        """Witness energy over one complement gap of F (all x), with bound.

        Inside the gap dist(y, F) folds symmetrically, so the energy is
        exactly twice the strip energy at half the gap length.
        """
        p = self.params.p if p is None else p
        g = float(gap.length)
        if g <= 0:
            raise InvalidSpecError("gap must have positive length")
        res = self.strip_energy(g / 2.0, p)
        if res.divergent:
            return GapEnergy(g, math.nan, math.nan, math.nan, True)
        return GapEnergy(g, 2.0 * res.value, self.gap_bound(g, p), 2.0 * res.error, False)

    def total_energy(self, max_generation: int, margin: float = 0.04) -> EnergyReport:
        """Per-generation gap energies, scaling fit, and convergence verdict.

        The verdict compares the geometric-mean ratio of consecutive
        generation sums (last three transitions) against 1 -+ margin.
        """
        return _total_energy(self, self.params.p, max_generation, margin)

    def total_energy_multi(self, ps: Sequence[float], max_generation: int,
                           margin: float = 0.04) -> dict[float, EnergyReport]:
        return {p: _total_energy(self, p, max_generation, margin) for p in ps}

    # -- rectangle energy (oscillation support) ------------------------------------

    def grad_lp_norm(self, x0: float, x1: float, y0: float, y1: float, p: float) -> float:
        return self.rect_energy(x0, x1, y0, y1, p) ** (1.0 / p)

    def rect_energy(self, x0: float, x1: float, y0: float, y1: float, p: float) -> float:
        """Integral of |grad u|^p over [x0, x1] x [y0, y1].

        Splits the y-range along the complement structure of F: on F the
        a.e. gradient is (f'(x), 0) and the x-integral of |f'|^p is exact;
        off F the distance to F is affine with unit slope, so each monotone
        piece maps to an integral of the strip profile in the height
        variable, handled with panels graded toward height 0.
        """
        if self.measure.depth > 16:
            raise InvalidSpecError("rectangle energies need a fully tabulated staircase (depth <= 16)")
        if y1 <= y0:
            raise InvalidSpecError("rectangle must have positive extent")
        tab = self.measure.table()
        if not math.isfinite(x0) or not math.isfinite(x1):
            # grad u vanishes where the averaging window misses every cylinder
            dmax = float(np.max(self.F_retained.distance_many(np.array([y0, y1]))))
            gaps_mid = [float(g.midpoint) for g in self.F_gaps.parts
                        if float(g.lo) < y1 and float(g.hi) > y0]
            if gaps_mid:
                dmax = max(dmax, float(np.max(self.F_retained.distance_many(np.array(gaps_mid)))))
            x0 = tab.lo - dmax - 1e-12 if not math.isfinite(x0) else x0
            x1 = tab.hi + dmax + 1e-12 if not math.isfinite(x1) else x1
        if x1 <= x0:
            raise InvalidSpecError("rectangle must have positive extent")
        window = Interval(as_fraction(y0), as_fraction(y1))
        on_f = self.F_retained.clip(window).total_length
        total = float(on_f) * self._fprime_p_integral(tab, x0, x1, p)

        # Gaps of the same generation fold to identical distance ranges, so
        # profile integrals are memoised per (t0, t1) within this rectangle.
        cache: dict[tuple, float] = {}
        pieces = self.F_retained.complement_within(window)
        for piece in pieces.parts:
            plo, phi = float(piece.lo), float(piece.hi)
            d_lo = float(self.F_retained.distance_many(np.array([plo]))[0])
            d_hi = float(self.F_retained.distance_many(np.array([phi]))[0])
            d_mid = float(self.F_retained.distance_many(np.array([(plo + phi) / 2]))[0])
            if d_mid > max(d_lo, d_hi):
                # piece straddles a gap midpoint: two monotone halves
                halves = [(d_lo, d_mid), (d_hi, d_mid)]
            else:
                halves = [(min(d_lo, d_hi), max(d_lo, d_hi))]
            for t0, t1 in halves:
                if t1 > t0:
                    key = (round(t0, 14), round(t1, 14))
                    val = cache.get(key)
                    if val is None:
                        val = self._profile_integral(tab, x0, x1, t0, t1, p)
                        cache[key] = val
                    total += val
        return total

    @staticmethod
    def _fprime_p_integral(tab, x0: float, x1: float, p: float) -> float:
        """Exact integral of |f'|^p over [x0, x1] (f' piecewise constant)."""
        edges = np.clip(tab.breaks, x0, x1)
        widths = np.diff(edges)
        return float(np.sum(widths * tab.slopes[:-1] ** p))

    def _profile_integral(self, tab, x0: float, x1: float, t0: float, t1: float,
                          p: float) -> float:
        """Integral over t in [t0, t1] of the x-windowed strip profile."""
        quad = self.quad
        gx, gw = _leggauss(quad.gauss_order)
        t_flat = max(tab.min_cylinder / 4.0, _T_EVAL_FLOOR)
        edges = []
        if t1 > t_flat:
            lo_geo = max(t0, t_flat)
            edges.extend(_panel_edges(lo_geo, t1, quad.grade_ratio))
            if t0 < lo_geo:
                edges = list(np.linspace(t0, lo_geo, 3)) + list(edges)
        else:
            edges = list(np.linspace(t0, t1, 4))
        edges = np.unique(np.asarray(edges))
        total = 0.0
        for ta, tb in zip(edges[:-1], edges[1:]):
            ts = 0.5 * (tb + ta) + 0.5 * (tb - ta) * gx
            wts = 0.5 * (tb - ta) * gw
            for t, wt in zip(ts, wts):
                total += wt * self._x_window_profile(tab, x0, x1, max(t, _T_EVAL_FLOOR), p)
        return total

    def _x_window_profile(self, tab, x0: float, x1: float, t: float, p: float) -> float:
        quad = self.quad
        gx, gw = _leggauss(quad.gauss_order)
        xs, wxs = _x_nodes(tab, t, x0, x1, t / quad.points_per_scale, quad.max_x_panels, gx, gw)
        if xs is None:
            return 0.0
        sq = StripIntegrator._grad_sq(tab, xs, t)
        return float(np.sum(wxs * sq ** (p / 2.0)))


def _support(tab, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Merged x-intervals where grad v(., y) can be non-zero."""
    a = tab.breaks[::2] - y
    b = tab.breaks[1::2] + y
    if len(a) == 1:
        return a, b
    sep = np.nonzero(a[1:] > b[:-1])[0]
    starts = np.concatenate(([0], sep + 1))
    ends = np.concatenate((sep, [len(a) - 1]))
    return a[starts], b[ends]


def _x_nodes(tab, y: float, x0, x1, h_target: float, max_panels: int, gx, gw):
    """Gauss nodes over the support of grad v(., y), optionally clipped."""
    lo, hi = _support(tab, y)
    if x0 is not None:
        lo = np.clip(lo, x0, x1)
        hi = np.clip(hi, x0, x1)
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
    if len(lo) == 0:
        return None, None
    widths = hi - lo
    h = max(h_target, widths.sum() / max_panels)
    ns = np.maximum(1, np.ceil(widths / h)).astype(int)
    starts = np.concatenate([np.linspace(a, b, n + 1)[:-1] for a, b, n in zip(lo, hi, ns)])
    stops = np.concatenate([np.linspace(a, b, n + 1)[1:] for a, b, n in zip(lo, hi, ns)])
    xm = 0.5 * (stops + starts)
    xh = 0.5 * (stops - starts)
    xs = (xm[:, None] + xh[:, None] * gx[None, :]).ravel()
    wxs = (xh[:, None] * gw[None, :]).ravel()
    return xs, wxs


def _total_energy(w: WitnessField, p: float, max_generation: int, margin: float) -> EnergyReport:
    fat = w.fat
    if max_generation < 1:
        raise InvalidSpecError("need at least one generation")
    if max_generation > fat.depth:
        raise InvalidSpecError(
            f"fat spec provides {fat.depth} generations, requested {max_generation}"
        )
    if all(g == 0 for g in fat.gap_lengths[:max_generation]):
        raise InvalidSpecError("gap-free schedule: F is not totally disconnected")

    params = ParamSet(w.params.s, p, w.params.radius_R)
    rows: list[GapRow] = []
    gen_sums = []
    partial = []
    divergent_integrand = False
    running = 0.0
    for k in range(1, max_generation + 1):
        g = float(fat.gap_lengths[k - 1])
        count = 2 ** (k - 1)
        if g == 0:
            gen_sums.append((k, 0.0))
            partial.append(running)
            continue
        ge = w.gap_energy(Interval(0, as_fraction(fat.gap_lengths[k - 1])), p)
        if ge.divergent:
            divergent_integrand = True
            gen_sums.append((k, math.inf))
            partial.append(math.inf)
            for i in range(count):
                rows.append(GapRow(k, f"g{k}.{i}", g, math.nan, math.nan))
            continue
        for i in range(count):
            rows.append(GapRow(k, f"g{k}.{i}", g, ge.numeric, ge.bound))
        gen_total = count * ge.numeric
        running += gen_total
        gen_sums.append((k, gen_total))
        partial.append(running)

    if divergent_integrand:
        verdict, ratio_est = "divergent", math.inf
    else:
        positive = [(k, v) for k, v in gen_sums if v > 0]
        if len(positive) < 4:
            verdict, ratio_est = "inconclusive", math.nan
        else:
            tail = positive[-4:]
            logs = [math.log(v) for _, v in tail]
            ratio_est = math.exp((logs[-1] - logs[0]) / (len(tail) - 1))
            if ratio_est < 1.0 - margin:
                verdict = "convergent"
            elif ratio_est > 1.0 + margin:
                verdict = "divergent"
            else:
                verdict = "inconclusive"

    # power-law fit of per-gap energy against gap length, generations >= 2
    fit_pts = [(math.log(r.gap_length), math.log(r.numeric_energy))
               for r in rows if r.generation >= 2 and r.gap_id.endswith(".0")
               and r.numeric_energy > 0 and not math.isnan(r.numeric_energy)]
    if len(fit_pts) >= 2:
        xs, ys = zip(*fit_pts)
        slope, _ = np.polyfit(xs, ys, 1)
        exponent_fit = float(slope)
    else:
        exponent_fit = math.nan

    return EnergyReport(params, rows, gen_sums, partial, exponent_fit, verdict,
                        ratio_est, margin, divergent_integrand)
