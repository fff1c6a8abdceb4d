"""Exact interval sets on the real line.

Endpoints are stored as `fractions.Fraction`, so set algebra (union,
intersection, relative complement, dilation) and total length are exact:
no tolerance is needed anywhere and additivity of length over disjoint
unions holds to the last bit.  Float mirrors of the endpoints are cached
for vectorised numpy queries (membership, nearest distance).

An `IntervalSet` is a sorted tuple of pairwise disjoint, non-touching
intervals.  Degenerate (single point) intervals are allowed; openness or
closedness is a property of the operations that interpret the set, not of
the storage.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidSpecError

Scalar = Union[int, float, str, Fraction]


def as_fraction(x: Scalar) -> Fraction:
    """Convert to an exact Fraction.

    Floats convert exactly (binary value, no decimal re-rounding); strings
    accept both decimal and ``p/q`` literals.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Rational):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True, order=True)
class Interval:
    """A bounded interval [lo, hi] with exact rational endpoints.

    ``lo == hi`` is permitted (a point); ``lo > hi`` is rejected.
    """

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if self.lo > self.hi:
            raise InvalidSpecError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x: Scalar) -> bool:
        x = as_fraction(x)
        return self.lo <= x <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def as_floats(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"


def _normalize(parts: Iterable[tuple[Fraction, Fraction]]) -> tuple[Interval, ...]:
    """Sort and merge overlapping or touching intervals."""
    items = sorted((as_fraction(a), as_fraction(b)) for a, b in parts)
    merged: list[tuple[Fraction, Fraction]] = []
    for lo, hi in items:
        if lo > hi:
            raise InvalidSpecError(f"interval endpoints out of order: {lo} > {hi}")
        if merged and lo <= merged[-1][1]:
            last_lo, last_hi = merged[-1]
            merged[-1] = (last_lo, max(last_hi, hi))
        else:
            merged.append((lo, hi))
    return tuple(Interval(lo, hi) for lo, hi in merged)


class IntervalSet:
    """A finite union of pairwise disjoint intervals with exact endpoints."""

    __slots__ = ("parts", "_los_f", "_his_f", "_los_x")

    def __init__(self, parts: Iterable[Interval | tuple] = ()):
        pairs = []
        for p in parts:
            if isinstance(p, Interval):
                pairs.append((p.lo, p.hi))
            else:
                a, b = p
                pairs.append((as_fraction(a), as_fraction(b)))
        self.parts: tuple[Interval, ...] = _normalize(pairs)
        self._los_f = None
        self._his_f = None
        self._los_x = None

    # -- constructors -------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "IntervalSet":
        return cls(pairs)

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def single(cls, lo: Scalar, hi: Scalar) -> "IntervalSet":
        return cls([(lo, hi)])

    @classmethod
    def point(cls, x: Scalar) -> "IntervalSet":
        return cls([(x, x)])

    # -- basic queries -------------------------------------------------

    def __len__(self) -> int:
        return len(self.parts)

    def __bool__(self) -> bool:
        return bool(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self):
        return hash(self.parts)

    def __repr__(self):
        inner = ", ".join(f"[{p.lo}, {p.hi}]" for p in self.parts)
        return f"IntervalSet({inner})"

    @property
    def total_length(self) -> Fraction:
        return sum((p.length for p in self.parts), Fraction(0))

    def bounds(self) -> Interval | None:
        if not self.parts:
            return None
        return Interval(self.parts[0].lo, self.parts[-1].hi)

    @property
    def diameter(self) -> Fraction:
        b = self.bounds()
        return b.length if b is not None else Fraction(0)

    def _float_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._los_f is None:
            self._los_f = np.array([float(p.lo) for p in self.parts])
            self._his_f = np.array([float(p.hi) for p in self.parts])
        return self._los_f, self._his_f

    def _exact_los(self) -> list:
        if self._los_x is None:
            self._los_x = [p.lo for p in self.parts]
        return self._los_x

    def contains(self, x: Scalar) -> bool:
        """Exact membership in the closed set."""
        x = as_fraction(x)
        i = bisect.bisect_right(self._exact_los(), x) - 1
        return i >= 0 and x <= self.parts[i].hi

    def contains_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised float membership (closed semantics)."""
        los, his = self._float_arrays()
        xs = np.asarray(xs, dtype=float)
        if len(self.parts) == 0:
            return np.zeros(xs.shape, dtype=bool)
        idx = np.searchsorted(los, xs, side="right") - 1
        valid = idx >= 0
        idx = np.clip(idx, 0, len(los) - 1)
        return valid & (xs <= his[idx])

    def distance(self, x: Scalar) -> Fraction:
        """Exact distance from x to the set (0 inside)."""
        if not self.parts:
            raise InvalidSpecError("distance to an empty set is undefined")
        x = as_fraction(x)
        i = bisect.bisect_right(self._exact_los(), x) - 1
        best = None
        if i >= 0:
            if x <= self.parts[i].hi:
                return Fraction(0)
            best = x - self.parts[i].hi
        if i + 1 < len(self.parts):
            d = self.parts[i + 1].lo - x
            best = d if best is None else min(best, d)
        return best

    def distance_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised float distance to the set."""
        if not self.parts:
            raise InvalidSpecError("distance to an empty set is undefined")
        los, his = self._float_arrays()
        xs = np.asarray(xs, dtype=float)
        idx = np.searchsorted(los, xs, side="right") - 1
        left_hi = his[np.clip(idx, 0, len(his) - 1)]
        d_left = np.where(idx >= 0, xs - left_hi, np.inf)
        j = np.clip(idx + 1, 0, len(los) - 1)
        d_right = np.where(idx + 1 < len(los), los[j] - xs, np.inf)
        d = np.minimum(np.maximum(d_left, 0.0), np.maximum(d_right, 0.0))
        inside = (idx >= 0) & (xs <= left_hi)
        return np.where(inside, 0.0, d)

    # -- set algebra (exact) --------------------------------------------

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(list(self.parts) + list(other.parts))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        a, b = self.parts, other.parts
        while i < len(a) and j < len(b):
            lo = max(a[i].lo, b[j].lo)
            hi = min(a[i].hi, b[j].hi)
            if lo <= hi:
                out.append((lo, hi))
            if a[i].hi < b[j].hi:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        """Relative complement, treating other's intervals as open cuts.

        Subtracting open intervals from closed ones keeps the result closed:
        cut endpoints stay in the difference, as degenerate parts when they
        end up isolated.
        """
        out = []
        cut = [c for c in other.parts if c.lo < c.hi]
        for part in self.parts:
            lo = part.lo
            consumed = False
            for c in cut:
                if c.hi <= lo:
                    continue
                if c.lo > part.hi:
                    break
                if c.lo >= lo:
                    out.append((lo, min(c.lo, part.hi)))
                lo = max(lo, c.hi)
                if lo > part.hi:
                    consumed = True
                    break
            if not consumed and lo <= part.hi:
                out.append((lo, part.hi))
        return IntervalSet(out)

    def complement_within(self, window: Interval) -> "IntervalSet":
        """Components of window minus self, as an IntervalSet.

        The components are open intervals of the complement; their closures
        are recorded.  Degenerate components are dropped.
        """
        out = []
        lo = window.lo
        for p in self.parts:
            if p.hi <= window.lo:
                continue
            if p.lo >= window.hi:
                break
            if p.lo > lo:
                out.append((lo, min(p.lo, window.hi)))
            lo = max(lo, p.hi)
            if lo >= window.hi:
                break
        if lo < window.hi:
            out.append((lo, window.hi))
        return IntervalSet([(a, b) for a, b in out if a < b])

    def dilate(self, r: Scalar) -> "IntervalSet":
        """Minkowski sum with the closed ball of radius r (r >= 0)."""
        r = as_fraction(r)
        if r < 0:
            raise InvalidSpecError("dilation radius must be non-negative")
        return IntervalSet([(p.lo - r, p.hi + r) for p in self.parts])

    def clip(self, window: Interval) -> "IntervalSet":
        return self.intersection(IntervalSet([window]))

    def translated(self, dx: Scalar) -> "IntervalSet":
        dx = as_fraction(dx)
        return IntervalSet([(p.lo + dx, p.hi + dx) for p in self.parts])

    def scaled(self, factor: Scalar, origin: Scalar = 0) -> "IntervalSet":
        factor = as_fraction(factor)
        origin = as_fraction(origin)
        if factor <= 0:
            raise InvalidSpecError("scale factor must be positive")
        return IntervalSet(
            [(origin + factor * (p.lo - origin), origin + factor * (p.hi - origin)) for p in self.parts]
        )

    # -- counting ---------------------------------------------------------

    def box_count(self, eps: Scalar) -> int:
        """Number of grid cells [k*eps, (k+1)*eps) meeting the set (exact)."""
        eps = as_fraction(eps)
        if eps <= 0:
            raise InvalidSpecError("box size must be positive")
        count = 0
        prev_hi_idx = None
        for p in self.parts:
            lo_idx = p.lo // eps
            hi_idx = p.hi // eps
            lo_eff = lo_idx
            if prev_hi_idx is not None and lo_idx <= prev_hi_idx:
                lo_eff = prev_hi_idx + 1
            if hi_idx >= lo_eff:
                count += int(hi_idx - lo_eff) + 1
                prev_hi_idx = hi_idx
        return count

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        """One `lo hi` pair per line, exact rational literals."""
        return "\n".join(f"{p.lo} {p.hi}" for p in self.parts) + ("\n" if self.parts else "")

    @classmethod
    def from_text(cls, text: str) -> "IntervalSet":
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise InvalidSpecError(f"line {lineno}: expected `lo hi`, got {raw!r}")
            try:
                pairs.append((as_fraction(fields[0]), as_fraction(fields[1])))
            except (ValueError, ZeroDivisionError) as exc:
                raise InvalidSpecError(f"line {lineno}: {exc}") from exc
        return cls(pairs)
