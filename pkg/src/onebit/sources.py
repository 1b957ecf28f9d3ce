"""Zero-mean scalar sources.

An :class:`AnalyticSource` answers the exact moment and tail queries that the
threshold sweeps need; a :class:`SampleSet` is the empirical stand-in, kept
sorted so that sweeps over it run on prefix sums.

All tail queries use the cell convention ``(-inf, w)`` / ``[w, inf)``: an atom
sitting exactly on ``w`` belongs to the upper cell.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

KINDS = ("uniform", "gaussian", "laplace", "triangular", "laplace_sum", "discrete", "tabulated")

_MOMENT_TOL = 1e-12
_SQRT2 = math.sqrt(2.0)
# below this relative gap the two-scale Laplace mixture is evaluated via its b -> b' limit
_LAPLACE_SUM_MERGE = 1e-5
_LAPLACE_SUM_NEGLIGIBLE = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AnalyticSource:
    """A zero-mean real distribution with closed-form (or tabulated) queries.

    Use the module-level constructors (:func:`uniform`, :func:`gaussian`,
    :func:`laplace`, :func:`triangular`, :func:`laplace_sum`,
    :func:`discrete`, :func:`tabulated`) rather than instantiating directly.

    ``params`` holds the scale parameters of the closed-form kinds.  Discrete
    sources keep sorted atom ``locs`` with ``masses``; tabulated ones keep a
    uniform ``grid`` with a piecewise-linear ``pdf``.
    """

    kind: str
    params: tuple[float, ...] = ()
    locs: np.ndarray | None = field(default=None, repr=False)
    masses: np.ndarray | None = field(default=None, repr=False)
    grid: np.ndarray | None = field(default=None, repr=False)
    pdf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind in ("uniform", "gaussian", "laplace", "triangular"):
            if len(self.params) != 1 or not self.params[0] > 0:
                raise ValueError(f"{self.kind} needs one positive scale, got {self.params}")
        if self.kind == "laplace_sum":
            b1, b2 = self.params
            if not (b1 >= b2 > 0):
                raise ValueError("laplace_sum needs scales b1 >= b2 > 0")

    def __repr__(self):
        if self.kind == "discrete":
            atoms = ", ".join(f"({x:g}, {m:g})" for x, m in zip(self.locs, self.masses))
            return f"AnalyticSource(discrete: {atoms})"
        if self.kind == "tabulated":
            return f"AnalyticSource(tabulated: {len(self.grid)} points on [{self.grid[0]:g}, {self.grid[-1]:g}])"
        return f"AnalyticSource({self.kind}{self.params})"

    # cumulative sums from the top, used by the discrete and tabulated tails
    @cached_property
    def _upper_mass(self) -> np.ndarray:
        if self.kind == "discrete":
            return np.append(np.cumsum(self.masses[::-1])[::-1], 0.0)
        seg = 0.5 * np.diff(self.grid) * (self.pdf[1:] + self.pdf[:-1])
        return np.append(np.cumsum(seg[::-1])[::-1], 0.0)

    @cached_property
    def _upper_moment(self) -> np.ndarray:
        if self.kind == "discrete":
            return np.append(np.cumsum((self.masses * self.locs)[::-1])[::-1], 0.0)
        xp = self.grid * self.pdf
        seg = 0.5 * np.diff(self.grid) * (xp[1:] + xp[:-1])
        return np.append(np.cumsum(seg[::-1])[::-1], 0.0)


# ---------------------------------------------------------------- constructors


def uniform(a: float) -> AnalyticSource:
    """Uniform on ``[-a, a]``."""
    return AnalyticSource("uniform", (float(a),))


def gaussian(sigma: float) -> AnalyticSource:
    return AnalyticSource("gaussian", (float(sigma),))


def laplace(b: float) -> AnalyticSource:
    """Laplace with scale ``b`` (variance ``2 b**2``)."""
    return AnalyticSource("laplace", (float(b),))


def triangular(a: float) -> AnalyticSource:
    """Sum of two independent uniforms on ``[-a/2, a/2]``: density ``(a - |x|) / a**2``."""
    return AnalyticSource("triangular", (float(a),))


def laplace_sum(b1: float, b2: float) -> AnalyticSource:
    """Sum of independent Laplace variables with scales ``b1`` and ``b2``.

    This is the law of ``q1*S1 + q2*S2`` for i.i.d. Laplace ``S1, S2`` and it is
    what the two-dimensional Laplace example projects onto.  A zero (or
    negligible) scale collapses to a plain :func:`laplace`.
    """
    b1, b2 = sorted((abs(float(b1)), abs(float(b2))), reverse=True)
    if b1 == 0.0:
        raise ValueError("laplace_sum needs at least one nonzero scale")
    if b2 <= _LAPLACE_SUM_NEGLIGIBLE * b1:
        # contributes under 1e-18 of the variance, below double precision
        return laplace(b1)
    return AnalyticSource("laplace_sum", (b1, b2))


def discrete(atoms: Sequence[tuple[float, float]]) -> AnalyticSource:
    """Finite distribution from ``(location, mass)`` pairs; must be zero-mean."""
    if len(atoms) == 0:
        raise ValueError("discrete source needs at least one atom")
    locs = np.array([float(x) for x, _ in atoms])
    masses = np.array([float(m) for _, m in atoms])
    if np.any(masses < 0):
        raise ValueError("atom masses must be non-negative")
    order = np.argsort(locs, kind="stable")
    locs, masses = locs[order], masses[order]
    # merge repeated locations
    uniq, inv = np.unique(locs, return_inverse=True)
    if len(uniq) < len(locs):
        masses = np.bincount(inv, weights=masses)
        locs = uniq
    keep = masses > 0
    locs, masses = locs[keep], masses[keep]
    total = math.fsum(masses)
    if abs(total - 1.0) > _MOMENT_TOL:
        raise ValueError(f"atom masses sum to {total!r}, not 1")
    scale = max(1.0, float(np.max(np.abs(locs))))
    mean = math.fsum(masses * locs)
    if abs(mean) > _MOMENT_TOL * scale:
        raise ValueError(f"discrete source has mean {mean!r}; sources must be zero-mean")
    if math.fsum(masses * locs**2) <= 0:
        raise ValueError("discrete source is degenerate (zero variance)")
    return AnalyticSource("discrete", locs=_frozen(locs), masses=_frozen(masses))


def x_eps_delta(eps: float, delta: float) -> AnalyticSource:
    """The four-point family with mass ``delta`` at ``+-1`` and ``1/2 - delta`` at ``+-eps``."""
    if not (0 < eps < 1) or not (0 <= delta <= 0.5):
        raise ValueError("need 0 < eps < 1 and 0 <= delta <= 1/2")
    return discrete([(-1.0, delta), (-eps, 0.5 - delta), (eps, 0.5 - delta), (1.0, delta)])


def tabulated(x: Sequence[float], pdf: Sequence[float], recenter: bool = True) -> AnalyticSource:
    """Density given by values on a uniform grid, linear in between.

    Integrals use the trapezoid rule on the native grid; refine the grid if
    you need more accuracy.  The density is renormalised to unit mass, and with
    ``recenter`` the grid is shifted so that the (trapezoid) mean is exactly
    zero; otherwise a nonzero mean is rejected.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(pdf, dtype=float)
    if x.ndim != 1 or x.shape != p.shape or len(x) < 3:
        raise ValueError("tabulated source needs matching 1-D x and pdf arrays of length >= 3")
    dx = np.diff(x)
    if np.any(dx <= 0) or not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
        raise ValueError("tabulated grid must be uniform and increasing")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("pdf values must be finite and non-negative")
    mass = np.trapezoid(p, x)
    if mass <= 0:
        raise ValueError("pdf has zero mass")
    p = p / mass
    mean = np.trapezoid(x * p, x)
    if recenter:
        x = x - mean
    elif abs(mean) > _MOMENT_TOL * max(1.0, abs(x[0]), abs(x[-1])):
        raise ValueError(f"tabulated source has mean {mean!r}")
    return AnalyticSource("tabulated", grid=_frozen(x), pdf=_frozen(p))


def tabulated_from_csv(path: str | Path, recenter: bool = True) -> AnalyticSource:
    """Load a two-column ``x,pdf`` CSV with a header line."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header and data rows")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed x,pdf row ({exc})") from None
    return tabulated(data[:, 0], data[:, 1], recenter=recenter)


def scale(src: AnalyticSource, a: float) -> AnalyticSource:
    """Distribution of ``a * X``."""
    a = float(a)
    if a == 0:
        raise ValueError("scale factor must be nonzero")
    k = src.kind
    if k in ("uniform", "gaussian", "laplace", "triangular"):
        return AnalyticSource(k, (src.params[0] * abs(a),))
    if k == "laplace_sum":
        return laplace_sum(src.params[0] * abs(a), src.params[1] * abs(a))
    if k == "discrete":
        return discrete(list(zip(src.locs * a, src.masses)))
    x, p = src.grid * a, src.pdf / abs(a)
    if a < 0:
        x, p = x[::-1], p[::-1]
    return tabulated(x, p)


# ---------------------------------------------------------------- queries


def variance(src: AnalyticSource) -> float:
    """Second moment ``E[X**2]`` (the variance, since the mean is zero)."""
    k, prm = src.kind, src.params
    if k == "uniform":
        return prm[0] ** 2 / 3.0
    if k == "gaussian":
        return prm[0] ** 2
    if k == "laplace":
        return 2.0 * prm[0] ** 2
    if k == "triangular":
        return prm[0] ** 2 / 6.0
    if k == "laplace_sum":
        return 2.0 * (prm[0] ** 2 + prm[1] ** 2)
    if k == "discrete":
        return math.fsum(src.masses * src.locs**2)
    return float(np.trapezoid(src.grid**2 * src.pdf, src.grid))


def abs_mean(src: AnalyticSource) -> float:
    """``E[|X|]``."""
    k, prm = src.kind, src.params
    if k == "uniform":
        return prm[0] / 2.0
    if k == "gaussian":
        return prm[0] * math.sqrt(2.0 / math.pi)
    if k == "laplace":
        return prm[0]
    if k == "triangular":
        return prm[0] / 3.0
    if k == "laplace_sum":
        b1, b2 = prm
        return (b1 * b1 + b1 * b2 + b2 * b2) / (b1 + b2)
    if k == "discrete":
        return math.fsum(src.masses * np.abs(src.locs))
    # zero mean: E|X| = E[X; X >= 0] - E[X; X < 0] = 2 E[X; X >= 0]
    return 2.0 * float(tail_partial_mean(src, 0.0))


def tail_prob(src: AnalyticSource, w):
    """``P(X >= w)``; vectorised over ``w``."""
    w = np.asarray(w, dtype=float)
    k, prm = src.kind, src.params
    if k == "uniform":
        a = prm[0]
        out = np.clip((a - w) / (2 * a), 0.0, 1.0)
    elif k == "gaussian":
        out = special.ndtr(-w / prm[0])
    elif k == "laplace":
        b = prm[0]
        half = 0.5 * np.exp(-np.abs(w) / b)
        out = np.where(w >= 0, half, 1.0 - half)
    elif k == "triangular":
        a = prm[0]
        r = np.clip(a - np.abs(w), 0.0, a)
        half = r * r / (2 * a * a)
        out = np.where(w >= 0, half, 1.0 - half)
    elif k == "laplace_sum":
        half = _laplace_sum_upper(prm, np.abs(w), moment=False)
        out = np.where(w >= 0, half, 1.0 - half)
    elif k == "discrete":
        idx = np.searchsorted(src.locs, w, side="left")
        out = src._upper_mass[idx]
    else:
        out = _tabulated_upper(src, w, moment=False)
    return out[()] if out.ndim == 0 else out


def tail_partial_mean(src: AnalyticSource, w):
    """Unconditional partial mean ``E[X * 1{X >= w}]``; vectorised over ``w``.

    Divide by :func:`tail_prob` for the conditional mean ``E[X | X >= w]``.
    """
    w = np.asarray(w, dtype=float)
    k, prm = src.kind, src.params
    # symmetric kinds have a partial mean that is even in w
    if k == "uniform":
        a = prm[0]
        r = np.minimum(np.abs(w), a)
        out = (a * a - r * r) / (4 * a)
    elif k == "gaussian":
        s = prm[0]
        out = s * np.exp(-0.5 * (w / s) ** 2) / math.sqrt(2 * math.pi)
    elif k == "laplace":
        b = prm[0]
        aw = np.abs(w)
        out = 0.5 * (aw + b) * np.exp(-aw / b)
    elif k == "triangular":
        a = prm[0]
        r = np.minimum(np.abs(w), a)
        out = (a**3 / 6 - a * r * r / 2 + r**3 / 3) / (a * a)
    elif k == "laplace_sum":
        out = _laplace_sum_upper(prm, np.abs(w), moment=True)
    elif k == "discrete":
        idx = np.searchsorted(src.locs, w, side="left")
        out = src._upper_moment[idx]
    else:
        out = _tabulated_upper(src, w, moment=True)
    return out[()] if out.ndim == 0 else out


def median(src: AnalyticSource) -> float:
    """A median of the source (0 for the symmetric closed-form kinds)."""
    if src.kind in ("uniform", "gaussian", "laplace", "triangular", "laplace_sum"):
        return 0.0
    if src.kind == "discrete":
        cdf = np.cumsum(src.masses)
        return float(src.locs[np.searchsorted(cdf, 0.5 - 1e-15)])
    lower = 1.0 - src._upper_mass
    i = int(np.searchsorted(lower, 0.5)) - 1
    i = min(max(i, 0), len(src.grid) - 2)
    lo, hi = src.grid[i], src.grid[i + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail_prob(src, mid) > 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def support(src: AnalyticSource) -> tuple[float, float]:
    """Closed interval containing all the mass (possibly infinite)."""
    k, prm = src.kind, src.params
    if k in ("uniform", "triangular"):
        return -prm[0], prm[0]
    if k in ("gaussian", "laplace", "laplace_sum"):
        return -math.inf, math.inf
    if k == "discrete":
        return float(src.locs[0]), float(src.locs[-1])
    return float(src.grid[0]), float(src.grid[-1])


def is_symmetric(src: AnalyticSource) -> bool:
    if src.kind in ("uniform", "gaussian", "laplace", "triangular", "laplace_sum"):
        return True
    if src.kind == "discrete":
        return bool(np.allclose(src.locs, -src.locs[::-1], rtol=0, atol=1e-14)
                    and np.allclose(src.masses, src.masses[::-1], rtol=0, atol=1e-14))
    return bool(np.allclose(src.grid, -src.grid[::-1], atol=1e-12)
                and np.allclose(src.pdf, src.pdf[::-1], rtol=1e-12, atol=1e-14))


def _laplace_sum_upper(prm, w, moment):
    # P(Z >= w) or E[Z; Z >= w] for w >= 0.  Z's density is the signed mixture
    # (b1^2 f_b1 - b2^2 f_b2) / (b1^2 - b2^2) of Laplace densities, so each
    # query is a divided difference in s = b^2 of g(b) = b^2 * (Laplace query).
    b1, b2 = prm

    def g(b):
        if moment:
            return 0.5 * b * b * (w + b) * np.exp(-w / b)
        return 0.5 * b * b * np.exp(-w / b)

    if (b1 - b2) > _LAPLACE_SUM_MERGE * b1:
        return (g(b1) - g(b2)) / (b1 * b1 - b2 * b2)
    # dg/ds at the midpoint of s; error O((s1 - s2)^2)
    b = math.sqrt(0.5 * (b1 * b1 + b2 * b2))
    if moment:
        return np.exp(-w / b) * (w * w + 3 * b * w + 3 * b * b) / (4 * b)
    return np.exp(-w / b) * (2 * b + w) / (4 * b)


def _tabulated_upper(src, w, moment):
    x, p = src.grid, src.pdf
    acc = src._upper_moment if moment else src._upper_mass
    wc = np.clip(w, x[0], x[-1])
    i = np.clip(np.searchsorted(x, wc, side="right") - 1, 0, len(x) - 2)
    x1, p0, p1 = x[i + 1], p[i], p[i + 1]
    pw = p0 + (p1 - p0) * (wc - x[i]) / (x1 - x[i])
    if moment:
        part = 0.5 * (x1 - wc) * (wc * pw + x1 * p1)
    else:
        part = 0.5 * (x1 - wc) * (pw + p1)
    out = acc[i + 1] + part
    out = np.where(w < x[0], acc[0], out)
    return np.where(w > x[-1], 0.0, out)


# ---------------------------------------------------------------- samples


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Sorted multiset of real samples.

    Build with :meth:`from_values`; ``values`` is sorted once and read-only.
    """

    values: np.ndarray

    @classmethod
    def from_values(cls, values) -> "SampleSet":
        v = np.sort(np.asarray(values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("SampleSet needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValueError("SampleSet values must be finite")
        v.flags.writeable = False
        return cls(v)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.count

    @cached_property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @cached_property
    def prefix_sums(self) -> np.ndarray:
        """``S[k]`` = sum of the ``k`` smallest recentered values, ``k = 0..n``."""
        c = self.values - self.mean
        return np.concatenate(([0.0], np.cumsum(c)))

    def tail_prob(self, w: float) -> float:
        """Empirical ``P(X >= w)``."""
        return (self.count - int(np.searchsorted(self.values, w, side="left"))) / self.count


def sample(src: AnalyticSource, n: int, rng: np.random.Generator) -> SampleSet:
    """Draw ``n`` independent values from ``src`` using the caller's stream."""
    return SampleSet.from_values(draw(src, n, rng))


def draw(src: AnalyticSource, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unsorted i.i.d. draws (what :func:`sample` sorts)."""
    n = int(n)
    if n < 1:
        raise ValueError("need n >= 1 samples")
    k, prm = src.kind, src.params
    if k == "uniform":
        return rng.uniform(-prm[0], prm[0], n)
    if k == "gaussian":
        return rng.normal(0.0, prm[0], n)
    if k == "laplace":
        return rng.laplace(0.0, prm[0], n)
    if k == "triangular":
        h = prm[0] / 2
        return rng.uniform(-h, h, n) + rng.uniform(-h, h, n)
    if k == "laplace_sum":
        return rng.laplace(0.0, prm[0], n) + rng.laplace(0.0, prm[1], n)
    if k == "discrete":
        idx = np.searchsorted(np.cumsum(src.masses), rng.random(n) * math.fsum(src.masses), side="right")
        return src.locs[np.minimum(idx, len(src.locs) - 1)]
    return _tabulated_inverse_cdf(src, rng.random(n))


def _tabulated_inverse_cdf(src, u):
    x, p = src.grid, src.pdf
    lower = 1.0 - src._upper_mass  # P(X < x_i)
    i = np.clip(np.searchsorted(lower, u, side="right") - 1, 0, len(x) - 2)
    h = x[i + 1] - x[i]
    slope = (p[i + 1] - p[i]) / h
    r = np.maximum(u - lower[i], 0.0)
    # solve p_i t + slope t^2 / 2 = r in the stable form
    t = 2 * r / (p[i] + np.sqrt(np.maximum(p[i] ** 2 + 2 * slope * r, 0.0)))
    t = np.where(np.isfinite(t), t, 0.0)
    return x[i] + np.clip(t, 0.0, h)
