"""One-bit quantization on the real line.

The variance drop of a zero-mean source at threshold ``w`` (Lloyd-optimal
reconstructions on the cells ``(-inf, w)`` and ``[w, inf)``) is evaluated in the
partial-mean form::

    drop(w) = E[X; X >= w]**2 / (P(X >= w) * P(X < w))

which equals ``E[X | X >= w]**2 * P(X >= w) / P(X < w)`` for zero-mean ``X``
but stays finite near the edges of the support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize

from . import sources
from .sources import AnalyticSource, SampleSet

MIN_CELL_PROB = 1e-9
DEFAULT_GRID_POINTS = 4097
DEFAULT_GRID_HALFWIDTH = 8.0  # in standard deviations
DEFAULT_MIN_CELL = 8
_TIE_RTOL = 1e-12
_REFINE_GAIN = 1e-13


class DegenerateSourceError(ValueError):
    """The source (or sample) has zero variance."""


class EmptyCellError(RuntimeError):
    """A Lloyd iterate left one of the two cells with (numerically) no mass."""

    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


class ConvergenceError(RuntimeError):
    """Lloyd-Max ran out of iterations; ``last`` holds the final iterate."""

    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class OneBitQuantizer:
    """Threshold quantizer: ``x >= threshold`` maps to bit 1 and ``recon_high``."""

    threshold: float
    recon_low: float
    recon_high: float

    def __post_init__(self):
        if not self.recon_low < self.recon_high:
            raise ValueError(f"need recon_low < recon_high, got {self.recon_low} and {self.recon_high}")

    def encode(self, x):
        return (np.asarray(x) >= self.threshold).astype(np.int8)

    def decode(self, bits):
        return np.where(np.asarray(bits) == 1, self.recon_high, self.recon_low)

    def __call__(self, x):
        return self.decode(self.encode(x))

    @property
    def is_symmetric(self) -> bool:
        return self.recon_low == -self.recon_high


def reflect(q: OneBitQuantizer) -> OneBitQuantizer:
    """Quantizer ``x -> -q(-x)`` for the mirrored source (cells swap sides)."""
    return OneBitQuantizer(-q.threshold, -q.recon_high, -q.recon_low)


@dataclass(frozen=True)
class VardropResult:
    vardrop: float
    argmax_threshold: float
    quantizer: OneBitQuantizer
    mse: float
    variance: float


def amenability(src: AnalyticSource) -> float:
    """``E[|X|]**2 / E[X**2]``, a number in ``[0, 1]``."""
    var = sources.variance(src)
    if not var > 0:
        raise DegenerateSourceError("amenability of a zero-variance source is undefined")
    return sources.abs_mean(src) ** 2 / var


def amenability_x_eps_delta(eps: float, delta: float) -> float:
    """Closed form of the amenability of the four-point family :func:`sources.x_eps_delta`."""
    return ((1 - 2 * delta) * eps + 2 * delta) ** 2 / ((1 - 2 * delta) * eps**2 + 2 * delta)


def drop_at(src: AnalyticSource, w):
    """Variance drop of the Lloyd quantizer with threshold ``w`` (vectorised).

    Thresholds leaving a cell with probability below ``MIN_CELL_PROB`` give nan.
    """
    w = np.asarray(w, dtype=float)
    p_hi = sources.tail_prob(src, w)
    p_lo = 1.0 - p_hi
    pm = sources.tail_partial_mean(src, w)
    ok = (p_hi >= MIN_CELL_PROB) & (p_lo >= MIN_CELL_PROB)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(ok, pm * pm / (p_hi * p_lo), np.nan)
    return val[()] if val.ndim == 0 else val


def lloyd_quantizer(src: AnalyticSource, w: float) -> OneBitQuantizer:
    """Quantizer at threshold ``w`` with the two cell centroids as reconstructions."""
    if src.kind == "discrete":
        up = src.locs >= w
        p_hi, p_lo = math.fsum(src.masses[up]), math.fsum(src.masses[~up])
        if p_hi < MIN_CELL_PROB or p_lo < MIN_CELL_PROB:
            raise EmptyCellError(f"threshold {w} leaves an empty cell", None)
        lo = math.fsum(src.masses[~up] * src.locs[~up]) / p_lo
        hi = math.fsum(src.masses[up] * src.locs[up]) / p_hi
        return OneBitQuantizer(float(w), lo, hi)
    p_hi = float(sources.tail_prob(src, w))
    p_lo = 1.0 - p_hi
    if p_hi < MIN_CELL_PROB or p_lo < MIN_CELL_PROB:
        raise EmptyCellError(f"threshold {w} leaves an empty cell", None)
    pm = float(sources.tail_partial_mean(src, w))
    return OneBitQuantizer(float(w), -pm / p_lo, pm / p_hi)


def _pick(ws, vals, center):
    """Index of the best candidate: max value, then closest to ``center``, then lowest ``w``."""
    best = np.nanmax(vals)
    tied = np.flatnonzero(vals >= best - _TIE_RTOL * abs(best))
    dist = np.abs(ws[tied] - center)
    near = tied[dist <= dist.min() + 1e-15 * max(1.0, abs(center))]
    return int(near[np.argmin(ws[near])])


def default_thresholds(src: AnalyticSource) -> np.ndarray:
    """Candidate thresholds for :func:`vardrop_sweep`.

    Discrete sources: midpoints between consecutive atoms (every distinct
    two-cell split).  Otherwise ``DEFAULT_GRID_POINTS`` points spanning
    ``+- DEFAULT_GRID_HALFWIDTH`` standard deviations about the mean.
    """
    if src.kind == "discrete":
        return 0.5 * (src.locs[1:] + src.locs[:-1])
    sd = math.sqrt(sources.variance(src))
    half = DEFAULT_GRID_HALFWIDTH * sd
    return np.linspace(-half, half, DEFAULT_GRID_POINTS)


def vardrop_sweep(src: AnalyticSource, thresholds=None, refine: bool | None = None,
                  xatol: float = 1e-10) -> VardropResult:
    """Maximise the variance drop over thresholds.

    ``thresholds`` defaults to :func:`default_thresholds`.  For sources with a
    density the best grid point is then refined by bounded scalar
    maximisation between its neighbours (``refine`` defaults to on for
    non-discrete kinds).  Candidates that leave a cell with probability below
    ``MIN_CELL_PROB`` are skipped; if none remain, ``ValueError`` is raised.
    """
    var = sources.variance(src)
    if not var > 0:
        raise DegenerateSourceError("zero-variance source")
    ws = default_thresholds(src) if thresholds is None else np.sort(np.asarray(thresholds, dtype=float))
    if ws.size == 0:
        raise ValueError("empty threshold set")
    vals = drop_at(src, ws)
    if np.all(np.isnan(vals)):
        raise ValueError("every candidate threshold leaves a cell with probability < %g" % MIN_CELL_PROB)
    i = _pick(ws, vals, sources.median(src))
    w_best, v_best = float(ws[i]), float(vals[i])

    if refine is None:
        refine = src.kind != "discrete"
    if refine and ws.size >= 3:
        lo = ws[max(i - 1, 0)]
        hi = ws[min(i + 1, ws.size - 1)]
        res = optimize.minimize_scalar(lambda w: -np.nan_to_num(drop_at(src, w), nan=-np.inf),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": xatol})
        # accept only real gains, not rounding noise on a flat top
        if res.success and -res.fun > v_best * (1 + _REFINE_GAIN):
            w_best, v_best = float(res.x), float(-res.fun)

    q = lloyd_quantizer(src, w_best)
    if src.kind == "discrete":
        err = mse(src, q)
        return VardropResult(var - err, w_best, q, err, var)
    return VardropResult(v_best, w_best, q, max(var - v_best, 0.0), var)


def best_symmetric(src: AnalyticSource) -> VardropResult:
    """Best quantizer with reconstructions ``+-a`` and threshold 0.

    The MSE ``Var - 2 a E[X sgn(X)] + a**2`` is minimised at ``a = E|X|``
    (with the upper-cell convention ``sgn(0) = +1``; atoms at 0 add nothing),
    leaving ``mse = Var - E|X|**2``.
    """
    var = sources.variance(src)
    if not var > 0:
        raise DegenerateSourceError("zero-variance source")
    a = 2.0 * float(sources.tail_partial_mean(src, 0.0))
    q = OneBitQuantizer(0.0, -a, a)
    return VardropResult(a * a, 0.0, q, max(var - a * a, 0.0), var)


def lloyd_max(src: AnalyticSource, init_threshold: float, tol: float = 1e-10,
              max_iter: int = 1_000_000) -> OneBitQuantizer:
    """Alternate centroid and midpoint steps until the threshold moves less than ``tol``.

    Raises :class:`EmptyCellError` if an iterate empties a cell and
    :class:`ConvergenceError` after ``max_iter`` steps; both carry the last
    iterate.  Note that sources whose log-density is piecewise linear (Laplace)
    have a Lloyd map with unit derivative at the optimum, so the iterates
    creep in like ``1/k`` and stop about ``sqrt(2 tol)`` away from it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    w = float(init_threshold)
    q = None
    for _ in range(int(max_iter)):
        try:
            c = lloyd_quantizer(src, w)
        except EmptyCellError:
            raise EmptyCellError(f"threshold {w!r} leaves an empty cell", q) from None
        lo, hi = c.recon_low, c.recon_high
        w_new = 0.5 * (lo + hi)
        q = OneBitQuantizer(w_new, lo, hi)
        if abs(w_new - w) < tol:
            return q
        w = w_new
    raise ConvergenceError(f"Lloyd-Max did not converge in {max_iter} iterations", q)


def mse(src: AnalyticSource, q: OneBitQuantizer) -> float:
    """``E[(X - q(X))**2]``."""
    if src.kind == "discrete":
        return math.fsum(src.masses * (src.locs - q(src.locs)) ** 2)
    w = q.threshold
    p_hi = float(sources.tail_prob(src, w))
    pm = float(sources.tail_partial_mean(src, w))
    # E[X; X < w] = -pm by zero mean
    return (sources.variance(src) - 2 * q.recon_high * pm + 2 * q.recon_low * pm
            + q.recon_high**2 * p_hi + q.recon_low**2 * (1.0 - p_hi))


# ---------------------------------------------------------------- empirical


def empirical_vardrop(samples: SampleSet, min_cell: int = DEFAULT_MIN_CELL) -> VardropResult:
    """Threshold sweep over the empirical measure of ``samples``.

    Splits with ``k`` values below the threshold, ``min_cell <= k <= n - min_cell``,
    are scored in O(n) from prefix sums of the recentered values; the threshold
    is the midpoint of the two straddling order statistics, and splits inside
    a run of equal values are skipped.
    """
    n = samples.count
    min_cell = int(min_cell)
    if min_cell < 1:
        raise ValueError("min_cell must be at least 1")
    if n < 2 * min_cell:
        raise ValueError(f"need at least {2 * min_cell} samples for min_cell={min_cell}, got {n}")
    v = samples.values
    S = samples.prefix_sums
    k = np.arange(min_cell, n - min_cell + 1)
    upper = S[n] - S[k]
    drop = upper * upper / (k * (n - k).astype(float))
    drop[v[k - 1] == v[k]] = np.nan
    var = float(np.mean((v - samples.mean) ** 2))
    if not var > 0 or np.all(np.isnan(drop)):
        raise DegenerateSourceError("samples have no admissible split (zero spread)")
    ws = 0.5 * (v[k - 1] + v[k])
    i = _pick(ws, drop, float(np.median(v)))
    kk = int(k[i])
    q = OneBitQuantizer(float(ws[i]), float(np.mean(v[:kk])), float(np.mean(v[kk:])))
    vd = float(drop[i])
    return VardropResult(vd, float(ws[i]), q, max(var - vd, 0.0), var)


def vardrop_standard_error(values, threshold: float) -> float:
    """Delta-method standard error of the empirical drop at a fixed threshold.

    At the maximising threshold the derivative in ``w`` vanishes, so this is
    also the first-order error of :func:`empirical_vardrop`.
    """
    z = np.asarray(values, dtype=float).ravel()
    n = z.size
    ind = (z >= threshold).astype(float)
    m, a, p = z.mean(), np.mean(z * ind), ind.mean()
    pq = p * (1 - p)
    if pq == 0:
        return math.nan
    c = a - m * p
    g_m = -2 * c * p / pq
    g_a = 2 * c / pq
    g_p = (-2 * c * m * pq - c * c * (1 - 2 * p)) / pq**2
    infl = g_m * (z - m) + g_a * (z * ind - a) + g_p * (ind - p)
    return float(np.std(infl) / math.sqrt(n))


# ---------------------------------------------------------------- brute force


def brute_force_discrete(src: AnalyticSource):
    """Exhaustive search over all two-cell partitions of the atoms, in exact rationals.

    Every nonempty proper subset of atoms is tried as the upper cell, with
    Lloyd (centroid) reconstructions.  Returns ``(mse, upper_cell, recon_low,
    recon_high)`` as :class:`fractions.Fraction` values, ties broken towards
    the cell whose recon pair is lexicographically smallest.
    Intended for up to ~12 atoms.
    """
    if src.kind != "discrete":
        raise ValueError("brute force needs a discrete source")
    m = len(src.locs)
    if m > 16:
        raise ValueError("too many atoms for exhaustive search")
    # floats are dyadic rationals; scale them to exact integers
    fx = [Fraction(float(x)) for x in src.locs]
    fp = [Fraction(float(p)) for p in src.masses]
    dx = math.lcm(*(f.denominator for f in fx))
    dp = math.lcm(*(f.denominator for f in fp))
    X = [int(f * dx) for f in fx]
    P = [int(f * dp) for f in fp]
    PX = [p * x for p, x in zip(P, X)]
    p_tot, px_tot = sum(P), sum(PX)
    energy = sum(p * x * x for p, x in zip(P, X))

    # minimising the error is maximising g = A^2/P_hi + B^2/P_lo (A, B the cell moments)
    best = None
    for mask in range(1, (1 << m) - 1):
        a = p_hi = 0
        for i in range(m):
            if mask >> i & 1:
                a += PX[i]
                p_hi += P[i]
        b, p_lo = px_tot - a, p_tot - p_hi
        if b * p_hi > a * p_lo:
            continue  # recon_low > recon_high; the complement is also visited
        num, den = a * a * p_lo + b * b * p_hi, p_hi * p_lo
        if best is not None:
            c = num * best[1] - best[0] * den
            if c < 0:
                continue
            if c == 0:
                lo, hi = Fraction(b, p_lo * dx), Fraction(a, p_hi * dx)
                if (lo, hi) >= (best[3], best[4]):
                    continue
        best = (num, den, mask, Fraction(b, p_lo * dx), Fraction(a, p_hi * dx))

    num, den, mask, lo, hi = best
    err = (energy - Fraction(num, den)) / (dp * dx * dx)
    return err, frozenset(i for i in range(m) if mask >> i & 1), lo, hi
