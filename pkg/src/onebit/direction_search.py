"""One-bit quantization of random vectors through a projection direction.

Any one-bit quantizer of a vector source is a threshold on ``<x, q>`` for some
unit ``q`` with reconstructions on the line through ``q``; the variance drop
of the vector equals the best scalar variance drop over directions.  This
module evaluates that scalar objective per direction (exactly when the
source can describe its projections analytically, by Monte Carlo
otherwise), searches over directions, and lifts the scalar quantizer back
to the vector space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import sources
from .scalar_quant import (
    DEFAULT_MIN_CELL,
    DegenerateSourceError,
    OneBitQuantizer,
    empirical_vardrop,
    vardrop_standard_error,
    vardrop_sweep,
)
from .sources import AnalyticSource, SampleSet

Sampler = Callable[[np.random.Generator, int], np.ndarray]

FD_STEP = 1e-2
DEFAULT_RESTARTS = 8


@dataclass(frozen=True, eq=False)
class VectorSource:
    """Zero-mean random vector given by a sampler.

    ``sampler(rng, n)`` returns an ``(n, dim)`` array.  ``analytic_projection(q)``,
    when given, returns the law of ``<X, q>`` as an :class:`AnalyticSource`
    (or ``None`` if the projection is degenerate).  The tags record whether
    every projection is symmetric and log-concave, which licenses the
    amenability-times-variance objective.
    """

    dim: int
    sampler: Sampler
    analytic_projection: Optional[Callable[[np.ndarray], Optional[AnalyticSource]]] = None
    symmetric: bool = False
    log_concave_projections: bool = False
    name: str = "vector source"

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = np.asarray(self.sampler(rng, int(n)), dtype=float)
        if x.shape != (int(n), self.dim):
            raise ValueError(f"sampler returned shape {x.shape}, expected {(int(n), self.dim)}")
        return x

    @property
    def tagged(self) -> bool:
        return self.symmetric and self.log_concave_projections


@dataclass(frozen=True)
class UnitDirection:
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).ravel()
        if c.size == 0 or abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("direction must have unit Euclidean norm")
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, v) -> "UnitDirection":
        v = np.asarray(v, dtype=float).ravel()
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(v / nrm)

    @classmethod
    def from_angle(cls, theta: float) -> "UnitDirection":
        return cls(np.array([math.cos(theta), math.sin(theta)]))

    @property
    def dim(self) -> int:
        return self.coords.size

    def canonical(self) -> "UnitDirection":
        """The representative of ``+-q`` whose first nonzero coordinate is positive."""
        nz = np.flatnonzero(self.coords)
        return self if self.coords[nz[0]] > 0 else UnitDirection(-self.coords)

    @property
    def angle(self) -> float:
        """Angle in ``[0, pi)`` of the canonical 2-D representative, in radians."""
        if self.dim != 2:
            raise ValueError("angle is defined for 2-D directions only")
        a = math.atan2(self.coords[1], self.coords[0]) % math.pi
        return 0.0 if math.isclose(a, math.pi) else a

    def __repr__(self):
        return f"UnitDirection({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class HilbertQuantizer:
    """Threshold ``<x, q>`` and reconstruct along ``q``."""

    direction: UnitDirection
    scalar_quantizer: OneBitQuantizer

    @property
    def reconstructions(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.direction.coords
        return self.scalar_quantizer.recon_low * q, self.scalar_quantizer.recon_high * q

    def encode(self, x) -> np.ndarray:
        return self.scalar_quantizer.encode(np.asarray(x, dtype=float) @ self.direction.coords)

    def decode(self, bits) -> np.ndarray:
        z = self.scalar_quantizer.decode(bits)
        return np.multiply.outer(z, self.direction.coords)

    def __call__(self, x):
        return self.decode(self.encode(x))

    def mse(self, x) -> float:
        """Mean of ``||x - Q(x)||**2`` over the rows of ``x``."""
        x = np.asarray(x, dtype=float)
        return float(np.mean(np.sum((x - self(x)) ** 2, axis=1)))


@dataclass(frozen=True, eq=False)
class SearchResult:
    best_direction: UnitDirection
    vardrop: float
    quantizer: HilbertQuantizer
    trace: list = field(repr=False)
    status: str = "done"
    objective: str = "vardrop"
    standard_error: float = math.nan


# ---------------------------------------------------------------- sources


def iid_laplace(dim: int = 2, b: float = 1.0) -> VectorSource:
    """Independent Laplace(b) coordinates; exact projections in two dimensions."""

    def sampler(rng, n):
        return rng.laplace(0.0, b, size=(n, dim))

    proj = None
    if dim == 2:
        def proj(q):
            return sources.laplace_sum(b * abs(q[0]), b * abs(q[1]))
    return VectorSource(dim, sampler, proj, symmetric=True, log_concave_projections=True,
                        name=f"iid laplace(b={b:g}) x{dim}")


def gaussian_vector(cov) -> VectorSource:
    """Zero-mean Gaussian with covariance ``cov``; projections are exact."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dim = cov.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    if np.any(evals < -1e-12 * max(1.0, evals.max())):
        raise ValueError("covariance must be positive semidefinite")
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))

    def sampler(rng, n):
        return rng.standard_normal((n, dim)) @ root.T

    def proj(q):
        v = float(q @ cov @ q)
        return sources.gaussian(math.sqrt(v)) if v > 0 else None

    return VectorSource(dim, sampler, proj, symmetric=True, log_concave_projections=True,
                        name="gaussian vector")


def iid_gaussian(dim: int = 2, sigma: float = 1.0) -> VectorSource:
    return gaussian_vector(sigma**2 * np.eye(dim))


def axis_source(scalar: AnalyticSource, dim: int = 2, axis: int = 0) -> VectorSource:
    """All the mass on one coordinate axis, distributed as ``scalar``."""

    def sampler(rng, n):
        x = np.zeros((n, dim))
        x[:, axis] = sources.draw(scalar, n, rng)
        return x

    def proj(q):
        return sources.scale(scalar, q[axis]) if q[axis] != 0 else None

    sym = sources.is_symmetric(scalar)
    lc = scalar.kind in ("uniform", "gaussian", "laplace", "triangular", "laplace_sum")
    return VectorSource(dim, sampler, proj, symmetric=sym, log_concave_projections=lc,
                        name=f"{scalar!r} on axis {axis}")


# ---------------------------------------------------------------- objectives


def _check(src: VectorSource, q: UnitDirection):
    if q.dim != src.dim:
        raise ValueError(f"direction has dimension {q.dim}, source has {src.dim}")


def _use_analytic(src: VectorSource, estimator: str) -> bool:
    if estimator not in ("auto", "analytic", "empirical"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "analytic" and src.analytic_projection is None:
        raise ValueError("source has no analytic projection")
    return estimator == "analytic" or (estimator == "auto" and src.analytic_projection is not None)


def project(src: VectorSource, q: UnitDirection, n: int, rng: np.random.Generator) -> SampleSet:
    """``<X_i, q>`` for ``n`` fresh draws."""
    _check(src, q)
    return SampleSet.from_values(src.draw(rng, n) @ q.coords)


def vardrop_along(src: VectorSource, q: UnitDirection, n: int = 0, rng=None,
                  min_cell: int = DEFAULT_MIN_CELL, estimator: str = "auto",
                  samples: np.ndarray | None = None) -> float:
    """Variance drop of ``<X, q>``; zero when the projection is degenerate.

    The exact sweep is used when the source has an analytic projection (unless
    ``estimator='empirical'``); otherwise the empirical sweep over ``n``
    draws, or over the given ``samples`` (common random numbers).
    """
    _check(src, q)
    if _use_analytic(src, estimator):
        law = src.analytic_projection(q.coords)
        return 0.0 if law is None else vardrop_sweep(law).vardrop
    z = (src.draw(rng, n) if samples is None else samples) @ q.coords
    try:
        return empirical_vardrop(SampleSet.from_values(z), min_cell).vardrop
    except DegenerateSourceError:
        return 0.0


def objective_amen_var(src: VectorSource, q: UnitDirection, n: int = 0, rng=None,
                       estimator: str = "auto", samples: np.ndarray | None = None) -> float:
    """``E[|<X, q>|]**2``, which equals amenability times variance of the projection.

    Only meaningful as a variance drop for sources tagged symmetric with
    log-concave projections; others are rejected.
    """
    _check(src, q)
    if not src.tagged:
        raise ValueError("amenability objective needs a symmetric source with log-concave projections")
    if _use_analytic(src, estimator):
        law = src.analytic_projection(q.coords)
        return 0.0 if law is None else sources.abs_mean(law) ** 2
    z = (src.draw(rng, n) if samples is None else samples) @ q.coords
    return float(np.mean(np.abs(z))) ** 2


def _objective_fn(src, objective, estimator, samples, min_cell):
    if objective == "auto":
        objective = "amen_var" if src.tagged else "vardrop"
    if objective == "amen_var":
        fn = lambda q: objective_amen_var(src, q, estimator=estimator, samples=samples)
    elif objective == "vardrop":
        fn = lambda q: vardrop_along(src, q, min_cell=min_cell, estimator=estimator, samples=samples)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return objective, fn


def objective_standard_error(src: VectorSource, q: UnitDirection, samples: np.ndarray,
                             objective: str = "amen_var", min_cell: int = DEFAULT_MIN_CELL) -> float:
    """Monte Carlo standard error of the empirical objective along ``q``."""
    z = samples @ q.coords
    if objective == "amen_var":
        m = float(np.mean(np.abs(z)))
        return 2 * m * float(np.std(np.abs(z))) / math.sqrt(z.size)
    res = empirical_vardrop(SampleSet.from_values(z), min_cell)
    return vardrop_standard_error(z, res.argmax_threshold)


def build_quantizer(src: VectorSource, q: UnitDirection, n: int = 0, rng=None,
                    min_cell: int = DEFAULT_MIN_CELL, estimator: str = "auto",
                    samples: np.ndarray | None = None) -> HilbertQuantizer:
    """Best scalar quantizer of ``<X, q>`` lifted to reconstructions ``g(j) * q``."""
    _check(src, q)
    if _use_analytic(src, estimator):
        law = src.analytic_projection(q.coords)
        if law is None:
            raise DegenerateSourceError("projection along q is identically zero")
        sq = vardrop_sweep(law).quantizer
    else:
        z = (src.draw(rng, n) if samples is None else samples) @ q.coords
        sq = empirical_vardrop(SampleSet.from_values(z), min_cell).quantizer
    return HilbertQuantizer(q, sq)


# ---------------------------------------------------------------- search


def grid_search_2d(src: VectorSource, num_angles: int = 360, n: int = 0, rng=None,
                   objective: str = "auto", estimator: str = "auto",
                   min_cell: int = DEFAULT_MIN_CELL) -> SearchResult:
    """Evaluate directions ``(cos t, sin t)`` for ``num_angles`` angles uniformly on ``[0, pi)``.

    Monte Carlo evaluations share one sample of ``n`` vectors across angles.
    ``objective='auto'`` uses the amenability objective for tagged sources and
    the full variance-drop sweep otherwise.  The reported ``vardrop`` is the
    variance drop along the winner.
    """
    if src.dim != 2:
        raise ValueError("grid_search_2d needs a 2-D source")
    if num_angles < 8:
        raise ValueError("num_angles must be at least 8")
    samples = None if _use_analytic(src, estimator) else src.draw(rng, n)
    objective, fn = _objective_fn(src, objective, estimator, samples, min_cell)
    trace = []
    for t in np.arange(num_angles) * (math.pi / num_angles):
        q = UnitDirection.from_angle(t)
        trace.append((q, fn(q)))
    vals = np.array([v for _, v in trace])
    best = trace[int(np.argmax(vals))][0]
    return _finish(src, best, trace, "done", objective, estimator, samples, min_cell)


def _finish(src, q, trace, status, objective, estimator, samples, min_cell):
    q = q.canonical()
    vd = vardrop_along(src, q, min_cell=min_cell, estimator=estimator, samples=samples)
    se = math.nan
    if samples is not None:
        try:
            se = objective_standard_error(src, q, samples, "vardrop", min_cell)
        except DegenerateSourceError:
            pass
    try:
        hq = build_quantizer(src, q, min_cell=min_cell, estimator=estimator, samples=samples)
    except DegenerateSourceError:
        hq = None
    return SearchResult(q, vd, hq, trace, status, objective, se)


def _tangent_basis(q: np.ndarray) -> np.ndarray:
    # rows span the orthogonal complement of q
    _, _, vt = np.linalg.svd(q[None, :])
    return vt[1:]


def ascent_search(src: VectorSource, init: UnitDirection | None = None, steps: int = 200,
                  n: int = 0, rng=None, restarts: int = DEFAULT_RESTARTS, h: float = FD_STEP,
                  lr: float = 0.5, patience: int = 12, objective: str = "auto",
                  estimator: str = "auto", min_cell: int = DEFAULT_MIN_CELL) -> SearchResult:
    """Projected gradient ascent on the unit sphere with restarts.

    Gradients are central differences of step ``h`` (radians) along an
    orthonormal tangent basis, with every evaluation on one shared Monte Carlo
    sample.  A step is kept only if it improves the objective; otherwise the
    step size is halved.  A run *stalls* once ``patience`` consecutive steps
    fail to improve; otherwise it stops when ``steps`` are *exhausted*.
    ``restarts`` runs are made, starting from ``init`` (when given) and then
    from random directions; the best iterate overall is returned, with
    ``status`` ``'stalled'`` or ``'exhausted'`` from the run that produced it.
    """
    if src.dim < 2:
        raise ValueError("ascent_search needs dim >= 2")
    if rng is None:
        raise ValueError("ascent_search needs an rng for its random restarts")
    samples = None if _use_analytic(src, estimator) else src.draw(rng, n)
    objective, fn = _objective_fn(src, objective, estimator, samples, min_cell)

    starts = [] if init is None else [init.coords]
    while len(starts) < max(restarts, 1):
        starts.append(rng.standard_normal(src.dim))

    trace = []
    best = (-math.inf, None, "exhausted")
    for start in starts:
        q = start / np.linalg.norm(start)
        f = fn(UnitDirection.normalized(q))
        trace.append((UnitDirection.normalized(q), f))
        step, since = lr, 0
        status = "exhausted"
        for _ in range(steps):
            basis = _tangent_basis(q)
            grad = np.zeros(src.dim)
            for e in basis:
                fp = fn(UnitDirection.normalized(q * math.cos(h) + e * math.sin(h)))
                fm = fn(UnitDirection.normalized(q * math.cos(h) - e * math.sin(h)))
                grad += (fp - fm) / (2 * h) * e
            gnorm = np.linalg.norm(grad)
            improved = False
            if gnorm > 0:
                # move along the geodesic in the gradient direction
                ang = step * gnorm
                cand = q * math.cos(ang) + (grad / gnorm) * math.sin(ang)
                cand /= np.linalg.norm(cand)
                fc = fn(UnitDirection.normalized(cand))
                trace.append((UnitDirection.normalized(cand), fc))
                if fc > f:
                    q, f, improved = cand, fc, True
            if improved:
                step, since = step * 1.5, 0
            else:
                step, since = step * 0.5, since + 1
                if since >= patience:
                    status = "stalled"
                    break
        if f > best[0]:
            best = (f, UnitDirection.normalized(q), status)

    return _finish(src, best[1], trace, best[2], objective, estimator, samples, min_cell)


def angle_distance_deg(a: float, b: float, period: float = math.pi) -> float:
    """Distance between two angles (radians) modulo ``period``, in degrees."""
    d = (a - b) % period
    return math.degrees(min(d, period - d))
