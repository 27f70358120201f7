"""Estimate the radial parameter ``s`` from a measured coincidence curve.

The model is ``counts(alpha) = scale * m_s(alpha + offset) + baseline``,
where ``m_s`` is the coincidence curve normalised at ``alpha = 0``. For a
fixed ``s`` the nuisance parameters ``scale`` and ``baseline`` enter
linearly and are solved exactly, leaving a one-dimensional profile
``chi2(s)`` that is scanned on a grid and refined by golden-section search.
The optional angular offset is profiled out by an inner golden-section
search.

The estimate converts into a Schmidt number through

    K(s, mu) = (1 + 2 s mu^2)^2 / [(1 - s)(1 + s + 4 s mu^2)],

with ``mu = w0 / w_G``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .coincidence import CurveModel
from .plates import PlateSpec

__all__ = [
    "MeasurementSet",
    "FitOptions",
    "FitResult",
    "FitError",
    "PlateModel",
    "fit_s",
    "profile_objective",
    "solve_linear",
    "schmidt_number_experimental",
    "KInterval",
    "k_interval",
    "synthesize",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
S_LO, S_HI = 0.01, 0.999


@dataclass(frozen=True)
class MeasurementSet:
    """Coincidence counts at plate orientations ``alphas`` (rad).

    ``sigmas`` defaults to shot noise ``sqrt(counts)``, floored at one
    count so that empty bins keep a finite weight.
    """

    alphas: np.ndarray
    counts: np.ndarray
    sigmas: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if a.ndim != 1 or a.shape != c.shape:
            raise ValueError("alphas and counts must be 1-D arrays of equal length")
        if a.size < 5:
            raise ValueError(f"need at least 5 points, got {a.size}")
        if np.any(a < 0) or np.any(a >= 2 * math.pi):
            raise ValueError("angles must lie in [0, 2pi)")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "counts", c)
        if self.sigmas is not None:
            s = np.asarray(self.sigmas, dtype=float)
            if s.shape != c.shape or np.any(~(s > 0)):
                raise ValueError("sigmas must be positive and match counts")
            object.__setattr__(self, "sigmas", s)

    @classmethod
    def from_points(cls, points) -> "MeasurementSet":
        pts = list(points)
        alphas = [p[0] for p in pts]
        counts = [p[1] for p in pts]
        if all(len(p) > 2 and p[2] is not None for p in pts):
            return cls(np.array(alphas), np.array(counts), np.array([p[2] for p in pts]))
        return cls(np.array(alphas), np.array(counts))

    @classmethod
    def from_csv(cls, path) -> "MeasurementSet":
        """Read ``alpha_deg,counts[,sigma]``; angles are converted to radians."""
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = [h.strip() for h in next(rd, [])]
            if header[:2] != ["alpha_deg", "counts"] or len(header) > 3 or (
                    len(header) == 3 and header[2] != "sigma"):
                raise ValueError(f"expected header alpha_deg,counts[,sigma], got {header}")
            rows = [[float(v) for v in row] for row in rd if row]
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        alphas = np.mod(np.deg2rad(arr[:, 0]), 2 * math.pi)
        sig = arr[:, 2] if len(header) == 3 else None
        return cls(alphas, arr[:, 1], sig)

    def shot_sigmas(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.counts, 1.0))


@dataclass(frozen=True)
class PlateModel:
    """Complementary plate pair with known instrument parameters."""

    plate: PlateSpec
    method: str = "closed"
    offset: float = math.pi
    lmax: int | None = None

    def at(self, s: float) -> CurveModel:
        return CurveModel(self.plate, s, self.method, self.offset, self.lmax)


@dataclass(frozen=True)
class FitOptions:
    """``weighting``: ``"auto"`` uses given sigmas, else shot noise;
    ``"poisson"`` forces shot noise; ``"unweighted"`` uses unit weights."""

    free_offset: bool = False
    baseline: bool = False
    weighting: str = "auto"
    offset_range: float = 0.2
    grid: int = 64
    s_tol: float = 1e-6

    def __post_init__(self):
        if self.weighting not in ("auto", "poisson", "unweighted"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.grid < 3:
            raise ValueError("grid needs at least 3 points")


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit_s`.

    ``at_boundary`` marks an estimate pinned to the edge of the search
    interval; ``degenerate`` marks a profile too flat to identify ``s``.
    ``profile`` holds the grid scan ``(s, chi2)``.
    """

    s_hat: float
    scale: float
    rss: float
    s_sigma: float
    offset_alpha: float | None = None
    baseline: float | None = None
    chi2: float = 0.0
    n_points: int = 0
    n_params: int = 1
    at_boundary: bool = False
    degenerate: bool = False
    profile: tuple = field(default=(), repr=False)


class FitError(RuntimeError):
    """The fit failed; ``profile`` carries the grid scan for diagnosis."""

    def __init__(self, message: str, profile=()):
        super().__init__(message)
        self.profile = profile


def solve_linear(y, m, w, baseline: bool):
    """Weighted least squares of ``y ~ scale*m (+ baseline)``.

    Returns ``(scale, baseline, chi2)``; ``baseline`` is 0 when not fitted.
    """
    sw = np.sqrt(w)
    cols = [m] if not baseline else [m, np.ones_like(m)]
    A = np.column_stack(cols) * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, y * sw, rcond=None)
    resid = y - np.column_stack(cols) @ coef
    chi2 = float(np.sum(w * resid * resid))
    return float(coef[0]), float(coef[1]) if baseline else 0.0, chi2


def _golden(f, a: float, b: float, tol: float, max_iter: int = 200):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


class _Problem:
    def __init__(self, data: MeasurementSet, model: PlateModel, opts: FitOptions):
        self.data = data
        self.model = model
        self.opts = opts
        self.y = data.counts
        if opts.weighting == "unweighted":
            self.w = np.ones_like(self.y)
        elif opts.weighting == "poisson" or data.sigmas is None:
            self.w = 1.0 / data.shot_sigmas() ** 2
        else:
            self.w = 1.0 / data.sigmas ** 2
        self._cache = lru_cache(maxsize=4096)(self._shape)

    def _shape(self, s: float, offset: float) -> np.ndarray:
        cm = self.model.at(s)
        vals = cm.evaluate(np.concatenate(([0.0], self.data.alphas + offset)))
        ref = vals[0]
        if not ref > 0:
            ref = np.max(vals)
        return vals[1:] / ref if ref > 0 else np.zeros_like(vals[1:])

    def fixed(self, s: float, offset: float = 0.0):
        m = self._cache(float(s), float(offset))
        return solve_linear(self.y, m, self.w, self.opts.baseline)

    def chi2(self, s: float) -> float:
        return self.best(s)[-1]

    def best(self, s: float):
        """``(offset, scale, baseline, chi2)`` at fixed ``s``."""
        if not self.opts.free_offset:
            sc, bl, c2 = self.fixed(s)
            return 0.0, sc, bl, c2
        r = self.opts.offset_range
        off, _ = _golden(lambda o: self.fixed(s, o)[2], -r, r, 1e-7)
        sc, bl, c2 = self.fixed(s, off)
        return off, sc, bl, c2


def profile_objective(data: MeasurementSet, model: PlateModel, s: float,
                      options: FitOptions | None = None) -> float:
    """``chi2`` at fixed ``s`` with all nuisance parameters optimised."""
    return _Problem(data, model, options or FitOptions()).chi2(s)


def fit_s(data: MeasurementSet, model: PlateModel,
          options: FitOptions | None = None) -> FitResult:
    """Least-squares estimate of ``s`` by profile scan and golden-section refinement.

    Raises
    ------
    FitError
        If the objective is not finite on the scan grid.
    """
    opts = options or FitOptions()
    prob = _Problem(data, model, opts)
    grid = np.linspace(S_LO, S_HI, opts.grid)
    prof = np.array([prob.chi2(s) for s in grid])
    trace = tuple(zip(grid.tolist(), prof.tolist()))
    if not np.all(np.isfinite(prof)):
        raise FitError("objective not finite on the scan grid", trace)
    n_par = 2 + int(opts.baseline) + int(opts.free_offset)
    spread = float(np.max(prof) - np.min(prof))
    degenerate = spread <= 1e-9 * max(float(np.min(prof)), 1e-300) or spread < 1e-12
    j = int(np.argmin(prof))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    s_hat, c2 = _golden(prob.chi2, float(lo), float(hi), opts.s_tol)
    if prof[j] < c2:
        s_hat, c2 = float(grid[j]), float(prof[j])
    at_boundary = j in (0, grid.size - 1)
    off, scale, base, c2 = prob.best(s_hat)
    resid = data.counts - scale * prob._cache(float(s_hat), float(off)) - base
    rss = float(np.sum(resid * resid))
    s_sigma = _curvature_sigma(prob, s_hat, c2, opts, data.counts.size, n_par)
    return FitResult(
        s_hat=float(s_hat),
        scale=scale,
        rss=rss,
        s_sigma=s_sigma,
        offset_alpha=off if opts.free_offset else None,
        baseline=base if opts.baseline else None,
        chi2=c2,
        n_points=int(data.counts.size),
        n_params=n_par,
        at_boundary=bool(at_boundary),
        degenerate=bool(degenerate),
        profile=trace,
    )


def _curvature_sigma(prob: _Problem, s_hat, c2, opts, n, n_par) -> float:
    h = min(1e-3, 0.5 * (s_hat - S_LO + 1e-9), 0.5 * (S_HI - s_hat + 1e-9))
    h = max(h, 1e-6)
    lo = prob.chi2(s_hat - h)
    hi = prob.chi2(s_hat + h)
    curv = (lo - 2.0 * c2 + hi) / (h * h)
    if not curv > 0:
        return math.inf
    var = 2.0 / curv
    if opts.weighting == "unweighted" and n > n_par:
        var *= c2 / (n - n_par)
    return math.sqrt(var)


# -- Schmidt number ----------------------------------------------------------

def schmidt_number_experimental(s: float, mu: float) -> float:
    """Schmidt number implied by ``s`` and the width ratio ``mu = w0/w_G``."""
    if not 0.0 <= s < 1.0:
        raise ValueError(f"s must lie in [0, 1), got {s}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    m2 = mu * mu
    # numerator minus denominator is s^2 (1 + 2 mu^2)^2, so K >= 1 survives rounding
    return 1.0 + (s * (1.0 + 2.0 * m2)) ** 2 / ((1.0 - s) * (1.0 + s + 4.0 * s * m2))


class KInterval(NamedTuple):
    low: float
    hat: float
    high: float
    clipped: bool


def k_interval(fit: FitResult, mu: float) -> KInterval:
    """Schmidt number at ``s_hat`` and ``s_hat -/+ s_sigma``.

    Ends leaving ``(0, 1)`` are clipped to ``[0, 1 - 1e-12]`` and flagged; an
    upper end at the clip is reported as infinity.
    """
    lo_s = fit.s_hat - fit.s_sigma
    hi_s = fit.s_hat + fit.s_sigma
    clipped = False
    if lo_s < 0.0:
        lo_s, clipped = 0.0, True
    k_hi = math.inf
    if hi_s >= 1.0 or not math.isfinite(hi_s):
        clipped = True
    else:
        k_hi = schmidt_number_experimental(hi_s, mu)
    k_hat = schmidt_number_experimental(fit.s_hat, mu)
    return KInterval(schmidt_number_experimental(lo_s, mu), k_hat, k_hi, clipped)


# -- synthetic data ----------------------------------------------------------

def synthesize(model: PlateModel, s: float, alphas, scale: float = 1000.0,
               rel_noise: float = 0.05, seed: int = 0) -> MeasurementSet:
    """Noisy synthetic counts ``scale * m_s(alpha) * (1 + rel_noise * N(0,1))``.

    The returned set carries the generating standard deviations as sigmas.
    """
    alphas = np.asarray(alphas, dtype=float)
    cm = model.at(s)
    vals = cm.evaluate(np.concatenate(([0.0], alphas)))
    truth = scale * vals[1:] / vals[0]
    rng = np.random.default_rng(seed)
    noisy = truth * (1.0 + rel_noise * rng.standard_normal(truth.size))
    sig = np.maximum(rel_noise * truth, 1e-12 * scale)
    return MeasurementSet(alphas, np.clip(noisy, 0.0, None), sig if rel_noise > 0 else None)
