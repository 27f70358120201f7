r"""Coincidence probability behind a pair of rotated azimuthal phase plates.

With both photons projected on fundamental fiber modes,

.. math::

    P(\alpha) = \Big|\sum_\ell (-1)^\ell R_\ell\, h^{(i)}_{0,\ell}(\alpha)\,
        h^{(s)}_{0,-\ell}\Big|^2 .

:func:`coincidence_general` evaluates this sum for any pair of plates. For
angular diaphragms and spiral phase plates the sum has the closed forms
:func:`ad_closed` and :func:`spp_closed`, which drop an alpha-independent
factor (``(sin^2(pi eta)/pi^2)^2``), so only normalised curves are comparable.

When every ``R_l`` equals one the alternating sum collapses to a single
azimuthal overlap integral, which :func:`coincidence_general` evaluates
exactly instead of truncating a slowly converging series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .plates import (
    AngularDiaphragm,
    PlateSpec,
    SpiralPhasePlate,
    impulse_row,
    is_integer_eta,
    segments,
)
from .radial import RadialTable, default_lmax, r_ell, radial_table
from .specfun import SeriesControl

__all__ = [
    "TruncationWarning",
    "CoincidenceCurve",
    "CurveModel",
    "coincidence_general",
    "coincidence_exact_s1",
    "ad_closed",
    "spp_closed",
    "ad_limit",
    "spp_limit",
    "curve",
    "visibility",
    "normalize",
]

TWO_PI = 2.0 * math.pi


class TruncationWarning(RuntimeWarning):
    """The last retained OAM channel is not negligible."""


# -- general engine ----------------------------------------------------------

def _engine_coeffs(plate_i: PlateSpec, plate_s: PlateSpec, table: RadialTable,
                   lmax: int, offset: float) -> tuple[np.ndarray, np.ndarray]:
    ell = np.arange(-lmax, lmax + 1)
    r = table.values[np.abs(ell)]
    hi = impulse_row(plate_i, 1, 0.0, 0, ell)
    hs = impulse_row(plate_s, -1, offset, 0, -ell)
    sign = np.where(ell % 2 == 0, 1.0, -1.0)
    return ell, sign * r * hi * hs


def _engine(plate_i, plate_s, alphas, table, lmax, offset, ctl):
    if lmax is None:
        lmax = table.lmax
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    if lmax > table.lmax:
        raise ValueError(f"radial table stops at l={table.lmax} < lmax={lmax}")
    ell, c = _engine_coeffs(plate_i, plate_s, table, lmax, offset)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    amp = np.exp(1j * np.outer(alphas, ell)) @ c
    edge = max(abs(c[0]), abs(c[-1]))
    if edge > ctl.rel_tol * max(np.max(np.abs(amp)), 1e-300) and table.s < 1.0:
        warnings.warn(
            f"coincidence sum truncated at l={lmax} with last term {edge:.3e}",
            TruncationWarning, stacklevel=3)
    return np.abs(amp) ** 2


def _value_and_slope(segs, x):
    # phase and slope of a piecewise-linear profile at x in [0, 2pi)
    for p0, p1, t0, t1 in segs:
        if p0 <= x < p1:
            k = (t1 - t0) / (p1 - p0)
            return t0 + k * (x - p0), k
    p0, p1, t0, t1 = segs[-1]
    k = (t1 - t0) / (p1 - p0)
    return t0 + k * (x - p0), k


def coincidence_exact_s1(plate_i: PlateSpec, plate_s: PlateSpec, alpha: float,
                         offset: float = math.pi) -> float:
    r"""Coincidence probability for ``R_l = 1`` without truncation.

    The alternating sum over l becomes

    .. math::

        \frac{1}{2\pi}\int_0^{2\pi} e^{i[\theta_i(\phi-\alpha) - \theta_s(\phi-\pi-o)]} d\phi,

    which is integrated exactly on the merged breakpoints of both profiles.
    """
    si, ss = segments(plate_i), segments(plate_s)
    shift_i = alpha % TWO_PI
    shift_s = (math.pi + offset) % TWO_PI
    pts = {0.0, TWO_PI}
    for segs, sh in ((si, shift_i), (ss, shift_s)):
        for p0, p1, _, _ in segs:
            for b in (p0, p1):
                pts.add((b + sh) % TWO_PI)
    pts = sorted(pts)
    total = 0.0 + 0.0j
    for u0, u1 in zip(pts, pts[1:]):
        d = u1 - u0
        if d <= 1e-15:
            continue
        mid = u0 + 0.5 * d
        ti, ki = _value_and_slope(si, (mid - shift_i) % TWO_PI)
        ts, ks = _value_and_slope(ss, (mid - shift_s) % TWO_PI)
        a = ki - ks
        total += np.exp(1j * (ti - ts)) * d * np.sinc(a * d / TWO_PI)
    return float(abs(total / TWO_PI) ** 2)


def coincidence_general(plate_i: PlateSpec, plate_s: PlateSpec, alpha,
                        table: RadialTable, lmax: int | None = None,
                        offset: float = math.pi,
                        ctl: SeriesControl | None = None):
    """Coincidence probability from the truncated coherent OAM sum.

    Parameters
    ----------
    plate_i, plate_s : PlateSpec
        Idler plate (applied with ``+theta``) and signal plate (``-theta``).
    alpha : float or array
        Idler plate rotation relative to the signal plate (rad).
    table : RadialTable
        Radial weights. A table with ``s == 1`` is handled by
        :func:`coincidence_exact_s1` unless ``lmax`` is given.
    lmax : int, optional
        Largest ``|l|`` kept; defaults to the table length.
    offset : float
        Fixed rotation of the signal plate's reference axis (rad).
    """
    ctl = ctl or SeriesControl()
    scalar = np.ndim(alpha) == 0
    if table.s == 1.0 and lmax is None:
        out = np.array([coincidence_exact_s1(plate_i, plate_s, a, offset)
                        for a in np.atleast_1d(alpha)])
    else:
        out = _engine(plate_i, plate_s, alpha, table, lmax, offset, ctl)
    return float(out[0]) if scalar else out


# -- closed forms ------------------------------------------------------------

def _weights(s: float, lmax: int | None) -> np.ndarray:
    if lmax is None:
        lmax = default_lmax(s)
    return radial_table(s, lmax).values


def ad_limit(alpha, beta: float, eta: float):
    """Angular-diaphragm curve for ``s -> 1`` (alpha in ``[0, 2 pi]``)."""
    a = np.mod(np.asarray(alpha, dtype=float), TWO_PI)
    if is_integer_eta(eta):
        return np.ones_like(a) if a.ndim else 1.0
    cot2 = 1.0 / math.tan(math.pi * eta) ** 2
    out = math.pi ** 2 * (math.pi * (cot2 - 1.0) + np.abs(TWO_PI - a - beta) + np.abs(a - beta)) ** 2
    return out if out.ndim else float(out)


def spp_limit(alpha, eta: float):
    """Spiral-phase-plate curve for ``s -> 1``: a parabola in ``alpha - pi``."""
    a = np.mod(np.asarray(alpha, dtype=float), TWO_PI)
    if is_integer_eta(eta):
        return np.ones_like(a) if a.ndim else 1.0
    sn = math.sin(math.pi * eta)
    cot2 = (math.cos(math.pi * eta) / sn) ** 2
    out = math.pi ** 2 * (math.pi ** 2 * cot2 + (a - math.pi) ** 2) / sn ** 2
    return out if out.ndim else float(out)


def ad_closed(alpha, beta: float, eta: float, s: float, lmax: int | None = None):
    """Angular-diaphragm coincidence curve (unnormalised).

    ``[R_0((beta-pi)^2 + pi^2 cot^2(pi eta)) + 8 sum_l R_l cos(l alpha) sin^2(l beta/2)/l^2]^2``.
    Integer ``eta`` makes the plate an identity and returns the constant 1;
    ``s == 1`` uses :func:`ad_limit`.
    """
    a = np.asarray(alpha, dtype=float)
    if is_integer_eta(eta):
        return np.ones_like(a) if a.ndim else 1.0
    if s == 1.0 and lmax is None:
        return ad_limit(alpha, beta, eta)
    r = _weights(s, lmax)
    ell = np.arange(1, r.size)
    c = 8.0 * r[1:] * np.sin(0.5 * ell * beta) ** 2 / ell ** 2
    head = (beta - math.pi) ** 2 + (math.pi / math.tan(math.pi * eta)) ** 2
    bracket = head + np.cos(np.multiply.outer(np.atleast_1d(a), ell)) @ c
    out = bracket ** 2
    return out if a.ndim else float(out[0])


def spp_closed(alpha, eta: float, s: float, lmax: int | None = None):
    """Spiral-phase-plate coincidence curve ``|sum_l R_l e^{i l alpha} (l+eta)^-2|^2``.

    Integer ``eta`` shifts the OAM by a whole number: the curve is the
    constant ``R_|eta|(s)^2`` and a warning is issued. ``s == 1`` uses
    :func:`spp_limit`.
    """
    a = np.asarray(alpha, dtype=float)
    if is_integer_eta(eta):
        warnings.warn("integer eta: spiral phase plate gives a constant profile",
                      RuntimeWarning, stacklevel=2)
        v = r_ell(s, int(round(eta))) ** 2
        return np.full_like(a, v) if a.ndim else v
    if s == 1.0 and lmax is None:
        return spp_limit(alpha, eta)
    r = _weights(s, lmax)
    lm = r.size - 1
    ell = np.arange(-lm, lm + 1)
    c = r[np.abs(ell)] / (ell + eta) ** 2
    amp = np.exp(1j * np.multiply.outer(np.atleast_1d(a), ell)) @ c
    out = np.abs(amp) ** 2
    return out if a.ndim else float(out[0])


# -- curves ------------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceCurve:
    """Raw and normalised coincidence values on an orientation grid.

    ``norm_mode`` is ``"alpha0"`` when normalised by the value at alpha = 0
    and ``"max"`` when that value vanished and the maximum was used instead.
    """

    alphas: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    norm_mode: str = "alpha0"


@dataclass(frozen=True)
class CurveModel:
    """A complementary plate pair together with the radial parameter.

    ``method`` is ``"closed"`` (AD/SPP closed forms) or ``"engine"``
    (general coherent sum; required for custom plates).
    """

    plate: PlateSpec
    s: float
    method: str = "closed"
    offset: float = math.pi
    lmax: int | None = None
    signal_plate: PlateSpec | None = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"s must lie in [0, 1], got {self.s}")
        if self.method not in ("closed", "engine"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "closed" and not isinstance(self.plate, (AngularDiaphragm, SpiralPhasePlate)):
            raise ValueError("closed forms exist only for angular diaphragms and spiral phase plates")

    def evaluate(self, alphas) -> np.ndarray:
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        p = self.plate
        if self.method == "closed":
            if isinstance(p, AngularDiaphragm):
                return np.asarray(ad_closed(alphas, p.beta, p.eta, self.s, self.lmax))
            return np.asarray(spp_closed(alphas, p.eta, self.s, self.lmax))
        ps = self.signal_plate if self.signal_plate is not None else p
        if self.s == 1.0 and self.lmax is None:
            table = radial_table(1.0, 1)
            return np.asarray(coincidence_general(p, ps, alphas, table, None, self.offset))
        table = radial_table(self.s, self.lmax)
        return np.asarray(coincidence_general(p, ps, alphas, table, self.lmax, self.offset))


def normalize(alphas, raw):
    """Divide by the value at alpha = 0, falling back to the maximum."""
    alphas = np.asarray(alphas, dtype=float)
    raw = np.asarray(raw, dtype=float)
    zero = np.flatnonzero(np.abs(np.mod(alphas + math.pi, TWO_PI) - math.pi) < 1e-12)
    if zero.size == 0:
        raise ValueError("the orientation grid must contain alpha = 0")
    ref = raw[zero[0]]
    peak = np.max(raw)
    if ref > 1e-14 * max(peak, 1e-300):
        return raw / ref, "alpha0"
    warnings.warn("coincidence vanishes at alpha = 0; normalising by the maximum",
                  RuntimeWarning, stacklevel=2)
    if peak <= 0.0:
        return np.zeros_like(raw), "max"
    return raw / peak, "max"


def curve(model: CurveModel, alphas) -> CoincidenceCurve:
    """Sweep ``model`` over ``alphas`` and normalise by the alpha = 0 value."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if alphas.size == 0:
        raise ValueError("empty orientation grid")
    raw = np.clip(model.evaluate(alphas), 0.0, None)
    norm, mode = normalize(alphas, raw)
    return CoincidenceCurve(alphas, raw, norm, mode)


def visibility(values) -> float:
    """``(max - min) / (max + min)`` of a curve or raw array."""
    v = values.raw if isinstance(values, CoincidenceCurve) else np.asarray(values, dtype=float)
    hi, lo = float(np.max(v)), float(np.min(v))
    return 0.0 if hi + lo == 0.0 else (hi - lo) / (hi + lo)
