r"""Azimuthal phase plates and their spiral-harmonic impulse responses.

A plate imprints :math:`e^{i\theta(\phi)}` on the field. Its coefficients

.. math::

    h_{\ell',\ell} = \frac{1}{2\pi}\int_0^{2\pi}
        e^{i(\ell-\ell')\phi}\, e^{i\sigma\theta(\phi-\alpha)}\, d\phi

are evaluated in closed form for profiles that are linear on each of a finite
set of azimuthal segments. :math:`\sigma = \pm 1` selects the idler plate or
its complementary signal plate (:math:`\theta_s = -\theta_i`).

Two built-in plates:

* angular diaphragm: :math:`\theta = 0` inside a wedge :math:`[0, \beta)` and
  :math:`2\pi\eta` outside it;
* spiral phase plate: :math:`\theta = \eta\phi`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "AngularDiaphragm",
    "SpiralPhasePlate",
    "Custom",
    "PlateSpec",
    "Orientation",
    "segments",
    "phase_profile",
    "impulse_coeff",
    "impulse_row",
    "unitarity_defect",
    "read_custom_csv",
    "is_integer_eta",
]

TWO_PI = 2.0 * math.pi
_PARTITION_TOL = 1e-9


def is_integer_eta(eta: float, tol: float = 1e-9) -> bool:
    return abs(eta - round(eta)) < tol


@dataclass(frozen=True)
class AngularDiaphragm:
    """Binary step plate: phase 0 on ``[0, beta)`` and ``2 pi eta`` elsewhere."""

    beta: float
    eta: float

    def __post_init__(self):
        if not 0.0 < self.beta < TWO_PI:
            raise ValueError(f"beta must lie in (0, 2pi), got {self.beta}")


@dataclass(frozen=True)
class SpiralPhasePlate:
    """Linear ramp ``theta = eta * phi``."""

    eta: float


@dataclass(frozen=True)
class Custom:
    """Piecewise-linear profile.

    ``segments`` holds ``(phi_start, phi_end, theta_start, theta_end)`` tuples
    (radians) that must tile ``[0, 2 pi)`` in order.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple(tuple(float(v) for v in seg) for seg in self.segments)
        object.__setattr__(self, "segments", segs)
        _validate(segs)


PlateSpec = Union[AngularDiaphragm, SpiralPhasePlate, Custom]


@dataclass(frozen=True)
class Orientation:
    """Plate rotation angle (rad), reduced to ``[0, 2 pi)``."""

    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", math.fmod(self.alpha, TWO_PI) % TWO_PI)


def _validate(segs):
    if not segs:
        raise ValueError("a custom plate needs at least one segment")
    if any(len(s) != 4 for s in segs):
        raise ValueError("each segment needs phi_start, phi_end, theta_start, theta_end")
    if abs(segs[0][0]) > _PARTITION_TOL:
        raise ValueError(f"first segment must start at 0, got {segs[0][0]}")
    if abs(segs[-1][1] - TWO_PI) > _PARTITION_TOL:
        raise ValueError(f"last segment must end at 2pi, got {segs[-1][1]}")
    for a, b in zip(segs, segs[1:]):
        if abs(a[1] - b[0]) > _PARTITION_TOL:
            raise ValueError(f"segments leave a gap or overlap at phi={a[1]}")
    for s in segs:
        if not s[1] > s[0]:
            raise ValueError(f"segment [{s[0]}, {s[1]}) is empty or reversed")


def segments(p: PlateSpec):
    """The plate as a list of linear-phase segments."""
    if isinstance(p, AngularDiaphragm):
        step = TWO_PI * p.eta
        return [(0.0, p.beta, 0.0, 0.0), (p.beta, TWO_PI, step, step)]
    if isinstance(p, SpiralPhasePlate):
        return [(0.0, TWO_PI, 0.0, TWO_PI * p.eta)]
    if isinstance(p, Custom):
        return list(p.segments)
    raise TypeError(f"unknown plate type {type(p).__name__}")


def phase_profile(p: PlateSpec, sign: int, phi):
    """Phase ``sign * theta(phi)`` of the plate at orientation zero."""
    phi = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    out = np.zeros_like(phi)
    for p0, p1, t0, t1 in segments(p):
        sel = (phi >= p0) & (phi < p1)
        out = np.where(sel, t0 + (t1 - t0) / (p1 - p0) * (phi - p0), out)
    out = sign * out
    return out if out.ndim else float(out)


def _coeff_at_zero(segs, sign: int, m: np.ndarray) -> np.ndarray:
    # (1/2pi) int e^{i m phi} e^{i sign theta(phi)} dphi, segment by segment.
    # np.sinc keeps the near-resonant case (m + sign*slope -> 0) exact.
    total = np.zeros(m.shape, dtype=complex)
    for p0, p1, t0, t1 in segs:
        d = p1 - p0
        k = (t1 - t0) / d
        a = m + sign * k
        # phase at the segment midpoint times the exact segment integral
        mid = p0 + 0.5 * d
        total += np.exp(1j * (m * mid + sign * (t0 + k * 0.5 * d))) * d * np.sinc(a * d / TWO_PI)
    return total / TWO_PI


def impulse_row(p: PlateSpec, sign: int, alpha: float, ell_out, ell_in):
    """Vectorised :func:`impulse_coeff`; ``ell_out`` and ``ell_in`` broadcast."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    m = np.asarray(ell_in, dtype=float) - np.asarray(ell_out, dtype=float)
    return _coeff_at_zero(segments(p), sign, m) * np.exp(1j * m * alpha)


def impulse_coeff(p: PlateSpec, sign: int, o: Orientation, ell_out: int, ell_in: int) -> complex:
    """Coefficient ``h_{ell_out, ell_in}`` of the plate rotated by ``o.alpha``."""
    return complex(impulse_row(p, sign, o.alpha, ell_out, ell_in))


def unitarity_defect(p: PlateSpec, sign: int, o: Orientation, L: int,
                     cutoff: int | None = None) -> float:
    """Largest entry of ``|H^dagger H - 1|`` for inputs ``|l| <= L``.

    ``H`` keeps output charges ``|l'| <= cutoff`` (default ``3 L``); the defect
    measures the probability lost to the discarded outputs.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    cutoff = 3 * L if cutoff is None else cutoff
    lout = np.arange(-cutoff, cutoff + 1)[:, None]
    lin = np.arange(-L, L + 1)[None, :]
    h = impulse_row(p, sign, o.alpha, lout, lin)
    gram = h.conj().T @ h
    return float(np.max(np.abs(gram - np.eye(2 * L + 1))))


def read_custom_csv(path) -> Custom:
    """Read a plate from CSV with header ``phi_start,phi_end,theta_start,theta_end``."""
    cols = ["phi_start", "phi_end", "theta_start", "theta_end"]
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or [c.strip() for c in rd.fieldnames] != cols:
            raise ValueError(f"expected header {','.join(cols)}, got {rd.fieldnames}")
        segs = []
        for row in rd:
            segs.append(tuple(float(row[c]) for c in cols))
    return Custom(tuple(segs))
