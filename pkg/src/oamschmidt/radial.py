r"""Radial overlap weights between Schmidt modes and fundamental fiber modes.

For fundamental-mode detection, the weight of OAM channel :math:`\ell` is

.. math::

    R_\ell(s) = \frac{\Gamma^2(1+|\ell|/2)}{\Gamma(1+|\ell|)}
        F\!\left(\tfrac{|\ell|}{2}, \tfrac{|\ell|}{2}; 1+|\ell|; s^2\right) s^{|\ell|},

which depends on the source and the detection widths only through

.. math::

    s = \frac{2\xi}{1 + \xi^2 + (1-\xi^2)(w_S/w_G)^2}.

:func:`r_ell_oracle` evaluates the defining overlap integrals directly by
quadrature and is used to cross-check the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._quad import gauss_legendre
from .amplitude import ModeIndex, SourceParams, lg_radial_position, schmidt_lambda, schmidt_width, xi
from .specfun import SeriesControl, SeriesConvergenceError, diag_series_scaled

__all__ = [
    "DetectionParams",
    "RadialTable",
    "s_param",
    "mu_ratio",
    "r_ell",
    "r_ell_prefactor",
    "r_ell_full",
    "r_ell_oracle",
    "radial_table",
    "decay_ratio",
    "default_lmax",
    "RADIAL_CONTROL",
]

# Near s = 1 with large l the Gauss series needs a few times 10^4 terms.
RADIAL_CONTROL = SeriesControl(rel_tol=1e-13, max_terms=200_000)


@dataclass(frozen=True)
class DetectionParams:
    """Fiber-mode width ``w_G`` (um) at the plate plane."""

    w_G: float

    def __post_init__(self):
        if not self.w_G > 0:
            raise ValueError(f"w_G must be positive, got {self.w_G}")


def s_param(p: SourceParams, d: DetectionParams) -> float:
    """The single radial parameter ``s`` in ``[0, 1)``."""
    x = xi(p)
    ratio2 = schmidt_width(p) ** 2 / d.w_G ** 2
    return 2.0 * x / (1.0 + x * x + (1.0 - x * x) * ratio2)


def mu_ratio(p: SourceParams, d: DetectionParams) -> float:
    """Width ratio ``w0 / w_G``."""
    return p.w0 / d.w_G


def r_ell(s: float, ell: int, ctl: SeriesControl | None = None) -> float:
    """Radial weight ``R_l(s)`` for ``0 <= s <= 1``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    l = abs(int(ell))
    if l == 0:
        return 1.0
    if s == 0.0:
        return 0.0
    ctl = ctl or RADIAL_CONTROL
    # fold the gamma ratio and s^l into the leading series term
    log_scale = 2.0 * math.lgamma(1.0 + 0.5 * l) - math.lgamma(1.0 + l) + l * math.log(s)
    val = diag_series_scaled(l, s * s, log_scale, ctl)
    return min(val, 1.0) if s == 1.0 else val


def r_ell_prefactor(p: SourceParams, d: DetectionParams) -> float:
    """The l-independent factor ``(1-xi^2) / [1 + (1-xi^2)/4 (wS/wG - wG/wS)^2]``."""
    x2 = xi(p) ** 2
    ratio = schmidt_width(p) / d.w_G
    return (1.0 - x2) / (1.0 + 0.25 * (1.0 - x2) * (ratio - 1.0 / ratio) ** 2)


def r_ell_full(p: SourceParams, d: DetectionParams, ell: int,
               ctl: SeriesControl | None = None) -> float:
    """Radial weight including the l-independent prefactor."""
    return r_ell_prefactor(p, d) * r_ell(s_param(p, d), ell, ctl)


def r_ell_oracle(p: SourceParams, d: DetectionParams, ell: int,
                 ctl: SeriesControl | None = None, nodes: int = 400,
                 max_radial: int = 2000) -> float:
    """Radial weight from direct quadrature of the defining overlaps.

    Sums ``sqrt(lambda_{l n}) * O_n^2`` over ``n``, where ``O_n`` is the
    position-space overlap of the fiber mode (width ``w_G``) with the Schmidt
    mode ``(l, n)`` (width ``w_S``). The sum stops once a term falls below
    ``rel_tol`` times the running total and the eigenvalue tail is also
    negligible.
    """
    ctl = ctl or SeriesControl()
    ws = schmidt_width(p)
    x = xi(p)
    l = abs(int(ell))
    if x == 0.0 and l:
        return 0.0
    r, wt = gauss_legendre(nodes, 0.0, 8.0 * max(ws, d.w_G))
    fiber = lg_radial_position(ModeIndex(0, 0), d.w_G, r) * r * wt
    total = 0.0
    for n in range(max_radial):
        lam = schmidt_lambda(p, ModeIndex(l, n))
        if lam == 0.0:
            return total
        ov = float(np.dot(fiber, lg_radial_position(ModeIndex(l, n), ws, r)))
        term = math.sqrt(lam) * ov * ov
        total += term
        # remaining sqrt(lambda) decay geometrically with ratio xi^2; overlaps are <= 1
        tail = math.sqrt(lam) * x * x / (1.0 - x * x)
        if n > 0 and term <= ctl.rel_tol * total and tail <= ctl.rel_tol * total:
            return total
    raise SeriesConvergenceError("radial oracle did not converge", term / total if total else math.inf)


def decay_ratio(s: float) -> float:
    """Asymptotic ratio ``R_{l+1}/R_l`` for large l."""
    return s / (1.0 + math.sqrt(max(0.0, 1.0 - s * s)))


def default_lmax(s: float, tol: float = 1e-14, floor: int = 64, cap: int = 20_000) -> int:
    """Number of OAM channels needed for the weights to fall below ``tol``."""
    if s <= 0.0:
        return floor
    if s >= 1.0:
        return cap
    rho = decay_ratio(s)
    return int(min(cap, max(floor, math.ceil(math.log(tol) / math.log(rho)))))


@dataclass(frozen=True)
class RadialTable:
    """Weights ``R_0 .. R_Lmax`` at a fixed ``s``."""

    s: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.size == 0 or vals[0] != 1.0:
            raise ValueError("table must start with R_0 = 1")
        if np.any(vals < 0) or np.any(vals > 1.0 + 1e-12):
            raise ValueError("weights must lie in [0, 1]")

    @property
    def lmax(self) -> int:
        return self.values.size - 1

    def __call__(self, ell: int) -> float:
        l = abs(int(ell))
        return float(self.values[l]) if l <= self.lmax else 0.0


@lru_cache(maxsize=256)
def _table_values(s: float, lmax: int) -> tuple:
    if s == 0.0:
        return (1.0,) + (0.0,) * lmax
    if s == 1.0:
        return (1.0,) * (lmax + 1)
    out = [1.0]
    for l in range(1, lmax + 1):
        v = r_ell(s, l)
        out.append(v)
        if v == 0.0:
            out.extend([0.0] * (lmax - l))
            break
    return tuple(out)


def radial_table(s: float, lmax: int | None = None) -> RadialTable:
    """Build a :class:`RadialTable` for ``l = 0..lmax``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if lmax is None:
        lmax = default_lmax(s)
    return RadialTable(float(s), np.array(_table_values(float(s), int(lmax))))
