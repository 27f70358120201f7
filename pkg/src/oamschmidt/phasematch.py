r"""Collinear type-II phase matching and its Gaussian approximation.

Frequency-degenerate operation only: signal and idler both sit at twice the
pump wavelength, with vacuum wavenumbers ``k_s = k_i = k_p / 2``. Wave vectors
are in rad/um, the crystal length ``L`` in mm, wavelengths in um.

The full mismatch :func:`delta_full` keeps the walk-off terms linear in the
x components and the anisotropic quadratic terms. With equal constant
indices it collapses to :func:`delta_iso`,
``|q_i - q_s|^2 / (2 k_p n_eff)``, whose exponential
``exp(-delta_iso L / 2)`` is the Gaussian phase-matching model with
effective width ``b = sqrt(L / (k_p n_eff))``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .amplitude import TransverseVec

__all__ = [
    "IndexTable",
    "CrystalConfig",
    "AngularIndices",
    "angular_indices",
    "delta_full",
    "delta_iso",
    "phase_matching_angle",
    "ProfileComparison",
    "compare_profiles",
    "NeffFit",
    "fit_neff",
    "walkoff_slope",
    "small_signal_neff",
    "effective_b",
    "read_index_csv",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
NEFF_BOUNDS = (0.1, 10.0)


@dataclass(frozen=True)
class IndexTable:
    """Refractive index, piecewise linear in wavelength (um).

    A single-entry table is a constant valid at every wavelength.
    """

    wavelengths: tuple
    values: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.wavelengths)
        n = tuple(float(v) for v in self.values)
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "values", n)
        if len(lam) != len(n) or not lam:
            raise ValueError("wavelengths and values must be nonempty and equal length")
        if any(v <= 1.0 for v in n):
            raise ValueError("refractive indices must exceed 1")
        if any(b <= a for a, b in zip(lam, lam[1:])):
            raise ValueError("wavelengths must be strictly increasing")
        d = np.diff(n)
        if not (np.all(d <= 0) or np.all(d >= 0)):
            raise ValueError("index table must be monotone in wavelength")

    @classmethod
    def constant(cls, n: float) -> "IndexTable":
        return cls((1.0,), (n,))

    @property
    def is_constant(self) -> bool:
        return len(self.values) == 1

    def __call__(self, wavelength: float) -> float:
        if self.is_constant:
            return self.values[0]
        lo, hi = self.wavelengths[0], self.wavelengths[-1]
        if not lo - 1e-12 <= wavelength <= hi + 1e-12:
            raise ValueError(f"wavelength {wavelength} um outside table range [{lo}, {hi}]")
        return float(np.interp(wavelength, self.wavelengths, self.values))


def read_index_csv(path) -> IndexTable:
    """Read a table with header ``lambda_um,n``."""
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or [c.strip() for c in rd.fieldnames] != ["lambda_um", "n"]:
            raise ValueError(f"expected header lambda_um,n, got {rd.fieldnames}")
        rows = [(float(r["lambda_um"]), float(r["n"])) for r in rd]
    if not rows:
        raise ValueError(f"{path}: empty index table")
    return IndexTable(tuple(r[0] for r in rows), tuple(r[1] for r in rows))


@dataclass(frozen=True)
class CrystalConfig:
    """Crystal length ``L`` (mm), pump wavelength (um), optical-axis angle (rad)."""

    L: float
    lambda_p: float
    theta_oa: float
    n_o: IndexTable
    n_e: IndexTable

    def __post_init__(self):
        if not (self.L > 0 and self.lambda_p > 0):
            raise ValueError("L and lambda_p must be positive")

    @property
    def k_p(self) -> float:
        """Vacuum pump wavenumber (rad/um)."""
        return 2.0 * math.pi / self.lambda_p

    @property
    def L_um(self) -> float:
        return 1000.0 * self.L

    def with_theta(self, theta: float) -> "CrystalConfig":
        return CrystalConfig(self.L, self.lambda_p, theta, self.n_o, self.n_e)


class AngularIndices(NamedTuple):
    """``n_e(theta)``, its derivative in theta, and ``1/n~^2 = 1/n_o^2 - 1/n_e^2``.

    The inverse square is returned rather than ``n~`` itself, which is
    infinite without birefringence.
    """

    n_e_theta: float
    dn_e_dtheta: float
    inv_n_tilde_sq: float


def _angular(theta: float, no: float, ne: float) -> AngularIndices:
    inv = math.sin(theta) ** 2 / ne ** 2 + math.cos(theta) ** 2 / no ** 2
    n_th = 1.0 / math.sqrt(inv)
    inv_tilde = 1.0 / no ** 2 - 1.0 / ne ** 2
    d = 0.5 * n_th ** 3 * math.sin(2.0 * theta) * inv_tilde
    return AngularIndices(n_th, d, inv_tilde)


def angular_indices(cfg: CrystalConfig, wavelength: float) -> AngularIndices:
    """Angle-dependent index combinations at ``wavelength`` (um)."""
    return _angular(cfg.theta_oa, cfg.n_o(wavelength), cfg.n_e(wavelength))


def delta_full(cfg: CrystalConfig, qi: TransverseVec, qs: TransverseVec):
    """Phase mismatch (rad/um) in the collinear, frequency-degenerate regime.

    Sum of the on-axis mismatch, walk-off terms linear in ``q_ix`` and
    ``q_sx``, and quadratic transverse terms; the idler is ordinary and the
    signal extraordinary.
    """
    kp = cfg.k_p
    ks = ki = 0.5 * kp
    lam_p, lam_s = cfg.lambda_p, 2.0 * cfg.lambda_p
    th = cfg.theta_oa
    qmax = np.max(np.abs([qi.qx, qi.qy, qs.qx, qs.qy]))
    if qmax >= 0.1 * kp:
        warnings.warn("transverse wave vector outside the collinear regime (|q| >= 0.1 k_p)",
                      RuntimeWarning, stacklevel=2)
    no_p, ne_p = cfg.n_o(lam_p), cfg.n_e(lam_p)
    no_s, ne_s = cfg.n_o(lam_s), cfg.n_e(lam_s)
    nep, _, itp = _angular(th, no_p, ne_p)
    nes, _, its = _angular(th, no_s, ne_s)
    s2 = 0.5 * math.sin(2.0 * th)

    d = kp * nep - ks * nes - ki * no_s
    d = d + qs.qx * s2 * (nep ** 2 * itp + nes ** 2 * its) + qi.qx * s2 * nep ** 2 * itp
    d = d - nes / (2.0 * ne_p ** 2 * kp) * (
        (qi.qy + qs.qy) ** 2 + (qi.qx + qs.qx) ** 2 * nep ** 2 / no_p ** 2)
    d = d + nes ** 3 / (2.0 * ne_s ** 2 * no_s ** 2 * ks) * qs.qx ** 2
    d = d + nes / (2.0 * ne_s ** 2 * ks) * qs.qy ** 2
    d = d + (qi.qx ** 2 + qi.qy ** 2) / (2.0 * no_s * ki)
    return d


def delta_iso(n_eff: float, k_p: float, qi: TransverseVec, qs: TransverseVec):
    """Isotropic mismatch ``|q_i - q_s|^2 / (2 k_p n_eff)``."""
    if not n_eff > 0:
        raise ValueError(f"n_eff must be positive, got {n_eff}")
    return (qi - qs).norm2() / (2.0 * k_p * n_eff)


def phase_matching_angle(cfg: CrystalConfig, lo: float = 1e-3,
                         hi: float = 0.5 * math.pi - 1e-3) -> float:
    """Optical-axis angle that zeroes the on-axis mismatch."""
    zero = TransverseVec(0.0, 0.0)

    def f(th):
        return delta_full(cfg.with_theta(th), zero, zero)

    if f(lo) * f(hi) > 0:
        raise ValueError("no phase-matching angle in range for these indices")
    return brentq(f, lo, hi, xtol=1e-14)


# -- sinc versus Gaussian profiles -----------------------------------------

def _pairs(dq, psi):
    # opposite wave vectors q_s = -q_i = dq/2 (cos psi, sin psi)
    dq = np.asarray(dq, dtype=float)
    qs = TransverseVec(0.5 * dq * math.cos(psi), 0.5 * dq * math.sin(psi))
    return -qs, qs


class ProfileComparison(NamedTuple):
    dq: np.ndarray
    sinc: np.ndarray
    gauss: np.ndarray
    rel_l2_error: float
    mask: np.ndarray
    x: np.ndarray


def compare_profiles(cfg: CrystalConfig, n_eff: float, dq, pinhole: float,
                     psi: float = 0.0) -> ProfileComparison:
    """Compare ``sinc(delta_full L/2)`` with ``exp(-delta_iso L/2)``.

    Samples opposite wave vectors separated by ``dq`` (signed, rad/um) along
    azimuth ``psi``. The pinhole passes ``|dq| <= pinhole``; the relative L2
    error is taken over that region only.
    """
    dq = np.asarray(dq, dtype=float)
    if dq.ndim != 1 or dq.size < 2:
        raise ValueError("the dq grid needs at least two points")
    mask = np.abs(dq) <= pinhole
    if np.count_nonzero(mask) < 2:
        raise ValueError("pinhole passes fewer than two grid points")
    qi, qs = _pairs(dq, psi)
    x = delta_full(cfg, qi, qs) * cfg.L_um / 2.0
    sinc = np.sinc(x / math.pi)
    gauss = np.exp(-delta_iso(n_eff, cfg.k_p, qi, qs) * cfg.L_um / 2.0)
    num = np.linalg.norm((sinc - gauss)[mask])
    den = np.linalg.norm(sinc[mask])
    return ProfileComparison(dq, sinc, gauss, float(num / den), mask, x)


class NeffFit(NamedTuple):
    n_eff: float
    rel_l2_error: float
    at_boundary: bool


def fit_neff(cfg: CrystalConfig, dq, pinhole: float, psi: float = 0.0,
             tol: float = 1e-8) -> NeffFit:
    """Effective index minimising the relative L2 mismatch of :func:`compare_profiles`.

    Golden-section search over ``n_eff`` in ``(0.1, 10)``. A minimum within
    ``1e-4`` of either end is flagged.
    """
    def err(n):
        return compare_profiles(cfg, n, dq, pinhole, psi).rel_l2_error

    a, b = NEFF_BOUNDS
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = err(c), err(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = err(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = err(d)
    n = 0.5 * (a + b)
    edge = min(n - NEFF_BOUNDS[0], NEFF_BOUNDS[1] - n) < 1e-4
    return NeffFit(n, err(n), edge)


def walkoff_slope(cfg: CrystalConfig, psi: float = 0.0, h: float = 1e-6) -> float:
    """Linear coefficient of ``delta_full`` in ``dq`` along azimuth ``psi``."""
    qi_p, qs_p = _pairs(h, psi)
    qi_m, qs_m = _pairs(-h, psi)
    return float((delta_full(cfg, qi_p, qs_p) - delta_full(cfg, qi_m, qs_m)) / (2.0 * h))


def small_signal_neff(cfg: CrystalConfig, psi: float = 0.0) -> float:
    """``n_eff`` matching the quadratic terms of both profiles near ``dq = 0``.

    With a walk-off slope ``kappa``, ``sinc(kappa dq L/2) ~ 1 - (kappa L)^2 dq^2/24``
    while the Gaussian gives ``1 - L dq^2 / (4 k_p n_eff)``, so
    ``n_eff = 6 / (k_p L kappa^2)``. Without walk-off there is no quadratic
    term in the sinc and no finite match.
    """
    kappa = walkoff_slope(cfg, psi)
    if kappa == 0.0:
        return math.inf
    return 6.0 / (cfg.k_p * cfg.L_um * kappa * kappa)


def effective_b(L: float, lambda_p: float, n_eff: float) -> float:
    """Gaussian phase-matching width ``sqrt(L / (k_p n_eff))`` in um.

    ``L`` in mm, ``lambda_p`` in um.
    """
    if not (L > 0 and lambda_p > 0 and n_eff > 0):
        raise ValueError("L, lambda_p and n_eff must be positive")
    kp = 2.0 * math.pi / lambda_p
    return math.sqrt(1000.0 * L / (kp * n_eff))
