r"""Double-Gaussian two-photon amplitude and its Schmidt decomposition.

Units: lengths in micrometres, transverse wave vectors in rad/um.

The amplitude

.. math::

    \Phi(\mathbf q_i, \mathbf q_s) = \frac{w_0 b}{\pi}
        e^{-w_0^2 |\mathbf q_i + \mathbf q_s|^2 / 4}
        e^{-b^2 |\mathbf q_i - \mathbf q_s|^2 / 4}

has Laguerre-Gaussian Schmidt modes of width :math:`w_S = \sqrt{2 w_0 b}` and
eigenvalues :math:`\lambda_{\ell n} = (1-\xi^2)^2 \xi^{2|\ell| + 4n}` with
:math:`\xi = (w_0 - b)/(w_0 + b)`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._quad import gauss_legendre
from .specfun import assoc_laguerre, bessel_i_scaled, ln_gamma

__all__ = [
    "SourceParams",
    "ModeIndex",
    "TransverseVec",
    "xi",
    "schmidt_lambda",
    "schmidt_number_closed",
    "schmidt_number_truncated",
    "lambda_sum_truncated",
    "default_truncation",
    "schmidt_width",
    "beam_width",
    "lg_radial",
    "lg_radial_position",
    "lg_phase",
    "lg_mode",
    "two_photon_amplitude",
    "reconstruct_amplitude",
    "schmidt_coefficient",
    "mode_overlap",
    "spectrum_rows",
    "spectrum_csv",
]


@dataclass(frozen=True)
class SourceParams:
    """Pump waist ``w0`` and phase-matching width ``b``, both in um."""

    w0: float
    b: float

    def __post_init__(self):
        if not (self.w0 > 0 and self.b > 0):
            raise ValueError(f"widths must be positive, got w0={self.w0}, b={self.b}")
        if self.b > self.w0:
            raise ValueError(f"need b <= w0, got b={self.b} > w0={self.w0}")


@dataclass(frozen=True)
class ModeIndex:
    """Topological charge ``ell`` and radial index ``n``."""

    ell: int
    n: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"radial index must be >= 0, got {self.n}")


@dataclass(frozen=True)
class TransverseVec:
    """Transverse wave vector (rad/um). Components may be numpy arrays."""

    qx: float | np.ndarray
    qy: float | np.ndarray

    @classmethod
    def from_polar(cls, q, phi) -> "TransverseVec":
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise ValueError("radial component must be >= 0")
        return cls(q * np.cos(phi), q * np.sin(phi))

    @property
    def q(self):
        return np.hypot(self.qx, self.qy)

    @property
    def phi(self):
        return np.mod(np.arctan2(self.qy, self.qx), 2.0 * np.pi)

    def __add__(self, other: "TransverseVec") -> "TransverseVec":
        return TransverseVec(self.qx + other.qx, self.qy + other.qy)

    def __sub__(self, other: "TransverseVec") -> "TransverseVec":
        return TransverseVec(self.qx - other.qx, self.qy - other.qy)

    def __neg__(self) -> "TransverseVec":
        return TransverseVec(-self.qx, -self.qy)

    def norm2(self):
        return self.qx * self.qx + self.qy * self.qy


# -- Schmidt spectrum --------------------------------------------------------

def xi(p: SourceParams) -> float:
    """Decay ratio ``(w0 - b)/(w0 + b)`` of the Schmidt spectrum."""
    return (p.w0 - p.b) / (p.w0 + p.b)


def schmidt_lambda(p: SourceParams, m: ModeIndex) -> float:
    """Schmidt eigenvalue of mode ``m``."""
    x = xi(p)
    e = 2 * abs(m.ell) + 4 * m.n
    if e == 0:
        return (1.0 - x * x) ** 2
    return (1.0 - x * x) ** 2 * x ** e


def schmidt_number_closed(p: SourceParams) -> float:
    """Schmidt number ``[(1+xi^2)/(1-xi^2)]^2``."""
    x2 = xi(p) ** 2
    return ((1.0 + x2) / (1.0 - x2)) ** 2


def _lambda_grid(p: SourceParams, lmax: int, nmax: int) -> np.ndarray:
    if lmax < 0 or nmax < 0:
        raise ValueError("truncation levels must be >= 0")
    x = xi(p)
    ell = np.abs(np.arange(-lmax, lmax + 1))[:, None]
    n = np.arange(nmax + 1)[None, :]
    if x == 0.0:
        out = np.zeros((2 * lmax + 1, nmax + 1))
        out[lmax, 0] = 1.0
        return out
    return (1.0 - x * x) ** 2 * np.exp((2 * ell + 4 * n) * math.log(x))


def lambda_sum_truncated(p: SourceParams, lmax: int, nmax: int) -> float:
    """Sum of eigenvalues with ``|ell| <= lmax`` and ``n <= nmax``."""
    return math.fsum(_lambda_grid(p, lmax, nmax).ravel())


def schmidt_number_truncated(p: SourceParams, lmax: int, nmax: int) -> float:
    """``1 / sum(lambda^2)`` over the truncated index set.

    Approaches :func:`schmidt_number_closed` from above.
    """
    lam = _lambda_grid(p, lmax, nmax)
    return 1.0 / math.fsum((lam * lam).ravel())


def default_truncation(p: SourceParams, tol: float = 1e-14) -> tuple[int, int]:
    """Default ``(lmax, nmax)``: eigenvalues decay like ``xi^(2|l| + 4n)``."""
    x = xi(p)
    if x <= 0.0:
        lmax = 32
    else:
        lmax = max(32, math.ceil(math.log(tol) / math.log(x) / 2))
    return lmax, max(1, lmax // 2)


def schmidt_width(p: SourceParams) -> float:
    """Width ``sqrt(2 w0 b)`` of the Schmidt modes (um)."""
    return math.sqrt(2.0 * p.w0 * p.b)


def beam_width(p: SourceParams) -> float:
    """Single-photon beam width ``sqrt(2 w0^2 + b^2)`` (um)."""
    return math.sqrt(2.0 * p.w0 ** 2 + p.b ** 2)


# -- Laguerre-Gaussian modes -------------------------------------------------

def lg_radial(m: ModeIndex, w: float, q):
    r"""Real radial profile :math:`v_{\ell,n}(q)` of a momentum-space LG mode.

    .. math::

        v = w \sqrt{\frac{n!}{(|\ell|+n)!}} \left(\frac{wq}{\sqrt2}\right)^{|\ell|}
            L_n^{|\ell|}\!\left(\frac{w^2q^2}{2}\right) e^{-w^2q^2/4}

    Normalised so that ``int v^2 q dq = 1``. The unit-modulus Gouy-type factor
    of the full mode is returned separately by :func:`lg_phase`.
    """
    if not w > 0:
        raise ValueError(f"mode width must be positive, got {w}")
    q = np.asarray(q, dtype=float)
    l = abs(m.ell)
    x = 0.5 * (w * q) ** 2
    norm = math.exp(0.5 * (ln_gamma(m.n + 1) - ln_gamma(l + m.n + 1)))
    out = w * norm * np.sqrt(x) ** l * assoc_laguerre(m.n, l, x) * np.exp(-0.5 * x)
    return out if out.ndim else float(out)


def lg_radial_position(m: ModeIndex, w: float, r):
    """Radial profile of the position-space LG mode of waist ``w`` (um).

    Same functional form as :func:`lg_radial` with the width ``2/w``.
    """
    return lg_radial(m, 2.0 / w, r)


def lg_phase(m: ModeIndex) -> complex:
    """Constant phase ``exp[-i pi/2 (2n + |ell|)]`` of the full mode."""
    return complex(np.exp(-0.5j * np.pi * (2 * m.n + abs(m.ell))))


def lg_mode(m: ModeIndex, w: float, q: TransverseVec, with_phase: bool = True):
    """Full mode ``e^{i ell phi} v(q) / sqrt(2 pi)``, optionally with its phase."""
    val = np.exp(1j * m.ell * q.phi) * lg_radial(m, w, q.q) / math.sqrt(2.0 * math.pi)
    if with_phase:
        val = val * lg_phase(m)
    return val


# -- amplitude and reconstruction -------------------------------------------

def two_photon_amplitude(p: SourceParams, qi: TransverseVec, qs: TransverseVec):
    """Normalised double-Gaussian amplitude (units um^2)."""
    plus = (qi + qs).norm2()
    minus = (qi - qs).norm2()
    return p.w0 * p.b / math.pi * np.exp(-0.25 * (p.w0 ** 2 * plus + p.b ** 2 * minus))


def reconstruct_amplitude(p: SourceParams, qi: TransverseVec, qs: TransverseVec,
                          lmax: int, nmax: int):
    """Truncated Schmidt sum ``sum (-1)^l sqrt(lambda) u_{l,n}(qi) u_{-l,n}(qs)``.

    The modes entering the sum are the phase-free ones (the constant factor of
    :func:`lg_phase` is left out): with it the two factors contribute
    ``(-1)^|l|`` and cancel the alternating sign.
    """
    x = xi(p)
    ws = schmidt_width(p)
    qi_r, qs_r = np.asarray(qi.q, dtype=float), np.asarray(qs.q, dtype=float)
    dphi = np.asarray(qi.phi) - np.asarray(qs.phi)
    total = np.zeros(np.broadcast(qi_r, qs_r, dphi).shape, dtype=complex)
    for ell in range(-lmax, lmax + 1):
        if x == 0.0 and ell != 0:
            continue
        ang = (-1) ** abs(ell) * np.exp(1j * ell * dphi) / (2.0 * math.pi)
        radial = np.zeros_like(total, dtype=float)
        for n in range(nmax + 1):
            lam = schmidt_lambda(p, ModeIndex(ell, n))
            if lam == 0.0:
                break
            m = ModeIndex(ell, n)
            radial = radial + math.sqrt(lam) * lg_radial(m, ws, qi_r) * lg_radial(m, ws, qs_r)
        total = total + ang * radial
    return total if total.ndim else complex(total)


def _radial_rule(widths: Iterable[float], order: int, nodes: int):
    # momentum-space modes fall off on the scale 2/w; extend for higher orders
    wmin = min(widths)
    qmax = 2.0 / wmin * (8.0 + math.sqrt(order))
    return gauss_legendre(nodes, 0.0, qmax)


def schmidt_coefficient(p: SourceParams, ell: int, n_i: int, n_s: int,
                        w: float | None = None, nodes: int = 96) -> float:
    """Expansion coefficient of the amplitude on the pair ``u_{l,n_i} u_{-l,n_s}``.

    The angular integrals are done analytically (Jacobi-Anger), leaving a
    double radial integral with the kernel ``I_l((w0^2 - b^2) q_i q_s / 2)``.
    With ``w`` equal to the Schmidt width the result is
    ``(-1)^l (1 - xi^2) xi^(|l| + 2n)`` for ``n_i = n_s = n`` and zero otherwise.
    Phase-free modes are used.
    """
    w = schmidt_width(p) if w is None else w
    q, wt = _radial_rule([w], 2 * max(n_i, n_s) + abs(ell), nodes)
    vi = lg_radial(ModeIndex(ell, n_i), w, q) * q * wt
    vs = lg_radial(ModeIndex(-ell, n_s), w, q) * q * wt
    qi, qs = np.meshgrid(q, q, indexing="ij")
    x = 0.5 * (p.w0 ** 2 - p.b ** 2) * qi * qs
    scaled = np.vectorize(lambda v: bessel_i_scaled(ell, v))(x)
    kern = np.exp(-0.25 * (p.w0 ** 2 + p.b ** 2) * (qi ** 2 + qs ** 2) + x) * scaled
    return (-1) ** abs(ell) * 2.0 * p.w0 * p.b * float(vi @ kern @ vs)


def mode_overlap(p: SourceParams, mi: ModeIndex, ms: ModeIndex,
                 w: float | None = None, nodes: int = 64, nphi: int = 32) -> complex:
    """Brute-force 4-D projection of the amplitude on ``u_mi(qi) u_ms(qs)``.

    Radial integrals use Gauss-Legendre, azimuthal ones the periodic trapezoid
    rule. No selection rule is assumed. Phase-free modes are used.
    """
    w = schmidt_width(p) if w is None else w
    order = 2 * max(mi.n, ms.n) + max(abs(mi.ell), abs(ms.ell))
    q, wt = _radial_rule([w, p.b * math.sqrt(2.0)], order, nodes)
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    dphi = 2.0 * math.pi / nphi
    vi = lg_radial(mi, w, q) * q * wt
    vs = lg_radial(ms, w, q) * q * wt
    # conj of the azimuthal parts, normalised by 1/sqrt(2 pi) each
    ai = np.exp(-1j * mi.ell * phi) * dphi / math.sqrt(2.0 * math.pi)
    as_ = np.exp(-1j * ms.ell * phi) * dphi / math.sqrt(2.0 * math.pi)
    cosd = np.cos(phi[:, None] - phi[None, :])
    pref = p.w0 * p.b / math.pi
    a = 0.25 * (p.w0 ** 2 + p.b ** 2)
    c = 0.5 * (p.w0 ** 2 - p.b ** 2)
    total = 0.0 + 0.0j
    for k in range(q.size):
        # Phi on (qs, phi_i, phi_s) for fixed |qi|
        expo = -a * (q[k] ** 2 + q[:, None, None] ** 2) - c * q[k] * q[:, None, None] * cosd
        ang = np.einsum("jab,a,b->j", np.exp(expo), ai, as_)
        total += vi[k] * pref * np.dot(ang, vs)
    return complex(total)


# -- export ------------------------------------------------------------------

def spectrum_rows(p: SourceParams, lmax: int, nmax: int):
    """Rows ``(l, n, lambda)`` for the nonzero eigenvalues, ordered by l then n."""
    rows = []
    for ell in range(-lmax, lmax + 1):
        for n in range(nmax + 1):
            lam = schmidt_lambda(p, ModeIndex(ell, n))
            if lam > 0.0:
                rows.append((ell, n, lam))
    return rows


def spectrum_csv(rows) -> str:
    """CSV text with header ``l,n,lambda``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["l", "n", "lambda"])
    for ell, n, lam in rows:
        wr.writerow([int(ell), int(n), f"{lam:.12e}"])
    return buf.getvalue()
