import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oamschmidt._quad import gauss_legendre
from oamschmidt.amplitude import (
    ModeIndex,
    SourceParams,
    TransverseVec,
    beam_width,
    default_truncation,
    lambda_sum_truncated,
    lg_mode,
    lg_phase,
    lg_radial,
    mode_overlap,
    reconstruct_amplitude,
    schmidt_coefficient,
    schmidt_lambda,
    schmidt_number_closed,
    schmidt_number_truncated,
    schmidt_width,
    spectrum_csv,
    spectrum_rows,
    two_photon_amplitude,
    xi,
)


def params_for_xi(x, w0=1.0):
    return SourceParams(w0, w0 * (1 - x) / (1 + x))


# -- parameters --------------------------------------------------------------

def test_source_params_validation():
    with pytest.raises(ValueError):
        SourceParams(3.0, 4.0)
    with pytest.raises(ValueError):
        SourceParams(0.0, 0.0)
    SourceParams(2.0, 2.0)


def test_mode_index_validation():
    with pytest.raises(ValueError):
        ModeIndex(1, -1)


@pytest.mark.parametrize("w0,b,expected", [(780, 780, 0.0), (780, 260, 0.5), (3, 1, 0.5)])
def test_xi_examples(w0, b, expected):
    assert xi(SourceParams(w0, b)) == pytest.approx(expected, abs=1e-15)


def test_schmidt_lambda_examples():
    p = SourceParams(3, 1)
    assert schmidt_lambda(p, ModeIndex(0, 0)) == pytest.approx(0.5625, abs=1e-15)
    assert schmidt_lambda(p, ModeIndex(1, 0)) == pytest.approx(0.140625, abs=1e-15)
    assert schmidt_lambda(p, ModeIndex(-1, 0)) == schmidt_lambda(p, ModeIndex(1, 0))
    p0 = SourceParams(2, 2)
    assert schmidt_lambda(p0, ModeIndex(0, 0)) == 1.0
    assert schmidt_lambda(p0, ModeIndex(2, 0)) == 0.0
    assert schmidt_lambda(p0, ModeIndex(0, 1)) == 0.0


def test_schmidt_lambda_ell1_ratio():
    # each unit of |l| costs a factor xi^2
    p = SourceParams(3, 1)
    r = schmidt_lambda(p, ModeIndex(1, 0)) / schmidt_lambda(p, ModeIndex(0, 0))
    assert r == pytest.approx(xi(p) ** 2, rel=1e-15)


@given(st.floats(0.0, 0.95), st.integers(-20, 20), st.integers(0, 20))
def test_lambda_bounded_by_ground(x, ell, n):
    p = params_for_xi(x)
    lam = schmidt_lambda(p, ModeIndex(ell, n))
    assert 0.0 <= lam <= schmidt_lambda(p, ModeIndex(0, 0)) <= 1.0


def test_schmidt_number_closed_examples():
    assert schmidt_number_closed(SourceParams(5, 5)) == 1.0
    assert schmidt_number_closed(SourceParams(3, 1)) == pytest.approx(25 / 9, rel=1e-15)
    ks = [schmidt_number_closed(params_for_xi(x)) for x in np.linspace(0, 0.99, 50)]
    assert np.all(np.diff(ks) > 0)


@pytest.mark.parametrize("x,trunc", [(0.0, 3), (0.5, 60), (0.9, 400)])
def test_schmidt_number_truncated_examples(x, trunc):
    p = params_for_xi(x)
    assert abs(schmidt_number_truncated(p, trunc, trunc) - schmidt_number_closed(p)) < 1e-9


def test_truncated_k_decreases_to_closed():
    p = params_for_xi(0.75)
    ks = [schmidt_number_truncated(p, t, t) for t in (2, 5, 10, 20, 60)]
    assert np.all(np.diff(ks) <= 0)
    assert ks[-1] >= schmidt_number_closed(p) - 1e-12


@pytest.mark.parametrize("x", [0.25, 0.5, 0.75, 0.9])
def test_eigenvalues_sum_to_one_with_tail_bound(x):
    p = params_for_xi(x)
    L = math.ceil(math.log(1e-14 * (1 - x * x)) / (2 * math.log(x))) + 1
    N = L // 2 + 1
    # tail: sum over |l| > L plus n > N of (1-x^2)^2 x^(2|l|+4n)
    tail = 2 * x ** (2 * (L + 1)) / (1 - x * x) + 2 * x ** (4 * (N + 1)) / (1 - x ** 4)
    assert tail < 1e-12
    assert abs(lambda_sum_truncated(p, L, N) - 1.0) < 1e-12


def test_default_truncation():
    assert default_truncation(SourceParams(2, 2)) == (32, 16)
    lmax, nmax = default_truncation(params_for_xi(0.99))
    assert lmax > 32 and nmax == lmax // 2


def test_widths():
    assert schmidt_width(SourceParams(2, 2)) == pytest.approx(2 * math.sqrt(2), rel=1e-15)
    assert schmidt_width(SourceParams(2, 0.5)) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert schmidt_width(SourceParams(780, 11.28)) == pytest.approx(132.65, abs=0.01)
    assert beam_width(SourceParams(1, 1)) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert beam_width(SourceParams(780, 1e-9)) == pytest.approx(780 * math.sqrt(2), rel=1e-12)


# -- modes -------------------------------------------------------------------

def radial_inner(m1, m2, w, nodes=200):
    q, wt = gauss_legendre(nodes, 0.0, 16.0 / w * (1 + 0.3 * math.sqrt(2 * max(m1.n, m2.n) + 7)))
    return float(np.sum(wt * q * lg_radial(m1, w, q) * lg_radial(m2, w, q)))


def test_lg_examples():
    w = 1.7
    assert radial_inner(ModeIndex(0, 0), ModeIndex(0, 0), w) == pytest.approx(1.0, abs=1e-12)
    assert abs(radial_inner(ModeIndex(0, 0), ModeIndex(0, 1), w)) < 1e-12
    assert lg_radial(ModeIndex(1, 0), w, 0.0) == 0.0


def test_lg_rejects_bad_width():
    with pytest.raises(ValueError):
        lg_radial(ModeIndex(0, 0), 0.0, 1.0)


def test_lg_gram_matrix_is_identity():
    # full 2-D inner products, angular part by the trapezoid rule
    w = 2.3
    modes = [ModeIndex(l, n) for l in range(-3, 4) for n in range(4)]
    q, wq = gauss_legendre(200, 0.0, 8.0 * 4.0 / w)
    phi = 2 * np.pi * np.arange(32) / 32
    Q, PHI = np.meshgrid(q, phi, indexing="ij")
    vec = TransverseVec.from_polar(Q, PHI)
    weight = (wq * q)[:, None] * (2 * np.pi / 32)
    U = np.array([lg_mode(m, w, vec) for m in modes])
    G = np.einsum("aij,bij,ij->ab", U.conj(), U, weight)
    assert np.max(np.abs(G - np.eye(len(modes)))) < 1e-8


def test_lg_phase_convention():
    assert lg_phase(ModeIndex(0, 0)) == pytest.approx(1.0)
    assert lg_phase(ModeIndex(1, 0)) == pytest.approx(-1j)
    assert lg_phase(ModeIndex(-2, 1)) == pytest.approx(1.0)


# -- amplitude ---------------------------------------------------------------

def test_amplitude_peak_and_positivity():
    p = SourceParams(3, 1)
    zero = TransverseVec(0.0, 0.0)
    assert two_photon_amplitude(p, zero, zero) == pytest.approx(3 / math.pi, rel=1e-15)
    rng = np.random.default_rng(4)
    qi = TransverseVec(*rng.normal(0, 1, (2, 50)))
    qs = TransverseVec(*rng.normal(0, 1, (2, 50)))
    assert np.all(two_photon_amplitude(p, qi, qs) > 0)


def test_amplitude_anticorrelation_ridge():
    p = SourceParams(3, 1)
    q = TransverseVec(0.8, -0.3)
    expect = 3 / math.pi * math.exp(-1 * (q - (-q)).norm2() / 4)
    assert two_photon_amplitude(p, q, -q) == pytest.approx(expect, rel=1e-14)


def test_amplitude_normalisation():
    # integrate in sum/difference coordinates, where it factorises into Gaussians
    p = SourceParams(2.0, 0.7)
    x, w = gauss_legendre(120, -12.0, 12.0)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    # Phi^2 over d^2qi d^2qs = (1/4)^... with u = qi+qs, v = qi-qs (Jacobian 1/4 per plane)
    pu = np.sum(W * np.exp(-p.w0 ** 2 * (X ** 2 + Y ** 2) / 2))
    pv = np.sum(W * np.exp(-p.b ** 2 * (X ** 2 + Y ** 2) / 2))
    total = (p.w0 * p.b / math.pi) ** 2 * pu * pv / 4
    assert total == pytest.approx(1.0, rel=1e-10)


def test_reconstruction_single_term_for_product_state():
    p = SourceParams(1.5, 1.5)
    qi = TransverseVec(np.array([0.0, 0.3, -0.4]), np.array([0.0, 0.2, 0.1]))
    qs = TransverseVec(np.array([0.1, -0.3, 0.0]), np.array([0.0, 0.5, -0.2]))
    rec = reconstruct_amplitude(p, qi, qs, 0, 0)
    assert np.allclose(rec, two_photon_amplitude(p, qi, qs), rtol=1e-14, atol=0)


def test_reconstruction_at_origin():
    p = SourceParams(3, 1)
    zero = TransverseVec(0.0, 0.0)
    rec = reconstruct_amplitude(p, zero, zero, 40, 40)
    assert abs(rec - 3 / math.pi) < 1e-8


def probe_points():
    rng = np.random.default_rng(9)
    qi = TransverseVec(*rng.normal(0, 0.5, (2, 9)))
    qs = TransverseVec(*rng.normal(0, 0.5, (2, 9)))
    return qi, qs


def test_reconstruction_error_decreases():
    p = SourceParams(3, 1)
    qi, qs = probe_points()
    ref = two_photon_amplitude(p, qi, qs)
    errs = [np.linalg.norm(reconstruct_amplitude(p, qi, qs, t, t) - ref) for t in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_reconstruction_imaginary_part_vanishes():
    p = SourceParams(3, 1)
    qi, qs = probe_points()
    rec = reconstruct_amplitude(p, qi, qs, 30, 30)
    assert np.max(np.abs(rec.imag)) < 1e-14


@pytest.mark.parametrize("ell,n", [(0, 0), (1, 0), (-2, 1), (3, 2)])
def test_schmidt_coefficients_from_bessel_kernel(ell, n):
    p = SourceParams(3, 1)
    x = xi(p)
    expect = (-1) ** abs(ell) * (1 - x * x) * x ** (abs(ell) + 2 * n)
    assert schmidt_coefficient(p, ell, n, n) == pytest.approx(expect, abs=1e-12)
    assert abs(schmidt_coefficient(p, ell, n, n + 1)) < 1e-12


def test_schmidt_coefficients_mix_radial_indices_off_schmidt_width():
    # with a different width the radial correlation is lost
    p = SourceParams(3, 1)
    assert abs(schmidt_coefficient(p, 1, 0, 1, w=1.3 * schmidt_width(p))) > 1e-3


def test_oam_anticorrelation_selection_rule():
    p = SourceParams(3, 1)
    x = xi(p)
    for mi in (ModeIndex(0, 0), ModeIndex(1, 0), ModeIndex(-1, 1)):
        for ms in (ModeIndex(0, 0), ModeIndex(1, 0), ModeIndex(-1, 0), ModeIndex(1, 1), ModeIndex(2, 0)):
            c = mode_overlap(p, mi, ms)
            if ms.ell == -mi.ell and ms.n == mi.n:
                expect = (-1) ** abs(mi.ell) * (1 - x * x) * x ** (abs(mi.ell) + 2 * mi.n)
                assert abs(c - expect) < 1e-8
            else:
                assert abs(c) < 1e-8


# -- export ------------------------------------------------------------------

def test_spectrum_csv_roundtrip():
    p = SourceParams(3, 1)
    rows = spectrum_rows(p, 2, 1)
    text = spectrum_csv(rows)
    rd = list(csv.reader(io.StringIO(text)))
    assert rd[0] == ["l", "n", "lambda"]
    assert len(rd) == 1 + 5 * 2
    l, n, lam = rd[1]
    assert (int(l), int(n)) == (-2, 0)
    assert float(lam) == pytest.approx(schmidt_lambda(p, ModeIndex(-2, 0)), rel=1e-12)


def test_spectrum_product_state_single_row():
    rows = spectrum_rows(SourceParams(780, 780), 5, 5)
    assert rows == [(0, 0, 1.0)]
