"""Command-line front end.

Every subcommand writes plain CSV (to ``--out`` or stdout) and a short
human-readable report. Angles are read in degrees unless suffixed with
``rad`` and are written in radians.

Exit codes: 0 success, 2 invalid input, 3 numerical or fit degeneracy.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings

import numpy as np

from . import amplitude as amp
from . import coincidence as coin
from . import estimator as est
from . import phasematch as pm
from . import plates as pl
from . import radial as rad
from .specfun import SeriesConvergenceError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


# -- helpers -----------------------------------------------------------------

def parse_angle(text: str) -> float:
    """``"90deg"``, ``"1.57rad"`` or a bare number in degrees, to radians."""
    t = str(text).strip().lower()
    try:
        if t.endswith("rad"):
            return float(t[:-3])
        if t.endswith("deg"):
            return math.radians(float(t[:-3]))
        return math.radians(float(t))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.12e" % float(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(args, text: str) -> None:
    if getattr(args, "out", None):
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def report(args, line: str) -> None:
    # keep stdout clean for CSV when no output file is given
    stream = sys.stdout if getattr(args, "out", None) else sys.stderr
    print(line, file=stream)


def _index(value: str) -> pm.IndexTable:
    try:
        return pm.IndexTable.constant(float(value))
    except ValueError:
        pass
    if not os.path.exists(value):
        raise InputError(f"index table not found: {value}")
    return pm.read_index_csv(value)


def _plate(args) -> pl.PlateSpec:
    if args.plate == "ad":
        if args.beta is None:
            raise InputError("--plate ad needs --beta")
        if args.eta is None:
            raise InputError("--plate ad needs --eta")
        return pl.AngularDiaphragm(args.beta, args.eta)
    if args.plate == "spp":
        if args.eta is None:
            raise InputError("--plate spp needs --eta")
        return pl.SpiralPhasePlate(args.eta)
    if not args.plate_file:
        raise InputError("--plate custom needs --plate-file")
    if not os.path.exists(args.plate_file):
        raise InputError(f"plate file not found: {args.plate_file}")
    return pl.read_custom_csv(args.plate_file)


def _method(args) -> str:
    if args.method:
        if args.plate == "custom" and args.method == "closed":
            raise InputError("custom plates need --method engine")
        return args.method
    return "engine" if args.plate == "custom" else "closed"


def _add_plate_args(p):
    p.add_argument("--plate", choices=["ad", "spp", "custom"], required=True)
    p.add_argument("--eta", type=float, help="step parameter of the plate")
    p.add_argument("--beta", type=parse_angle, help="aperture angle of the diaphragm")
    p.add_argument("--plate-file", help="custom plate CSV phi_start,phi_end,theta_start,theta_end")
    p.add_argument("--method", choices=["closed", "engine"])
    p.add_argument("--offset", type=parse_angle, default=math.pi,
                   help="fixed rotation of the signal plate axis (default 180deg)")


def _source_s(args):
    """``s`` from ``--s`` or from ``--w0 --b --wg``; returns (s, source, detection)."""
    given = [v is not None for v in (args.w0, args.b, args.wg)]
    if args.s is not None:
        if any(given):
            raise InputError("give either --s or --w0/--b/--wg, not both")
        if not 0.0 <= args.s <= 1.0:
            raise InputError(f"s must lie in [0, 1], got {args.s}")
        return args.s, None, None
    if not all(given):
        raise InputError("need --s or all of --w0, --b, --wg")
    p = amp.SourceParams(args.w0, args.b)
    d = rad.DetectionParams(args.wg)
    return rad.s_param(p, d), p, d


# -- subcommands -------------------------------------------------------------

def cmd_spectrum(args) -> int:
    p = amp.SourceParams(args.w0, args.b)
    lmax_d, nmax_d = amp.default_truncation(p)
    lmax = lmax_d if args.lmax is None else args.lmax
    nmax = nmax_d if args.nmax is None else args.nmax
    if lmax < 0 or nmax < 0:
        raise InputError("--lmax and --nmax must be >= 0")
    rows = amp.spectrum_rows(p, lmax, nmax)
    emit(args, amp.spectrum_csv(rows))
    k_closed = amp.schmidt_number_closed(p)
    k_trunc = amp.schmidt_number_truncated(p, lmax, nmax)
    report(args, f"xi = {amp.xi(p):.12g}")
    report(args, f"w_S = {amp.schmidt_width(p):.12g} um, W = {amp.beam_width(p):.12g} um")
    report(args, f"K closed = {k_closed:.12g}")
    report(args, f"K truncated (lmax={lmax}, nmax={nmax}) = {k_trunc:.12g}")
    if abs(k_trunc - k_closed) > 1e-6 * k_closed:
        report(args, "warning: truncated and closed-form K differ by more than 1e-6")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_radial(args) -> int:
    s, p, d = _source_s(args)
    if args.lmax < 0:
        raise InputError("--lmax must be >= 0")
    table = rad.radial_table(s, args.lmax)
    emit(args, csv_text(["l", "R"], [(l, table(l)) for l in range(args.lmax + 1)]))
    report(args, f"s = {s:.12g}")
    if p is not None:
        report(args, f"prefactor = {rad.r_ell_prefactor(p, d):.12g}")
    return EXIT_OK


def cmd_coincidence(args) -> int:
    plate = _plate(args)
    method = _method(args)
    if args.limit_s1:
        if args.s is not None or args.w0 is not None:
            raise InputError("--limit-s1 fixes s = 1; drop --s/--w0/--b/--wg")
        s = 1.0
    else:
        s, _, _ = _source_s(args)
    if args.grid < 1:
        raise InputError("--grid must be >= 1")
    alphas = 2.0 * math.pi * np.arange(args.grid) / args.grid
    model = coin.CurveModel(plate, s, method, args.offset)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        c = coin.curve(model, alphas)
    for w in caught:
        report(args, f"warning: {w.message}")
    emit(args, csv_text(["alpha_rad", "p_raw", "p_norm"], zip(c.alphas, c.raw, c.normalized)))
    report(args, f"s = {s:.12g}, visibility = {coin.visibility(c):.12g}, normalised by {c.norm_mode}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if not os.path.exists(args.data):
        raise InputError(f"data file not found: {args.data}")
    data = est.MeasurementSet.from_csv(args.data)
    plate = _plate(args)
    model = est.PlateModel(plate, _method(args), args.offset)
    opts = est.FitOptions(free_offset=args.fit_offset, baseline=args.baseline,
                          weighting=args.weighting)
    if args.mu is not None and not args.mu > 0:
        raise InputError("--mu must be positive")
    fit = est.fit_s(data, model, opts)
    rec = {
        "s": fit.s_hat,
        "s_sigma": fit.s_sigma,
        "scale": fit.scale,
        "baseline": fit.baseline,
        "offset_alpha": fit.offset_alpha,
        "rss": fit.rss,
        "chi2": fit.chi2,
        "at_boundary": fit.at_boundary,
        "degenerate": fit.degenerate,
    }
    lines = [
        f"s = {fit.s_hat:.6f} +/- {fit.s_sigma:.6f}",
        f"scale = {fit.scale:.6g}",
        f"rss = {fit.rss:.6g}, chi2 = {fit.chi2:.6g} ({fit.n_points} points)",
    ]
    if fit.baseline is not None:
        lines.append(f"baseline = {fit.baseline:.6g}")
    if fit.offset_alpha is not None:
        lines.append(f"offset = {fit.offset_alpha:.6g} rad")
    if fit.degenerate:
        lines.append("fit is degenerate: the profile is flat in s")
    elif fit.at_boundary:
        lines.append("s at the edge of the search interval; K not reported")
    elif args.mu is not None:
        ki = est.k_interval(fit, args.mu)
        rec["K"] = {"low": ki.low, "hat": ki.hat, "high": ki.high, "clipped": ki.clipped}
        lines.append(f"K(mu={args.mu:g}) = {ki.hat:.6g}  [{ki.low:.6g}, {ki.high:.6g}]"
                     + ("  (clipped)" if ki.clipped else ""))
    for ln in lines:
        print(ln)
    if args.out:
        write_atomic(args.out, json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return EXIT_NUMERIC if fit.degenerate else EXIT_OK


def cmd_synth(args) -> int:
    plate = _plate(args)
    model = est.PlateModel(plate, _method(args), args.offset)
    if args.angles < 5:
        raise InputError("--angles must be >= 5")
    if not 0.0 <= args.s <= 1.0:
        raise InputError("--s must lie in [0, 1]")
    alphas = 2.0 * math.pi * np.arange(args.angles) / args.angles
    data = est.synthesize(model, args.s, alphas, args.scale, args.noise, args.seed)
    sig = data.sigmas if data.sigmas is not None else data.shot_sigmas()
    rows = zip(np.degrees(data.alphas), data.counts, sig)
    emit(args, csv_text(["alpha_deg", "counts", "sigma"], rows))
    return EXIT_OK


def cmd_kmu(args) -> int:
    if not 0.0 <= args.s < 1.0:
        raise InputError("--s must lie in [0, 1)")
    if not 0 < args.mu_min <= args.mu_max or args.num < 1:
        raise InputError("need 0 < --mu-min <= --mu-max and --num >= 1")
    mus = np.linspace(args.mu_min, args.mu_max, args.num)
    emit(args, csv_text(["mu", "K"], [(m, est.schmidt_number_experimental(args.s, m)) for m in mus]))
    return EXIT_OK


def cmd_phasematch(args) -> int:
    n_o, n_e = _index(args.no), _index(args.ne)
    if args.pinhole <= 0:
        raise InputError("--pinhole must be positive: the comparison region is empty")
    if args.grid < 2 or args.qmax <= 0:
        raise InputError("need --grid >= 2 and --qmax > 0")
    cfg = pm.CrystalConfig(args.L, args.wavelength, 0.0, n_o, n_e)
    if args.theta is not None:
        cfg = cfg.with_theta(args.theta)
    elif not (n_o.is_constant and n_e.is_constant and n_o.values == n_e.values):
        cfg = cfg.with_theta(pm.phase_matching_angle(cfg))
    dq = np.linspace(-args.qmax, args.qmax, args.grid)
    if np.count_nonzero(np.abs(dq) <= args.pinhole) < 2:
        raise InputError("pinhole passes fewer than two grid points")
    if args.neff is not None:
        n_eff, edge = args.neff, False
    else:
        f = pm.fit_neff(cfg, dq, args.pinhole, args.psi)
        n_eff, edge = f.n_eff, f.at_boundary
    cmp_ = pm.compare_profiles(cfg, n_eff, dq, args.pinhole, args.psi)
    emit(args, csv_text(["dq", "sinc", "gauss"], zip(cmp_.dq, cmp_.sinc, cmp_.gauss)))
    report(args, f"theta = {cfg.theta_oa:.12g} rad")
    report(args, f"n_eff = {n_eff:.12g}" + ("  (at search boundary)" if edge else ""))
    report(args, f"b = {pm.effective_b(args.L, args.wavelength, n_eff):.12g} um")
    report(args, f"relative L2 error inside pinhole = {cmp_.rel_l2_error:.6g}")
    return EXIT_OK


# -- selfcheck ---------------------------------------------------------------

def _check_spectrum(scale):
    worst = 0.0
    for x in (0.0, 0.25, 0.5, 0.75, 0.9):
        p = amp.SourceParams(1.0, (1.0 - x) / (1.0 + x))
        worst = max(worst, abs(amp.schmidt_number_truncated(p, 400, 400) - amp.schmidt_number_closed(p)))
    return worst, 1e-9 * scale


def _check_radial(scale):
    worst = 0.0
    for w0, b, r in ((2.0, 1.0, 1.0), (4.0, 0.4, 0.5), (1.0, 0.5, 2.0)):
        p = amp.SourceParams(w0, b)
        d = rad.DetectionParams(r * amp.schmidt_width(p))
        for l in (0, 1, 4, 8):
            ref = rad.r_ell_full(p, d, l)
            worst = max(worst, abs(rad.r_ell_oracle(p, d, l) - ref) / max(ref, 1e-12))
    return worst, 1e-6 * scale


def _check_engine(scale):
    al = 2.0 * math.pi * np.arange(64) / 64
    worst = 0.0
    for s in (0.4, 0.7, 1.0):
        table = rad.radial_table(s) if s < 1.0 else rad.radial_table(1.0, 1)
        for eta in (0.5, 3.5):
            sp = pl.SpiralPhasePlate(eta)
            e = coin.coincidence_general(sp, sp, al, table)
            c = coin.spp_closed(al, eta, s)
            worst = max(worst, np.max(np.abs(e / e[0] - c / c[0])))
            for beta in (0.5 * math.pi, math.pi):
                ad = pl.AngularDiaphragm(beta, eta)
                e = coin.coincidence_general(ad, ad, al, table)
                c = coin.ad_closed(al, beta, eta, s)
                worst = max(worst, np.max(np.abs(e / e[0] - c / c[0])))
    return float(worst), 1e-6 * scale


def _check_reconstruction(scale):
    p = amp.SourceParams(3.0, 1.0)
    qi = amp.TransverseVec(np.array([0.0, 0.1, -0.2]), np.array([0.0, 0.05, 0.1]))
    qs = amp.TransverseVec(np.array([0.0, -0.1, 0.15]), np.array([0.0, 0.0, -0.1]))
    err = np.max(np.abs(amp.reconstruct_amplitude(p, qi, qs, 40, 40) - amp.two_photon_amplitude(p, qi, qs)))
    return float(err), 1e-8 * scale


SELF_CHECKS = {
    "spectrum": _check_spectrum,
    "radial": _check_radial,
    "engine": _check_engine,
    "reconstruction": _check_reconstruction,
}


def cmd_selfcheck(args) -> int:
    names = list(SELF_CHECKS) if not args.only else args.only
    unknown = [n for n in names if n not in SELF_CHECKS]
    if unknown:
        raise InputError(f"unknown check(s): {', '.join(unknown)}; choose from {', '.join(SELF_CHECKS)}")
    ok = True
    for name in names:
        t0 = time.perf_counter()
        err, tol = SELF_CHECKS[name](args.tol_scale)
        good = err <= tol
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {name}: error {err:.3e} (tolerance {tol:.1e}, "
              f"{time.perf_counter() - t0:.2f} s)")
    return EXIT_OK if ok else EXIT_NUMERIC


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oamschmidt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="Schmidt eigenvalues and Schmidt number")
    p.add_argument("--w0", type=float, required=True, help="pump waist (um)")
    p.add_argument("--b", type=float, required=True, help="phase-matching width (um)")
    p.add_argument("--lmax", type=int)
    p.add_argument("--nmax", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    def add_s(p):
        p.add_argument("--s", type=float, help="radial parameter")
        p.add_argument("--w0", type=float, help="pump waist (um)")
        p.add_argument("--b", type=float, help="phase-matching width (um)")
        p.add_argument("--wg", type=float, help="fiber-mode width at the plates (um)")

    p = sub.add_parser("radial", help="radial weights R_l")
    add_s(p)
    p.add_argument("--lmax", type=int, default=12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_radial)

    p = sub.add_parser("coincidence", help="coincidence curve versus plate orientation")
    _add_plate_args(p)
    add_s(p)
    p.add_argument("--limit-s1", action="store_true", help="use s = 1")
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coincidence)

    p = sub.add_parser("fit", help="fit s to a measured coincidence curve")
    p.add_argument("--data", required=True, help="CSV alpha_deg,counts[,sigma]")
    _add_plate_args(p)
    p.add_argument("--mu", type=float, help="width ratio w0/w_G for the Schmidt number")
    p.add_argument("--fit-offset", action="store_true", help="fit a small angular offset")
    p.add_argument("--baseline", action="store_true", help="fit a constant background")
    p.add_argument("--weighting", choices=["auto", "poisson", "unweighted"], default="auto")
    p.add_argument("--out", help="JSON record")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="seeded synthetic coincidence data")
    _add_plate_args(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--scale", type=float, default=1000.0)
    p.add_argument("--noise", type=float, default=0.05, help="relative Gaussian noise")
    p.add_argument("--angles", type=int, default=32)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("kmu", help="Schmidt number versus width ratio at fixed s")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--mu-min", type=float, default=0.5)
    p.add_argument("--mu-max", type=float, default=5.0)
    p.add_argument("--num", type=int, default=46)
    p.add_argument("--out")
    p.set_defaults(func=cmd_kmu)

    p = sub.add_parser("phasematch", help="sinc versus Gaussian phase matching")
    p.add_argument("--L", type=float, required=True, help="crystal length (mm)")
    p.add_argument("--lambda", dest="wavelength", type=float, required=True,
                   help="pump wavelength (um)")
    p.add_argument("--theta", type=parse_angle,
                   help="optical-axis angle (default: on-axis phase matching)")
    p.add_argument("--no", default="1.6", help="ordinary index: number or CSV lambda_um,n")
    p.add_argument("--ne", default="1.6", help="extraordinary index: number or CSV lambda_um,n")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--neff", type=float)
    g.add_argument("--fit-neff", action="store_true", help="fit n_eff (default)")
    p.add_argument("--qmax", type=float, default=0.2, help="half-range of dq (rad/um)")
    p.add_argument("--grid", type=int, default=801)
    p.add_argument("--pinhole", type=float, default=0.05, help="pinhole radius in dq (rad/um)")
    p.add_argument("--psi", type=parse_angle, default=0.0, help="sampling azimuth")
    p.add_argument("--out")
    p.set_defaults(func=cmd_phasematch)

    p = sub.add_parser("selfcheck", help="run the built-in oracle comparisons")
    p.add_argument("--only", nargs="+", metavar="NAME", help=f"subset of {', '.join(SELF_CHECKS)}")
    p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    p.set_defaults(func=cmd_selfcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, SeriesConvergenceError, est.FitError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
