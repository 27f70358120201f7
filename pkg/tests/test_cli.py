import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oamschmidt.cli import main, parse_angle


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# -- angles ------------------------------------------------------------------

@pytest.mark.parametrize("deg,rad", [(0, 0.0), (90, math.pi / 2), (180, math.pi), (360, 2 * math.pi)])
def test_angle_conversion_exact(deg, rad):
    assert parse_angle(str(deg)) == rad
    assert parse_angle(f"{deg}deg") == rad
    assert parse_angle(f"{rad!r}rad") == rad


def test_angle_rejects_garbage():
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_angle("ninety")


# -- spectrum / radial -------------------------------------------------------

def test_spectrum_product_state(capsys):
    code, out, err = run(capsys, "spectrum", "--w0", 780, "--b", 780)
    assert code == 0
    r = rows(out)
    assert r[0] == ["l", "n", "lambda"]
    assert r[1:] == [["0", "0", "1.000000000000e+00"]]
    assert "K closed = 1\n" in err


def test_spectrum_k_report(capsys):
    code, out, err = run(capsys, "spectrum", "--w0", 3, "--b", 1)
    assert code == 0
    k = float(err.split("K closed = ")[1].split()[0])
    assert k == pytest.approx(25 / 9, rel=1e-12)


def test_spectrum_truncation_gate(capsys):
    code, _, err = run(capsys, "spectrum", "--w0", 3, "--b", 1, "--lmax", 1, "--nmax", 0)
    assert code == 3
    assert "warning" in err


def test_spectrum_invalid_source(capsys):
    code, _, err = run(capsys, "spectrum", "--w0", 1, "--b", 2)
    assert code == 2
    assert err.startswith("error:")


def test_radial_from_geometry(capsys):
    code, out, err = run(capsys, "radial", "--w0", 2, "--b", 1, "--wg", 2, "--lmax", 3)
    assert code == 0
    r = rows(out)
    assert r[0] == ["l", "R"] and len(r) == 5
    assert float(r[1][1]) == 1.0
    assert "s = 0.333333333333" in err


def test_radial_needs_s(capsys):
    assert run(capsys, "radial", "--w0", 2)[0] == 2
    assert run(capsys, "radial", "--s", 0.5, "--w0", 2, "--b", 1, "--wg", 1)[0] == 2


# -- coincidence -------------------------------------------------------------

def test_coincidence_spp(capsys):
    code, out, _ = run(capsys, "coincidence", "--plate", "spp", "--eta", 3.5, "--s", 0.66, "--grid", 128)
    assert code == 0
    r = rows(out)
    assert r[0] == ["alpha_rad", "p_raw", "p_norm"]
    a = np.array([[float(v) for v in row] for row in r[1:]])
    assert a.shape == (128, 3)
    assert a[0, 2] == 1.0
    assert a[64, 0] == pytest.approx(math.pi, abs=1e-12)
    assert a[64, 2] == a[:, 2].min() > 0


def test_coincidence_limit_parabola(capsys):
    code, out, _ = run(capsys, "coincidence", "--plate", "spp", "--eta", 3.5, "--limit-s1", "--grid", 64)
    assert code == 0
    a = np.array([[float(v) for v in row] for row in rows(out)[1:]])
    assert abs(a[32, 2]) < 1e-10
    assert np.allclose(a[:, 2], ((a[:, 0] - math.pi) / math.pi) ** 2, atol=1e-12)


def test_coincidence_ad_degrees(capsys):
    code, out, _ = run(capsys, "coincidence", "--plate", "ad", "--beta", "90deg", "--eta", 0.5, "--s", 0.7, "--grid", 16)
    assert code == 0
    code2, out2, _ = run(capsys, "coincidence", "--plate", "ad", "--beta", f"{math.pi / 2!r}rad", "--eta", 0.5, "--s", 0.7, "--grid", 16)
    assert out == out2


def test_coincidence_integer_spp_warns(capsys):
    code, out, err = run(capsys, "coincidence", "--plate", "spp", "--eta", 2, "--s", 0.6, "--grid", 8)
    assert code == 0
    assert "warning" in err
    assert {row[2] for row in rows(out)[1:]} == {"1.000000000000e+00"}


def test_coincidence_custom_plate(tmp_path, capsys):
    f = tmp_path / "p.csv"
    f.write_text(f"phi_start,phi_end,theta_start,theta_end\n0,{math.pi!r},0,0\n{math.pi!r},{2 * math.pi!r},3.14159,3.14159\n")
    code, out, _ = run(capsys, "coincidence", "--plate", "custom", "--plate-file", f, "--s", 0.5, "--grid", 8)
    assert code == 0
    assert len(rows(out)) == 9
    assert run(capsys, "coincidence", "--plate", "custom", "--plate-file", f, "--method", "closed", "--s", 0.5)[0] == 2
    assert run(capsys, "coincidence", "--plate", "custom", "--plate-file", tmp_path / "nope.csv", "--s", 0.5)[0] == 2


def test_coincidence_input_errors(capsys):
    assert run(capsys, "coincidence", "--plate", "ad", "--eta", 0.5, "--s", 0.5)[0] == 2
    assert run(capsys, "coincidence", "--plate", "spp", "--s", 0.5)[0] == 2
    assert run(capsys, "coincidence", "--plate", "spp", "--eta", 0.5, "--s", 1.5)[0] == 2
    assert run(capsys, "coincidence", "--plate", "spp", "--eta", 0.5, "--s", 0.5, "--grid", 0)[0] == 2


def test_output_file_atomic_and_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert run(capsys, "coincidence", "--plate", "spp", "--eta", 3.5, "--s", 0.66, "--out", f)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []


# -- synth / fit -------------------------------------------------------------

def synth(tmp_path, capsys, name="d.csv", seed=5, noise=0.05):
    f = tmp_path / name
    code, _, _ = run(capsys, "synth", "--plate", "spp", "--eta", 3.5, "--s", 0.66,
                     "--noise", noise, "--seed", seed, "--out", f)
    assert code == 0
    return f


def test_synth_deterministic(tmp_path, capsys):
    a = synth(tmp_path, capsys, "a.csv")
    b = synth(tmp_path, capsys, "b.csv")
    c = synth(tmp_path, capsys, "c.csv", seed=6)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    assert a.read_text().splitlines()[0] == "alpha_deg,counts,sigma"


def test_synth_requires_seed(capsys):
    with pytest.raises(SystemExit) as e:
        main(["synth", "--plate", "spp", "--eta", "3.5", "--s", "0.66"])
    assert e.value.code == 2


def test_fit_round_trip(tmp_path, capsys):
    f = synth(tmp_path, capsys)
    rec = tmp_path / "fit.json"
    code, out, _ = run(capsys, "fit", "--data", f, "--plate", "spp", "--eta", 3.5, "--mu", 3, "--out", rec)
    assert code == 0
    r = json.loads(rec.read_text())
    assert abs(r["s"] - 0.66) <= max(r["s_sigma"], 0.03)
    assert r["K"]["low"] <= r["K"]["hat"] <= r["K"]["high"]
    assert "K(mu=3)" in out
    assert set(r) >= {"s", "s_sigma", "scale", "baseline", "rss"}


def test_fit_without_mu_omits_k(tmp_path, capsys):
    f = synth(tmp_path, capsys)
    rec = tmp_path / "fit.json"
    code, out, _ = run(capsys, "fit", "--data", f, "--plate", "spp", "--eta", 3.5, "--baseline", "--out", rec)
    assert code == 0
    r = json.loads(rec.read_text())
    assert "K" not in r and r["baseline"] is not None


def test_fit_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "fit", "--data", tmp_path / "none.csv", "--plate", "spp", "--eta", 3.5)
    assert code == 2
    assert "not found" in err


def test_fit_degenerate_exit(tmp_path, capsys):
    f = tmp_path / "flat.csv"
    f.write_text("alpha_deg,counts\n" + "".join(f"{10 * i},500\n" for i in range(36)))
    code, out, _ = run(capsys, "fit", "--data", f, "--plate", "ad", "--beta", 90, "--eta", 1, "--mu", 3)
    assert code == 3
    assert "degenerate" in out and "K(" not in out


def test_kmu(capsys):
    code, out, _ = run(capsys, "kmu", "--s", 0.66, "--mu-min", 3, "--mu-max", 3, "--num", 1)
    assert code == 0
    assert float(rows(out)[1][1]) == pytest.approx(19.194520294349058, rel=1e-12)
    assert run(capsys, "kmu", "--s", 1.0)[0] == 2


# -- phasematch --------------------------------------------------------------

def test_phasematch_fixed_neff(capsys):
    code, out, err = run(capsys, "phasematch", "--L", 1, "--lambda", 0.8, "--neff", 1)
    assert code == 0
    b = float(err.split("b = ")[1].split()[0])
    assert b == pytest.approx(11.3, abs=0.1)
    assert rows(out)[0] == ["dq", "sinc", "gauss"]
    assert len(rows(out)) == 802


def test_phasematch_tables(tmp_path, capsys):
    no, ne = tmp_path / "no.csv", tmp_path / "ne.csv"
    no.write_text("lambda_um,n\n0.4,1.6930\n0.82,1.6601\n")
    ne.write_text("lambda_um,n\n0.4,1.5684\n0.82,1.5449\n")
    code, _, err = run(capsys, "phasematch", "--L", 1, "--lambda", 0.405, "--no", no, "--ne", ne,
                       "--fit-neff", "--pinhole", 0.02)
    assert code == 0
    assert float(err.split("n_eff = ")[1].split()[0]) == pytest.approx(0.297, abs=0.003)


def test_phasematch_isotropic_fit(capsys):
    code, _, err = run(capsys, "phasematch", "--L", 1, "--lambda", 0.8, "--fit-neff")
    assert code == 0
    assert "at search boundary" in err


def test_phasematch_errors(tmp_path, capsys):
    assert run(capsys, "phasematch", "--L", 1, "--lambda", 0.8, "--pinhole", 0)[0] == 2
    assert run(capsys, "phasematch", "--L", 1, "--lambda", 0.8, "--grid", 1)[0] == 2
    assert run(capsys, "phasematch", "--L", 1, "--lambda", 0.8, "--no", tmp_path / "x.csv")[0] == 2


# -- selfcheck ---------------------------------------------------------------

def test_selfcheck_all(capsys):
    code, out, _ = run(capsys, "selfcheck")
    assert code == 0
    assert out.count("PASS") == 4


def test_selfcheck_subset_and_tolerance(capsys):
    code, out, _ = run(capsys, "selfcheck", "--only", "spectrum", "engine")
    assert code == 0
    assert out.count("PASS") == 2 and "radial" not in out
    code, out, _ = run(capsys, "selfcheck", "--only", "engine", "--tol-scale", 1e-12)
    assert code == 3
    assert "FAIL engine" in out
    assert run(capsys, "selfcheck", "--only", "bogus")[0] == 2


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "oamschmidt", "kmu", "--s", "0", "--num", "2"],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert p.stdout.splitlines() == ["mu,K", "5.000000000000e-01,1.000000000000e+00",
                                     "5.000000000000e+00,1.000000000000e+00"]
