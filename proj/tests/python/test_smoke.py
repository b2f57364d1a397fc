import json
from fractions import Fraction

import numpy as np
import pytest

import wolff

CONE = json.dumps({"kind": "circular_cone", "c1": 1.0, "c2": 1.5})


@pytest.fixture(scope="module")
def lattice():
    return wolff.build_lattice(wolff.surface(CONE), 3)


def frac(pair):
    return Fraction(*pair)


def test_exponents():
    t = wolff.exponent_table(3, 1)
    assert t["p1"] is None
    assert frac(t["p2"]) == 18
    assert frac(t["best_p"]) == 4
    assert frac(t["r_best_p"]) == Fraction(1, 4)
    assert frac(wolff.exponent_table(4, 1)["p1"]) == 10
    assert all(wolff.sharpness_identity(dk + 1, 1) for dk in range(1, 7))
    with pytest.raises(wolff.InputError):
        wolff.exponent_table(2, 2)


def test_covering_counts():
    s = wolff.surface(CONE)
    assert (s.d, s.k, s.D) == (2, 1, 3)
    stats = wolff.covering_stats(s, [4, 5, 6, 7, 8])
    assert abs(stats["fit"]["slope"] - 0.5) <= 0.1
    fine, coarse = wolff.build_covering(s, 6), wolff.build_covering(s, 3)
    assert fine.centers().shape == (fine.M, 3)
    rep = wolff.verify(fine, coarse, samples=5000)
    assert rep["consistency_violations"] == 0
    assert rep["csv"].startswith("delta,M_delta,K,")
    assert json.loads(fine.to_json())["delta"] == "2^-6"


def test_samples_match_numpy_fft(lattice):
    f = wolff.synth(lattice, seed=4)
    x = f.samples()
    assert x.shape == (lattice.N,) * 3
    # f(x) = sum c e^{2 pi i xi.x}, so the forward FFT over N^3 recovers N^3 c at xi mod N
    F = np.fft.fftn(x) / x.size
    xi = f.freqs() % lattice.N
    c = f.coefficients()
    assert np.allclose(F[xi[:, 0], xi[:, 1], xi[:, 2]], c, atol=1e-12)
    assert np.isclose(np.mean(np.abs(x) ** 2), f.l2sq(), rtol=1e-12)


def test_norms_and_interpolation(lattice):
    f = wolff.synth(lattice, seed=9)
    r = wolff.norms(f, [2, 4, 6])
    for p, lpd in zip(r["p"], r["lp_delta"]):
        assert lpd**p <= r["linf_delta"] ** (p - 2) * r["sum_sector_l2sq"] * (1 + 1e-9)
    g = wolff.apply_multiplier(f, 0.0)
    assert g.l2sq() <= f.l2sq() * (1 + 1e-12)


def test_decompose_and_localize(lattice):
    f = wolff.synth(lattice, seed=2, sigma_j=2, sigma_sector=1)
    dec = wolff.decompose(f, sigma_j=2, sigma_sector=1)
    d = dec.diagnostics()
    assert d["reconstruction_error"] <= 1e-6
    assert d["C_pkt"] <= 4
    assert d["nfnb_violations"] == 0
    total = None
    for i, (_, lam) in enumerate(dec.levels):
        part = dec.level_function(i).scaled(lam)
        total = part if total is None else total + part
    err = (total + f.scaled(-1.0)).l2sq() / f.l2sq()
    assert err < 1e-20
    sup = np.abs(f.samples()).max()
    rep = wolff.localize(dec, 0.6 * sup, 1 / 4)
    assert rep["captured"] == pytest.approx(1.0)
    assert rep["relation_csv"].startswith("plate_id,anchor_cube,related_cubes,excluded_mass")


def test_relation_fast_matches_brute():
    rng = np.random.default_rng(5)
    for _ in range(5):
        P, D = 30, 2
        centers = rng.random((P, D))
        axes = np.stack([np.linalg.qr(rng.normal(size=(D, D)))[0] for _ in range(P)])
        halves = 0.01 + 0.2 * rng.random((P, D))
        W = rng.random((800, D))
        a = wolff.localization_relation(centers, axes, halves, W, 8)
        b = wolff.localization_relation(centers, axes, halves, W, 8, brute=True)
        assert a == b


def test_grid_round_trip(lattice, tmp_path):
    f = wolff.synth(lattice, seed=11)
    path = str(tmp_path / "f.wlf")
    wolff.write_grid(path, f)
    with open(path, "rb") as fh:
        assert fh.read(4) == b"WLF1"
    g = wolff.read_grid(lattice, path)
    assert (g + f.scaled(-1.0)).l2sq() < 1e-24 * f.l2sq()


def test_errors_map_to_exceptions(lattice):
    with pytest.raises(wolff.ConfigError):
        wolff.decompose(wolff.synth(lattice), refine=1)
    with pytest.raises(wolff.InputError):
        wolff.surface(json.dumps({"kind": "torus"}))
    with pytest.raises(wolff.WolffError):
        wolff.build_covering(wolff.surface(CONE), 1)
