import numpy as np
import pytest

from tensionlab.analytic import family_coefficient
from tensionlab.closed_forms import linear_map, tanh_strip_map
from tensionlab.errors import AllDegenerateError, DegenerateError
from tensionlab.field import ComplexField, harmonic_residual, wirtinger_zbar
from tensionlab.qc import (
    beltrami_coefficient,
    coefficient_mismatch,
    companion_map,
    distortion,
    distortion_mismatch,
    holomorphy_residual,
    hopf,
    hopf_argument_residual,
    lemma1_residual,
    lemma2_residual,
    lemma3_residual,
    max_principle_scan,
    pushforward_mu,
    reconstruct_psi,
    sigma_field,
)

from conftest import peaked_control, square_grid, strip_grid

TANH = tanh_strip_map()
LINEAR = linear_map(2.0)  # 2z - zbar
LIN = lambda z: 2 * z - 0.5 * np.conj(z)  # noqa: E731


def ratios(values):
    return [a / b for a, b in zip(values, values[1:])]


# --- coefficient and distortion ----------------------------------------------------

def test_identity_has_zero_mu():
    f = ComplexField.sample(square_grid(1 / 8), lambda z: z)
    mu = beltrami_coefficient(f)
    assert np.max(np.abs(mu.values[mu.valid])) == 0.0


def test_linear_mu_is_b_over_a():
    mu = beltrami_coefficient(ComplexField.sample(square_grid(1 / 8), LIN))
    assert np.max(np.abs(mu.values[mu.valid] + 0.25)) <= 1e-14


def test_constant_map_is_all_degenerate():
    with pytest.raises(AllDegenerateError):
        beltrami_coefficient(ComplexField.sample(square_grid(1 / 8), lambda z: 0 * z + 1))


def test_tanh_mu_second_order(tanh_fields):
    errs = []
    for n in (32, 64, 128):
        mu = beltrami_coefficient(tanh_fields[n])
        pts = mu.grid.points()
        errs.append(np.max(np.abs(mu.values - TANH.mu(pts))[mu.valid]))
    assert all(3 <= r <= 5 for r in ratios(errs))


@pytest.mark.parametrize("m,K", [(0.0, 1.0), (0.5, 3.0), (0.9, 19.0), (0.5j, 3.0)])
def test_distortion_values(m, K):
    assert distortion(m) == pytest.approx(K, rel=1e-14)


@pytest.mark.parametrize("m", [1.0, 1.5, np.nan])
def test_distortion_rejects_outside_disk(m):
    with pytest.raises(DegenerateError):
        distortion(m)


# --- Hopf differential --------------------------------------------------------------

def test_hopf_of_holomorphic_map_vanishes(euclid):
    f = ComplexField.sample(square_grid(1 / 16), lambda z: z ** 2 + 1j * z)
    phi = hopf(f, euclid).phi
    assert np.max(np.abs(phi.values[phi.valid])) <= 1e-12


def test_hopf_linear_euclid(euclid):
    phi = hopf(ComplexField.sample(square_grid(1 / 16), LIN), euclid).phi
    assert np.max(np.abs(phi.values[phi.valid] + 1)) <= 1e-12
    assert holomorphy_residual(phi) <= 1e-12


def test_tanh_hopf_value_and_holomorphy(tanh_fields, exp_x):
    dev, hol = [], []
    for n in (32, 64, 128):
        phi = hopf(tanh_fields[n], exp_x).phi
        dev.append(np.max(np.abs(phi.values[phi.valid] + 0.25)))
        hol.append(holomorphy_residual(phi))
    assert dev[-1] <= 5e-3
    assert all(3 <= r <= 5 for r in ratios(dev))
    assert all(3 <= r <= 5 for r in ratios(hol))


def test_squared_density_hopf_is_not_holomorphic(tanh_fields, exp_x):
    # the alternative power does not converge to a holomorphic field
    res = [holomorphy_residual(hopf(tanh_fields[n], exp_x, power=2).phi) for n in (32, 64, 128)]
    assert min(res) > 1.0
    # symbolic oracle value at x = 1
    phi = hopf(tanh_fields[128], exp_x, power=2).phi
    d = wirtinger_zbar(phi)
    g = phi.grid
    i = int(round((1.0 - g.x0) / g.h))
    j = g.ny // 2
    assert abs(d.values[j, i]) == pytest.approx(0.4534, abs=1e-3)


def test_tanh_hopf_argument_is_harmonic(tanh_fields):
    assert hopf_argument_residual(tanh_fields[64]) <= 1e-10


# --- sigma and the lemmas -------------------------------------------------------------

def test_sigma_identity(euclid):
    s = sigma_field(ComplexField.sample(square_grid(1 / 8), lambda z: z), euclid)
    assert np.max(np.abs(s.sigma2.values[s.sigma2.valid] - 1)) <= 1e-14


def test_sigma_linear(euclid):
    f = ComplexField.sample(square_grid(1 / 8), LIN)
    s = sigma_field(f, euclid)
    assert np.max(np.abs(s.sigma2.values[s.sigma2.valid] - 4)) <= 1e-12
    assert lemma2_residual(f, euclid) <= 1e-10


def test_tanh_sigma_closed_form(tanh_fields, exp_x):
    s = sigma_field(tanh_fields[128], exp_x).sigma2
    exact = TANH.sigma2(s.grid.points())
    rel = np.abs(s.values - exact) / exact
    assert np.max(rel[s.valid]) <= 1e-4
    assert np.all(s.values.real[s.valid] > 0)


def test_tanh_lemmas_second_order(tanh_fields, exp_x):
    fs = [tanh_fields[n] for n in (32, 64, 128)]
    l1 = [lemma1_residual(f) for f in fs]
    l2 = [lemma2_residual(f, exp_x) for f in fs]
    l3 = [lemma3_residual(f, exp_x, threshold=np.inf) for f in fs]
    for seq in (l1, l2, l3):
        assert all(3 <= r <= 5 for r in ratios(seq)), seq
    assert l1[-1] <= 1e-3
    assert l3[-1] <= 1e-3


def test_tanh_lemma1_with_analytic_mu(tanh_fields):
    assert lemma1_residual(tanh_fields[64], mu=TANH.mu) <= 1e-12


@pytest.mark.xfail(strict=True, reason="finite-difference f_z leaves an O(h^2) defect near 1e-4 at h=1/64")
def test_tanh_lemma2_below_1e6_at_h64(tanh_fields, exp_x):
    assert lemma2_residual(tanh_fields[64], exp_x) <= 1e-6


def test_lemma1_not_applicable_for_conformal_map():
    with pytest.raises(AllDegenerateError):
        lemma1_residual(ComplexField.sample(square_grid(1 / 8), lambda z: z + 0.5j))


def test_linear_lemmas(euclid):
    f = ComplexField.sample(square_grid(1 / 16), LIN)
    assert lemma1_residual(f) <= 1e-12
    assert lemma3_residual(f, euclid) <= 1e-10


def test_peaked_control_fails_lemma1():
    res = [lemma1_residual(ComplexField.sample(square_grid(1 / n), peaked_control)) for n in (16, 32, 64)]
    assert min(res) > 0.5
    assert res[-1] > 0.5 * res[0]


def test_tanh_psi(tanh_fields, exp_x):
    psi = reconstruct_psi(tanh_fields[64], exp_x, threshold=np.inf)
    exact = TANH.psi(psi.grid.points())
    # equal up to a unimodular constant
    q = psi.values[psi.valid] / exact[psi.valid]
    assert np.max(np.abs(np.abs(q) - 1)) <= 1e-3
    assert np.max(np.abs(q - q.mean())) <= 1e-3


# --- maximum principle ------------------------------------------------------------

def test_max_principle_clean_on_fixtures(tanh_fields):
    assert max_principle_scan(tanh_fields[64]).clean
    assert max_principle_scan(ComplexField.sample(square_grid(1 / 16), LIN)).clean


def test_max_principle_flags_peaked_control():
    g = square_grid(1 / 16)
    rep = max_principle_scan(ComplexField.sample(g, peaked_control))
    centre = ((g.nx - 1) // 2, (g.ny - 1) // 2)
    assert centre in [(i, j) for i, j, _ in rep.maxima]


# --- companion map ------------------------------------------------------------------

def test_companion_linear_same_distortion(euclid):
    f = ComplexField.sample(square_grid(1 / 16), LIN)
    h = companion_map(f, euclid)
    assert distortion_mismatch(h, f) <= 1e-10


def test_tanh_companion(tanh_fields, exp_x):
    f = tanh_fields[128]
    h = companion_map(f, exp_x, threshold=np.inf)
    assert distortion_mismatch(h, f) <= 1e-2
    # h matches c1 e^{2z}/8 - c2 zbar/4 + c0 with unimodular c1, c2
    z = h.grid.points()[h.valid]
    A = np.stack([np.exp(2 * z) / 8, -np.conj(z) / 4, np.ones_like(z)], axis=1)
    c, *_ = np.linalg.lstsq(A, h.values[h.valid], rcond=None)
    assert np.max(np.abs(np.abs(c[:2]) - 1)) <= 1e-2
    assert np.max(np.abs(A @ c - h.values[h.valid])) <= 1e-3


# --- pushforward ---------------------------------------------------------------------

def test_pushforward_identity():
    g = square_grid(1 / 8)
    mu = pushforward_mu(ComplexField.sample(g, lambda z: z), g)
    assert np.max(np.abs(mu.values[mu.valid])) <= 1e-14


def test_pushforward_linear_matches_inverse():
    g = square_grid(1 / 16)
    f = ComplexField.sample(g, LIN)
    tg = square_grid(1 / 8)
    mu = pushforward_mu(f, tg)
    # g(w) = (conj(a) w - b conj(w)) / (|a|^2 - |b|^2) has coefficient -b / conj(a)
    assert mu.valid.any()
    assert np.max(np.abs(mu.values[mu.valid] - 0.25)) <= 1e-10


def test_pushforward_agrees_with_direct_inverse_coefficient():
    g = square_grid(1 / 16)
    lm = LINEAR
    f = ComplexField.sample(g, lm)
    inv = ComplexField.sample(square_grid(1 / 32), lm.inverse)
    direct = beltrami_coefficient(inv)
    pushed = pushforward_mu(f, inv.grid)
    keep = direct.valid & pushed.valid
    assert keep.any()
    assert np.max(np.abs(direct.values[keep] - pushed.values[keep])) <= 1e-10


# --- family members ----------------------------------------------------------------

def test_member_modulus_constant(member_032, member_064):
    spreads = []
    for m in (member_032, member_064):
        mu = beltrami_coefficient(m.f)
        keep = mu.valid & mu.grid.central_window(0.75)
        spreads.append(np.std(np.abs(mu.values[keep])))
    assert spreads[1] <= 1e-2
    assert spreads[1] < spreads[0]


def test_member_pushforward_matches_family(member_064, exp_x):
    g = member_064.f.grid
    mu = pushforward_mu(member_064.f, g)
    assert coefficient_mismatch(mu, family_coefficient(0.3, exp_x), g.central_window(0.75)) <= 1e-2


def test_member_lemma3(member_064, exp_x):
    w = member_064.f.grid.central_window(0.75)
    assert lemma3_residual(member_064.f, exp_x, w, threshold=np.inf) <= 1e-2


def test_member_lemma1(member_128):
    f = member_128.f
    assert lemma1_residual(f, where=f.grid.central_window(0.75)) <= 1e-2


def test_member_lemma1_lemma2_decrease(member_032, member_064, member_128, exp_x):
    fs = [m.f for m in (member_032, member_064, member_128)]
    l1 = [lemma1_residual(f, where=f.grid.central_window(0.75)) for f in fs]
    l2 = [lemma2_residual(f, exp_x, f.grid.central_window(0.75)) for f in fs]
    assert l1[0] > l1[1] > l1[2]
    assert all(3 <= r <= 5 for r in ratios(l2))


def test_member_companion_distortion(member_064, exp_x):
    f = member_064.f
    h = companion_map(f, exp_x, threshold=np.inf)
    assert distortion_mismatch(h, f, f.grid.central_window(0.75)) <= 1e-2


@pytest.mark.xfail(strict=True, reason="trapezoidal antiderivatives carry an O(h^2) defect near 1e-2 at h=1/64")
def test_member_companion_harmonic_below_1e3(member_064, exp_x):
    h = companion_map(member_064.f, exp_x, threshold=np.inf)
    w = h.grid.central_window(0.75)
    re = h.with_values(h.values.real + 0j)
    im = h.with_values(h.values.imag + 0j)
    assert max(harmonic_residual(re, w), harmonic_residual(im, w)) <= 1e-3
