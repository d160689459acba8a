import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from twinbeam.detection import (
    Aperture,
    GainSetting,
    detect_partial,
    diff_noise,
    iris_sweep,
    normalized_noises,
    overlap_coefficients,
    predict_diff_variance_single_mode,
    predict_partial_variance_single_mode,
    single_mode_line,
    whole_beam_noise,
)
from twinbeam.errors import (
    InvalidArgumentError,
    PlaneMismatchError,
    UndefinedNoiseError,
    UnphysicalSpecError,
)
from twinbeam.modes import GridSpec, hermite_gauss_mode, ring_mode
from twinbeam.state import (
    TwinPairSpec,
    apply_loss,
    coherent_state,
    multimode_twin_state,
    twin_pair_state,
)

from conftest import W0
from oracles import (
    gaussian_disk_fraction,
    pixel_partial_variance,
    thinned_diff_variance,
    thinned_variance,
)

N = 1e4
HALF_POWER = W0 * math.sqrt(math.log(2) / 2)

disks = st.builds(
    lambda r, x, y: Aperture.disk(r * W0, (x * W0, y * W0)),
    st.floats(0.05, 3.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
)


@pytest.fixture(scope="module")
def v2(hg):
    return twin_pair_state(TwinPairSpec(hg(0, 0), hg(0, 0), N, N, 0.8, 2.0))


@pytest.fixture(scope="module")
def tilted(hg):
    """Single-mode pair in a superposition of Hermite-Gauss modes."""
    m = (0.8 * hg(0, 0) + 0.6 * hg(1, 0))
    o = (0.6 * hg(0, 0) - 0.8 * hg(1, 0))
    return multimode_twin_state([
        TwinPairSpec(m, m, N, N, 0.6, 1.7),
        TwinPairSpec(o, o, 0.0, 0.0, 1.0, 1.0),
    ])


def test_aperture_validation(grid):
    with pytest.raises(InvalidArgumentError):
        Aperture.disk(-1.0)
    with pytest.raises(InvalidArgumentError):
        Aperture(radius=1e-3, plane="side")
    far = Aperture.disk(W0, plane="far")
    with pytest.raises(PlaneMismatchError):
        far.weights(grid)
    with pytest.raises(InvalidArgumentError):
        Aperture.disk(W0, center=(1.0, 1.0)).weights(grid)
    assert not Aperture.disk(0.0).weights(grid).any()
    assert np.all(Aperture.full().weights(grid) == 1)


def test_overlap_coefficients(hg, v2, tilted):
    c = overlap_coefficients(v2, "signal", Aperture.full())
    assert c == pytest.approx([math.sqrt(N)], rel=1e-12)
    c = overlap_coefficients(tilted, "signal", Aperture.full())
    assert abs(c[0]) == pytest.approx(math.sqrt(N), rel=1e-9)
    assert abs(c[1]) < 1e-9 * math.sqrt(N)
    c = overlap_coefficients(v2, "signal", Aperture.disk(W0))
    assert c[0] / math.sqrt(N) == pytest.approx(gaussian_disk_fraction(W0, W0), abs=1e-3)
    assert np.all(overlap_coefficients(v2, "signal", Aperture.disk(0.0)) == 0)


@given(disks)
def test_overlap_bounded_by_mean(tilted, ap):
    for beam in ("signal", "idler"):
        c = overlap_coefficients(tilted, beam, ap)
        assert c @ c <= detect_partial(tilted, beam, ap).mean * (1 + 1e-9) + 1e-9


def test_shot_noise_identity(hg, rng):
    s = coherent_state(hg(0, 0), 3e3, 7e3)
    for _ in range(50):
        ap = Aperture.disk(rng.uniform(0.05, 3) * W0, tuple(rng.uniform(-1, 1, 2) * W0))
        for beam in ("signal", "idler"):
            r = detect_partial(s, beam, ap)
            assert abs(r.variance - r.mean) <= 1e-12 * max(r.mean, 1.0)


def test_single_mode_full_aperture(v2):
    r = detect_partial(v2, "signal", Aperture.full())
    assert r.variance / r.mean == pytest.approx(2.0, abs=1e-12)
    assert r.transmittance == pytest.approx(1.0)


def test_half_power_disk_eq6(v2):
    ap = Aperture.disk(HALF_POWER)
    r = detect_partial(v2, "signal", ap)
    assert r.transmittance == pytest.approx(0.5, abs=1e-3)
    full = detect_partial(v2, "signal", Aperture.full())
    pred = predict_partial_variance_single_mode(r.mean, full.mean, full.variance)
    assert r.variance == pytest.approx(pred, abs=1e-9 * pred)


def test_half_power_disk_pixel_monte_carlo(coarse_grid):
    # brute-force Gaussian sampling on a 64 x 64 grid, every cell a mode
    u = hermite_gauss_mode(0, 0, W0, coarse_grid)
    s = twin_pair_state(TwinPairSpec(u, u, N, N, 0.8, 2.0))
    ap = Aperture.disk(HALF_POWER)
    r = detect_partial(s, "signal", ap)
    rng = np.random.default_rng(7)
    mc = pixel_partial_variance(s, "signal", ap.weights(coarse_grid), 1_000_000, rng)
    assert mc == pytest.approx(r.variance, rel=0.01)


def test_partial_variance_thinning_monte_carlo(v2):
    ap = Aperture.disk(HALF_POWER)
    r = detect_partial(v2, "signal", ap)
    full = detect_partial(v2, "signal", Aperture.full())
    mc = thinned_variance(full.mean, full.variance, r.transmittance, 1_000_000,
                          np.random.default_rng(11))
    assert mc == pytest.approx(r.variance, rel=0.01)


def test_predict_partial_examples():
    for na in (0.0, 10.0, 55.5, 100.0):
        assert predict_partial_variance_single_mode(na, 100.0, 100.0) == pytest.approx(na)
    assert predict_partial_variance_single_mode(100.0, 100.0, 37.0) == pytest.approx(37.0)
    assert predict_partial_variance_single_mode(50.0, 100.0, 50.0) == pytest.approx(37.5)
    with pytest.raises(InvalidArgumentError):
        predict_partial_variance_single_mode(120.0, 100.0, 50.0)
    mc = thinned_variance(100.0 * 1e2, 50.0 * 1e2, 0.5, 1_000_000, np.random.default_rng(3))
    assert mc / 1e2 == pytest.approx(37.5, rel=0.01)


def test_predict_diff_examples():
    assert predict_diff_variance_single_mode(40, 60, 40, 60, 33.0) == pytest.approx(33.0)
    for T in (0.1, 0.5, 0.9):
        v = predict_diff_variance_single_mode(T * 50, T * 50, 50, 50, 100.0)
        assert v / (T * 100) == pytest.approx(1.0)
    v = predict_diff_variance_single_mode(25, 25, 50, 50, 80.0)
    assert v / 50 == pytest.approx(0.90)
    assert single_mode_line(0.8, 0.5) == pytest.approx(0.9)
    # photon-thinning cross-check of the same number
    mean, var_each = 1e4, 2e4
    cov = (2 * var_each - 0.8 * 2 * mean) / 2
    mc = thinned_diff_variance(mean, var_each, cov, 0.5, 1_000_000, np.random.default_rng(5))
    assert mc / mean == pytest.approx(0.90, rel=0.01)
    with pytest.raises(InvalidArgumentError):
        predict_diff_variance_single_mode(60, 10, 50, 50, 80.0)


def test_diff_noise_examples(hg):
    s = twin_pair_state(TwinPairSpec(hg(0, 0), hg(0, 0), N, N, 0.6))
    lossy = apply_loss(s, math.sqrt(0.8), math.sqrt(0.5))
    r = diff_noise(lossy, gains=GainSetting.from_losses(0.8, 0.5))
    assert r.n_corr == pytest.approx(0.60, abs=1e-9)
    r1 = diff_noise(lossy)
    assert r1.n_corr == r1.n_d
    split = coherent_state(hg(0, 0), N / 2, N / 2)
    assert diff_noise(split).n_d == pytest.approx(1.0, abs=1e-12)
    dark = coherent_state(hg(0, 0), 0.0, 0.0)
    with pytest.raises(UndefinedNoiseError):
        diff_noise(dark)
    with pytest.raises(InvalidArgumentError):
        GainSetting(0.0, 1.0)


@given(disks, st.floats(0.0, 1.9), st.floats(0.3, 3.0))
def test_single_mode_consistency(hg, ap, n, v):
    m = 0.8 * hg(0, 0) + 0.6 * hg(1, 1)
    try:
        s = twin_pair_state(TwinPairSpec(m, m, N, 2 * N, n, max(v, n)))
    except UnphysicalSpecError:
        assume(False)
    for beam in ("signal", "idler"):
        full = detect_partial(s, beam, Aperture.full())
        r = detect_partial(s, beam, ap)
        pred = predict_partial_variance_single_mode(min(r.mean, full.mean), full.mean, full.variance)
        assert abs(r.variance - pred) <= 1e-9 * full.variance


@given(st.floats(0.05, 3.0))
def test_aperture_loss_equivalence(tilted, radius):
    ap = Aperture.disk(radius * W0)
    r = detect_partial(tilted, "signal", ap)
    t = math.sqrt(r.transmittance)
    lossy = detect_partial(apply_loss(tilted, t, 1.0), "signal", Aperture.full())
    assert abs(r.variance - lossy.variance) <= 1e-9 * max(r.variance, 1e-300) + 1e-9
    assert abs(r.mean - lossy.mean) <= 1e-9 * r.mean + 1e-9


@given(st.sampled_from([0.3, 0.5, 0.8, 1.0]), st.sampled_from([0.3, 0.5, 0.8, 1.0]),
       st.floats(0.0, 1.9))
def test_n_corr_invariance(tilted, hg, t1sq, t2sq, n):
    s = twin_pair_state(TwinPairSpec(hg(0, 0), hg(0, 0), N, N, n))
    lossy = apply_loss(s, math.sqrt(t1sq), math.sqrt(t2sq))
    r = diff_noise(lossy, gains=GainSetting.from_losses(t1sq, t2sq))
    assert r.n_corr == pytest.approx(n, abs=1e-9)


def test_multimode_signature(hg, grid):
    ring = ring_mode(2 * W0, 0.4 * W0, grid)
    s = multimode_twin_state([
        TwinPairSpec(hg(0, 0), hg(0, 0), N, N, 1.0),
        TwinPairSpec(ring, ring, N, N, 0.5),
    ])
    assert whole_beam_noise(s) == pytest.approx(0.75, abs=1e-10)
    sw = iris_sweep(s, np.linspace(3.5, 0.2, 60) * W0)
    line = single_mode_line(0.75, sw.T)
    assert np.max(np.abs(sw.n_d - line)) > 0.05


def test_iris_sweep_single_mode(v2):
    sw = iris_sweep(v2, np.linspace(3.5, 0.1, 40) * W0)
    assert np.all(np.diff(sw.T) <= 1e-12)
    assert np.max(np.abs(sw.n_d - single_mode_line(0.8, sw.T))) < 1e-9
    assert np.max(np.abs(sw.n_corr - 0.8)) < 1e-9
    one = iris_sweep(v2, [1.5 * W0], target="idler")
    assert one.mean_s[0] == pytest.approx(N)


def test_normalized_noises_arrays():
    ms = np.array([1.0, 2.0, 0.0])
    n_d, n_corr = normalized_noises(ms, ms, ms, ms, 0 * ms, (np.ones(3), np.ones(3)))
    assert n_d[:2] == pytest.approx([1.0, 1.0])
    assert np.isnan(n_d[2])
    with pytest.raises(UndefinedNoiseError):
        normalized_noises(0.0, 0.0, 0.0, 0.0, 0.0)


def test_far_plane_detection():
    from twinbeam.state import far_field_state
    g = GridSpec.balanced(W0, 512)
    u = hermite_gauss_mode(0, 0, W0, g)
    s = twin_pair_state(TwinPairSpec(u, u, N, N, 0.8))
    ff = far_field_state(s, 0.2, 1.064e-6)
    w_far = 1.064e-6 * 0.2 / (math.pi * W0)
    r = detect_partial(ff, "signal", Aperture.disk(w_far, plane="far"))
    assert r.transmittance == pytest.approx(gaussian_disk_fraction(w_far, w_far), abs=1e-3)
    sw = iris_sweep(ff, np.linspace(3, 0.2, 20) * w_far)
    assert np.max(np.abs(sw.n_d - single_mode_line(0.8, sw.T))) < 1e-9
    with pytest.raises(PlaneMismatchError):
        detect_partial(ff, "signal", Aperture.disk(w_far))
