import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinbeam.detection import Aperture
from twinbeam.errors import (
    DegenerateInputError,
    DiscretizationError,
    IncompatibleGridError,
    InsufficientBasisError,
    InvalidArgumentError,
    NonUnitaryChangeError,
)
from twinbeam.modes import (
    GridSpec,
    ModeBasis,
    ScalarField,
    adapted_mode,
    basis_change_matrix,
    combine,
    extend_basis,
    far_field,
    field_from_csv,
    field_to_csv,
    hermite_gauss_mode,
    inner_product,
    mode_from_descriptor,
    orthonormalize,
    ring_mode,
)

from conftest import W0


def test_grid_validation():
    for bad in [(3, 4), (0, 4), (4, -2)]:
        with pytest.raises(InvalidArgumentError):
            GridSpec(bad[0], bad[1], 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        GridSpec(4, 4, 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        GridSpec(4, 4, 1.0, 1.0, "middle")
    g = GridSpec(4, 4, 1.0, 2.0)
    assert g.x[g.nx // 2] == 0.0 and g.y[2] == 0.0
    assert GridSpec.from_dict(g.to_dict()) == g


def test_fundamental_normalized(hg):
    assert abs(hg(0, 0).norm_sq - 1) < 1e-6
    X, Y = hg(0, 0).grid.mesh
    expected = math.sqrt(2 / math.pi) / W0 * np.exp(-(X**2 + Y**2) / W0**2)
    assert np.max(np.abs(hg(0, 0).samples - expected)) < 1e-6 * expected.max()


def test_odd_mode_vanishes_at_center(hg):
    g = hg(1, 0).grid
    assert hg(1, 0).samples[g.ny // 2, g.nx // 2] == 0


@pytest.mark.parametrize("p,q", [(0, 0), (1, 0), (2, 1), (3, 2), (6, 6)])
def test_parity(hg, p, q):
    s = hg(p, q).samples[1:, 1:]  # drop the unpaired first row/column
    assert np.allclose(s[:, ::-1], (-1) ** p * s, atol=1e-12 * np.abs(s).max())
    assert np.allclose(s[::-1, :], (-1) ** q * s, atol=1e-12 * np.abs(s).max())


def test_orthonormality_up_to_order_six(hg):
    modes = [hg(p, q) for p in range(7) for q in range(7)]
    basis = ModeBasis(modes[0].grid, modes)
    assert np.max(np.abs(basis.gram() - np.eye(len(modes)))) <= 1e-6
    assert abs(inner_product(hg(1, 0), hg(0, 0))) < 1e-6
    assert abs(inner_product(hg(1, 0), hg(1, 0)) - 1) < 1e-6


def test_hg_errors(grid):
    with pytest.raises(InvalidArgumentError):
        hermite_gauss_mode(0, 0, 0.0, grid)
    with pytest.raises(InvalidArgumentError):
        hermite_gauss_mode(-1, 0, W0, grid)
    with pytest.raises(DiscretizationError):
        hermite_gauss_mode(0, 0, 4 * W0, grid)


def test_inner_product_basics(hg, coarse_grid):
    f = hg(0, 0)
    assert inner_product(f, f) == pytest.approx(1, abs=1e-12)
    assert abs(inner_product(f, hg(2, 0))) < 1e-6
    g = combine([hg(1, 0), hg(0, 1)], [1 + 2j, 0.5j])
    assert inner_product(f, g) == pytest.approx(np.conj(inner_product(g, f)))
    with pytest.raises(IncompatibleGridError):
        inner_product(f, hermite_gauss_mode(0, 0, W0, coarse_grid))


def test_gaussian_over_disk(hg):
    # |u00|^2 integrated over r < w0 is 1 - exp(-2)
    val = inner_product(hg(0, 0), hg(0, 0), Aperture.disk(W0))
    assert val.real == pytest.approx(1 - math.exp(-2), abs=1e-3)


@given(st.floats(0.05, 3.5), st.floats(0.05, 3.5))
def test_aperture_norm_monotone(hg, r1, r2):
    lo, hi = sorted((r1, r2))
    f = combine([hg(0, 0), hg(2, 1)], [1.0, 0.7j])
    a = inner_product(f, f, Aperture.disk(lo * W0)).real
    b = inner_product(f, f, Aperture.disk(hi * W0)).real
    assert a <= b + 1e-12


def test_adapted_mode(hg):
    u = hg(0, 0)
    v = adapted_mode(u * (2 - 3j))
    assert abs(abs(inner_product(v, u)) - 1) < 1e-12
    assert np.allclose(adapted_mode(u).samples, u.samples)
    w = adapted_mode(3 * hg(0, 0) + 4 * hg(0, 1))
    assert np.allclose(w.samples, (3 * hg(0, 0).samples + 4 * hg(0, 1).samples) / 5, atol=1e-9)
    with pytest.raises(DegenerateInputError):
        adapted_mode(u * 0)


def test_extend_basis(hg):
    b = extend_basis(hg(0, 0), [hg(0, 0), hg(0, 1), hg(1, 0)], 3)
    assert np.max(np.abs(b.gram() - np.eye(3))) < 1e-10
    assert np.allclose(b[1].samples, hg(0, 1).samples, atol=1e-9)
    assert np.allclose(b[2].samples, hg(1, 0).samples, atol=1e-9)

    v0 = (hg(0, 0) + hg(0, 1)) / math.sqrt(2)
    b = extend_basis(v0, [hg(0, 0), hg(0, 1)], 2)
    expected = (hg(0, 0).samples - hg(0, 1).samples) / math.sqrt(2)
    assert min(np.max(np.abs(b[1].samples - s * expected)) for s in (1, -1)) < 1e-8
    assert b[0] is v0

    with pytest.raises(InsufficientBasisError):
        extend_basis(hg(0, 0), [hg(0, 0) * 2], 2)


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=8),
       st.integers(0, 2**32 - 1))
def test_extend_basis_orthonormal(hg, seeds, s):
    rng = np.random.default_rng(s)
    fields = [combine([hg(p, q), hg(q, p)], rng.normal(size=2) + 1j * rng.normal(size=2))
              for p, q in seeds]
    v0 = adapted_mode(combine([hg(0, 0), hg(1, 1)], rng.normal(size=2)))
    rank = len(orthonormalize([v0] + fields, skip_below=1e-8))
    b = extend_basis(v0, fields, rank)
    assert len(b) == rank
    assert np.max(np.abs(b.gram() - np.eye(rank))) < 1e-10


def test_basis_change(hg):
    a = ModeBasis(hg(0, 0).grid, (hg(0, 0), hg(0, 1)))
    assert np.allclose(basis_change_matrix(a, a), np.eye(2), atol=1e-12)
    plus = (hg(0, 0) + hg(0, 1)) / math.sqrt(2)
    minus = (hg(0, 0) - hg(0, 1)) / math.sqrt(2)
    b = ModeBasis(a.grid, (plus, minus))
    U = basis_change_matrix(a, b)
    assert np.allclose(U, np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-12)
    c = ModeBasis(a.grid, (hg(0, 0), hg(1, 0)))
    with pytest.raises(NonUnitaryChangeError):
        basis_change_matrix(a, c)


@given(st.integers(0, 2**32 - 1))
def test_basis_change_random_rotation(hg, s):
    rng = np.random.default_rng(s)
    a = ModeBasis(hg(0, 0).grid, (hg(0, 0), hg(1, 0), hg(0, 1)))
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(M)
    b = ModeBasis(a.grid, tuple(combine(a.modes, Q[:, j]) for j in range(3)))
    U = basis_change_matrix(a, b)
    assert np.max(np.abs(U @ U.conj().T - np.eye(3))) <= 1e-10


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                min_size=6, max_size=6))
def test_parseval(hg, coeffs):
    modes = [hg(p, q) for p in range(3) for q in range(3)]
    basis = ModeBasis(modes[0].grid, modes)
    f = combine([hg(0, 0), hg(1, 1), hg(2, 0), hg(0, 2), hg(2, 2), hg(3, 0)], coeffs)
    resid = basis.projection_residual(f)
    total = np.sum(np.abs(basis.coefficients(f)) ** 2)
    assert total <= f.norm_sq + 1e-9
    assert f.norm_sq - total == pytest.approx(resid**2, abs=1e-9)


LAMBDA, FOCAL = 1.064e-6, 0.2


@pytest.mark.parametrize("p,q", [(p, q) for p in range(3) for q in range(3)])
def test_far_field_eigenfunction(hg, p, q):
    # Hermite-Gauss modes are Fourier eigenfunctions: |FT u_pq| is u_pq with
    # waist lambda f / (pi w0)
    ff = far_field(hg(p, q), FOCAL, LAMBDA)
    assert ff.grid.plane == "far"
    assert ff.grid.extent_x == pytest.approx(LAMBDA * FOCAL * 256 / (8 * W0))
    w_far = LAMBDA * FOCAL / (math.pi * W0)
    ref = hermite_gauss_mode(p, q, w_far, ff.grid)
    assert ff.norm_sq == pytest.approx(1, abs=1e-6)
    dev = np.max(np.abs(np.abs(ff.samples) - np.abs(ref.samples))) / np.abs(ref.samples).max()
    assert dev <= 1e-3


def test_far_field_twice_flips_parity(hg):
    f = combine([hg(0, 0), hg(1, 0), hg(2, 1)], [1, 0.5j, -0.3])
    back = far_field(far_field(f, FOCAL, LAMBDA), FOCAL, LAMBDA)
    assert back.grid == f.grid
    s = f.samples
    flipped = np.roll(s[::-1, ::-1], (1, 1), axis=(0, 1))  # x -> -x on the centered grid
    assert np.max(np.abs(back.samples - flipped)) <= 1e-6 * np.abs(s).max()
    assert far_field(f, FOCAL, LAMBDA).norm_sq == pytest.approx(f.norm_sq, abs=1e-6)
    with pytest.raises(InvalidArgumentError):
        far_field(f, -1.0, LAMBDA)


def test_ring_mode(grid, hg):
    r = ring_mode(2 * W0, 0.4 * W0, grid)
    assert r.norm_sq == pytest.approx(1, abs=1e-12)
    assert abs(inner_product(hg(0, 0), r)) < 1e-12
    for rad in (0.5, 1.0, 2.0):
        assert abs(inner_product(hg(0, 0), r, Aperture.disk(rad * W0))) < 1e-12
    real = ring_mode(2 * W0, 0.4 * W0, grid, charge=0, orthogonal_to=[hg(0, 0)])
    assert abs(inner_product(hg(0, 0), real)) < 1e-12
    with pytest.raises(DiscretizationError):
        ring_mode(3.8 * W0, 0.4 * W0, grid)


def test_descriptors_rebuild(hg, grid):
    f = combine([hg(0, 0), ring_mode(2 * W0, 0.4 * W0, grid)], [0.6, 0.8j])
    g = mode_from_descriptor(f.descriptor, grid)
    assert np.array_equal(f.samples, g.samples)
    ff = far_field(hg(1, 0), FOCAL, LAMBDA)
    assert np.array_equal(mode_from_descriptor(ff.descriptor, ff.grid).samples, ff.samples)


def test_field_csv_roundtrip(tmp_path, coarse_grid):
    f = combine([hermite_gauss_mode(1, 0, W0, coarse_grid)], [1 + 0.5j])
    path = tmp_path / "field.csv"
    field_to_csv(f, path)
    assert path.read_text().startswith("# grid nx=64 ny=64")
    g = field_from_csv(path)
    assert g.grid == f.grid
    assert np.array_equal(g.samples, f.samples)


def test_field_immutable(hg):
    with pytest.raises(ValueError):
        hg(0, 0).samples[0, 0] = 1.0
    with pytest.raises(InvalidArgumentError):
        ScalarField(hg(0, 0).grid, np.full((256, 256), np.nan))
