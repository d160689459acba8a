"""Transverse optical modes sampled on a rectangular grid.

Fields are stored as complex arrays indexed ``[iy, ix]``. Sample coordinates
follow the centered DFT convention ``x_k = (k - nx/2) * dx`` so that the grid
center is sampled exactly and the far-field transform is a plain shifted FFT.
Integrals use the midpoint rule, ``sum(f) * dx * dy``.

Every field may carry a ``descriptor``: a small JSON-compatible dict telling
how to rebuild it (``hg``, ``ring``, ``combination`` or ``far_field``). The
descriptors are what gets written when a state is serialized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import eval_hermite

from .errors import (
    DegenerateInputError,
    DiscretizationError,
    IncompatibleGridError,
    InsufficientBasisError,
    InvalidArgumentError,
    NonUnitaryChangeError,
)

PLANES = ("near", "far")

# default sampling: 256 x 256 points over 8 waists
DEFAULT_N = 256
DEFAULT_EXTENT_IN_WAISTS = 8.0


@dataclass(frozen=True)
class GridSpec:
    """Sampling of one transverse plane."""

    nx: int
    ny: int
    extent_x: float
    extent_y: float
    plane: str = "near"

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 2 or n % 2:
                raise InvalidArgumentError(f"{name} must be an even integer >= 2, got {n}")
        if not (self.extent_x > 0 and self.extent_y > 0):
            raise InvalidArgumentError("grid extents must be positive")
        if self.plane not in PLANES:
            raise InvalidArgumentError(f"plane must be one of {PLANES}, got {self.plane!r}")

    @classmethod
    def default(cls, waist: float, plane: str = "near") -> "GridSpec":
        """256 x 256 grid spanning 8 waists in each direction."""
        if waist <= 0:
            raise InvalidArgumentError("waist must be positive")
        ext = DEFAULT_EXTENT_IN_WAISTS * waist
        return cls(DEFAULT_N, DEFAULT_N, ext, ext, plane)

    @classmethod
    def balanced(cls, waist: float, n: int = DEFAULT_N, plane: str = "near") -> "GridSpec":
        """``n x n`` grid of extent ``sqrt(pi n) * waist``.

        The far field of a TEM00 of this waist then has as many samples per
        far-field waist as the near field, whatever the lens.
        """
        if waist <= 0:
            raise InvalidArgumentError("waist must be positive")
        ext = math.sqrt(math.pi * n) * waist
        return cls(n, n, ext, ext, plane)

    @property
    def dx(self) -> float:
        return self.extent_x / self.nx

    @property
    def dy(self) -> float:
        return self.extent_y / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @cached_property
    def mesh(self):
        """``(X, Y)`` coordinate arrays of shape ``(ny, nx)``."""
        X, Y = np.meshgrid(self.x, self.y)
        X.setflags(write=False)
        Y.setflags(write=False)
        return X, Y

    @property
    def half_extent(self) -> float:
        return 0.5 * min(self.extent_x, self.extent_y)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "extent_x": self.extent_x,
            "extent_y": self.extent_y,
            "plane": self.plane,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(int(d["nx"]), int(d["ny"]), float(d["extent_x"]), float(d["extent_y"]), d.get("plane", "near"))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex transverse amplitude sampled on ``grid``.

    ``|samples|**2`` integrates to a photon flux.
    """

    grid: GridSpec
    samples: np.ndarray
    descriptor: Optional[dict] = dc_field(default=None, compare=False)

    def __post_init__(self):
        a = np.array(self.samples, dtype=complex)
        if a.shape != (self.grid.ny, self.grid.nx):
            raise IncompatibleGridError(
                f"samples have shape {a.shape}, grid expects {(self.grid.ny, self.grid.nx)}"
            )
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("field samples must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def norm_sq(self) -> float:
        """Discrete integral of ``|f|**2`` over the whole grid."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.cell_area)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def scaled(self, factor: complex) -> "ScalarField":
        return combine([self], [factor])

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return combine([self, other], [1.0, 1.0])

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return combine([self, other], [1.0, -1.0])

    def __mul__(self, factor) -> "ScalarField":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __truediv__(self, factor) -> "ScalarField":
        return self.scaled(1.0 / factor)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Ordered orthonormal set of modes sharing one grid."""

    grid: GridSpec
    modes: tuple
    tolerance: float = 1e-6

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise InvalidArgumentError("a mode basis needs at least one mode")
        for m in modes:
            if m.grid != self.grid:
                raise IncompatibleGridError("all modes of a basis must share its grid")
        object.__setattr__(self, "modes", modes)
        err = np.max(np.abs(self.gram() - np.eye(len(modes))))
        if err > self.tolerance:
            raise InvalidArgumentError(f"modes are not orthonormal (max Gram error {err:.2e})")

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, k):
        return self.modes[k]

    def __iter__(self):
        return iter(self.modes)

    @cached_property
    def stack(self) -> np.ndarray:
        """Samples of all modes, shape ``(n, ny, nx)``."""
        s = np.stack([m.samples for m in self.modes])
        s.setflags(write=False)
        return s

    def gram(self, weights=None) -> np.ndarray:
        """``G[k, l] = integral of conj(v_k) v_l`` (optionally weighted)."""
        v = self.stack.reshape(len(self.modes), -1)
        if weights is None:
            return (v.conj() @ v.T) * self.grid.cell_area
        w = np.asarray(weights, dtype=float).reshape(-1)
        return (v.conj() @ (v * w).T) * self.grid.cell_area

    def coefficients(self, f: ScalarField) -> np.ndarray:
        """Projections ``<v_k, f>`` of a field onto the basis."""
        _check_same_grid(self.grid, f.grid)
        v = self.stack.reshape(len(self.modes), -1)
        return (v.conj() @ f.samples.reshape(-1)) * self.grid.cell_area

    def synthesize(self, coefficients) -> ScalarField:
        """Field ``sum_k c_k v_k``."""
        return combine(self.modes, coefficients)

    def projection_residual(self, f: ScalarField) -> float:
        """Norm of the part of ``f`` outside the span of the basis."""
        c = self.coefficients(f)
        rest = f.samples - np.tensordot(c, self.stack, axes=1)
        return float(np.sqrt(np.sum(np.abs(rest) ** 2) * self.grid.cell_area))

    @property
    def descriptors(self):
        return [m.descriptor for m in self.modes]


def _check_same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise IncompatibleGridError(f"fields live on different grids: {a} vs {b}")


def _terms(f: ScalarField):
    d = f.descriptor
    if d is None:
        return None
    if d.get("kind") == "combination":
        return [(complex(*c), t) for c, t in zip(d["coefficients"], d["terms"])]
    return [(1.0 + 0j, d)]


def combine(fields: Sequence[ScalarField], coefficients) -> ScalarField:
    """Linear combination ``sum_j c_j f_j``.

    The result keeps a flattened ``combination`` descriptor whenever every
    input is describable.
    """
    fields = list(fields)
    coefficients = np.asarray(coefficients, dtype=complex)
    if len(fields) != len(coefficients) or not fields:
        raise InvalidArgumentError("need one coefficient per field")
    grid = fields[0].grid
    for f in fields[1:]:
        _check_same_grid(grid, f.grid)
    samples = np.tensordot(coefficients, np.stack([f.samples for f in fields]), axes=1)

    descriptor = None
    term_lists = [_terms(f) for f in fields]
    if all(t is not None for t in term_lists):
        merged: list = []
        for c, terms in zip(coefficients, term_lists):
            for tc, t in terms:
                for entry in merged:
                    if entry[1] == t:
                        entry[0] += c * tc
                        break
                else:
                    merged.append([c * tc, t])
        if len(merged) == 1 and merged[0][0] == 1:
            descriptor = merged[0][1]
        else:
            descriptor = {
                "kind": "combination",
                "coefficients": [[float(c.real), float(c.imag)] for c, _ in merged],
                "terms": [t for _, t in merged],
            }
    return ScalarField(grid, samples, descriptor)


def hermite_gauss_1d(p: int, x: np.ndarray, waist: float) -> np.ndarray:
    """Analytically normalized Hermite-Gauss function at the waist plane."""
    pref = (2.0 / math.pi) ** 0.25 / math.sqrt(2.0**p * math.factorial(p) * waist)
    s = math.sqrt(2.0) * x / waist
    return pref * eval_hermite(p, s) * np.exp(-((x / waist) ** 2))


def hermite_gauss_mode(p: int, q: int, waist: float, grid: GridSpec) -> ScalarField:
    """TEM_pq mode with waist ``waist`` at z = 0, centered on the grid.

    The analytic profile is sampled then rescaled to unit discrete norm.
    Raises ``DiscretizationError`` if the sampled norm differs from 1 by more
    than 1e-3 (mode clipped by the grid or undersampled).
    """
    if int(p) != p or int(q) != q or p < 0 or q < 0:
        raise InvalidArgumentError("mode indices must be non-negative integers")
    if not waist > 0:
        raise InvalidArgumentError("waist must be positive")
    p, q = int(p), int(q)
    ux = hermite_gauss_1d(p, grid.x, waist)
    uy = hermite_gauss_1d(q, grid.y, waist)
    samples = np.outer(uy, ux)
    n2 = float(np.sum(samples**2) * grid.cell_area)
    if abs(n2 - 1.0) > 1e-3:
        raise DiscretizationError(
            f"TEM{p}{q} with waist {waist:g} m has discrete norm {n2:.6f} on this grid"
        )
    desc = {"kind": "hg", "p": p, "q": q, "waist": float(waist)}
    return ScalarField(grid, samples / math.sqrt(n2), desc)


def ring_mode(
    radius: float,
    width: float,
    grid: GridSpec,
    charge: int = 1,
    orthogonal_to: Sequence[ScalarField] = (),
) -> ScalarField:
    """Annular mode ``exp(-(r - radius)**2 / width**2) * exp(i charge theta)``.

    With ``charge != 0`` the mode is orthogonal to every rotationally
    symmetric mode (TEM00 in particular) over any centered disk, and its
    intensity vanishes on axis. With ``charge = 0`` the real annulus is
    Gram-Schmidt orthogonalized against ``orthogonal_to``, which leaves a
    small negative central lobe. In both cases the result has unit norm.
    """
    if not (radius >= 0 and width > 0):
        raise InvalidArgumentError("ring radius must be >= 0 and width > 0")
    if int(charge) != charge:
        raise InvalidArgumentError("charge must be an integer")
    X, Y = grid.mesh
    r = np.hypot(X, Y)
    raw = np.exp(-(((r - radius) / width) ** 2))
    edge = np.concatenate([raw[0], raw[-1], raw[:, 0], raw[:, -1]])
    if np.max(edge) > 1e-6:
        raise DiscretizationError("ring mode is clipped by the grid boundary")
    if charge:
        raw = raw * np.exp(1j * int(charge) * np.arctan2(Y, X))
    f = ScalarField(grid, raw)
    for m in orthogonal_to:
        f = ScalarField(grid, f.samples - inner_product(m, f) * m.samples)
    if f.norm_sq < 1e-12 * float(np.sum(np.abs(raw) ** 2) * grid.cell_area):
        raise DegenerateInputError("ring profile lies in the span of the modes it must avoid")
    desc = {
        "kind": "ring",
        "radius": float(radius),
        "width": float(width),
        "charge": int(charge),
        "orthogonal_to": [m.descriptor for m in orthogonal_to],
    }
    return ScalarField(grid, f.samples / f.norm, desc)


def inner_product(f: ScalarField, g: ScalarField, aperture=None) -> complex:
    """``integral of conj(f) * g``, restricted to ``aperture`` when given.

    ``aperture`` is anything with a ``weights(grid)`` method returning the
    per-sample transmission (see ``twinbeam.detection.Aperture``).
    """
    _check_same_grid(f.grid, g.grid)
    prod = np.conj(f.samples) * g.samples
    if aperture is not None:
        prod = prod * aperture.weights(f.grid)
    return complex(np.sum(prod) * f.grid.cell_area)


def adapted_mode(field: ScalarField) -> ScalarField:
    """Unit-norm mode proportional to ``field``."""
    n2 = field.norm_sq
    if not n2 > 0:
        raise DegenerateInputError("cannot build a mode from a zero field")
    return field / math.sqrt(n2)


def extend_basis(
    v0: ScalarField,
    seed_modes: Sequence[ScalarField],
    count: int,
    skip_below: float = 1e-8,
) -> ModeBasis:
    """Orthonormal basis of ``count`` modes whose first element is ``v0``.

    Seeds are orthogonalized in order (modified Gram-Schmidt with one
    re-orthogonalization pass); seeds whose residual norm falls below
    ``skip_below`` are skipped.
    """
    if abs(v0.norm_sq - 1.0) > 1e-6:
        raise InvalidArgumentError("v0 must have unit norm")
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    basis = [v0]
    for s in seed_modes:
        if len(basis) >= count:
            break
        _check_same_grid(v0.grid, s.grid)
        r = _residual(s, basis)
        nr = r.norm
        if nr < skip_below:
            continue
        basis.append(r / nr)
    if len(basis) < count:
        raise InsufficientBasisError(
            f"only {len(basis)} independent modes available, {count} requested"
        )
    return ModeBasis(v0.grid, tuple(basis))


def orthonormalize(fields: Sequence[ScalarField], skip_below: float = 1e-8) -> ModeBasis:
    """Gram-Schmidt over ``fields`` in order, dropping dependent ones."""
    fields = list(fields)
    if not fields:
        raise InvalidArgumentError("nothing to orthonormalize")
    basis = [adapted_mode(fields[0])]
    for s in fields[1:]:
        _check_same_grid(basis[0].grid, s.grid)
        r = _residual(s, basis)
        nr = r.norm
        if nr >= skip_below * max(1.0, s.norm):
            basis.append(r / nr)
    return ModeBasis(basis[0].grid, tuple(basis))


def _residual(s: ScalarField, basis) -> ScalarField:
    # two passes of modified Gram-Schmidt keep the Gram matrix at ~1e-15
    r = s
    for _ in range(2):
        for b in basis:
            r = combine([r, b], [1.0, -inner_product(b, r)])
    return r


def basis_change_matrix(source: ModeBasis, target: ModeBasis, span_tol: float = 1e-6) -> np.ndarray:
    """Unitary ``U[i, j] = <w_i, v_j>`` from basis ``{v}`` to basis ``{w}``.

    Raises ``NonUnitaryChangeError`` when the bases do not span the same
    subspace (projection residual above ``span_tol``) or when the overlap
    matrix is not unitary to 1e-10.
    """
    _check_same_grid(source.grid, target.grid)
    if len(source) != len(target):
        raise NonUnitaryChangeError("bases have different sizes")
    n = len(source)
    w = target.stack.reshape(n, -1)
    v = source.stack.reshape(n, -1)
    U = (w.conj() @ v.T) * source.grid.cell_area
    rest = v - U.T @ w
    resid = np.sqrt(np.sum(np.abs(rest) ** 2, axis=1) * source.grid.cell_area)
    if np.max(resid) > span_tol:
        raise NonUnitaryChangeError(f"bases span different subspaces (residual {np.max(resid):.2e})")
    err = np.max(np.abs(U @ U.conj().T - np.eye(n)))
    if err > 1e-10:
        raise NonUnitaryChangeError(f"overlap matrix is not unitary (error {err:.2e})")
    return U


def far_field_grid(grid: GridSpec, focal_length: float, wavelength: float) -> GridSpec:
    """Grid of the Fourier plane of a lens of focal length ``focal_length``."""
    lf = wavelength * focal_length
    return GridSpec(
        grid.nx,
        grid.ny,
        lf * grid.nx / grid.extent_x,
        lf * grid.ny / grid.extent_y,
        "far" if grid.plane == "near" else "near",
    )


def far_field(field: ScalarField, focal_length: float, wavelength: float) -> ScalarField:
    """Fraunhofer image of ``field`` in the back focal plane of a thin lens.

    Centered DFT scaled by ``dx * dy / (wavelength * focal_length)``, which
    makes the map unitary. The constant ``-i`` prefactor of the optical
    transform is dropped, so applying the map twice gives ``f(-x, -y)``.
    """
    if not (focal_length > 0 and wavelength > 0):
        raise InvalidArgumentError("focal length and wavelength must be positive")
    g = field.grid
    out_grid = far_field_grid(g, focal_length, wavelength)
    spec = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(field.samples)))
    spec *= g.cell_area / (wavelength * focal_length)
    desc = None
    if field.descriptor is not None:
        desc = {
            "kind": "far_field",
            "of": field.descriptor,
            "grid": g.to_dict(),
            "focal_length": float(focal_length),
            "wavelength": float(wavelength),
        }
    return ScalarField(out_grid, spec, desc)


def mode_from_descriptor(desc: dict, grid: GridSpec) -> ScalarField:
    """Rebuild a field from its descriptor on ``grid``."""
    kind = desc.get("kind")
    if kind == "hg":
        return hermite_gauss_mode(desc["p"], desc["q"], desc["waist"], grid)
    if kind == "ring":
        others = [mode_from_descriptor(d, grid) for d in desc.get("orthogonal_to", [])]
        return ring_mode(desc["radius"], desc["width"], grid, desc.get("charge", 0), others)
    if kind == "combination":
        terms = [mode_from_descriptor(t, grid) for t in desc["terms"]]
        return combine(terms, [complex(*c) for c in desc["coefficients"]])
    if kind == "far_field":
        src_grid = GridSpec.from_dict(desc["grid"])
        src = mode_from_descriptor(desc["of"], src_grid)
        out = far_field(src, desc["focal_length"], desc["wavelength"])
        _check_same_grid(out.grid, grid)
        return out
    raise InvalidArgumentError(f"unknown mode descriptor kind {kind!r}")


def field_to_csv(field: ScalarField, path) -> None:
    """Dump a field as ``x,y,re,im`` rows under a one-line grid header."""
    g = field.grid
    X, Y = g.mesh
    data = np.column_stack(
        [X.ravel(), Y.ravel(), field.samples.real.ravel(), field.samples.imag.ravel()]
    )
    header = (
        f"grid nx={g.nx} ny={g.ny} extent_x={g.extent_x!r} "
        f"extent_y={g.extent_y!r} plane={g.plane}; columns x,y,re,im"
    )
    np.savetxt(path, data, delimiter=",", header=header, fmt="%.17g")


def field_from_csv(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().lstrip("#").strip()
    spec = header.split(";")[0].split()[1:]
    kv = dict(item.split("=") for item in spec)
    grid = GridSpec(int(kv["nx"]), int(kv["ny"]), float(kv["extent_x"]), float(kv["extent_y"]), kv["plane"])
    data = np.loadtxt(path, delimiter=",", comments="#")
    samples = (data[:, 2] + 1j * data[:, 3]).reshape(grid.ny, grid.nx)
    return ScalarField(grid, samples)
