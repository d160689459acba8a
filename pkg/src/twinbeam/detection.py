"""Partial photodetection of twin beams.

All detection statistics are quadratic forms in the state's mode
coordinates. For a beam with real mean vector ``m`` and amplitude-quadrature
covariance block ``C`` (vacuum = 1/4), an aperture with transmission map
``w(r)`` gives

* aperture Gram matrix ``G[k, l] = Re integral w conj(v_k) v_l``
* overlap coefficients ``c = G m``
* mean detected flux ``N_A = m^T G m``
* variance ``4 c^T (C - I/4) c + N_A``

The last line treats every mode outside the basis, and the sub-pixel loss
of partially covered samples, as vacuum. It is exact for any basis
truncation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError, PlaneMismatchError, UndefinedNoiseError
from .modes import PLANES, GridSpec

BEAMS = ("signal", "idler")

# sub-samples per edge pixel (per axis) when rasterizing a disk
_SUPERSAMPLE = 16


@dataclass(frozen=True)
class Aperture:
    """Iris in a transverse plane: the whole plane, or a disk.

    A disk of radius 0 is a closed iris.
    """

    radius: Optional[float] = None
    center: Tuple[float, float] = (0.0, 0.0)
    plane: str = "near"

    def __post_init__(self):
        if self.radius is not None and not self.radius >= 0:
            raise InvalidArgumentError("disk radius must be >= 0")
        if self.plane not in PLANES:
            raise InvalidArgumentError(f"plane must be one of {PLANES}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def full(cls) -> "Aperture":
        return cls()

    @classmethod
    def disk(cls, radius: float, center=(0.0, 0.0), plane: str = "near") -> "Aperture":
        return cls(float(radius), center, plane)

    @property
    def is_full(self) -> bool:
        return self.radius is None

    def weights(self, grid: GridSpec) -> np.ndarray:
        """Fraction of each grid cell transmitted by the aperture."""
        if self.is_full:
            return np.ones((grid.ny, grid.nx))
        if self.plane != grid.plane:
            raise PlaneMismatchError(
                f"aperture lies in the {self.plane} field, fields are sampled in the {grid.plane} field"
            )
        return _disk_weights(grid, self.center, self.radius)


@lru_cache(maxsize=1024)
def _disk_weights(grid: GridSpec, center, radius) -> np.ndarray:
    cx, cy = center
    # distance from the disk center to the grid rectangle
    gx = max(abs(cx) - 0.5 * grid.extent_x, 0.0)
    gy = max(abs(cy) - 0.5 * grid.extent_y, 0.0)
    if np.hypot(gx, gy) >= radius and radius > 0:
        raise InvalidArgumentError("disk aperture does not intersect the grid")
    X, Y = grid.mesh
    r = np.hypot(X - cx, Y - cy)
    half_diag = 0.5 * np.hypot(grid.dx, grid.dy)
    w = (r <= radius - half_diag).astype(float)
    edge = np.abs(r - radius) < half_diag
    if radius > 0 and np.any(edge):
        offs = (np.arange(_SUPERSAMPLE) + 0.5) / _SUPERSAMPLE - 0.5
        ox, oy = np.meshgrid(offs * grid.dx, offs * grid.dy)
        ex = X[edge][:, None] + ox.ravel() - cx
        ey = Y[edge][:, None] + oy.ravel() - cy
        w[edge] = np.mean(ex**2 + ey**2 <= radius**2, axis=1)
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class DetectionResult:
    mean: float
    variance: float
    transmittance: float


@dataclass(frozen=True)
class GainSetting:
    """Electronic gains applied to the signal (g1) and idler (g2) channels."""

    g1: float = 1.0
    g2: float = 1.0

    def __post_init__(self):
        if not (self.g1 > 0 and self.g2 > 0):
            raise InvalidArgumentError("gains must be positive")

    @classmethod
    def from_losses(cls, t1_sq: float, t2_sq: float) -> "GainSetting":
        """Gains 1/t^2 restoring the loss-free mean currents."""
        return cls(1.0 / t1_sq, 1.0 / t2_sq)


class DiffNoise(NamedTuple):
    n_d: float
    n_corr: float
    mean_s: float
    mean_i: float


class JointDetection(NamedTuple):
    """Means and covariance of the detected fluxes of both beams."""

    mean_s: float
    mean_i: float
    var_s: float
    var_i: float
    cov: float


def _beam_index(beam) -> int:
    if beam in (0, "signal", "s"):
        return 0
    if beam in (1, "idler", "i"):
        return 1
    raise InvalidArgumentError(f"beam must be 'signal' or 'idler', got {beam!r}")


def aperture_gram(basis, aperture: Aperture) -> np.ndarray:
    """Real part of the aperture-weighted Gram matrix of a basis."""
    if aperture.is_full:
        return np.real(basis.gram())
    return np.real(basis.gram(aperture.weights(basis.grid)))


def overlap_coefficients(state, beam, aperture: Aperture) -> np.ndarray:
    """Real overlaps ``c_k`` of the beam's aperture-truncated mean field with mode ``k``."""
    k = _beam_index(beam)
    return aperture_gram(state.basis, aperture) @ state.means[k]


def _beam_stats(state, k, G):
    m = state.means[k]
    c = G @ m
    n = state.n_modes
    block = state.cov[k * n:(k + 1) * n, k * n:(k + 1) * n]
    mean = float(m @ G @ m)
    var = float(4.0 * c @ (block - 0.25 * np.eye(n)) @ c + mean)
    return c, max(mean, 0.0), max(var, 0.0)


def detect_partial(state, beam, aperture: Aperture) -> DetectionResult:
    """Mean and variance of the photon flux detected behind ``aperture``."""
    k = _beam_index(beam)
    G = aperture_gram(state.basis, aperture)
    _, mean, var = _beam_stats(state, k, G)
    total = float(state.means[k] @ state.means[k])
    T = mean / total if total > 0 else 0.0
    return DetectionResult(mean, var, min(max(T, 0.0), 1.0))


def joint_detection(state, aperture_s: Aperture, aperture_i: Aperture) -> JointDetection:
    """Both beams detected simultaneously, each behind its own aperture."""
    Gs = aperture_gram(state.basis, aperture_s)
    Gi = Gs if aperture_i == aperture_s else aperture_gram(state.basis, aperture_i)
    return joint_from_grams(state, Gs, Gi)


def joint_from_grams(state, Gs: np.ndarray, Gi: np.ndarray) -> JointDetection:
    n = state.n_modes
    cs, ms, vs = _beam_stats(state, 0, Gs)
    ci, mi, vi = _beam_stats(state, 1, Gi)
    cov = float(4.0 * cs @ state.cov[:n, n:] @ ci)
    return JointDetection(ms, mi, vs, vi, cov)


def normalized_noises(mean_s, mean_i, var_s, var_i, cov, gains=GainSetting()):
    """``(n_d, n_corr)`` from detected means and (co)variances.

    Variances are in units where a coherent beam has variance = mean, i.e.
    ``4 * Delta^2 E_v = 1``. ``gains`` is a ``GainSetting`` or a ``(g1, g2)``
    pair; all arguments may be arrays (zero flux then gives NaN).
    """
    g1, g2 = (gains.g1, gains.g2) if isinstance(gains, GainSetting) else gains
    total = np.asarray(mean_s + mean_i, dtype=float)
    if total.ndim == 0 and not total > 0:
        raise UndefinedNoiseError("both detected means are zero")
    gsum = g1 * mean_s + g2 * mean_i
    var_g = g1**2 * var_s + g2**2 * var_i - 2.0 * g1 * g2 * cov
    with np.errstate(divide="ignore", invalid="ignore"):
        n_d = (var_s + var_i - 2.0 * cov) / total
        # 1 - (g1^2 N1 + g2^2 N2) / gsum, written to vanish exactly for unit gains
        n_corr = var_g / gsum + (g1 * (1.0 - g1) * mean_s + g2 * (1.0 - g2) * mean_i) / gsum
    if np.ndim(n_d) == 0 and np.ndim(n_corr) == 0:
        return float(n_d), float(n_corr)
    return n_d, n_corr


def diff_noise(state, aperture_s: Aperture = Aperture(), aperture_i: Aperture = Aperture(),
               gains: GainSetting = GainSetting()) -> DiffNoise:
    """Direct (``n_d``) and gain-corrected (``n_corr``) intensity-difference noise."""
    j = joint_detection(state, aperture_s, aperture_i)
    n_d, n_corr = normalized_noises(j.mean_s, j.mean_i, j.var_s, j.var_i, j.cov, gains)
    return DiffNoise(n_d, n_corr, j.mean_s, j.mean_i)


def whole_beam_noise(state) -> float:
    """Normalized intensity-difference noise of the fully detected beams."""
    return diff_noise(state).n_d


def predict_partial_variance_single_mode(n_a: float, n_tot: float, var_tot: float) -> float:
    """Variance of a partial detection of a single-mode beam.

    ``N_A + (N_A / N_tot)**2 * (var_tot - N_tot)``: the aperture acts like a
    linear loss of transmittance ``N_A / N_tot``.
    """
    if not n_tot > 0:
        raise InvalidArgumentError("total flux must be positive")
    if n_a < 0 or n_a > n_tot * (1 + 1e-12):
        raise InvalidArgumentError("partial flux must lie in [0, N_tot]")
    return n_a + (n_a / n_tot) ** 2 * (var_tot - n_tot)


def predict_diff_variance_single_mode(n1_a, n2_a, n1_tot, n2_tot, var_dif_tot) -> float:
    """Variance of the partially detected intensity difference of single-mode twin beams."""
    tot = n1_tot + n2_tot
    part = n1_a + n2_a
    if not (n1_tot > 0 and n2_tot > 0):
        raise InvalidArgumentError("total fluxes must be positive")
    if min(n1_a, n2_a) < 0 or n1_a > n1_tot * (1 + 1e-12) or n2_a > n2_tot * (1 + 1e-12):
        raise InvalidArgumentError("partial fluxes must lie in [0, N_tot]")
    return part + (part / tot) ** 2 * (var_dif_tot - tot)


def single_mode_line(n_open: float, T):
    """Normalized difference noise ``1 + T (n - 1)`` expected for single-mode beams."""
    return 1.0 + np.asarray(T, dtype=float) * (n_open - 1.0)


class IrisSweep(NamedTuple):
    radius: np.ndarray
    T: np.ndarray
    n_d: np.ndarray
    n_corr: np.ndarray
    mean_s: np.ndarray
    mean_i: np.ndarray


def iris_sweep(state, radii, target: str = "both", center=(0.0, 0.0),
               gains: GainSetting = GainSetting(), track_gains: bool = True) -> IrisSweep:
    """Analytic iris-closing sweep.

    ``target`` selects which beam(s) see the iris. With ``track_gains`` the
    channel gains follow the iris, ``g_m -> g_m * N_m(open) / N_m``, so that
    ``n_corr`` is the loss-corrected noise for every radius. ``T`` is the
    transmittance of the targeted flux(es).
    """
    if target not in ("both", "signal", "idler"):
        raise InvalidArgumentError("target must be both, signal or idler")
    plane = state.basis.grid.plane
    full = aperture_gram(state.basis, Aperture.full())
    open_j = joint_from_grams(state, full, full)
    rows = []
    for R in np.asarray(radii, dtype=float):
        G = aperture_gram(state.basis, Aperture.disk(R, center, plane))
        Gs = G if target in ("both", "signal") else full
        Gi = G if target in ("both", "idler") else full
        j = joint_from_grams(state, Gs, Gi)
        if target == "both":
            T = (j.mean_s + j.mean_i) / (open_j.mean_s + open_j.mean_i)
        elif target == "signal":
            T = j.mean_s / open_j.mean_s
        else:
            T = j.mean_i / open_j.mean_i
        g = gains
        if track_gains and j.mean_s > 0 and j.mean_i > 0:
            g = GainSetting(gains.g1 * open_j.mean_s / j.mean_s, gains.g2 * open_j.mean_i / j.mean_i)
        try:
            n_d, n_corr = normalized_noises(j.mean_s, j.mean_i, j.var_s, j.var_i, j.cov, g)
        except UndefinedNoiseError:
            n_d = n_corr = np.nan
        rows.append((R, T, n_d, n_corr, j.mean_s, j.mean_i))
    cols = np.array(rows, dtype=float).reshape(-1, 6).T
    return IrisSweep(*cols)
