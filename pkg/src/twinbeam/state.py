"""Linearized Gaussian model of signal and idler beams.

Both beams are expanded on one shared orthonormal mode basis. Only the
amplitude quadrature is tracked: mean amplitudes are real (``mean**2`` is a
photon flux) and ``cov`` holds amplitude-quadrature covariances over the
``2n`` variables ``(signal modes..., idler modes...)`` with vacuum variance
1/4. Modes outside the basis are vacuum.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BasisConflictError,
    InvalidArgumentError,
    InvalidTransformError,
    UnphysicalSpecError,
)
from .modes import (
    GridSpec,
    ModeBasis,
    ScalarField,
    combine,
    far_field,
    inner_product,
    mode_from_descriptor,
    orthonormalize,
)

VACUUM_VARIANCE = 0.25


@dataclass(frozen=True, eq=False)
class TwinBeamState:
    basis: ModeBasis
    mean_s: np.ndarray
    mean_i: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        n = len(self.basis)
        ms = np.array(self.mean_s, dtype=float).reshape(-1)
        mi = np.array(self.mean_i, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if ms.shape != (n,) or mi.shape != (n,):
            raise InvalidArgumentError(f"mean vectors must have length {n}")
        if cov.shape != (2 * n, 2 * n):
            raise InvalidArgumentError(f"covariance must be {2 * n}x{2 * n}")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise InvalidArgumentError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.min(np.linalg.eigvalsh(cov)) < -1e-10:
            raise UnphysicalSpecError("covariance is not positive semidefinite")
        for a in (ms, mi, cov):
            a.setflags(write=False)
        object.__setattr__(self, "mean_s", ms)
        object.__setattr__(self, "mean_i", mi)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return len(self.basis)

    @property
    def means(self):
        return (self.mean_s, self.mean_i)

    @property
    def flux_s(self) -> float:
        return float(self.mean_s @ self.mean_s)

    @property
    def flux_i(self) -> float:
        return float(self.mean_i @ self.mean_i)

    def block(self, beam) -> np.ndarray:
        """Covariance block of one beam."""
        k = 0 if beam in ("signal", 0) else 1
        n = self.n_modes
        return self.cov[k * n:(k + 1) * n, k * n:(k + 1) * n]

    def mean_field(self, beam) -> ScalarField:
        k = 0 if beam in ("signal", 0) else 1
        return self.basis.synthesize(self.means[k])


@dataclass(frozen=True, eq=False)
class TwinPairSpec:
    """One pair of twin modes.

    ``n`` is the whole-beam normalized intensity-difference noise of the
    pair; ``v_individual`` the amplitude variance of each beam in vacuum units
    (1 = shot noise).
    """

    mode_s: ScalarField
    mode_i: ScalarField
    flux_s: float
    flux_i: float
    n: float
    v_individual: float = 2.0

    def __post_init__(self):
        if self.n < 0:
            raise InvalidArgumentError("n must be >= 0")
        if self.flux_s < 0 or self.flux_i < 0:
            raise InvalidArgumentError("fluxes must be >= 0")
        if not self.v_individual >= 0:
            raise InvalidArgumentError("v_individual must be >= 0")
        if abs(self.v_individual - self.n) > self.v_individual + 1e-12:
            raise UnphysicalSpecError(
                f"|v_individual - n| = {abs(self.v_individual - self.n):g} exceeds v_individual"
            )

    def correlation(self) -> float:
        """Cross covariance ``Cov(dE_s, dE_i)`` reproducing the requested ``n``.

        Solves ``(P_s + P_i) v - 8 sqrt(P_s P_i) rho = n (P_s + P_i)``.
        """
        v, n = self.v_individual, self.n
        ps, pi = self.flux_s, self.flux_i
        if ps == 0 and pi == 0:
            return (v - n) / 4.0
        if ps == 0 or pi == 0:
            if abs(v - n) > 1e-12:
                raise UnphysicalSpecError("a single bright beam cannot have n != v_individual")
            return 0.0
        rho = (v - n) * (ps + pi) / (8.0 * math.sqrt(ps * pi))
        if abs(rho) > v / 4.0 + 1e-12:
            raise UnphysicalSpecError(
                f"flux imbalance makes n={n:g} unreachable with v_individual={v:g}"
            )
        return rho


def vacuum_state(basis: ModeBasis) -> TwinBeamState:
    n = len(basis)
    return TwinBeamState(basis, np.zeros(n), np.zeros(n), VACUUM_VARIANCE * np.eye(2 * n))


def coherent_state(mode: ScalarField, flux_s: float, flux_i: float) -> TwinBeamState:
    """Uncorrelated coherent beams in ``mode`` (the shot-noise reference)."""
    if flux_s < 0 or flux_i < 0:
        raise InvalidArgumentError("fluxes must be >= 0")
    if abs(mode.norm_sq - 1.0) > 1e-6:
        raise InvalidArgumentError("mode must have unit norm")
    basis = ModeBasis(mode.grid, (mode,))
    return TwinBeamState(basis, [math.sqrt(flux_s)], [math.sqrt(flux_i)], VACUUM_VARIANCE * np.eye(2))


def twin_pair_state(spec: TwinPairSpec) -> TwinBeamState:
    """Signal and idler each excited in one mode, all other modes vacuum."""
    return multimode_twin_state([spec])


def multimode_twin_state(pairs: Sequence[TwinPairSpec], orth_tol: float = 1e-6) -> TwinBeamState:
    """Independent twin pairs; covariance is block diagonal over pairs.

    Within each beam the pair modes must be mutually orthogonal. The shared
    basis is the Gram-Schmidt orthonormalization of all signal modes followed
    by all idler modes; modes coinciding with earlier ones are not repeated.
    """
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgumentError("need at least one pair")
    for p in pairs:
        for m in (p.mode_s, p.mode_i):
            if abs(m.norm_sq - 1.0) > 1e-6:
                raise InvalidArgumentError("pair modes must have unit norm")
    for attr in ("mode_s", "mode_i"):
        modes = [getattr(p, attr) for p in pairs]
        for a in range(len(modes)):
            for b in range(a + 1, len(modes)):
                if abs(inner_product(modes[a], modes[b])) > orth_tol:
                    raise BasisConflictError(
                        f"{attr} of pairs {a} and {b} are not orthogonal; orthogonalize them first"
                    )
    basis = orthonormalize([p.mode_s for p in pairs] + [p.mode_i for p in pairs], skip_below=1e-6)
    n = len(basis)
    mean_s = np.zeros(n)
    mean_i = np.zeros(n)
    cov = VACUUM_VARIANCE * np.eye(2 * n)
    for p in pairs:
        a_s = _real_coordinates(basis, p.mode_s)
        a_i = _real_coordinates(basis, p.mode_i)
        rho = p.correlation()
        excess = (p.v_individual - 1.0) * VACUUM_VARIANCE
        mean_s += math.sqrt(p.flux_s) * a_s
        mean_i += math.sqrt(p.flux_i) * a_i
        cov[:n, :n] += excess * np.outer(a_s, a_s)
        cov[n:, n:] += excess * np.outer(a_i, a_i)
        cov[:n, n:] += rho * np.outer(a_s, a_i)
        cov[n:, :n] += rho * np.outer(a_i, a_s)
    return TwinBeamState(basis, mean_s, mean_i, cov)


def _real_coordinates(basis: ModeBasis, mode: ScalarField) -> np.ndarray:
    c = basis.coefficients(mode)
    if np.max(np.abs(c.imag)) > 1e-8:
        raise BasisConflictError("mode has complex coordinates in the shared basis")
    # the mode lies in the span and has unit norm; remove quadrature rounding
    return c.real / np.linalg.norm(c.real)


def apply_loss(state: TwinBeamState, t1: float, t2: float) -> TwinBeamState:
    """Beam splitters of amplitude transmission ``t1`` (signal) and ``t2`` (idler).

    Lost amplitude is replaced by vacuum.
    """
    for t in (t1, t2):
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError("amplitude transmissions must lie in [0, 1]")
    n = state.n_modes
    scale = np.concatenate([np.full(n, t1), np.full(n, t2)])
    cov = state.cov * np.outer(scale, scale)
    cov += np.diag((1.0 - scale**2) * VACUUM_VARIANCE)
    return TwinBeamState(state.basis, t1 * state.mean_s, t2 * state.mean_i, cov)


def transform_state(state: TwinBeamState, rotation, tol: float = 1e-10) -> TwinBeamState:
    """Re-express the state on the rotated basis ``w_i = sum_j R_ij v_j``.

    The same real orthogonal ``R`` acts on the signal and idler coordinates
    (the basis is shared), so every detection statistic is unchanged.
    """
    R = np.asarray(rotation, dtype=float)
    n = state.n_modes
    if R.shape != (n, n):
        raise InvalidTransformError(f"rotation must be {n}x{n}")
    if np.max(np.abs(R @ R.T - np.eye(n))) > tol:
        raise InvalidTransformError("rotation is not orthogonal")
    modes = tuple(combine(state.basis.modes, R[i]) for i in range(n))
    basis = ModeBasis(state.basis.grid, modes)
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = R
    big[n:, n:] = R
    cov = big @ state.cov @ big.T
    return TwinBeamState(basis, R @ state.mean_s, R @ state.mean_i, 0.5 * (cov + cov.T))


def far_field_state(state: TwinBeamState, focal_length: float, wavelength: float) -> TwinBeamState:
    """Same state with every basis mode imaged to the lens focal plane."""
    modes = tuple(far_field(m, focal_length, wavelength) for m in state.basis.modes)
    basis = ModeBasis(modes[0].grid, modes)
    return TwinBeamState(basis, state.mean_s, state.mean_i, state.cov)


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random real orthogonal matrix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class SingleModeVerdict(NamedTuple):
    verdict: str
    rank: int
    eigenvalues: np.ndarray


def single_mode_test(state: TwinBeamState, beam: str, tolerance: float = 1e-9,
                     angle_tolerance: float = 1e-6) -> SingleModeVerdict:
    """Basis-independent single-mode check of one beam in the Gaussian model.

    The excess-noise matrix ``M = C - I/4`` of the beam must have at most one
    non-negligible eigenvalue, and the mean amplitude vector must be zero or
    parallel to that eigenvector: all excitation then lives in one mode, the
    rest of any basis being vacuum.
    """
    block = state.block(beam)
    M = block - VACUUM_VARIANCE * np.eye(state.n_modes)
    w, V = np.linalg.eigh(M)
    big = np.abs(w) > tolerance
    rank = int(np.count_nonzero(big))
    mean = state.means[0 if beam in ("signal", 0) else 1]
    if rank == 0:
        verdict = "single_mode"
    elif rank > 1:
        verdict = "multimode"
    else:
        norm = np.linalg.norm(mean)
        if norm <= tolerance:
            verdict = "single_mode"
        else:
            cos = abs(V[:, big][:, 0] @ mean) / norm
            verdict = "single_mode" if 1.0 - cos <= angle_tolerance else "multimode"
    return SingleModeVerdict(verdict, rank, w)


def state_to_dict(state: TwinBeamState) -> dict:
    """Structured snapshot: grid, basis descriptors, means, row-major covariance."""
    descs = state.basis.descriptors
    if any(d is None for d in descs):
        raise InvalidArgumentError("basis contains modes without a descriptor")
    return {
        "format": "twinbeam-state v1",
        "grid": state.basis.grid.to_dict(),
        "basis": descs,
        "mean_s": [float(x) for x in state.mean_s],
        "mean_i": [float(x) for x in state.mean_i],
        "cov": [float(x) for x in state.cov.ravel()],
    }


def state_from_dict(d: dict) -> TwinBeamState:
    grid = GridSpec.from_dict(d["grid"])
    modes = tuple(mode_from_descriptor(desc, grid) for desc in d["basis"])
    n = len(modes)
    cov = np.asarray(d["cov"], dtype=float).reshape(2 * n, 2 * n)
    return TwinBeamState(ModeBasis(grid, modes), d["mean_s"], d["mean_i"], cov)


def state_to_json(state: TwinBeamState) -> str:
    return json.dumps(state_to_dict(state), indent=1)


def state_from_json(text: str) -> TwinBeamState:
    return state_from_dict(json.loads(text))
