"""Confocal length and transverse-degeneracy range of a two-mirror cavity."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class CavityGeometry:
    """Symmetric cavity of two mirrors with curvature ``radius`` (m),
    holding a crystal of length ``crystal_length`` (m) and index
    ``refractive_index``; ``finesse`` at the wavelength considered."""

    radius: float
    crystal_length: float = 0.0
    refractive_index: float = 1.0
    finesse: float = math.inf

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError("mirror radius of curvature must be positive")
        if not self.crystal_length >= 0:
            raise InvalidArgumentError("crystal length must be >= 0")
        if not self.refractive_index >= 1:
            raise InvalidArgumentError("refractive index must be >= 1")
        if not self.finesse > 0:
            raise InvalidArgumentError("finesse must be positive")


def confocal_length(geom: CavityGeometry) -> float:
    """Mirror spacing making the cavity confocal: ``R + l (1 - 1/n)``."""
    return geom.radius + geom.crystal_length * (1.0 - 1.0 / geom.refractive_index)


def confocality_range(geom: CavityGeometry) -> float:
    """Half-width ``pi R / (2 F)`` of the length window where the
    fundamental and first even transverse modes stay within one cavity
    linewidth."""
    return math.pi * geom.radius / (2.0 * geom.finesse)


def is_degenerate(length: float, geom: CavityGeometry) -> bool:
    return abs(length - confocal_length(geom)) < confocality_range(geom)


def degeneracy_overlap(radius: float, crystal_length: float, indices, finesse: float):
    """Confocal lengths for several indices (e.g. pump, signal, idler).

    Returns ``(lengths, spread, half_range)``; transverse degeneracy is
    reachable for all of them at once when ``spread < half_range``.
    """
    lengths = [
        confocal_length(CavityGeometry(radius, crystal_length, n, finesse)) for n in indices
    ]
    half = confocality_range(CavityGeometry(radius, crystal_length, 1.0, finesse))
    return lengths, max(lengths) - min(lengths), half
