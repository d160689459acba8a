"""Synthetic demodulated photocurrent records and their block analysis.

A run mimics the acquisition chain of a twin-beam noise measurement: six
synchronized channels sampled at ``sample_rate`` while an iris closes. The
two noise channels hold the demodulated photocurrent fluctuations, drawn as
white Gaussian samples whose covariance is the analytic detection
covariance at the instantaneous iris radius; the mean channels hold the
instantaneous detected fluxes.

Analysis cuts the record into blocks, subtracts the electronic-noise
variance, normalizes to the calibrated shot noise and returns the
transmittance and the normalized difference noises per block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .detection import (
    Aperture,
    GainSetting,
    aperture_gram,
    joint_from_grams,
    normalized_noises,
)
from .errors import (
    InsufficientSpanError,
    InvalidArgumentError,
    RecordFormatError,
)

TARGETS = ("both", "signal", "idler")
RECORD_MAGIC = "twinbeam-record v1"
BLOCK_COLUMNS = ("block", "T", "n_d", "n_corr", "mean_is", "mean_ii", "valid")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Acquisition chain parameters.

    ``electronic_noise_variance`` is the per-sample variance added to each
    noise channel, in the channel units (a unit-flux coherent beam gives a
    variance ``shot_calibration``). ``dark_floor`` flags blocks whose
    targeted flux drops below that fraction of the open-iris flux.
    ``knots`` is the number of iris radii at which the detection covariance
    is evaluated exactly; samples in between are linearly interpolated.
    """

    sample_rate: float = 200_000.0
    samples_per_run: int = 400_000
    block_size: int = 10_000
    demod_frequency: float = 3.5e6
    electronic_noise_variance: float = 0.0
    shot_calibration: float = 1.0
    dark_floor: float = 0.1
    rng_seed: int = 0
    knots: int = 401

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InvalidArgumentError("sample_rate must be positive")
        if self.samples_per_run < 1 or self.block_size < 2:
            raise InvalidArgumentError("need at least one sample and blocks of >= 2 samples")
        if self.samples_per_run % self.block_size:
            raise InvalidArgumentError("block_size must divide samples_per_run")
        if self.electronic_noise_variance < 0:
            raise InvalidArgumentError("electronic_noise_variance must be >= 0")
        if not self.shot_calibration > 0:
            raise InvalidArgumentError("shot_calibration must be positive")
        if not 0 <= self.dark_floor < 1:
            raise InvalidArgumentError("dark_floor must lie in [0, 1)")
        if not 0 <= self.rng_seed < 2**64:
            raise InvalidArgumentError("rng_seed must be an unsigned 64-bit integer")
        if self.knots < 2:
            raise InvalidArgumentError("knots must be >= 2")

    @property
    def n_blocks(self) -> int:
        return self.samples_per_run // self.block_size

    @property
    def duration(self) -> float:
        return self.samples_per_run / self.sample_rate


@dataclass(frozen=True)
class IrisSchedule:
    """Piecewise-linear iris radius versus run fraction (0 = first sample,
    1 = last sample). ``radii=None`` keeps the iris fully open."""

    target: str = "both"
    fractions: Optional[Tuple[float, ...]] = None
    radii: Optional[Tuple[float, ...]] = None
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise InvalidArgumentError(f"target must be one of {TARGETS}")
        if self.radii is None:
            return
        fr = tuple(float(x) for x in self.fractions)
        rr = tuple(float(x) for x in self.radii)
        if len(fr) != len(rr) or len(fr) < 1:
            raise InvalidArgumentError("fractions and radii must have the same non-zero length")
        if any(b < a for a, b in zip(fr, fr[1:])) or fr[0] < 0 or fr[-1] > 1:
            raise InvalidArgumentError("fractions must increase within [0, 1]")
        if any(r < 0 for r in rr) or any(b > a for a, b in zip(rr, rr[1:])):
            raise InvalidArgumentError("iris radius must be non-increasing and >= 0")
        object.__setattr__(self, "fractions", fr)
        object.__setattr__(self, "radii", rr)

    @classmethod
    def linear_close(cls, open_radius: float, target: str = "both", final_radius: float = 0.0,
                     center=(0.0, 0.0)) -> "IrisSchedule":
        """Close linearly from ``open_radius`` to ``final_radius`` over the run."""
        return cls(target, (0.0, 1.0), (open_radius, final_radius), center)

    @classmethod
    def open(cls, target: str = "both") -> "IrisSchedule":
        return cls(target)

    @property
    def is_open(self) -> bool:
        return self.radii is None

    def radius_at(self, fraction):
        return np.interp(fraction, self.fractions, self.radii)


@dataclass(frozen=True, eq=False)
class ChannelRecord:
    """Six synchronized channels plus the acquisition parameters used."""

    di_s: np.ndarray
    di_i: np.ndarray
    i_s: np.ndarray
    i_i: np.ndarray
    i_ir: np.ndarray
    i_g: np.ndarray
    config: AcquisitionConfig
    target: str = "both"

    def __post_init__(self):
        n = len(self.di_s)
        for name in ("di_i", "i_s", "i_i", "i_ir", "i_g"):
            if len(getattr(self, name)) != n:
                raise RecordFormatError("channels must have equal lengths")
        for name in ("di_s", "di_i", "i_s", "i_i", "i_ir", "i_g"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise RecordFormatError(f"channel {name} has non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.di_s)


class BlockSeries(NamedTuple):
    block: np.ndarray
    T: np.ndarray
    n_d: np.ndarray
    n_corr: np.ndarray
    mean_is: np.ndarray
    mean_ii: np.ndarray
    valid: np.ndarray
    target: str = "both"
    # electronic-noise subtracted (co)variances, in channel units
    var_s: Optional[np.ndarray] = None
    var_i: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None


class FitReport(NamedTuple):
    slope: float
    intercept: float
    max_residual: float
    verdict: str
    column: str
    reference_open: float
    max_reference_deviation: float


def _detection_profile(state, schedule: IrisSchedule, radii):
    """Analytic means/(co)variances for each radius in ``radii``."""
    basis = state.basis
    full = aperture_gram(basis, Aperture.full())
    rows = []
    for R in radii:
        if np.isinf(R):
            G = full
        else:
            G = aperture_gram(basis, Aperture.disk(R, schedule.center, basis.grid.plane))
        Gs = G if schedule.target in ("both", "signal") else full
        Gi = G if schedule.target in ("both", "idler") else full
        rows.append(joint_from_grams(state, Gs, Gi))
    return np.array(rows, dtype=float).reshape(-1, 5)


def synthesize_run(state, schedule: IrisSchedule, config: AcquisitionConfig) -> ChannelRecord:
    """Synthetic record of an iris sweep; deterministic given ``config.rng_seed``."""
    n = config.samples_per_run
    frac = np.arange(n) / max(n - 1, 1)
    full = aperture_gram(state.basis, Aperture.full())
    open_j = joint_from_grams(state, full, full)

    if schedule.is_open:
        prof = np.array([open_j], dtype=float)
        per_sample = np.repeat(prof, n, axis=0)
    else:
        knot_frac = np.linspace(0.0, 1.0, min(config.knots, n))
        prof = _detection_profile(state, schedule, schedule.radius_at(knot_frac))
        per_sample = np.column_stack([np.interp(frac, knot_frac, prof[:, k]) for k in range(5)])
    mean_s, mean_i, var_s, var_i, cov = per_sample.T

    rng = np.random.default_rng(config.rng_seed)
    z = rng.standard_normal((n, 4))
    l11 = np.sqrt(var_s)
    with np.errstate(divide="ignore", invalid="ignore"):
        l21 = np.where(l11 > 0, cov / l11, 0.0)
    l22 = np.sqrt(np.maximum(var_i - l21**2, 0.0))
    shot = math.sqrt(config.shot_calibration)
    elec = math.sqrt(config.electronic_noise_variance)
    di_s = shot * l11 * z[:, 0] + elec * z[:, 2]
    di_i = shot * (l21 * z[:, 0] + l22 * z[:, 1]) + elec * z[:, 3]
    i_ir = np.full(n, open_j.mean_s + open_j.mean_i)
    i_g = np.ones(n)
    return ChannelRecord(di_s, di_i, mean_s, mean_i, i_ir, i_g, config, schedule.target)


def _block_view(a, b):
    return np.asarray(a).reshape(-1, b)


def analyze_run(record: ChannelRecord, gains: GainSetting = GainSetting(),
                track_gains: bool = False) -> BlockSeries:
    """Per-block transmittance, ``n_d`` and ``n_corr``.

    The first block is the open-iris reference. With ``track_gains`` each
    channel gain is further multiplied by ``<i_m>_open / <i_m>_block``, so
    ``n_corr`` corrects for the iris as if it were a linear loss.
    """
    cfg = record.config
    n, b = len(record), cfg.block_size
    if n == 0:
        raise RecordFormatError("empty record")
    if n % b:
        raise RecordFormatError(f"record length {n} is not a multiple of block size {b}")

    ds, di = _block_view(record.di_s, b), _block_view(record.di_i, b)
    ms = _block_view(record.i_s, b).mean(axis=1)
    mi = _block_view(record.i_i, b).mean(axis=1)
    mir = _block_view(record.i_ir, b).mean(axis=1)
    cs = ds - ds.mean(axis=1, keepdims=True)
    ci = di - di.mean(axis=1, keepdims=True)
    e = cfg.electronic_noise_variance
    var_s = np.maximum(np.sum(cs * cs, axis=1) / (b - 1) - e, 0.0)
    var_i = np.maximum(np.sum(ci * ci, axis=1) / (b - 1) - e, 0.0)
    cov = np.sum(cs * ci, axis=1) / (b - 1)

    if record.target == "both":
        flux = ms + mi
    elif record.target == "signal":
        flux = ms
    else:
        flux = mi
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(mir > 0, flux / mir, 0.0)
        T = np.clip(r / r[0], 0.0, 1.0) if r[0] > 0 else np.zeros_like(r)

        g1 = np.full(len(ms), gains.g1)
        g2 = np.full(len(ms), gains.g2)
        if track_gains:
            if record.target in ("both", "signal"):
                g1 = g1 * ms[0] / ms
            if record.target in ("both", "idler"):
                g2 = g2 * mi[0] / mi
        shot = cfg.shot_calibration
        n_d, n_corr = normalized_noises(ms, mi, var_s / shot, var_i / shot, cov / shot, (g1, g2))
    valid = (flux >= cfg.dark_floor * flux[0]) & (flux > 0) & np.isfinite(n_d) & np.isfinite(n_corr)
    return BlockSeries(
        np.arange(len(ms)), T, n_d, n_corr, ms, mi, valid, record.target, var_s, var_i, cov
    )


def calibrate_shot_noise(record: ChannelRecord) -> float:
    """Noise variance per unit mean flux, from a coherent-beam record."""
    e = record.config.electronic_noise_variance
    var = np.var(record.di_s, ddof=1) + np.var(record.di_i, ddof=1) - 2 * e
    flux = np.mean(record.i_s) + np.mean(record.i_i)
    if not flux > 0:
        raise InvalidArgumentError("calibration record carries no flux")
    return float(var / flux)


def fit_single_mode_line(series: BlockSeries, threshold: float = 0.05,
                         column: Optional[str] = None, min_blocks: int = 5,
                         min_span: float = 0.4) -> FitReport:
    """Least-squares line through the valid blocks; multimode if it misses
    any of them by more than ``threshold``.

    The fitted column defaults to ``n_d`` when the iris acts on both beams
    and to ``n_corr`` when it acts on one (``n_d`` is then not linear in T
    even for single-mode beams). The reference line built from the open-iris
    block (``1 + T (n_open - 1)`` for ``n_d``, constant for ``n_corr``) is
    reported alongside.
    """
    if column is None:
        column = "n_d" if series.target == "both" else "n_corr"
    if column not in ("n_d", "n_corr"):
        raise InvalidArgumentError("column must be n_d or n_corr")
    y_all = getattr(series, column)
    ok = np.asarray(series.valid, dtype=bool) & np.isfinite(y_all)
    T, y = series.T[ok], y_all[ok]
    if len(T) < min_blocks:
        raise InsufficientSpanError(f"{len(T)} valid blocks, need {min_blocks}")
    if np.ptp(T) < min_span:
        raise InsufficientSpanError(f"T spans {np.ptp(T):.3f}, need {min_span}")
    slope, intercept = np.polyfit(T, y, 1)
    max_res = float(np.max(np.abs(y - (slope * T + intercept))))
    n_open = float(y[np.argmax(T)])
    if column == "n_d":
        ref = 1.0 + T * (n_open - 1.0)
    else:
        ref = np.full_like(T, n_open)
    verdict = "multimode" if max_res > threshold else "single_mode"
    return FitReport(float(slope), float(intercept), max_res, verdict, column, n_open,
                     float(np.max(np.abs(y - ref))))


# --- file formats -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_record(record: ChannelRecord, path) -> None:
    cfg = record.config
    header = (
        f"# {RECORD_MAGIC}, rate={_fmt(cfg.sample_rate)}, samples={len(record)}, seed={cfg.rng_seed}, "
        f"block={cfg.block_size}, target={record.target}, "
        f"enoise={_fmt(cfg.electronic_noise_variance)}, shot={_fmt(cfg.shot_calibration)}, "
        f"floor={_fmt(cfg.dark_floor)}, f0={_fmt(cfg.demod_frequency)}\n"
    )
    cols = np.column_stack([record.di_s, record.di_i, record.i_s, record.i_i, record.i_ir, record.i_g])
    with open(path, "w") as fh:
        fh.write(header)
        fh.write("index,di_s,di_i,i_s,i_i,i_ir,i_g\n")
        for k, row in enumerate(cols):
            fh.write(f"{k}," + ",".join(_fmt(v) for v in row) + "\n")


def read_record(path) -> ChannelRecord:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# " + RECORD_MAGIC):
            raise RecordFormatError("missing twinbeam-record v1 header")
        kv = {}
        for item in header[len("# " + RECORD_MAGIC):].split(","):
            item = item.strip()
            if item:
                key, _, val = item.partition("=")
                kv[key.strip()] = val.strip()
        for key in ("rate", "samples", "seed"):
            if key not in kv:
                raise RecordFormatError(f"header lacks {key}=")
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    samples = int(kv["samples"])
    if data.shape != (samples, 7):
        raise RecordFormatError(f"expected {samples} rows of 7 columns, got {data.shape}")
    block = int(kv.get("block", samples))
    cfg = AcquisitionConfig(
        sample_rate=float(kv["rate"]),
        samples_per_run=samples,
        block_size=block,
        demod_frequency=float(kv.get("f0", 3.5e6)),
        electronic_noise_variance=float(kv.get("enoise", 0.0)),
        shot_calibration=float(kv.get("shot", 1.0)),
        dark_floor=float(kv.get("floor", 0.1)),
        rng_seed=int(kv["seed"]),
    )
    return ChannelRecord(*(data[:, k] for k in range(1, 7)), config=cfg, target=kv.get("target", "both"))


def block_series_csv(series: BlockSeries) -> str:
    lines = [",".join(BLOCK_COLUMNS)]
    for k in range(len(series.block)):
        lines.append(
            f"{int(series.block[k])},{_fmt(series.T[k])},{_fmt(series.n_d[k])},{_fmt(series.n_corr[k])},"
            f"{_fmt(series.mean_is[k])},{_fmt(series.mean_ii[k])},{int(bool(series.valid[k]))}"
        )
    return "\n".join(lines) + "\n"


def read_block_series(path, target: str = "both") -> BlockSeries:
    with open(path) as fh:
        head = fh.readline().strip().split(",")
        if tuple(head) != BLOCK_COLUMNS:
            raise RecordFormatError(f"unexpected block-series columns {head}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return BlockSeries(
        data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3], data[:, 4], data[:, 5],
        data[:, 6].astype(bool), target,
    )
