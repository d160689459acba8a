"""Scenario configuration files (INI syntax).

A scenario describes a twin-beam state, the losses and gains of the
detection chain, an iris sweep and the acquisition parameters::

    [state]
    extent_x = 8e-3
    extent_y = 8e-3

    [state.pair.center]
    mode_s = hg 0 0 1e-3        ; hg p q waist   |   ring radius width charge
    flux_s = 1e15
    flux_i = 1e15
    n = 0.8

    [sweep]
    target = both
    schedule = 0:2.5e-3, 1:0    ; fraction:radius pairs, or "open"

    [outputs]
    csv = sweep.csv

Lengths are in metres, fluxes in photons/s. Unknown sections and keys are
rejected; every error is a :class:`ConfigError` naming ``section.key``.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .acquisition import TARGETS, AcquisitionConfig, IrisSchedule
from .detection import GainSetting
from .errors import ConfigError, TwinBeamError
from .modes import GridSpec, hermite_gauss_mode, orthonormalize, ring_mode
from .state import TwinPairSpec, multimode_twin_state

PAIR_PREFIX = "state.pair."
SEED_ENV = "TWINBEAM_SEED"


@dataclass(frozen=True)
class ModeSpec:
    kind: str
    params: Tuple[float, ...]

    def __str__(self):
        return " ".join([self.kind] + [_num(p) for p in self.params])


@dataclass(frozen=True)
class PairConfig:
    name: str
    mode_s: ModeSpec
    mode_i: ModeSpec
    flux_s: float
    flux_i: float
    n: float
    v_individual: float = 2.0


@dataclass(frozen=True)
class Scenario:
    extent_x: float
    extent_y: float
    pairs: Tuple[PairConfig, ...]
    nx: int = 256
    ny: int = 256
    plane: str = "near"
    orthogonalize: bool = False
    t1_sq: float = 1.0
    t2_sq: float = 1.0
    g1: Optional[float] = None      # None means auto, 1/t1^2
    g2: Optional[float] = None
    track_iris: bool = True
    target: str = "both"
    fractions: Optional[Tuple[float, ...]] = None
    radii: Optional[Tuple[float, ...]] = None
    center: Tuple[float, float] = (0.0, 0.0)
    threshold: float = 0.05
    fit_column: Optional[str] = None
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    csv: str = "sweep.csv"
    svg: Optional[str] = None
    report: Optional[str] = None
    record: Optional[str] = None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.extent_x, self.extent_y, self.plane)

    @property
    def schedule(self) -> IrisSchedule:
        return IrisSchedule(self.target, self.fractions, self.radii, self.center)

    @property
    def gains(self) -> GainSetting:
        g1 = 1.0 / self.t1_sq if self.g1 is None else self.g1
        g2 = 1.0 / self.t2_sq if self.g2 is None else self.g2
        return GainSetting(g1, g2)


def _num(x) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


# --- parsing helpers --------------------------------------------------------

class _Section:
    """Key access that records which keys were consumed."""

    def __init__(self, name, items):
        self.name = name
        self.items = dict(items)
        self.used = set()

    def key(self, k):
        return f"{self.name}.{k}"

    def raw(self, k, default=None):
        self.used.add(k)
        return self.items.get(k, default)

    def has(self, k):
        return k in self.items

    def float(self, k, default=None, required=False):
        v = self.raw(k)
        if v is None:
            if required:
                raise ConfigError(self.key(k), "required key is missing")
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(self.key(k), f"expected a number, got {v!r}") from None

    def int(self, k, default=None):
        v = self.raw(k)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(self.key(k), f"expected an integer, got {v!r}") from None

    def bool(self, k, default=None):
        v = self.raw(k)
        if v is None:
            return default
        low = v.lower()
        if low in ("yes", "true", "on", "1"):
            return True
        if low in ("no", "false", "off", "0"):
            return False
        raise ConfigError(self.key(k), f"expected yes/no, got {v!r}")

    def check_unused(self):
        extra = sorted(set(self.items) - self.used)
        if extra:
            raise ConfigError(self.key(extra[0]), "unknown key")


def _parse_mode(sec: _Section, k: str) -> Optional[ModeSpec]:
    v = sec.raw(k)
    if v is None:
        return None
    parts = v.split()
    if not parts or parts[0] not in ("hg", "ring"):
        raise ConfigError(sec.key(k), "mode must be 'hg p q waist' or 'ring radius width [charge]'")
    try:
        if parts[0] == "hg":
            if len(parts) != 4:
                raise ValueError
            p, q = int(parts[1]), int(parts[2])
            w = float(parts[3])
            if p < 0 or q < 0 or not w > 0:
                raise ValueError
            return ModeSpec("hg", (p, q, w))
        if len(parts) not in (3, 4):
            raise ValueError
        radius, width = float(parts[1]), float(parts[2])
        charge = int(parts[3]) if len(parts) == 4 else 1
        if radius < 0 or not width > 0:
            raise ValueError
        return ModeSpec("ring", (radius, width, charge))
    except ValueError:
        raise ConfigError(sec.key(k), f"malformed mode {v!r}") from None


def _parse_schedule(sec: _Section):
    v = sec.raw("schedule")
    if v is None:
        raise ConfigError(sec.key("schedule"), "required key is missing")
    if v.strip().lower() == "open":
        return None, None
    fr, rr = [], []
    try:
        for item in v.split(","):
            f, _, r = item.partition(":")
            fr.append(float(f))
            rr.append(float(r))
    except ValueError:
        raise ConfigError(sec.key("schedule"), f"expected fraction:radius pairs, got {v!r}") from None
    return tuple(fr), tuple(rr)


def _parse_center(sec: _Section):
    v = sec.raw("center")
    if v is None:
        return (0.0, 0.0)
    try:
        x, y = (float(s) for s in v.split(","))
    except ValueError:
        raise ConfigError(sec.key("center"), f"expected 'x, y', got {v!r}") from None
    return (x, y)


def _gain(sec: _Section, k):
    v = sec.raw(k, "auto")
    if v.strip().lower() == "auto":
        return None
    try:
        g = float(v)
    except ValueError:
        raise ConfigError(sec.key(k), f"expected a number or 'auto', got {v!r}") from None
    if not g > 0:
        raise ConfigError(sec.key(k), "gain must be positive")
    return g


_ACQ_FIELDS = {f.name: f.type for f in dataclasses.fields(AcquisitionConfig)}
_SECTIONS = ("state", "losses", "gains", "sweep", "acquisition", "outputs")


def parse_scenario(text: str, seed_override: Optional[int] = None) -> Scenario:
    """Parse and validate a scenario document."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None

    for name in cp.sections():
        if name not in _SECTIONS and not name.startswith(PAIR_PREFIX):
            raise ConfigError(name, "unknown section")

    def section(name):
        return _Section(name, cp.items(name) if cp.has_section(name) else ())

    st = section("state")
    kw = dict(
        extent_x=st.float("extent_x", required=True),
        extent_y=st.float("extent_y", required=True),
        nx=st.int("nx", 256),
        ny=st.int("ny", 256),
        plane=st.raw("plane", "near"),
        orthogonalize=st.bool("orthogonalize", False),
    )
    st.check_unused()
    try:
        GridSpec(kw["nx"], kw["ny"], kw["extent_x"], kw["extent_y"], kw["plane"])
    except TwinBeamError as exc:
        msg = str(exc)
        bad = next((k for k in ("nx", "ny", "plane") if msg.startswith(k)), "extent_x")
        raise ConfigError(st.key(bad), msg) from None

    pairs = []
    for name in cp.sections():
        if not name.startswith(PAIR_PREFIX):
            continue
        sec = section(name)
        mode_s = _parse_mode(sec, "mode_s")
        if mode_s is None:
            raise ConfigError(sec.key("mode_s"), "required key is missing")
        mode_i = _parse_mode(sec, "mode_i") or mode_s
        pc = PairConfig(
            name[len(PAIR_PREFIX):],
            mode_s,
            mode_i,
            sec.float("flux_s", required=True),
            sec.float("flux_i", required=True),
            sec.float("n", required=True),
            sec.float("v_individual", 2.0),
        )
        sec.check_unused()
        for k in ("flux_s", "flux_i", "n", "v_individual"):
            if not getattr(pc, k) >= 0:
                raise ConfigError(sec.key(k), "must be >= 0")
        pairs.append(pc)
    if not pairs:
        raise ConfigError("state.pair", "at least one [state.pair.<name>] section is required")
    kw["pairs"] = tuple(pairs)

    lo = section("losses")
    kw["t1_sq"] = lo.float("t1_sq", 1.0)
    kw["t2_sq"] = lo.float("t2_sq", 1.0)
    lo.check_unused()
    for k in ("t1_sq", "t2_sq"):
        if not 0 < kw[k] <= 1:
            raise ConfigError(lo.key(k), "intensity transmission must lie in (0, 1]")

    ga = section("gains")
    kw["g1"] = _gain(ga, "g1")
    kw["g2"] = _gain(ga, "g2")
    kw["track_iris"] = ga.bool("track_iris", kw["g1"] is None and kw["g2"] is None)
    ga.check_unused()

    sw = section("sweep")
    kw["target"] = sw.raw("target", "both")
    if kw["target"] not in TARGETS:
        raise ConfigError(sw.key("target"), f"must be one of {', '.join(TARGETS)}")
    kw["fractions"], kw["radii"] = _parse_schedule(sw)
    kw["center"] = _parse_center(sw)
    kw["threshold"] = sw.float("threshold", 0.05)
    col = sw.raw("fit_column", "auto")
    if col not in ("auto", "n_d", "n_corr"):
        raise ConfigError(sw.key("fit_column"), "must be auto, n_d or n_corr")
    kw["fit_column"] = None if col == "auto" else col
    sw.check_unused()
    if not kw["threshold"] > 0:
        raise ConfigError(sw.key("threshold"), "must be positive")
    try:
        IrisSchedule(kw["target"], kw["fractions"], kw["radii"], kw["center"])
    except TwinBeamError as exc:
        raise ConfigError(sw.key("schedule"), str(exc)) from None

    ac = section("acquisition")
    acq = {}
    for name, typ in _ACQ_FIELDS.items():
        if ac.has(name):
            acq[name] = ac.int(name) if typ in ("int", int) else ac.float(name)
    ac.check_unused()
    if seed_override is not None:
        acq["rng_seed"] = seed_override
    try:
        kw["acquisition"] = AcquisitionConfig(**acq)
    except TwinBeamError as exc:
        msg = str(exc)
        bad = next((k for k in _ACQ_FIELDS if msg.startswith(k)), None)
        raise ConfigError(ac.key(bad) if bad else "acquisition", msg) from None

    out = section("outputs")
    kw["csv"] = out.raw("csv")
    if not kw["csv"]:
        raise ConfigError(out.key("csv"), "required key is missing")
    kw["svg"] = out.raw("svg")
    kw["report"] = out.raw("report")
    kw["record"] = out.raw("record")
    out.check_unused()
    return Scenario(**kw)


def seed_from_env() -> Optional[int]:
    v = os.environ.get(SEED_ENV)
    if v is None or v == "":
        return None
    try:
        seed = int(v, 0)
    except ValueError:
        raise ConfigError(SEED_ENV, f"expected an integer, got {v!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError(SEED_ENV, "seed must be an unsigned 64-bit integer")
    return seed


def load_scenario(path, use_env: bool = True) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, seed_from_env() if use_env else None)


def dump_scenario(sc: Scenario) -> str:
    """Canonical text form; ``parse_scenario(dump_scenario(sc)) == sc``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["state"] = {
        "nx": _num(sc.nx),
        "ny": _num(sc.ny),
        "extent_x": _num(sc.extent_x),
        "extent_y": _num(sc.extent_y),
        "plane": sc.plane,
        "orthogonalize": _num(sc.orthogonalize),
    }
    for p in sc.pairs:
        cp[PAIR_PREFIX + p.name] = {
            "mode_s": str(p.mode_s),
            "mode_i": str(p.mode_i),
            "flux_s": _num(p.flux_s),
            "flux_i": _num(p.flux_i),
            "n": _num(p.n),
            "v_individual": _num(p.v_individual),
        }
    cp["losses"] = {"t1_sq": _num(sc.t1_sq), "t2_sq": _num(sc.t2_sq)}
    cp["gains"] = {
        "g1": "auto" if sc.g1 is None else _num(sc.g1),
        "g2": "auto" if sc.g2 is None else _num(sc.g2),
        "track_iris": _num(sc.track_iris),
    }
    if sc.radii is None:
        sched = "open"
    else:
        sched = ", ".join(f"{_num(f)}:{_num(r)}" for f, r in zip(sc.fractions, sc.radii))
    cp["sweep"] = {
        "target": sc.target,
        "schedule": sched,
        "center": f"{_num(sc.center[0])}, {_num(sc.center[1])}",
        "threshold": _num(sc.threshold),
        "fit_column": sc.fit_column or "auto",
    }
    cp["acquisition"] = {
        k: _num(getattr(sc.acquisition, k)) for k in _ACQ_FIELDS
    }
    out = {"csv": sc.csv}
    for k in ("svg", "report", "record"):
        if getattr(sc, k):
            out[k] = getattr(sc, k)
    cp["outputs"] = out
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# --- state construction -----------------------------------------------------

def _build_mode(spec: ModeSpec, grid: GridSpec):
    if spec.kind == "hg":
        p, q, w = spec.params
        return hermite_gauss_mode(int(p), int(q), w, grid)
    radius, width, charge = spec.params
    return ring_mode(radius, width, grid, int(charge))


def build_state(sc: Scenario):
    """Twin-beam state described by the scenario.

    With ``orthogonalize`` the modes of each beam are Gram-Schmidt
    orthogonalized in pair order before the pairs are assembled.
    """
    grid = sc.grid
    modes = {}
    for p in sc.pairs:
        for k in ("mode_s", "mode_i"):
            try:
                modes[p.name, k] = _build_mode(getattr(p, k), grid)
            except TwinBeamError as exc:
                raise ConfigError(f"{PAIR_PREFIX}{p.name}.{k}", str(exc)) from None
    if sc.orthogonalize:
        for k in ("mode_s", "mode_i"):
            fields = [modes[p.name, k] for p in sc.pairs]
            basis = orthonormalize(fields, skip_below=1e-6)
            if len(basis) != len(fields):
                raise ConfigError("state.orthogonalize", f"{k} modes are linearly dependent")
            for p, m in zip(sc.pairs, basis.modes):
                modes[p.name, k] = m
    specs = []
    for p in sc.pairs:
        try:
            specs.append(TwinPairSpec(modes[p.name, "mode_s"], modes[p.name, "mode_i"],
                                      p.flux_s, p.flux_i, p.n, p.v_individual))
        except TwinBeamError as exc:
            raise ConfigError(f"{PAIR_PREFIX}{p.name}.n", str(exc)) from None
    try:
        return multimode_twin_state(specs)
    except TwinBeamError as exc:
        raise ConfigError("state.orthogonalize", str(exc)) from None
