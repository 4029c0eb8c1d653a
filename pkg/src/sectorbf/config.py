"""YAML configuration for the command-line tool.

Every value is validated on load; errors carry ``file:line`` of the offending
key. Unknown keys are rejected.

Design config example::

    geometry:
      type: circular          # or: explicit, with mics: [[x, y, z], ...]
      num_mics: 8
      radius_m: 0.1
      first_mic_azimuth_deg: 0
    sectors:
      preset: paper4          # or a list of {azimuth_start_deg, azimuth_end_deg,
                              #               elevation_min_deg, elevation_max_deg, label}
    design:
      n_fft: 512
      sample_rate_hz: 16000
      angle_step_deg: 1
      diagonal_loading: 1.0e-6
      weighting_mode: elevation_cosine
      speed_of_sound: 343
    stft:
      hop: 256

Scene config example::

    sources:
      - {azimuth_deg: 90, elevation_deg: 35, signal: speech_shaped}
      - {azimuth_deg: 270, elevation_deg: 35, signal: speech_shaped, gain: 1.0}
    target_source: 0
    duration_s: 10
    noise_level: 0.0
    seed: 0
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .designer import WEIGHTING_MODES, DesignConfig
from .geometry import (AngularSector, ArrayGeometry, Direction, WaveContext, circular_array,
                       paper_sectors)
from .stft import StftConfig

SIGNAL_KINDS = ("speech_shaped", "white")


class ConfigError(ValueError):
    pass


def _compose(text: str, source: str):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    lines: dict[tuple, int] = {}

    def walk(n, path):
        lines[path] = n.start_mark.line + 1
        if isinstance(n, yaml.MappingNode):
            seen = set()
            for k, v in n.value:
                key = k.value
                if key in seen:
                    raise ConfigError(f"{source}:{k.start_mark.line + 1}: duplicate key "
                                      f"{'.'.join(map(str, path + (key,)))!r}")
                seen.add(key)
                lines[path + (key,)] = k.start_mark.line + 1
                walk(v, path + (key,))
        elif isinstance(n, yaml.SequenceNode):
            for i, v in enumerate(n.value):
                walk(v, path + (i,))

    if node is not None:
        walk(node, ())
    return data, lines


class _Section:
    """Validating view over one mapping of the parsed document."""

    def __init__(self, data, path: tuple, doc: "_Doc", allowed: tuple[str, ...]):
        self.path = path
        self.doc = doc
        if not isinstance(data, dict):
            doc.fail(path, f"expected a mapping, got {type(data).__name__}")
        self.data = data
        for key in data:
            if key not in allowed:
                doc.fail(path + (key,), f"unknown key (allowed: {', '.join(allowed)})")

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = ...):
        if key not in self.data:
            if default is ...:
                self.doc.fail(self.path, f"missing required key {key!r}", key=key)
            return default
        return self.data[key]

    def number(self, key: str, default: Any = ..., check=None, what: str = "") -> float:
        value = self.raw(key, default)
        value = self.doc.as_number(value, self.path + (key,))
        if check is not None and not check(value):
            self.doc.fail(self.path + (key,), f"{value!r} is invalid: must be {what}")
        return value

    def integer(self, key: str, default: Any = ..., check=None, what: str = "") -> int:
        value = self.number(key, default, check, what)
        if value != int(value):
            self.doc.fail(self.path + (key,), f"{value!r} is not an integer")
        return int(value)

    def choice(self, key: str, options, default: Any = ...) -> str:
        value = self.raw(key, default)
        if value not in options:
            self.doc.fail(self.path + (key,), f"{value!r} is not one of {', '.join(options)}")
        return value

    def line_of(self, key: str) -> int | None:
        return self.doc.lines.get(self.path + (key,))


@dataclass
class _Doc:
    source: str
    data: Any
    lines: dict

    def fail(self, path: tuple, message: str, key: str | None = None):
        probe = path
        while probe and probe not in self.lines:
            probe = probe[:-1]
        line = self.lines.get(probe)
        where = f"{self.source}:{line}" if line is not None else self.source
        dotted = ".".join(map(str, path + ((key,) if key else ())))
        raise ConfigError(f"{where}: {dotted or '<root>'}: {message}")

    def as_number(self, value, path) -> float:
        # PyYAML reads "1e-6" (no dot) as a string
        if isinstance(value, bool):
            self.fail(path, f"expected a number, got {value!r}")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                self.fail(path, f"expected a number, got {value!r}")
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(path, f"expected a finite number, got {value!r}")
        return value

    def section(self, data, path, allowed) -> _Section:
        return _Section(data, path, self, allowed)


def _load(path) -> _Doc:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    data, lines = _compose(text, str(path))
    if data is None:
        raise ConfigError(f"{path}: config file is empty")
    return _Doc(str(path), data, lines)


def _validated(doc: _Doc, path: tuple, build):
    try:
        return build()
    except ConfigError:
        raise
    except ValueError as exc:
        doc.fail(path, str(exc))


def _parse_geometry(doc: _Doc, data, path=("geometry",)) -> ArrayGeometry:
    sec = doc.section(data, path, ("type", "num_mics", "radius_m", "first_mic_azimuth_deg",
                                   "mics", "name"))
    kind = sec.choice("type", ("circular", "explicit"), "circular")
    name = sec.raw("name", None)
    if kind == "circular":
        if sec.has("mics"):
            doc.fail(path + ("mics",), "explicit mic coordinates need type: explicit")
        n = sec.integer("num_mics", ..., lambda v: v >= 1, "an integer >= 1")
        r = sec.number("radius_m", 0.1, lambda v: v > 0, "> 0")
        az0 = sec.number("first_mic_azimuth_deg", 0.0)
        return _validated(doc, path, lambda: circular_array(n, r, az0, name))
    for key in ("num_mics", "radius_m", "first_mic_azimuth_deg"):
        if sec.has(key):
            doc.fail(path + (key,), "only valid for type: circular")
    mics = sec.raw("mics")
    if not isinstance(mics, list) or not mics:
        doc.fail(path + ("mics",), "expected a non-empty list of [x, y, z] coordinates")
    coords = []
    for i, m in enumerate(mics):
        if not isinstance(m, list) or len(m) != 3:
            doc.fail(path + ("mics", i), "expected [x, y, z]")
        coords.append([doc.as_number(v, path + ("mics", i)) for v in m])
    return _validated(doc, path, lambda: ArrayGeometry(np.array(coords), name or "explicit"))


def _parse_sectors(doc: _Doc, data, path=("sectors",)) -> list[AngularSector]:
    if isinstance(data, dict):
        sec = doc.section(data, path, ("preset",))
        sec.choice("preset", ("paper4",))
        return paper_sectors()
    if not isinstance(data, list) or not data:
        doc.fail(path, "expected 'preset: paper4' or a non-empty list of sectors")
    out = []
    for i, item in enumerate(data):
        sp = path + (i,)
        sec = doc.section(item, sp, ("azimuth_start_deg", "azimuth_end_deg",
                                     "elevation_min_deg", "elevation_max_deg", "label"))
        el_ok = (lambda v: -90 <= v <= 90, "within [-90, 90] degrees")
        a0 = sec.number("azimuth_start_deg")
        a1 = sec.number("azimuth_end_deg")
        e0 = sec.number("elevation_min_deg", ..., *el_ok)
        e1 = sec.number("elevation_max_deg", ..., *el_ok)
        label = str(sec.raw("label", f"sector{i + 1}"))
        out.append(_validated(doc, sp, lambda: AngularSector(a0, a1, e0, e1, label)))
    return out


@dataclass
class ToolConfig:
    geometry: ArrayGeometry
    sectors: list[AngularSector]
    design: DesignConfig = field(default_factory=DesignConfig)
    ctx: WaveContext = field(default_factory=WaveContext)
    stft: StftConfig = field(default_factory=StftConfig)


def load_tool_config(path) -> ToolConfig:
    doc = _load(path)
    top = doc.section(doc.data, (), ("geometry", "sectors", "design", "stft"))
    geometry = _parse_geometry(doc, top.raw("geometry"))
    sectors = _parse_sectors(doc, top.raw("sectors"))

    dp = ("design",)
    design = doc.section(top.raw("design", {}), dp,
                         ("n_fft", "sample_rate_hz", "angle_step_deg", "diagonal_loading",
                          "weighting_mode", "speed_of_sound"))
    n_fft = design.integer("n_fft", 512, lambda v: v >= 64 and (v & (v - 1)) == 0,
                           "a power of two >= 64")
    fs = design.number("sample_rate_hz", 16000.0, lambda v: v > 0, "> 0")
    step = design.number("angle_step_deg", 1.0, lambda v: v > 0, "> 0")
    loading = design.number("diagonal_loading", 1e-6, lambda v: v >= 0, ">= 0")
    mode = design.choice("weighting_mode", WEIGHTING_MODES, WEIGHTING_MODES[0])
    c = design.number("speed_of_sound", 343.0, lambda v: v > 0, "> 0")
    cfg = _validated(doc, dp + ("angle_step_deg",),
                     lambda: DesignConfig(n_fft, fs, loading, step, mode))
    ctx = WaveContext(fs, c)

    sp = ("stft",)
    st = doc.section(top.raw("stft", {}), sp, ("hop",))
    hop = st.integer("hop", n_fft // 2, lambda v: v >= 1, ">= 1")
    stft_cfg = _validated(doc, sp + ("hop",), lambda: StftConfig(n_fft, hop, "sqrt_hann", fs))
    return ToolConfig(geometry, sectors, cfg, ctx, stft_cfg)


@dataclass
class SourceConfig:
    direction: Direction
    gain: float
    signal: str  # one of SIGNAL_KINDS or a WAV path
    seed: int | None = None  # None: derived from the scene seed

    def resolved_seed(self, scene_seed: int, index: int) -> int:
        return self.seed if self.seed is not None else scene_seed * 1000 + index + 1


@dataclass
class SceneConfig:
    sources: list[SourceConfig]
    target_source: int = 0
    duration_s: float = 10.0
    noise_level: float = 0.0
    seed: int = 0
    geometry: ArrayGeometry | None = None


def load_scene_config(path) -> SceneConfig:
    doc = _load(path)
    top = doc.section(doc.data, (), ("sources", "target_source", "duration_s", "noise_level",
                                     "seed", "geometry"))
    seed = top.integer("seed", 0)
    raw_sources = top.raw("sources", [])
    if not isinstance(raw_sources, list):
        doc.fail(("sources",), "expected a list of sources")
    if not raw_sources:
        doc.fail(("sources",) if top.has("sources") else (), "scene needs at least one source")
    sources = []
    base = Path(path).parent
    for i, item in enumerate(raw_sources):
        sp = ("sources", i)
        sec = doc.section(item, sp, ("azimuth_deg", "elevation_deg", "gain", "signal", "seed"))
        az = sec.number("azimuth_deg")
        el = sec.number("elevation_deg", ..., lambda v: -90 <= v <= 90, "within [-90, 90] degrees")
        gain = sec.number("gain", 1.0, lambda v: v >= 0, ">= 0")
        signal = str(sec.raw("signal", "speech_shaped"))
        if signal not in SIGNAL_KINDS:
            wav = Path(signal)
            wav = wav if wav.is_absolute() else base / wav
            if not wav.is_file():
                doc.fail(sp + ("signal",), f"{signal!r} is neither one of "
                         f"{', '.join(SIGNAL_KINDS)} nor an existing WAV file")
            signal = str(wav)
        src_seed = sec.integer("seed") if sec.has("seed") else None
        sources.append(SourceConfig(Direction(az, el), gain, signal, src_seed))
    target = top.integer("target_source", 0, lambda v: 0 <= v < len(sources),
                         f"an index in [0, {len(sources)})")
    duration = top.number("duration_s", 10.0, lambda v: v > 0, "> 0")
    noise = top.number("noise_level", 0.0, lambda v: v >= 0, ">= 0")
    geometry = _parse_geometry(doc, top.raw("geometry"), ("geometry",)) if top.has("geometry") else None
    return SceneConfig(sources, target, duration, noise, seed, geometry)
