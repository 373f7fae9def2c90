"""Config-file parsing: flat key=value text with sections (INI syntax).

Sections and keys mirror the library dataclasses; command-line flags
override file values.  Scene files use one `[object.<i>]` section per
object.  See the README for annotated examples.
"""

from __future__ import annotations

import configparser
import dataclasses

from .bench import BenchConfig
from .synth import (MaskCorruption, ObjectSpec, SceneConfig, TrackerParams)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


def _parser(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    return cp


def _floats(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}") from exc


def _ints(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from exc


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _coerce(value: str, like):
    if isinstance(like, bool):
        return _bool(value)
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        if like and isinstance(like[0], str):
            return tuple(x.strip() for x in value.split(","))
        if like and isinstance(like[0], int):
            return _ints(value)
        return _floats(value)
    return value


def _fill_dataclass(cls, section, defaults, skip=()):
    """Build a dataclass from a config section, coercing by field default."""
    kwargs = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in names:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        kwargs[key] = _coerce(raw, getattr(defaults, key))
    return dataclasses.replace(defaults, **kwargs)


def _object_spec(section, index: int) -> ObjectSpec:
    try:
        shape = section["shape"]
        color = _floats(section["color"])
        start = _floats(section["start"])
        velocity = _floats(section.get("velocity", "0, 0"))
    except KeyError as exc:
        raise ConfigError(f"object {index} is missing {exc}") from exc
    if len(color) != 3 or len(start) != 2 or len(velocity) != 2:
        raise ConfigError(
            f"object {index}: color needs 3 values, start/velocity need 2")
    radius = float(section.get("radius", "0"))
    half_size = _floats(section.get("half_size", "0, 0"))
    if len(half_size) != 2:
        raise ConfigError(f"object {index}: half_size needs 2 values")
    try:
        return ObjectSpec(shape, color, start, velocity, radius=radius,
                          half_size=half_size)
    except ValueError as exc:
        raise ConfigError(f"object {index}: {exc}") from exc


def load_scene(path, seed_override: int | None = None) -> SceneConfig:
    cp = _parser(path)
    if "scene" not in cp:
        raise ConfigError("scene config needs a [scene] section")
    s = cp["scene"]
    objects = []
    for name in cp.sections():
        if name.startswith("object."):
            try:
                index = int(name.split(".", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad object section name {name!r}") from exc
            objects.append((index, _object_spec(cp[name], index)))
    objects.sort(key=lambda pair: pair[0])
    try:
        return SceneConfig(
            height=int(s["height"]),
            width=int(s["width"]),
            n_frames=int(s["n_frames"]),
            objects=tuple(spec for _, spec in objects),
            noise_sigma=float(s.get("noise_sigma", "0")),
            allow_crossing=_bool(s.get("allow_crossing", "true")),
            bg_color=_floats(s.get("bg_color", "0.15, 0.15, 0.18")),
            seed=int(s["seed"]) if seed_override is None else seed_override,
        )
    except KeyError as exc:
        raise ConfigError(f"[scene] is missing {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_tracker(path, overrides: dict | None = None) -> TrackerParams:
    cp = _parser(path)
    params = TrackerParams()
    if "corruption" in cp:
        params = dataclasses.replace(
            params, corruption=_fill_dataclass(
                MaskCorruption, cp["corruption"], MaskCorruption()))
    if "tracker" in cp:
        params = _fill_dataclass(TrackerParams, cp["tracker"], params,
                                 skip=("corruption",))
    if overrides:
        params = dataclasses.replace(params, **overrides)
    return params


def load_bench(path) -> BenchConfig:
    cp = _parser(path)
    if "bench" not in cp:
        raise ConfigError("bench config needs a [bench] section")
    try:
        return _fill_dataclass(BenchConfig, cp["bench"], BenchConfig())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
