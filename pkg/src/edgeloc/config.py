"""
Scene configuration files and recording interchange.

Scenes are INI files::

    [physics]
    c = 343
    fs = 48000

    [doorway]                 ; or [edge]
    edge_d = 0, 0, 0
    edge_r = 0, -0.9, 0
    r2_d = 0.8
    r2_r = 1.2042
    door_width = 0.9
    array = door

    [array.door]
    base = -0.8, 0, 0.46
    count = 15
    pitch = 0.13

    [source]                  ; optional ground truth (needed by synth)
    r1 = 3.2
    theta = 25
    z0 = 1.5
    t0 = 0.005

An ``[edge]`` section has ``edge``, ``arrays`` (two ids, near pole first),
``r2`` (one value per array) and ``delta_theta``. Optional ``[emission]``,
``[noise]`` and ``[synth]`` (``duration``, ``t_start``, ``reflection``)
sections configure the forward model.

Recordings are multichannel WAV files with a sidecar ``<stem>.ini`` holding
the scene sections above plus a ``[recording]`` section with the sample rate,
start time and per-channel geometry.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import SceneError
from .forward import EmissionSpec, NoiseSpec, TraceSet
from .scene import (DoorwayScene, EdgeScene, MicArray, PhysicsConfig, Point3,
                    SourceGroundTruth, validate_physics, validate_scene, validate_source)


@dataclass(frozen=True)
class SynthSettings:
    duration: float = 0.04
    t_start: float = 0.0
    reflection: float = 1.0


@dataclass(frozen=True)
class SceneConfig:
    scene: DoorwayScene | EdgeScene
    physics: PhysicsConfig = PhysicsConfig()
    source: SourceGroundTruth | None = None
    emission: EmissionSpec = EmissionSpec()
    noise: NoiseSpec = NoiseSpec()
    synth: SynthSettings = field(default_factory=SynthSettings)

    def validate(self) -> None:
        problems = validate_physics(self.physics) + validate_scene(self.scene)
        if self.source is not None:
            problems += validate_source(self.source)
        if problems:
            raise SceneError("invalid scene configuration", problems)


# -- parsing ---------------------------------------------------------------

def _float(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise SceneError(f"[{sec.name}] missing key '{key}'")
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise SceneError(f"[{sec.name}] {key}: not a number: {sec[key]!r}") from None


def _floats(sec, key, n=None):
    if key not in sec:
        raise SceneError(f"[{sec.name}] missing key '{key}'")
    try:
        vals = [float(v) for v in sec[key].replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise SceneError(f"[{sec.name}] {key}: expected numbers, got {sec[key]!r}") from None
    if n is not None and len(vals) != n:
        raise SceneError(f"[{sec.name}] {key}: expected {n} values, got {len(vals)}")
    return vals


def _point(sec, key) -> Point3:
    vals = _floats(sec, key)
    if len(vals) not in (2, 3):
        raise SceneError(f"[{sec.name}] {key}: expected x, y[, z]")
    return Point3(*vals)


def _array(cp, array_id: str) -> MicArray:
    name = f"array.{array_id}"
    if name not in cp:
        raise SceneError(f"missing section [{name}]")
    sec = cp[name]
    count = _float(sec, "count")
    if count != int(count):
        raise SceneError(f"[{name}] count: must be an integer")
    return MicArray(_point(sec, "base"), int(count), _float(sec, "pitch"), array_id)


def _parse(cp: configparser.ConfigParser) -> SceneConfig:
    phys = PhysicsConfig()
    if "physics" in cp:
        phys = PhysicsConfig(_float(cp["physics"], "c", phys.c),
                             _float(cp["physics"], "fs", phys.fs))

    if "doorway" in cp and "edge" in cp:
        raise SceneError("scene must have exactly one of [doorway] or [edge]")
    if "doorway" in cp:
        sec = cp["doorway"]
        array = _array(cp, sec.get("array", "door").strip())
        scene = DoorwayScene(_point(sec, "edge_d"), _point(sec, "edge_r"), array,
                             _float(sec, "r2_d"), _float(sec, "r2_r"),
                             _float(sec, "door_width"))
    elif "edge" in cp:
        sec = cp["edge"]
        ids = [s.strip() for s in sec.get("arrays", "").split(",") if s.strip()]
        arrays = tuple(_array(cp, i) for i in ids)
        r2 = tuple(_floats(sec, "r2"))
        if len(r2) == 1 and len(arrays) > 1:
            r2 = r2 * len(arrays)
        scene = EdgeScene(_point(sec, "edge"), arrays, r2, _float(sec, "delta_theta"))
    else:
        raise SceneError("scene needs a [doorway] or [edge] section")

    source = None
    if "source" in cp:
        sec = cp["source"]
        source = SourceGroundTruth(_float(sec, "r1"), _float(sec, "theta"),
                                   _float(sec, "z0"), _float(sec, "t0", 0.0))

    emission = EmissionSpec()
    if "emission" in cp:
        sec = cp["emission"]
        emission = EmissionSpec(sec.get("kind", emission.kind).strip(),
                                _float(sec, "center_freq", emission.center_freq),
                                _float(sec, "duty", emission.duty),
                                _float(sec, "amplitude", emission.amplitude),
                                sec.get("path", "").strip() or None)

    noise = NoiseSpec()
    if "noise" in cp:
        sec = cp["noise"]
        snr = sec.get("snr_db", "none").strip().lower()
        noise = NoiseSpec(None if snr in ("", "none", "inf") else _float(sec, "snr_db"),
                          _float(sec, "reverb_density", noise.reverb_density),
                          _float(sec, "reverb_decay", noise.reverb_decay),
                          int(_float(sec, "seed", noise.seed)),
                          _float(sec, "reverb_gain", noise.reverb_gain),
                          _float(sec, "reverb_gap", noise.reverb_gap))
        if noise.reverb_density < 0 or not noise.reverb_decay > 0:
            raise SceneError("invalid noise settings", [
                "NoiseSpec.reverb_density: must be >= 0",
                "NoiseSpec.reverb_decay: must be > 0"])

    synth = SynthSettings()
    if "synth" in cp:
        sec = cp["synth"]
        synth = SynthSettings(_float(sec, "duration", synth.duration),
                              _float(sec, "t_start", synth.t_start),
                              _float(sec, "reflection", synth.reflection))

    cfg = SceneConfig(scene, phys, source, emission, noise, synth)
    cfg.validate()
    return cfg


def _reader() -> configparser.ConfigParser:
    return configparser.ConfigParser(inline_comment_prefixes=(";", "#"))


def load_scene_config(path) -> SceneConfig:
    path = Path(path)
    if not path.is_file():
        raise SceneError(f"scene file not found: {path}")
    cp = _reader()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise SceneError(f"cannot parse {path}: {exc}") from None
    return _parse(cp)


def parse_scene_config(text: str) -> SceneConfig:
    cp = _reader()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SceneError(f"cannot parse scene config: {exc}") from None
    return _parse(cp)


# -- writing ---------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def _fmt_point(p: Point3) -> str:
    return f"{_fmt(p.x)}, {_fmt(p.y)}, {_fmt(p.z)}"


def _sections(cfg: SceneConfig) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {
        "physics": {"c": _fmt(cfg.physics.c), "fs": _fmt(cfg.physics.fs)}}
    sc = cfg.scene
    if isinstance(sc, DoorwayScene):
        out["doorway"] = {"edge_d": _fmt_point(sc.edge_d), "edge_r": _fmt_point(sc.edge_r),
                          "r2_d": _fmt(sc.r2_d), "r2_r": _fmt(sc.r2_r),
                          "door_width": _fmt(sc.door_width), "array": sc.array.id}
    else:
        out["edge"] = {"edge": _fmt_point(sc.edge),
                       "arrays": ", ".join(a.id for a in sc.arrays),
                       "r2": ", ".join(_fmt(r) for r in sc.r2),
                       "delta_theta": _fmt(sc.delta_theta)}
    for a in sc.arrays:
        out[f"array.{a.id}"] = {"base": _fmt_point(a.base), "count": str(a.count),
                                "pitch": _fmt(a.pitch)}
    if cfg.source is not None:
        s = cfg.source
        out["source"] = {"r1": _fmt(s.r1), "theta": _fmt(s.theta), "z0": _fmt(s.z0),
                         "t0": _fmt(s.t0)}
    e = cfg.emission
    out["emission"] = {"kind": e.kind, "center_freq": _fmt(e.center_freq),
                       "duty": _fmt(e.duty), "amplitude": _fmt(e.amplitude),
                       "path": e.path or ""}
    n = cfg.noise
    out["noise"] = {"snr_db": "none" if n.snr_db is None else _fmt(n.snr_db),
                    "reverb_density": _fmt(n.reverb_density),
                    "reverb_decay": _fmt(n.reverb_decay), "seed": str(n.seed),
                    "reverb_gain": _fmt(n.reverb_gain), "reverb_gap": _fmt(n.reverb_gap)}
    y = cfg.synth
    out["synth"] = {"duration": _fmt(y.duration), "t_start": _fmt(y.t_start),
                    "reflection": _fmt(y.reflection)}
    return out


def _render(sections: dict[str, dict[str, str]]) -> str:
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)


def scene_config_text(cfg: SceneConfig) -> str:
    return _render(_sections(cfg))


def write_scene_config(path, cfg: SceneConfig) -> None:
    Path(path).write_text(scene_config_text(cfg))


# -- recordings ----------------------------------------------------------------

def sidecar_path(wav_path) -> Path:
    return Path(wav_path).with_suffix(".ini")


def write_recording(wav_path, traces: TraceSet, cfg: SceneConfig) -> Path:
    """Write a float32 multichannel WAV plus its sidecar; returns the sidecar path."""
    if abs(traces.fs - round(traces.fs)) > 1e-9:
        raise SceneError(f"WAV needs an integer sample rate, got {traces.fs:g}")
    wav_path = Path(wav_path)
    wavfile.write(wav_path, int(round(traces.fs)),
                  np.ascontiguousarray(traces.samples.T, dtype=np.float32))
    sections = _sections(cfg)
    rec = {"fs": _fmt(traces.fs), "t_start": _fmt(traces.t_start),
           "channels": str(traces.n_channels)}
    for k, (pos, aid) in enumerate(zip(traces.channel_geometry,
                                       traces.array_ids or ("",) * traces.n_channels)):
        rec[f"channel.{k}"] = f"{_fmt(pos[0])}, {_fmt(pos[1])}, {_fmt(pos[2])}, {aid}"
    sections["recording"] = rec
    side = sidecar_path(wav_path)
    side.write_text(_render(sections))
    return side


def _read_wav(path: Path) -> tuple[float, np.ndarray]:
    if not path.is_file():
        raise SceneError(f"input file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise SceneError(f"cannot read WAV {path}: {exc}") from None
    if data.ndim == 1:
        data = data[:, None]
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        data = (data.astype(float) - (info.max + 1 + info.min) / 2) / (info.max + 1)
    return float(rate), np.asarray(data, dtype=float).T.copy()


def _geometry_from_scene(scene) -> tuple[np.ndarray, tuple[str, ...]]:
    pos = np.vstack([a.positions() for a in scene.arrays])
    ids = tuple(a.id for a in scene.arrays for _ in range(a.count))
    return pos, ids


def read_recording(wav_path, cfg: SceneConfig | None = None
                   ) -> tuple[TraceSet, SceneConfig, SourceGroundTruth | None]:
    """Load a WAV recording with its geometry.

    Geometry and start time come from the sidecar when present, else from
    ``cfg``. A scene passed explicitly overrides the sidecar's scene; the
    sidecar still supplies ground truth. Raises :class:`SceneError` on
    channel-count or sample-rate mismatches.
    """
    wav_path = Path(wav_path)
    rate, samples = _read_wav(wav_path)
    side = sidecar_path(wav_path)
    truth = None
    t_start = 0.0
    geometry = ids = None
    side_cfg = None
    if side.is_file():
        cp = _reader()
        cp.read(side)
        side_cfg = _parse(cp)
        truth = side_cfg.source
        if "recording" in cp:
            rec = cp["recording"]
            t_start = _float(rec, "t_start", 0.0)
            n = int(_float(rec, "channels"))
            geo, names = [], []
            for k in range(n):
                parts = [p.strip() for p in rec.get(f"channel.{k}", "").split(",")]
                if len(parts) < 3:
                    raise SceneError(f"sidecar {side}: bad or missing channel.{k}")
                geo.append([float(v) for v in parts[:3]])
                names.append(parts[3] if len(parts) > 3 else "")
            geometry, ids = np.array(geo), tuple(names)
    if cfg is None:
        if side_cfg is None:
            raise SceneError(f"no scene given and no sidecar {side} next to the input")
        cfg = side_cfg
    elif side_cfg is not None:
        cfg = replace(cfg, source=cfg.source or side_cfg.source)

    if abs(rate - cfg.physics.fs) > 1e-6:
        raise SceneError(f"{wav_path.name} is sampled at {rate:g} Hz; the scene expects "
                         f"fs = {cfg.physics.fs:g} Hz")
    scene_geo, scene_ids = _geometry_from_scene(cfg.scene)
    if samples.shape[0] != scene_geo.shape[0]:
        raise SceneError(f"{wav_path.name} has {samples.shape[0]} channels; the scene "
                         f"defines {scene_geo.shape[0]} microphones")
    if geometry is None or geometry.shape != scene_geo.shape or not np.allclose(
            geometry, scene_geo, atol=1e-6) or tuple(ids) != scene_ids:
        geometry, ids = scene_geo, scene_ids
    if not math.isfinite(t_start):
        raise SceneError("sidecar t_start must be finite")
    return TraceSet(samples, rate, geometry, t_start, tuple(ids)), cfg, truth
