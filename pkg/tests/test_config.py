import numpy as np
import pytest
from scipy.io import wavfile

from edgeloc.config import (SceneConfig, SynthSettings, load_scene_config, parse_scene_config,
                            read_recording, scene_config_text, sidecar_path, write_recording,
                            write_scene_config)
from edgeloc.errors import SceneError
from edgeloc.forward import EmissionSpec, NoiseSpec
from edgeloc.scene import PhysicsConfig, SourceGroundTruth, doorway_preset, edge_preset

DOORWAY_INI = """
[physics]
c = 343
fs = 48000

[doorway]
edge_d = 0, 0, 0
edge_r = 0, -0.9, 0
r2_d = 0.8
r2_r = 1.2042   ; measured
door_width = 0.9
array = door

[array.door]
base = -0.8, 0, 0.46
count = 15
pitch = 0.13

[source]
r1 = 3.2
theta = 25
z0 = 1.5
t0 = 0.005

[noise]
snr_db = none
seed = 4
"""


def test_parse_doorway():
    cfg = parse_scene_config(DOORWAY_INI)
    pre = doorway_preset()
    assert cfg.scene.array == pre.array
    assert cfg.scene.edge_d == pre.edge_d and cfg.scene.r2_r == pytest.approx(1.2042)
    assert cfg.source == SourceGroundTruth(3.2, 25.0, 1.5, 0.005)
    assert cfg.noise.snr_db is None and cfg.noise.seed == 4
    assert cfg.physics == PhysicsConfig()


@pytest.mark.parametrize("scene", [doorway_preset(), edge_preset()])
def test_round_trip(tmp_path, scene):
    cfg = SceneConfig(scene, PhysicsConfig(340.0, 44100.0), SourceGroundTruth(3.1, 10, 1.3, 0.004),
                      EmissionSpec(center_freq=4000.0), NoiseSpec(20.0, 1500.0, 0.02, 9),
                      SynthSettings(0.05, 0.001, 0.7))
    write_scene_config(tmp_path / "s.ini", cfg)
    assert load_scene_config(tmp_path / "s.ini") == cfg
    assert parse_scene_config(scene_config_text(cfg)) == cfg


def test_edge_single_r2_broadcast():
    text = scene_config_text(SceneConfig(edge_preset())).replace(
        "r2 = 0.8, 0.8", "r2 = 0.8")
    assert parse_scene_config(text).scene.r2 == (0.8, 0.8)


@pytest.mark.parametrize("text,msg", [
    ("[physics]\nc = 343\n", "doorway"),
    (DOORWAY_INI.replace("pitch = 0.13", "pitch = 0"), "MicArray.pitch"),
    (DOORWAY_INI.replace("r2_d = 0.8", "r2_d = abc"), "not a number"),
    (DOORWAY_INI.replace("count = 15", "count = 2.5"), "integer"),
    (DOORWAY_INI.replace("[array.door]", "[array.other]"), "array.door"),
    (DOORWAY_INI.replace("r2_d = 0.8\n", ""), "r2_d"),
    (DOORWAY_INI + "\n[edge]\nedge = 0, 0\n", "exactly one"),
    ("not an ini", "parse"),
])
def test_invalid_configs(text, msg):
    with pytest.raises(SceneError, match=msg):
        parse_scene_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(SceneError, match="not found"):
        load_scene_config(tmp_path / "nope.ini")


def test_recording_round_trip(tmp_path, door_traces):
    cfg = SceneConfig(doorway_preset(), source=SourceGroundTruth(3.2, 25.0, 1.5, 0.005))
    side = write_recording(tmp_path / "r.wav", door_traces, cfg)
    assert side == sidecar_path(tmp_path / "r.wav") == tmp_path / "r.ini"
    rate, data = wavfile.read(tmp_path / "r.wav")
    assert rate == 48000 and data.shape == (door_traces.samples.shape[1], 15)
    assert data.dtype == np.float32
    traces, cfg2, truth = read_recording(tmp_path / "r.wav")
    assert truth == cfg.source
    assert cfg2.scene == cfg.scene
    np.testing.assert_allclose(traces.samples, door_traces.samples.astype(np.float32))
    np.testing.assert_allclose(traces.channel_geometry, door_traces.channel_geometry)
    assert traces.array_ids == ("door",) * 15


def test_recording_int16_and_scene_only(tmp_path, door_traces):
    x = door_traces.samples / np.abs(door_traces.samples).max()
    wavfile.write(tmp_path / "i.wav", 48000, np.round(x.T * 32767).astype(np.int16))
    with pytest.raises(SceneError, match="no scene given"):
        read_recording(tmp_path / "i.wav")
    traces, _, truth = read_recording(tmp_path / "i.wav", SceneConfig(doorway_preset()))
    assert truth is None
    assert np.abs(traces.samples - x).max() < 1e-4


def test_recording_mismatches(tmp_path, door_traces):
    wavfile.write(tmp_path / "a.wav", 44100, door_traces.samples.T.astype(np.float32))
    with pytest.raises(SceneError, match="expects fs = 48000"):
        read_recording(tmp_path / "a.wav", SceneConfig(doorway_preset()))
    wavfile.write(tmp_path / "b.wav", 48000, door_traces.samples[:8].T.astype(np.float32))
    with pytest.raises(SceneError, match="8 channels"):
        read_recording(tmp_path / "b.wav", SceneConfig(doorway_preset()))
    with pytest.raises(SceneError, match="not found"):
        read_recording(tmp_path / "c.wav", SceneConfig(doorway_preset()))
