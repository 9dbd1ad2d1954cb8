"""Loop library ingestion and candidate-ordering tests."""

import json

import pytest

from drumforge.library import (
    DistanceWeights,
    LibraryError,
    LoopMeta,
    SelectionConstraints,
    candidates,
    load_library,
    loop_distance,
)
from drumforge.midi import PPQ, Voice

from .helpers import build_library, uniform_drum_specs


def test_load_three_valid_loops(tmp_path):
    manifest = build_library(tmp_path, uniform_drum_specs(3))
    lib = load_library(manifest)
    assert len(lib.loops) == 3
    assert all(count == 0 for count in lib.usage_counts.values())
    assert lib.load_errors == []


def test_missing_file_reported_but_loading_continues(tmp_path):
    manifest = build_library(tmp_path, uniform_drum_specs(3))
    data = json.loads(manifest.read_text())
    data["loops"][1]["file_path"] = "gone.mid"
    manifest.write_text(json.dumps(data))
    lib = load_library(manifest)
    assert len(lib.loops) == 2
    assert len(lib.load_errors) == 1
    assert "missing file" in lib.load_errors[0]


def test_zero_valid_loops_raises(tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"loops": [{"loop_id": "x"}]}))
    with pytest.raises(LibraryError, match="no valid loops"):
        load_library(manifest)


def test_duplicate_loop_id_reported(tmp_path):
    specs = uniform_drum_specs(2)
    specs[1]["loop_id"] = specs[0]["loop_id"] = "dup"
    # second file overwrites the first on disk; manifest still lists it twice
    manifest = build_library(tmp_path, specs)
    lib = load_library(manifest)
    assert len(lib.loops) == 1
    assert any("duplicate" in e for e in lib.load_errors)


def test_meter_mismatch_rejected(tmp_path):
    specs = uniform_drum_specs(2)
    manifest = build_library(tmp_path, specs)
    data = json.loads(manifest.read_text())
    data["loops"][0]["time_signature"] = [3, 4]  # MIDI file still says 4/4
    manifest.write_text(json.dumps(data))
    lib = load_library(manifest)
    assert len(lib.loops) == 1
    assert any("meter" in e for e in lib.load_errors)


def test_proportional_voice_counts(tmp_path):
    # drums >> piano >> bass, mirroring the source collection's skew
    specs = (
        uniform_drum_specs(13)
        + [dict(uniform_drum_specs(1)[0], loop_id=f"p{i}", voice="piano") for i in range(2)]
        + [dict(uniform_drum_specs(1)[0], loop_id="b0", voice="bass")]
    )
    lib = load_library(build_library(tmp_path, specs))
    assert len(lib.by_voice(Voice.DRUMS)) == 13
    assert len(lib.by_voice(Voice.PIANO)) == 2
    assert len(lib.by_voice(Voice.BASS)) == 1


def test_loops_resampled_to_internal_ppq(tmp_path):
    manifest = build_library(tmp_path, uniform_drum_specs(1))
    lib = load_library(manifest)
    assert next(iter(lib.loops.values())).track.ppq == PPQ


class TestCandidates:
    def _constraints(self):
        return SelectionConstraints(
            tempo_bpm=120.0, length_bars=4, genre="rock",
            time_signature=(4, 4), key_signature=(0, 0),
        )

    def test_exact_match_first(self, tmp_path):
        specs = uniform_drum_specs(3)
        specs[0]["tempo_bpm"] = 90.0
        specs[2]["genre"] = "jazz"
        lib = load_library(build_library(tmp_path, specs))
        ordered = candidates(lib, Voice.DRUMS, self._constraints())
        assert ordered[0] == specs[1]["loop_id"]

    def test_equidistant_ordered_by_loop_id(self, tmp_path):
        lib = load_library(build_library(tmp_path, uniform_drum_specs(5)))
        ordered = candidates(lib, Voice.DRUMS, self._constraints())
        assert ordered == sorted(ordered)

    def test_order_matches_brute_force_distance(self, tmp_path):
        import numpy as np

        rng = np.random.default_rng(42)
        specs = []
        for i in range(12):
            specs.append({
                "loop_id": f"loop-{i:02d}",
                "voice": "drums",
                "theme": "t",
                "genre": rng.choice(["rock", "jazz", "funk"]).item(),
                "tempo_bpm": float(rng.integers(80, 180)),
                "time_signature": [int(rng.choice([3, 4])), 4],
                "key_signature": [int(rng.integers(-2, 3)), 0],
                "length_bars": int(rng.choice([2, 4, 8])),
            })
        lib = load_library(build_library(tmp_path, specs))
        constraints = self._constraints()
        weights = DistanceWeights()
        expected = sorted(
            (loop_distance(l.meta, constraints, 0, weights), l.meta.loop_id)
            for l in lib.by_voice(Voice.DRUMS)
        )
        assert candidates(lib, Voice.DRUMS, constraints) == [lid for _, lid in expected]

    def test_empty_voice_errors(self, tmp_path):
        lib = load_library(build_library(tmp_path, uniform_drum_specs(1)))
        with pytest.raises(LibraryError, match="no loops for voice"):
            candidates(lib, Voice.GUITAR, self._constraints())


def test_distance_formula_components():
    meta = LoopMeta("x", Voice.DRUMS, "t", "jazz", 100.0, (3, 4), (2, 1), 2, "x.mid")
    constraints = SelectionConstraints(
        tempo_bpm=120.0, length_bars=4, genre="rock",
        time_signature=(4, 4), key_signature=(0, 0),
    )
    w = DistanceWeights(tempo=1, length=1, genre=2, meter=4, key=1, usage=0.5)
    import math

    expected = (
        abs(math.log(100 / 120)) + abs(2 - 4) / 4 + 2 + 4 + 1 + 0.5 * 3
    )
    assert loop_distance(meta, constraints, 3, w) == pytest.approx(expected)


def test_weights_validation():
    with pytest.raises(Exception):
        DistanceWeights(tempo=-1)
    with pytest.raises(Exception):
        DistanceWeights(tempo=0, length=0, genre=0, meter=0, key=0, usage=0)
