"""Shared fixture builders: synthetic loops, libraries, and track sets."""

import functools
import json
from pathlib import Path

import numpy as np

from drumforge.midi import (
    PPQ,
    MeterMap,
    NoteEvent,
    TempoMap,
    TrackSet,
    Voice,
    bar_ticks,
    normalize_overlaps,
    write_smf,
)

DRUM_PITCHES = (36, 38, 42, 46, 49, 51, 45, 48)
MELODIC_PITCHES = tuple(range(48, 72))

#: (description, passed) pairs filled by the acceptance suite and printed
#: by the terminal-summary hook in conftest.py.
ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def criterion(description: str):
    """Record a one-line pass/fail verdict for an acceptance test."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                ACCEPTANCE_RESULTS.append((description, False))
                raise
            ACCEPTANCE_RESULTS.append((description, True))
            return result

        return wrapper

    return decorate


def bpm_to_us(bpm: float) -> int:
    return round(60_000_000 / bpm)


def make_track_set(
    notes_by_voice,
    bpm: float = 120.0,
    meter: tuple[int, int] = (4, 4),
    ppq: int = PPQ,
) -> TrackSet:
    tempo = TempoMap(((0, bpm_to_us(bpm)),))
    meters = MeterMap(((0,) + meter,))
    return TrackSet.build(notes_by_voice, tempo, meters, ppq)


def random_loop_notes(
    rng: np.random.Generator,
    voice: Voice,
    bars: int,
    meter: tuple[int, int] = (4, 4),
    jitter_ticks: int = 0,
    velocity_pool=None,
    density: float = 0.5,
) -> list[NoteEvent]:
    """Notes on a 16th grid, optionally humanized with tick jitter."""
    pitches = DRUM_PITCHES if voice is Voice.DRUMS else MELODIC_PITCHES
    total = bars * bar_ticks(*meter)
    step = PPQ // 4
    notes = []
    for slot in range(0, total, step):
        if rng.random() > density:
            continue
        onset = slot
        if jitter_ticks:
            onset = max(0, min(total - 1, slot + int(rng.integers(-jitter_ticks, jitter_ticks + 1))))
        if velocity_pool is not None:
            velocity = int(rng.choice(velocity_pool))
        else:
            # skew toward loud hits with a tail, like captured performances
            velocity = int(np.clip(rng.normal(105, 18), 1, 127))
        pitch = int(rng.choice(pitches))
        duration = step if voice is Voice.DRUMS else int(rng.integers(step, 4 * step))
        duration = min(duration, total - onset)
        notes.append(NoteEvent(onset, max(duration, 1), pitch, velocity, voice))
    if not notes:
        notes.append(NoteEvent(0, step, pitches[0], 100, voice))
    return list(normalize_overlaps(notes))


def build_library(
    tmp_path: Path,
    specs,
    name: str = "library",
) -> Path:
    """Write loop MIDI files plus a manifest; returns the manifest path.

    Each spec is a dict with LoopMeta fields (minus file_path); a "notes"
    key may inject an explicit note list, otherwise a seeded pattern is
    generated from the loop_id.
    """
    root = tmp_path / name
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in specs:
        spec = dict(spec)
        notes = spec.pop("notes", None)
        voice = Voice(spec["voice"])
        meter = tuple(spec.get("time_signature", (4, 4)))
        bars = spec.get("length_bars", 4)
        bpm = spec.get("tempo_bpm", 120.0)
        if notes is None:
            seed = abs(hash(spec["loop_id"])) % (2**32)
            rng = np.random.default_rng(seed)
            notes = random_loop_notes(rng, voice, bars, meter)
        track_set = make_track_set({voice: notes}, bpm=bpm, meter=meter)
        midi_path = root / f"{spec['loop_id']}.mid"
        midi_path.write_bytes(write_smf(track_set))
        entry = {
            "loop_id": spec["loop_id"],
            "voice": spec["voice"],
            "theme": spec.get("theme", "theme-a"),
            "genre": spec.get("genre", "rock"),
            "tempo_bpm": bpm,
            "time_signature": list(meter),
            "key_signature": list(spec.get("key_signature", (0, 0))),
            "length_bars": bars,
            "file_path": midi_path.name,
        }
        entries.append(entry)
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"loops": entries}, indent=2))
    return manifest


def uniform_drum_specs(count: int, theme: str = "theme-a", **overrides):
    """`count` drum loops with identical metadata (equally compatible)."""
    base = {
        "voice": "drums",
        "theme": theme,
        "genre": "rock",
        "tempo_bpm": 120.0,
        "time_signature": (4, 4),
        "key_signature": (0, 0),
        "length_bars": 4,
    }
    base.update(overrides)
    return [dict(base, loop_id=f"{theme}-drum-{i:03d}") for i in range(count)]
