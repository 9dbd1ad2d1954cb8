#!/usr/bin/env python3
"""Build a self-contained demo: synthesize a loop library, then run the full
pipeline (compose -> quantized variant -> render -> analyze -> coverage).

No external assets needed; loops are generated procedurally. Usage:

    python scripts/demo_corpus.py --out /tmp/forge-demo [--tracks 8] [--seed 0]
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from drumforge.cli import main as forge_main
from drumforge.midi import NoteEvent, PPQ, TempoMap, MeterMap, TrackSet, Voice, bar_ticks, write_smf
from drumforge.midi import normalize_overlaps

GENRES = ("rock", "funk", "edm")
THEMES = ("river", "ember", "quarry")
DRUM_PITCHES = (36, 38, 42, 46, 49, 51, 45)


def humanized_pattern(rng, voice, bars, meter, density=0.55, jitter=25):
    total = bars * bar_ticks(*meter)
    pitches = DRUM_PITCHES if voice is Voice.DRUMS else tuple(range(45, 70))
    notes = []
    for slot in range(0, total, PPQ // 4):
        if rng.random() > density:
            continue
        onset = max(0, min(total - 1, slot + int(rng.integers(-jitter, jitter + 1))))
        velocity = 127 if rng.random() < 0.3 else int(np.clip(rng.normal(102, 16), 1, 127))
        duration = PPQ // 4 if voice is Voice.DRUMS else int(rng.integers(PPQ // 4, PPQ))
        notes.append(NoteEvent(onset, min(duration, total - onset), int(rng.choice(pitches)),
                               velocity, voice))
    if not notes:
        notes = [NoteEvent(0, PPQ // 4, pitches[0], 110, voice)]
    return normalize_overlaps(notes)


def build_demo_library(root: Path, seed: int) -> Path:
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    entries = []

    def add_loop(loop_id, voice, theme, genre, bpm, bars):
        meter = (4, 4)
        notes = humanized_pattern(rng, voice, bars, meter)
        tempo = TempoMap(((0, round(60_000_000 / bpm)),))
        meters = MeterMap(((0, *meter),))
        track_set = TrackSet.build({voice: notes}, tempo, meters, PPQ)
        path = root / f"{loop_id}.mid"
        path.write_bytes(write_smf(track_set))
        entries.append({
            "loop_id": loop_id,
            "voice": voice.value,
            "theme": theme,
            "genre": genre,
            "tempo_bpm": bpm,
            "time_signature": list(meter),
            "key_signature": [0, 0],
            "length_bars": bars,
            "file_path": path.name,
        })

    index = 0
    for theme in THEMES:
        genre = GENRES[index % len(GENRES)]
        bpm = float(rng.integers(95, 140))
        for i in range(6):  # drums dominate the collection
            add_loop(f"{theme}-drums-{i}", Voice.DRUMS, theme, genre, bpm,
                     int(rng.choice((2, 4))))
        for i in range(2):
            add_loop(f"{theme}-piano-{i}", Voice.PIANO, theme, genre, bpm, 4)
        add_loop(f"{theme}-bass-0", Voice.BASS, theme, genre, bpm, 4)
        index += 1

    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"loops": entries}, indent=2))
    return manifest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--tracks", type=int, default=8)
    parser.add_argument("--duration", type=float, default=45.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    manifest = build_demo_library(out / "library", args.seed)
    print(f"demo library at {manifest}")
    return forge_main([
        "pipeline", "--manifest", str(manifest), "--out", str(out / "run"),
        "--num-tracks", str(args.tracks), "--duration", str(args.duration),
        "--voices", "4", "--quantize",
        "--drum-presets", "32", "--other-presets", "24",
        "--seed", str(args.seed), "--jobs", str(args.jobs),
    ])


if __name__ == "__main__":
    sys.exit(main())
