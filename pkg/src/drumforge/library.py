"""Loop library: manifest-driven ingestion and distance-ordered lookup.

A library is a directory of MIDI loop files described by one JSON manifest
(``{"loops": [...]}``, fields matching LoopMeta). Loops are resampled to the
internal tick resolution at load time; the library also tracks how often
each loop has been selected, which feeds the selection distance so the
composer samples the collection evenly.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ForgeError, ValidationError
from .midi import (
    PPQ,
    NoteEvent,
    TrackSet,
    Voice,
    VoiceTrack,
    bar_ticks,
    parse_smf,
    resample,
)


class LibraryError(ForgeError):
    pass


@dataclass(frozen=True)
class LoopMeta:
    loop_id: str
    voice: Voice
    theme: str
    genre: str
    tempo_bpm: float
    time_signature: tuple[int, int]
    key_signature: tuple[int, int]  # (sharps/flats -7..+7, mode: 0 major / 1 minor)
    length_bars: int
    file_path: str

    def __post_init__(self) -> None:
        if self.tempo_bpm <= 0:
            raise ValidationError(f"{self.loop_id}: tempo must be positive")
        if self.length_bars < 1:
            raise ValidationError(f"{self.loop_id}: length_bars must be >= 1")
        sf, mode = self.key_signature
        if not (-7 <= sf <= 7) or mode not in (0, 1):
            raise ValidationError(f"{self.loop_id}: bad key signature {self.key_signature}")


@dataclass(frozen=True)
class SelectionConstraints:
    """Target characteristics a candidate loop is scored against."""

    tempo_bpm: float | None = None
    length_bars: int | None = None
    genre: str | None = None
    time_signature: tuple[int, int] | None = None
    key_signature: tuple[int, int] | None = None
    tempo_window_ratio: float | None = None  # hard filter when set


@dataclass(frozen=True)
class DistanceWeights:
    """Weights of the loop-selection distance.

    Meter mismatch carries the largest weight: layering loops across time
    signatures is musically incoherent. The usage term spreads selections
    evenly over equally compatible loops.
    """

    tempo: float = 1.0
    length: float = 1.0
    genre: float = 2.0
    meter: float = 4.0
    key: float = 1.0
    usage: float = 0.5

    def __post_init__(self) -> None:
        values = (self.tempo, self.length, self.genre, self.meter, self.key, self.usage)
        if any(w < 0 for w in values):
            raise ValidationError("distance weights must be >= 0")
        if not any(w > 0 for w in values):
            raise ValidationError("at least one distance weight must be positive")


def loop_distance(
    meta: LoopMeta,
    constraints: SelectionConstraints,
    usage_count: int,
    weights: DistanceWeights,
) -> float:
    """Weighted compatibility-plus-usage distance; lower is better."""
    d = weights.usage * usage_count
    if constraints.tempo_bpm is not None:
        d += weights.tempo * abs(math.log(meta.tempo_bpm / constraints.tempo_bpm))
    if constraints.length_bars is not None:
        d += weights.length * abs(meta.length_bars - constraints.length_bars) / constraints.length_bars
    if constraints.genre is not None and meta.genre != constraints.genre:
        d += weights.genre
    if constraints.time_signature is not None and meta.time_signature != constraints.time_signature:
        d += weights.meter
    if constraints.key_signature is not None and meta.key_signature != constraints.key_signature:
        d += weights.key
    return d


@dataclass
class Loop:
    meta: LoopMeta
    track: VoiceTrack

    @property
    def length_ticks(self) -> int:
        return self.meta.length_bars * bar_ticks(*self.meta.time_signature)


@dataclass
class LoopLibrary:
    loops: dict[str, Loop] = field(default_factory=dict)
    usage_counts: dict[str, int] = field(default_factory=dict)
    load_errors: list[str] = field(default_factory=list)

    def add(self, loop: Loop) -> None:
        if loop.meta.loop_id in self.loops:
            raise LibraryError(f"duplicate loop_id {loop.meta.loop_id!r}")
        self.loops[loop.meta.loop_id] = loop
        self.usage_counts[loop.meta.loop_id] = 0

    def record_use(self, loop_id: str) -> None:
        self.usage_counts[loop_id] += 1

    def by_voice(self, voice: Voice) -> list[Loop]:
        return [l for l in self.loops.values() if l.meta.voice is voice]

    def themes(self, voice: Voice) -> list[str]:
        return sorted({l.meta.theme for l in self.by_voice(voice)})

    def reset_usage(self) -> None:
        for key in self.usage_counts:
            self.usage_counts[key] = 0

    def snapshot_usage(self) -> dict[str, int]:
        return dict(self.usage_counts)


def _loop_from_manifest(entry: dict, base_dir: Path) -> Loop:
    try:
        meta = LoopMeta(
            loop_id=str(entry["loop_id"]),
            voice=Voice(entry["voice"]),
            theme=str(entry["theme"]),
            genre=str(entry["genre"]),
            tempo_bpm=float(entry["tempo_bpm"]),
            time_signature=tuple(entry["time_signature"]),
            key_signature=tuple(entry.get("key_signature", (0, 0))),
            length_bars=int(entry["length_bars"]),
            file_path=str(entry["file_path"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LibraryError(f"bad manifest entry {entry.get('loop_id', '?')!r}: {exc}") from exc

    path = base_dir / meta.file_path
    if not path.is_file():
        raise LibraryError(f"{meta.loop_id}: missing file {path}")
    track_set = resample(parse_smf(path.read_bytes()), PPQ)

    if track_set.meter.entries[0][1:] != meta.time_signature:
        raise LibraryError(
            f"{meta.loop_id}: manifest meter {meta.time_signature} does not match "
            f"MIDI meter {track_set.meter.entries[0][1:]}"
        )

    # loop files hold a single instrument; the manifest decides the voice
    notes = tuple(
        NoteEvent(n.onset_ticks, n.duration_ticks, n.pitch, n.velocity, meta.voice)
        for track in track_set.voices.values()
        for n in track.notes
    )
    notes = tuple(sorted(notes))
    limit = meta.length_bars * bar_ticks(*meta.time_signature)
    overflow = [n for n in notes if n.onset_ticks >= limit]
    if overflow:
        raise LibraryError(
            f"{meta.loop_id}: {len(overflow)} notes beyond the declared {meta.length_bars} bars"
        )
    track = VoiceTrack(meta.voice, notes, track_set.tempo, track_set.meter, PPQ)
    return Loop(meta, track)


def load_library(manifest_path: str | Path) -> LoopLibrary:
    """Load a manifest and its loops, skipping invalid entries.

    Per-loop failures are collected in ``library.load_errors``; only a
    library with zero valid loops raises.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LibraryError(f"cannot read manifest {manifest_path}: {exc}") from exc
    entries = manifest.get("loops")
    if not isinstance(entries, list):
        raise LibraryError(f"{manifest_path}: manifest must contain a 'loops' array")

    library = LoopLibrary()
    for entry in entries:
        try:
            loop = _loop_from_manifest(entry, manifest_path.parent)
            library.add(loop)
        except (LibraryError, ValidationError, ForgeError) as exc:
            library.load_errors.append(str(exc))
    if not library.loops:
        raise LibraryError(
            f"{manifest_path}: no valid loops ({len(library.load_errors)} errors: "
            + "; ".join(library.load_errors[:5]) + ")"
        )
    return library


def candidates(
    library: LoopLibrary,
    voice: Voice,
    constraints: SelectionConstraints,
    weights: DistanceWeights | None = None,
) -> list[str]:
    """All loops of a voice ordered by (distance, loop_id)."""
    weights = weights or DistanceWeights()
    pool = library.by_voice(voice)
    if not pool:
        raise LibraryError(f"no loops for voice {voice.value!r}")
    scored = [
        (loop_distance(l.meta, constraints, library.usage_counts[l.meta.loop_id], weights),
         l.meta.loop_id)
        for l in pool
    ]
    scored.sort()
    return [loop_id for _, loop_id in scored]


def loops_from_tracksets(pairs: Iterable[tuple[LoopMeta, TrackSet]]) -> LoopLibrary:
    """Build a library directly from in-memory track sets (tests, scripts)."""
    library = LoopLibrary()
    for meta, track_set in pairs:
        track_set = resample(track_set, PPQ)
        notes = tuple(
            NoteEvent(n.onset_ticks, n.duration_ticks, n.pitch, n.velocity, meta.voice)
            for track in track_set.voices.values()
            for n in track.notes
        )
        track = VoiceTrack(meta.voice, tuple(sorted(notes)), track_set.tempo,
                           track_set.meter, PPQ)
        library.add(Loop(meta, track))
    return library
