"""Section-by-section track composition from a loop library.

A track is a sequence of sections. Each section is anchored by a drum
"master" loop; the remaining voices are layered with loops whose metadata
is compatible with the master's. Masters of consecutive sections come from
the same theme, so a track plays as variations on one idea. Loops are
drawn with replacement through a distance that mixes compatibility with a
usage penalty, which spreads draws evenly across the collection.

Composition is deterministic: all randomness comes from a SplitMix64
stream derived from (config seed, track index).
"""

import math
from dataclasses import dataclass, field

from .errors import ValidationError
from .library import (
    DistanceWeights,
    LibraryError,
    LoopLibrary,
    SelectionConstraints,
    loop_distance,
)
from .midi import (
    PPQ,
    MeterMap,
    NoteEvent,
    TempoMap,
    TrackSet,
    Voice,
    VoiceTrack,
    VOICE_ORDER,
    bar_ticks,
    normalize_overlaps,
)
from .rng import SplitMix64, derive_seed

#: Corpus size used at full production scale; the training split convention
#: is 2**13 tracks with the remainder held out.
FULL_SCALE_TRACKS = 10_250
TRAINING_SPLIT_TRACKS = 2**13

MIN_SECTION_BARS = 8


@dataclass(frozen=True)
class CompositionConfig:
    target_duration_s: float = 180.0
    num_voices: int = 4
    weights: DistanceWeights = field(default_factory=DistanceWeights)
    tempo_window_ratio: float = 1.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.target_duration_s <= 0:
            raise ValidationError("target_duration_s must be positive")
        if not 1 <= self.num_voices <= 4:
            raise ValidationError("num_voices must be in 1..4")
        if self.tempo_window_ratio < 1.0:
            raise ValidationError("tempo_window_ratio must be >= 1")

    @property
    def voices(self) -> tuple[Voice, ...]:
        return VOICE_ORDER[: self.num_voices]


@dataclass(frozen=True)
class SectionPlan:
    index: int
    master_loop: str
    layered_loops: dict[Voice, str]
    length_bars: int
    tempo_bpm: float
    time_signature: tuple[int, int]


@dataclass(frozen=True)
class TrackPlan:
    track_id: str
    seed: int
    sections: tuple[SectionPlan, ...]
    num_voices: int

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "seed": self.seed,
            "num_voices": self.num_voices,
            "sections": [
                {
                    "index": s.index,
                    "master_loop": s.master_loop,
                    "layered_loops": {v.value: lid for v, lid in s.layered_loops.items()},
                    "length_bars": s.length_bars,
                    "tempo_bpm": s.tempo_bpm,
                    "time_signature": list(s.time_signature),
                }
                for s in self.sections
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrackPlan":
        sections = tuple(
            SectionPlan(
                index=s["index"],
                master_loop=s["master_loop"],
                layered_loops={Voice(v): lid for v, lid in s["layered_loops"].items()},
                length_bars=s["length_bars"],
                tempo_bpm=s["tempo_bpm"],
                time_signature=tuple(s["time_signature"]),
            )
            for s in data["sections"]
        )
        return cls(data["track_id"], data["seed"], sections, data["num_voices"])


def select_loop(
    library: LoopLibrary,
    voice: Voice,
    constraints: SelectionConstraints,
    config: CompositionConfig,
    rng: SplitMix64,
) -> str:
    """Pick the distance-argmin loop of a voice and record the use.

    Exact distance ties are broken by a seeded uniform draw. When the
    constraints carry a tempo window, loops outside it are excluded first.
    """
    pool = library.by_voice(voice)
    if constraints.tempo_window_ratio is not None and constraints.tempo_bpm is not None:
        ratio = constraints.tempo_window_ratio
        target = constraints.tempo_bpm
        pool = [
            l for l in pool
            if target / ratio <= l.meta.tempo_bpm <= target * ratio
        ]
    if not pool:
        raise LibraryError(
            f"no candidate loops for voice {voice.value!r} under {constraints}"
        )
    scored = sorted(
        (loop_distance(l.meta, constraints, library.usage_counts[l.meta.loop_id],
                       config.weights),
         l.meta.loop_id)
        for l in pool
    )
    best = scored[0][0]
    tied = [loop_id for d, loop_id in scored if d == best]
    winner = tied[0] if len(tied) == 1 else rng.choice(tied)
    library.record_use(winner)
    return winner


def _theme_pool(library: LoopLibrary, theme: str) -> LoopLibrary:
    """View of the drum loops in one theme, sharing the parent's counts."""
    sub = LoopLibrary()
    for loop in library.by_voice(Voice.DRUMS):
        if loop.meta.theme == theme:
            sub.loops[loop.meta.loop_id] = loop
    sub.usage_counts = library.usage_counts
    return sub


def _bar_seconds(tempo_bpm: float, meter: tuple[int, int]) -> float:
    num, den = meter
    return num * (4 / den) * 60.0 / tempo_bpm


def _section_bars(master_bars: int) -> int:
    """Master length tiled to at least MIN_SECTION_BARS bars."""
    return master_bars * math.ceil(MIN_SECTION_BARS / master_bars)


def compose_track(
    library: LoopLibrary,
    config: CompositionConfig,
    track_index: int = 0,
    track_id: str | None = None,
) -> TrackPlan:
    """Compose one track plan; mutates the library's usage counts.

    Sections are appended until the planned duration reaches the target;
    the final section may be shortened (to bar granularity) so the total
    lands within one bar of the target.
    """
    if not library.by_voice(Voice.DRUMS):
        raise LibraryError("library has no drum loops")
    track_seed = derive_seed(config.seed, track_index)
    rng = SplitMix64(track_seed)
    track_id = track_id or f"track{track_index:05d}"

    sections: list[SectionPlan] = []
    elapsed = 0.0
    previous_master = None
    index = 0
    while elapsed < config.target_duration_s:
        if previous_master is None:
            master_pool = library
        else:
            theme = library.loops[previous_master].meta.theme
            theme_pool = _theme_pool(library, theme)
            master_pool = library if len(theme_pool.loops) <= 1 else theme_pool
        master_id = select_loop(master_pool, Voice.DRUMS, SelectionConstraints(),
                                config, rng)
        master = library.loops[master_id].meta

        bars = _section_bars(master.length_bars)
        bar_s = _bar_seconds(master.tempo_bpm, master.time_signature)
        remaining = config.target_duration_s - elapsed
        if bars * bar_s >= remaining:
            bars = min(bars, max(1, math.ceil(remaining / bar_s)))

        layered: dict[Voice, str] = {}
        targets = SelectionConstraints(
            tempo_bpm=master.tempo_bpm,
            length_bars=master.length_bars,
            genre=master.genre,
            time_signature=master.time_signature,
            key_signature=master.key_signature,
            tempo_window_ratio=config.tempo_window_ratio,
        )
        for voice in config.voices[1:]:
            # no dedicated guitar loops exist: guitar parts reuse the piano pool
            pool_voice = Voice.PIANO if voice is Voice.GUITAR else voice
            layered[voice] = select_loop(library, pool_voice, targets, config, rng)

        sections.append(
            SectionPlan(
                index=index,
                master_loop=master_id,
                layered_loops=layered,
                length_bars=bars,
                tempo_bpm=master.tempo_bpm,
                time_signature=master.time_signature,
            )
        )
        elapsed += bars * bar_s
        previous_master = master_id
        index += 1

    return TrackPlan(track_id, track_seed, tuple(sections), config.num_voices)


def plan_duration_s(plan: TrackPlan) -> float:
    return sum(
        s.length_bars * _bar_seconds(s.tempo_bpm, s.time_signature)
        for s in plan.sections
    )


def _tile_loop(
    notes: tuple[NoteEvent, ...],
    loop_ticks: int,
    section_ticks: int,
    offset: int,
    voice: Voice,
) -> list[NoteEvent]:
    """Tile a loop across a section, truncating at the boundary."""
    out = []
    reps = math.ceil(section_ticks / loop_ticks) if loop_ticks > 0 else 0
    for rep in range(reps):
        base = rep * loop_ticks
        for note in notes:
            onset = base + note.onset_ticks
            if onset >= section_ticks:
                break
            end = min(onset + note.duration_ticks, section_ticks)
            out.append(NoteEvent(offset + onset, end - onset, note.pitch,
                                 note.velocity, voice))
    return out


def realize_midi(plan: TrackPlan, library: LoopLibrary) -> TrackSet:
    """Expand a plan into concrete multi-voice MIDI at the internal PPQ."""
    tempo_entries: list[tuple[int, int]] = []
    meter_entries: list[tuple[int, int, int]] = []
    notes_by_voice: dict[Voice, list[NoteEvent]] = {
        v: [] for v in VOICE_ORDER[: plan.num_voices]
    }

    cursor = 0
    for section in plan.sections:
        us = round(60_000_000 / section.tempo_bpm)
        tempo_entries.append((cursor, us))
        meter_entries.append((cursor, *section.time_signature))
        section_ticks = section.length_bars * bar_ticks(*section.time_signature)

        placements = {Voice.DRUMS: section.master_loop, **section.layered_loops}
        for voice, loop_id in placements.items():
            loop = library.loops.get(loop_id)
            if loop is None:
                raise LibraryError(f"{plan.track_id}: unknown loop {loop_id!r}")
            notes_by_voice[voice].extend(
                _tile_loop(loop.track.notes, loop.length_ticks, section_ticks,
                           cursor, voice)
            )
        cursor += section_ticks

    tempo = TempoMap.from_entries(tempo_entries)
    meter = MeterMap.from_entries(meter_entries)
    voices = {
        voice: VoiceTrack(voice, normalize_overlaps(notes), tempo, meter, PPQ)
        for voice, notes in notes_by_voice.items()
    }
    return TrackSet(PPQ, tempo, meter, voices)


def compose_corpus(
    library: LoopLibrary,
    config: CompositionConfig,
    num_tracks: int,
) -> list[TrackPlan]:
    """Compose plans sequentially over one shared usage-count state."""
    if num_tracks < 1:
        raise ValidationError("num_tracks must be >= 1")
    return [
        compose_track(library, config, track_index=i)
        for i in range(num_tracks)
    ]
