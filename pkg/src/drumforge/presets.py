"""Preset pools and the per-track preset assignment.

Presets are reused across tracks, but never as part of an identical full
instrument combination: two tracks may share a drum kit only if at least
one other voice differs in timbre. A truncation config (k presets, r
reuses each) produces the reduced-diversity corpus variants; at full
production scale the pools hold 512 drum and 458 non-drum presets.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .midi import VOICE_ORDER, Voice
from .rng import SplitMix64, derive_seed

FULL_SCALE_DRUM_PRESETS = 512
FULL_SCALE_OTHER_PRESETS = 458

_TUPLE_RETRIES = 64


@dataclass(frozen=True)
class PresetDescriptor:
    preset_id: str
    bank: int | None = None
    program: int | None = None

    def to_dict(self) -> dict:
        out: dict = {"preset_id": self.preset_id}
        if self.bank is not None:
            out["bank"] = self.bank
        if self.program is not None:
            out["program"] = self.program
        return out


@dataclass
class PresetPool:
    drum_presets: list[PresetDescriptor]
    other_presets: dict[Voice, list[PresetDescriptor]]

    def for_voice(self, voice: Voice) -> list[PresetDescriptor]:
        pool = self.drum_presets if voice is Voice.DRUMS else self.other_presets.get(voice, [])
        if not pool:
            raise ValidationError(f"preset pool for voice {voice.value!r} is empty")
        return pool

    @classmethod
    def procedural(cls, n_drums: int, n_other: int) -> "PresetPool":
        """Synthetic pool for the reference backend; ids only, no assets."""
        if n_drums < 1 or n_other < 1:
            raise ValidationError("pool sizes must be >= 1")
        drums = [PresetDescriptor(f"drum-{i:03d}") for i in range(n_drums)]
        other = {
            voice: [PresetDescriptor(f"{voice.value}-{i:03d}") for i in range(n_other)]
            for voice in VOICE_ORDER[1:]
        }
        return cls(drums, other)

    @classmethod
    def from_json(cls, path: str | Path) -> "PresetPool":
        data = json.loads(Path(path).read_text())
        try:
            drums = [PresetDescriptor(**d) for d in data["drums"]]
            other = {
                Voice(voice): [PresetDescriptor(**d) for d in descriptors]
                for voice, descriptors in data.get("other", {}).items()
            }
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad preset pool: {exc}") from exc
        return cls(drums, other)

    def to_dict(self) -> dict:
        return {
            "drums": [d.to_dict() for d in self.drum_presets],
            "other": {
                voice.value: [d.to_dict() for d in descriptors]
                for voice, descriptors in self.other_presets.items()
            },
        }


@dataclass(frozen=True)
class TruncationConfig:
    """The reduced-preset corpus knob: first k drum presets, r uses each."""

    k_presets: int
    max_reuses: int

    def __post_init__(self) -> None:
        if self.k_presets < 1 or self.max_reuses < 1:
            raise ValidationError("k_presets and max_reuses must be >= 1")


@dataclass
class PresetAssignment:
    assignments: dict[str, dict[Voice, str]] = field(default_factory=dict)
    usage_counts: dict[str, int] = field(default_factory=dict)

    def tuple_for(self, track_id: str) -> tuple[str | None, ...]:
        chosen = self.assignments[track_id]
        return tuple(chosen.get(voice) for voice in VOICE_ORDER)

    def to_dict(self) -> dict:
        return {
            "assignments": {
                track: {voice.value: preset for voice, preset in sorted(
                    chosen.items(), key=lambda kv: kv[0].value)}
                for track, chosen in sorted(self.assignments.items())
            },
            "usage_counts": dict(sorted(self.usage_counts.items())),
        }


def assign_presets(
    track_ids: list[str],
    pool: PresetPool,
    voices: tuple[Voice, ...] = VOICE_ORDER,
    truncation: TruncationConfig | None = None,
    seed: int = 0,
) -> PresetAssignment:
    """Assign one preset per (track, voice) under the reuse constraints.

    Drum presets are drawn balanced (least-used first, seeded tie-break);
    the other voices are drawn at random and re-drawn, then exhaustively
    searched, if the full combination was already used by another track.
    """
    if len(set(track_ids)) != len(track_ids):
        raise ValidationError("duplicate track ids")
    if Voice.DRUMS not in voices:
        raise ValidationError("assignments must include the drum voice")

    drum_pool = [d.preset_id for d in pool.for_voice(Voice.DRUMS)]
    reuse_cap = None
    if truncation is not None:
        drum_pool = drum_pool[: truncation.k_presets]
        if len(drum_pool) < truncation.k_presets:
            raise ValidationError(
                f"pool has only {len(drum_pool)} drum presets, need {truncation.k_presets}"
            )
        reuse_cap = truncation.max_reuses
        if truncation.k_presets * reuse_cap < len(track_ids):
            raise ValidationError(
                f"infeasible truncation: {truncation.k_presets} presets x "
                f"{reuse_cap} reuses < {len(track_ids)} tracks"
            )
    other_pools = {
        voice: [d.preset_id for d in pool.for_voice(voice)]
        for voice in voices if voice is not Voice.DRUMS
    }

    combinations = len(drum_pool)
    for ids in other_pools.values():
        combinations *= len(ids)
    if combinations < len(track_ids):
        raise ValidationError(
            f"only {combinations} distinct preset combinations for {len(track_ids)} tracks"
        )

    assignment = PresetAssignment()
    counts: dict[str, int] = {}
    seen: set[tuple[str, ...]] = set()
    for index, track_id in enumerate(track_ids):
        rng = SplitMix64(derive_seed(seed, index))
        eligible = [p for p in drum_pool
                    if reuse_cap is None or counts.get(p, 0) < reuse_cap]
        if not eligible:
            raise ValidationError("drum preset reuse budget exhausted")
        # balanced draw: least-used drums first, seeded order within a tier
        rng.shuffle(eligible)
        eligible.sort(key=lambda p: counts.get(p, 0))

        drum = others = None
        for candidate in eligible:
            others = _pick_other_presets(rng, candidate, other_pools, seen)
            if others is not None:
                drum = candidate
                break
        if drum is None:
            raise ValidationError(
                f"no unused preset combination left for track {track_id!r}"
            )
        chosen = {Voice.DRUMS: drum, **others}
        seen.add(tuple(chosen.get(v, "") for v in VOICE_ORDER))
        for preset in chosen.values():
            counts[preset] = counts.get(preset, 0) + 1
        assignment.assignments[track_id] = chosen
    assignment.usage_counts = counts
    return assignment


def _pick_other_presets(rng, drum, other_pools, seen):
    """Random tries then a shuffled exhaustive scan for an unseen tuple."""
    order = [v for v in VOICE_ORDER if v in other_pools]
    if not order:
        # drums-only: the tuple is the drum preset alone, so reuse is a clash
        full = tuple(drum if v is Voice.DRUMS else "" for v in VOICE_ORDER)
        return {} if full not in seen else None

    def full_tuple(choice: dict) -> tuple[str, ...]:
        merged = {Voice.DRUMS: drum, **choice}
        return tuple(merged.get(v, "") for v in VOICE_ORDER)

    for _ in range(_TUPLE_RETRIES):
        choice = {voice: rng.choice(other_pools[voice]) for voice in order}
        if full_tuple(choice) not in seen:
            return choice

    # exhaustive: shuffled per-voice orders, scanned in mixed-radix order
    shuffled = {}
    for voice in order:
        ids = list(other_pools[voice])
        rng.shuffle(ids)
        shuffled[voice] = ids
    sizes = [len(shuffled[v]) for v in order]
    total = 1
    for s in sizes:
        total *= s
    for flat in range(total):
        choice = {}
        rem = flat
        for voice, size in zip(order, sizes):
            choice[voice] = shuffled[voice][rem % size]
            rem //= size
        if full_tuple(choice) not in seen:
            return choice
    return None


def audit_assignment(
    assignment: PresetAssignment,
    reuse_cap: int | None = None,
) -> None:
    """Re-check both invariants post hoc; raises ValidationError on breach."""
    tuples = [assignment.tuple_for(t) for t in assignment.assignments]
    if len(set(tuples)) != len(tuples):
        raise ValidationError("duplicate full preset combination")
    if reuse_cap is not None:
        drum_counts: dict[str, int] = {}
        for chosen in assignment.assignments.values():
            drum = chosen[Voice.DRUMS]
            drum_counts[drum] = drum_counts.get(drum, 0) + 1
        excess = {p: c for p, c in drum_counts.items() if c > reuse_cap}
        if excess:
            raise ValidationError(f"drum presets over the reuse cap: {excess}")
