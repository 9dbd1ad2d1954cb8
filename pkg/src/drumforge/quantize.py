"""Simulated offline annotation: grid/velocity quantization and the 5-class map.

Captured performances carry human timing and dynamic deviations; offline
annotation tools do not. Snapping onsets to a beat-subdivision grid and
velocities to the few values an editor exposes turns the former into the
latter, which is the ablation knob for comparing the two MIDI sources.
"""

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .midi import NoteEvent, TrackSet, Voice, VoiceTrack, normalize_overlaps


class DrumClass(Enum):
    KD = "KD"  # kick drums
    SD = "SD"  # snares, side sticks, claps
    HH = "HH"  # hi-hats
    TT = "TT"  # toms
    CY = "CY"  # crash/ride/china/splash cymbals


CLASS_ORDER = (DrumClass.KD, DrumClass.SD, DrumClass.HH, DrumClass.TT, DrumClass.CY)

# General MIDI percussion pitches grouped into the common 5-class vocabulary.
# Pitches outside the table (percussion toys, congas, non-kit sounds) map to
# None and are excluded from class statistics.
_CLASS_TABLE: dict[int, DrumClass] = {
    35: DrumClass.KD, 36: DrumClass.KD,
    37: DrumClass.SD, 38: DrumClass.SD, 39: DrumClass.SD, 40: DrumClass.SD,
    42: DrumClass.HH, 44: DrumClass.HH, 46: DrumClass.HH,
    41: DrumClass.TT, 43: DrumClass.TT, 45: DrumClass.TT,
    47: DrumClass.TT, 48: DrumClass.TT, 50: DrumClass.TT,
    49: DrumClass.CY, 51: DrumClass.CY, 52: DrumClass.CY,
    53: DrumClass.CY, 55: DrumClass.CY, 57: DrumClass.CY, 59: DrumClass.CY,
}


def map_class(pitch: int) -> DrumClass | None:
    """Drum class of a General MIDI percussion pitch, or None if unmapped."""
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch {pitch} outside MIDI range")
    return _CLASS_TABLE.get(pitch)


@dataclass(frozen=True)
class QuantizationSpec:
    """Grid subdivisions per quarter note plus the allowed velocity values.

    Defaults model a typical editor: 16th-note grid, velocities snapped to
    the two most common annotation values.
    """

    grid_division: int = 4
    velocity_targets: frozenset[int] = frozenset((127, 100))

    def __post_init__(self) -> None:
        if self.grid_division < 1:
            raise ValidationError("grid_division must be >= 1")
        targets = frozenset(self.velocity_targets)
        if not targets or any(not 1 <= v <= 127 for v in targets):
            raise ValidationError("velocity_targets must be non-empty within [1, 127]")
        object.__setattr__(self, "velocity_targets", targets)


def snap_tick(tick: int, step: int) -> int:
    """Nearest grid multiple; exact midpoints round to the earlier point."""
    return ((2 * tick + step - 1) // (2 * step)) * step


def snap_velocity(velocity: int, targets: frozenset[int]) -> int:
    """Nearest allowed velocity; midpoints round up to the larger value."""
    return min(sorted(targets, reverse=True), key=lambda t: abs(velocity - t))


def quantize_performance(track: VoiceTrack, spec: QuantizationSpec) -> VoiceTrack:
    """Snap a track's onsets to the grid and velocities to the target set.

    Notes that collide on (pitch, tick) after snapping are merged, keeping
    the highest velocity (ties keep the longest duration). Idempotent.
    """
    if track.ppq % spec.grid_division != 0:
        raise ValidationError(
            f"grid_division {spec.grid_division} does not divide ppq {track.ppq}"
        )
    step = track.ppq // spec.grid_division
    merged: dict[tuple[int, int], NoteEvent] = {}
    for note in track.notes:
        onset = snap_tick(note.onset_ticks, step)
        velocity = snap_velocity(note.velocity, spec.velocity_targets)
        snapped = NoteEvent(onset, note.duration_ticks, note.pitch, velocity, note.voice)
        key = (note.pitch, onset)
        prev = merged.get(key)
        if prev is None or (snapped.velocity, snapped.duration_ticks) > (
            prev.velocity,
            prev.duration_ticks,
        ):
            merged[key] = snapped
    # clip any duration overlaps the snapping introduced
    notes = normalize_overlaps(merged.values())
    return VoiceTrack(track.voice, notes, track.tempo, track.meter, track.ppq)


def quantize_track_set(
    track_set: TrackSet,
    spec: QuantizationSpec,
    voices: set[Voice] | None = None,
) -> TrackSet:
    """Quantize all voices (default) or a chosen subset."""
    quantized = {
        voice: quantize_performance(track, spec) if voices is None or voice in voices
        else track
        for voice, track in track_set.voices.items()
    }
    return TrackSet(track_set.ppq, track_set.tempo, track_set.meter, quantized)
