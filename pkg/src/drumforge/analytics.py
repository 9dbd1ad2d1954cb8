"""Dataset statistics: variable distributions, beat fingerprints, coverage.

Five variables characterize a dataset's drum content: tempo, velocity,
onset interval, time signature and drum class. Beyond per-variable
histograms, each beat is reduced to a 5-class x 12-bin occupancy
fingerprint; comparing fingerprint multisets between datasets measures how
much of a target's material a source covers, both beat-by-beat and over
unique patterns.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import ValidationError
from .midi import TrackSet, Voice, VoiceTrack, beat_ticks, ticks_to_seconds
from .quantize import CLASS_ORDER, DrumClass, map_class

MERGE_WINDOW_S = 0.050  # near-simultaneous onsets count as one strike
MAX_INTERVAL_BEATS = 1.0  # gaps above a quarter note (in 4/4) are discarded

FINGERPRINT_BINS = 12
FINGERPRINT_CLASSES = len(CLASS_ORDER)
FINGERPRINT_CELLS = FINGERPRINT_CLASSES * FINGERPRINT_BINS

TEMPO_BIN_WIDTH = 2.0
TEMPO_RANGE = (40.0, 300.0)
INTERVAL_BINS = 48  # separates 16th-note triplets and the 12 fingerprint bins


@dataclass(frozen=True)
class Histogram:
    """Fixed-bin counting histogram; values outside clip to the edge bins."""

    lo: float
    hi: float
    counts: tuple[int, ...]

    @classmethod
    def empty(cls, lo: float, hi: float, bins: int) -> "Histogram":
        return cls(lo, hi, (0,) * bins)

    @property
    def bins(self) -> int:
        return len(self.counts)

    def bin_index(self, value: float) -> int:
        # small forward nudge keeps exact bin edges from flickering downward
        # under float noise
        width = (self.hi - self.lo) / self.bins
        idx = math.floor((value - self.lo) / width + 1e-9)
        return min(max(idx, 0), self.bins - 1)

    def add(self, values: Iterable[float]) -> "Histogram":
        counts = list(self.counts)
        for value in values:
            counts[self.bin_index(value)] += 1
        return Histogram(self.lo, self.hi, tuple(counts))

    def merge(self, other: "Histogram") -> "Histogram":
        if (self.lo, self.hi, self.bins) != (other.lo, other.hi, other.bins):
            raise ValidationError("cannot merge histograms with different binning")
        return Histogram(self.lo, self.hi,
                         tuple(a + b for a, b in zip(self.counts, other.counts)))

    def normalized(self) -> tuple[float, ...]:
        total = sum(self.counts)
        if total == 0:
            return (0.0,) * self.bins
        return tuple(c / total for c in self.counts)

    def edges(self) -> tuple[float, ...]:
        width = (self.hi - self.lo) / self.bins
        return tuple(self.lo + i * width for i in range(self.bins + 1))

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "counts": list(self.counts)}


def _empty_histograms() -> tuple[Histogram, Histogram, Histogram]:
    tempo_bins = int((TEMPO_RANGE[1] - TEMPO_RANGE[0]) / TEMPO_BIN_WIDTH)
    return (
        Histogram.empty(*TEMPO_RANGE, tempo_bins),
        Histogram.empty(0.0, 128.0, 128),
        Histogram.empty(0.0, MAX_INTERVAL_BEATS, INTERVAL_BINS),
    )


@dataclass(frozen=True)
class DistributionReport:
    tempo_hist: Histogram
    velocity_hist: Histogram
    onset_interval_hist: Histogram
    time_signature_counts: dict[tuple[int, int], int]
    class_counts: dict[DrumClass, int]
    track_count: int
    beat_count: int

    def merge(self, other: "DistributionReport") -> "DistributionReport":
        signatures = dict(self.time_signature_counts)
        for key, count in other.time_signature_counts.items():
            signatures[key] = signatures.get(key, 0) + count
        classes = dict(self.class_counts)
        for key, count in other.class_counts.items():
            classes[key] = classes.get(key, 0) + count
        return DistributionReport(
            self.tempo_hist.merge(other.tempo_hist),
            self.velocity_hist.merge(other.velocity_hist),
            self.onset_interval_hist.merge(other.onset_interval_hist),
            signatures,
            classes,
            self.track_count + other.track_count,
            self.beat_count + other.beat_count,
        )

    def to_dict(self) -> dict:
        return {
            "tempo_hist": self.tempo_hist.to_dict(),
            "velocity_hist": self.velocity_hist.to_dict(),
            "onset_interval_hist": self.onset_interval_hist.to_dict(),
            "time_signature_counts": {
                f"{n}/{d}": c
                for (n, d), c in sorted(self.time_signature_counts.items())
            },
            "class_counts": {
                cls.value: self.class_counts.get(cls, 0) for cls in CLASS_ORDER
            },
            "track_count": self.track_count,
            "beat_count": self.beat_count,
        }


def track_duration_ticks(track_set: TrackSet) -> int:
    return track_set.end_ticks


def weighted_mean_tempo(track_set: TrackSet) -> float:
    """Per-track tempo summary: mean bpm weighted by time spent at each tempo."""
    end_tick = track_duration_ticks(track_set)
    entries = track_set.tempo.entries
    if end_tick == 0:
        return 60e6 / entries[0][1]
    total_s = 0.0
    weighted = 0.0
    for i, (tick, us) in enumerate(entries):
        if tick >= end_tick:
            break
        nxt = entries[i + 1][0] if i + 1 < len(entries) else end_tick
        span_ticks = min(nxt, end_tick) - tick
        span_s = span_ticks * us / (track_set.ppq * 1e6)
        total_s += span_s
        weighted += span_s * (60e6 / us)
    return weighted / total_s if total_s > 0 else 60e6 / entries[0][1]


def onset_intervals(track: VoiceTrack) -> list[float]:
    """Gaps between consecutive drum strikes, in beats.

    Onsets within a 50 ms window merge into one cluster (anchored at the
    earliest onset); gaps are normalized by the beat length in force at the
    left cluster; gaps above one beat are discarded.
    """
    onsets = sorted({n.onset_ticks for n in track.notes})
    if len(onsets) < 2:
        return []
    times = [(t, ticks_to_seconds(t, track.tempo, track.ppq)) for t in onsets]
    clusters: list[tuple[int, float]] = []
    anchor_tick, anchor_s = times[0]
    for tick, sec in times[1:]:
        if sec - anchor_s > MERGE_WINDOW_S:
            clusters.append((anchor_tick, anchor_s))
            anchor_tick, anchor_s = tick, sec
    clusters.append((anchor_tick, anchor_s))

    intervals = []
    for (tick_a, sec_a), (_, sec_b) in zip(clusters, clusters[1:]):
        us = track.tempo.us_per_quarter_at(tick_a)
        _, den = track.meter.signature_at(tick_a)
        beat_s = (us / 1e6) * (4 / den)
        value = (sec_b - sec_a) / beat_s
        if value <= MAX_INTERVAL_BEATS + 1e-9:
            intervals.append(min(value, MAX_INTERVAL_BEATS))
    return intervals


def beat_spans(track: VoiceTrack, end_tick: int | None = None) -> Iterator[tuple[int, int]]:
    """Half-open beat windows covering [0, end) from the meter map."""
    end = track.end_ticks if end_tick is None else end_tick
    tick = 0
    while tick < end:
        _, den = track.meter.signature_at(tick)
        step = beat_ticks(den, track.ppq)
        yield (tick, tick + step)
        tick += step


def bar_signatures(track_set: TrackSet) -> Iterator[tuple[int, int]]:
    """Time signature of every bar covering the track."""
    end = track_duration_ticks(track_set)
    tick = 0
    while tick < end:
        num, den = track_set.meter.signature_at(tick)
        yield (num, den)
        tick += num * beat_ticks(den, track_set.ppq)


@dataclass(frozen=True)
class BeatFingerprint:
    """Occupancy of a beat's (class, bin) grid packed into one integer.

    Bit layout is class-major, bin-minor: bit = class_index * 12 + bin.
    Velocity is ignored and repeated hits in one cell collapse, so the code
    identifies the rhythm pattern, not the performance.
    """

    code: int

    def __post_init__(self) -> None:
        if not 0 <= self.code < (1 << FINGERPRINT_CELLS):
            raise ValueError("fingerprint code outside the 60-bit range")

    @classmethod
    def from_cells(cls, cells: Iterable[tuple[DrumClass, int]]) -> "BeatFingerprint":
        code = 0
        for drum_class, bin_index in cells:
            if not 0 <= bin_index < FINGERPRINT_BINS:
                raise ValueError(f"bin index {bin_index} outside 0..11")
            code |= 1 << (CLASS_ORDER.index(drum_class) * FINGERPRINT_BINS + bin_index)
        return cls(code)

    def cells(self) -> set[tuple[DrumClass, int]]:
        return {
            (CLASS_ORDER[bit // FINGERPRINT_BINS], bit % FINGERPRINT_BINS)
            for bit in range(FINGERPRINT_CELLS)
            if self.code >> bit & 1
        }

    def matrix(self) -> list[list[bool]]:
        return [
            [bool(self.code >> (c * FINGERPRINT_BINS + b) & 1)
             for b in range(FINGERPRINT_BINS)]
            for c in range(FINGERPRINT_CLASSES)
        ]


def beat_fingerprint(notes: Sequence, beat_span: tuple[int, int]) -> BeatFingerprint:
    """Fingerprint the drum notes inside one half-open beat window.

    Bin arithmetic stays in integer ticks, so placement is exact whenever
    the beat length divides into 12 bins evenly (true at the internal PPQ).
    """
    start, end = beat_span
    span = end - start
    if span <= 0:
        raise ValidationError("beat span must be non-empty")
    cells = []
    for note in notes:
        if not start <= note.onset_ticks < end:
            continue
        drum_class = map_class(note.pitch)
        if drum_class is None:
            continue
        bin_index = (note.onset_ticks - start) * FINGERPRINT_BINS // span
        cells.append((drum_class, bin_index))
    return BeatFingerprint.from_cells(cells)


def fingerprint_track(track: VoiceTrack) -> list[int]:
    """Fingerprint codes of every beat in a drum track, in order."""
    notes = track.notes
    codes = []
    idx = 0
    for start, end in beat_spans(track):
        in_beat = []
        while idx < len(notes) and notes[idx].onset_ticks < end:
            if notes[idx].onset_ticks >= start:
                in_beat.append(notes[idx])
            idx += 1
        codes.append(beat_fingerprint(in_beat, (start, end)).code)
    return codes


def fingerprint_dataset(track_sets: Iterable[TrackSet]) -> list[int]:
    """All beat fingerprints of a dataset's drum voices, concatenated."""
    codes: list[int] = []
    for ts in track_sets:
        drums = ts.voices.get(Voice.DRUMS)
        if drums is not None:
            codes.extend(fingerprint_track(drums))
    return codes


@dataclass(frozen=True)
class CoverageResult:
    beat_coverage: float
    unique_sequence_coverage: float
    source_unique: int
    target_unique: int
    target_beats: int

    def to_dict(self) -> dict:
        return {
            "beat_coverage": self.beat_coverage,
            "unique_sequence_coverage": self.unique_sequence_coverage,
            "source_unique": self.source_unique,
            "target_unique": self.target_unique,
            "target_beats": self.target_beats,
        }


def coverage(source_codes: Iterable[int], target_codes: Iterable[int]) -> CoverageResult:
    """How much of the target's beat material also occurs in the source.

    beat coverage counts target beats (with multiplicity) whose fingerprint
    the source contains; unique coverage compares the fingerprint sets.
    """
    source_set = set(source_codes)
    target_list = list(target_codes)
    if not target_list:
        raise ValidationError("target dataset has zero beats")
    target_set = set(target_list)
    covered_beats = sum(1 for code in target_list if code in source_set)
    covered_unique = len(source_set & target_set)
    return CoverageResult(
        beat_coverage=covered_beats / len(target_list),
        unique_sequence_coverage=covered_unique / len(target_set),
        source_unique=len(source_set),
        target_unique=len(target_set),
        target_beats=len(target_list),
    )


def track_report(track_set: TrackSet) -> DistributionReport:
    """Statistics of one track; merge() folds these into a dataset report."""
    drums = track_set.voices.get(Voice.DRUMS)
    if drums is None:
        raise ValidationError("track has no drum voice")
    tempo_hist, velocity_hist, interval_hist = _empty_histograms()
    tempo_hist = tempo_hist.add([weighted_mean_tempo(track_set)])
    velocity_hist = velocity_hist.add(float(n.velocity) for n in drums.notes)
    interval_hist = interval_hist.add(onset_intervals(drums))

    signatures: dict[tuple[int, int], int] = {}
    for signature in bar_signatures(track_set):
        signatures[signature] = signatures.get(signature, 0) + 1
    classes: dict[DrumClass, int] = {}
    for note in drums.notes:
        drum_class = map_class(note.pitch)
        if drum_class is not None:
            classes[drum_class] = classes.get(drum_class, 0) + 1
    beats = sum(1 for _ in beat_spans(drums))
    return DistributionReport(
        tempo_hist, velocity_hist, interval_hist, signatures, classes,
        track_count=1, beat_count=beats,
    )


def distribution_report(track_sets: Iterable[TrackSet]) -> DistributionReport:
    """Dataset-level report: the associative merge of per-track reports."""
    report = None
    for ts in track_sets:
        part = track_report(ts)
        report = part if report is None else report.merge(part)
    if report is None:
        raise ValidationError("empty dataset")
    return report


def off_grid_interval_mass(hist: Histogram, grid_division: int) -> float:
    """Fraction of onset-interval mass outside the grid-aligned bins.

    The 16th grid (division 4) admits interval values k/4 beats; with
    48 bins those values sit exactly on the lower edge of bins 12, 24, 36
    and inside the final bin (for 1.0).
    """
    if INTERVAL_BINS % grid_division != 0:
        raise ValidationError("grid does not align with interval binning")
    stride = INTERVAL_BINS // grid_division
    on_grid = {k * stride for k in range(1, grid_division)} | {INTERVAL_BINS - 1}
    total = sum(hist.counts)
    if total == 0:
        return 0.0
    off = sum(c for i, c in enumerate(hist.counts) if i not in on_grid)
    return off / total
