"""Standard MIDI File parsing and serialization.

Supports SMF formats 0 and 1 with the event subset used by the composer:
note on/off, set-tempo, time-signature and end-of-track. Other channel and
meta events are skipped. Format 2 files are rejected (no single timeline).

Voices map to fixed channels so generated files round-trip exactly:
channel 10 (index 9) is percussion -> Drums; channels 1, 2, 3 (indices
0, 1, 2) carry Piano, Bass and Guitar. Notes on any other channel are
treated as Piano; loop ingestion overrides the voice from metadata anyway.
"""

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import ForgeError

#: Internal tick resolution. 480 divides the 16th-note grid (120 ticks) and
#: the 12-bin beat grid (40 ticks) exactly, so later quantization is integer.
PPQ = 480

DEFAULT_TEMPO_US = 500_000  # 120 bpm
DEFAULT_METER = (4, 4)

_VALID_DENOMS = (1, 2, 4, 8, 16, 32)
_MAX_VLQ = 0x0FFFFFFF


class Voice(Enum):
    DRUMS = "drums"
    PIANO = "piano"
    BASS = "bass"
    GUITAR = "guitar"


VOICE_ORDER = (Voice.DRUMS, Voice.PIANO, Voice.BASS, Voice.GUITAR)

VOICE_CHANNEL = {Voice.DRUMS: 9, Voice.PIANO: 0, Voice.BASS: 1, Voice.GUITAR: 2}
_CHANNEL_VOICE = {9: Voice.DRUMS, 0: Voice.PIANO, 1: Voice.BASS, 2: Voice.GUITAR}


class SmfParseError(ForgeError):
    """Malformed SMF input; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SmfWriteError(ForgeError):
    pass


@dataclass(frozen=True, order=True)
class NoteEvent:
    onset_ticks: int
    duration_ticks: int
    pitch: int
    velocity: int
    voice: Voice = field(compare=False)

    def __post_init__(self) -> None:
        if self.onset_ticks < 0 or self.duration_ticks < 0:
            raise ValueError(f"negative note timing: {self}")
        if not (0 <= self.pitch <= 127 and 0 <= self.velocity <= 127):
            raise ValueError(f"pitch/velocity out of MIDI range: {self}")

    @property
    def end_ticks(self) -> int:
        return self.onset_ticks + self.duration_ticks


@dataclass(frozen=True)
class TempoMap:
    """Tick-sorted (tick, microseconds per quarter) entries, first at tick 0."""

    entries: tuple[tuple[int, int], ...] = ((0, DEFAULT_TEMPO_US),)

    def __post_init__(self) -> None:
        for tick, us in self.entries:
            if us <= 0:
                raise ValueError(f"non-positive tempo at tick {tick}")
        ticks = [t for t, _ in self.entries]
        if ticks != sorted(ticks) or not self.entries or self.entries[0][0] != 0:
            raise ValueError("tempo entries must be sorted with the first at tick 0")

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, int]]) -> "TempoMap":
        """Sort, drop same-tick duplicates (last wins), default tick 0."""
        merged: dict[int, int] = {}
        for tick, us in entries:
            merged[int(tick)] = int(us)
        if 0 not in merged:
            merged[0] = DEFAULT_TEMPO_US
        items = sorted(merged.items())
        # Collapse consecutive entries with identical tempo.
        out: list[tuple[int, int]] = []
        for tick, us in items:
            if not out or out[-1][1] != us:
                out.append((tick, us))
        return cls(tuple(out))

    def us_per_quarter_at(self, tick: int) -> int:
        current = self.entries[0][1]
        for entry_tick, us in self.entries:
            if entry_tick > tick:
                break
            current = us
        return current


@dataclass(frozen=True)
class MeterMap:
    """Tick-sorted (tick, numerator, denominator) entries, first at tick 0."""

    entries: tuple[tuple[int, int, int], ...] = ((0, 4, 4),)

    def __post_init__(self) -> None:
        for tick, num, den in self.entries:
            if num < 1 or den not in _VALID_DENOMS:
                raise ValueError(f"invalid time signature {num}/{den} at tick {tick}")
        ticks = [t for t, _, _ in self.entries]
        if ticks != sorted(ticks) or not self.entries or self.entries[0][0] != 0:
            raise ValueError("meter entries must be sorted with the first at tick 0")

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, int, int]]) -> "MeterMap":
        merged: dict[int, tuple[int, int]] = {}
        for tick, num, den in entries:
            merged[int(tick)] = (int(num), int(den))
        if 0 not in merged:
            merged[0] = DEFAULT_METER
        items = sorted(merged.items())
        out: list[tuple[int, int, int]] = []
        for tick, (num, den) in items:
            if not out or (out[-1][1], out[-1][2]) != (num, den):
                out.append((tick, num, den))
        return cls(tuple(out))

    def signature_at(self, tick: int) -> tuple[int, int]:
        current = (self.entries[0][1], self.entries[0][2])
        for entry_tick, num, den in self.entries:
            if entry_tick > tick:
                break
            current = (num, den)
        return current


def bar_ticks(num: int, den: int, ppq: int = PPQ) -> int:
    """Length of one bar in ticks; den divides 4*ppq for all valid meters."""
    return num * 4 * ppq // den


def beat_ticks(den: int, ppq: int = PPQ) -> int:
    """Length of one beat (the meter's denominator note) in ticks."""
    return 4 * ppq // den


@dataclass(frozen=True)
class VoiceTrack:
    """One instrument's notes plus the shared tempo/meter context."""

    voice: Voice
    notes: tuple[NoteEvent, ...]
    tempo: TempoMap
    meter: MeterMap
    ppq: int

    def __post_init__(self) -> None:
        if self.ppq <= 0:
            raise ValueError("ppq must be positive")
        for note in self.notes:
            if note.voice is not self.voice:
                raise ValueError(f"note voice {note.voice} != track voice {self.voice}")
        ordered = tuple(sorted(self.notes))
        if ordered != self.notes:
            object.__setattr__(self, "notes", ordered)

    @property
    def end_ticks(self) -> int:
        return max((n.end_ticks for n in self.notes), default=0)


@dataclass(frozen=True)
class TrackSet:
    """A multi-voice piece: per-voice tracks sharing one tempo/meter timeline."""

    ppq: int
    tempo: TempoMap
    meter: MeterMap
    voices: Mapping[Voice, VoiceTrack]

    @classmethod
    def build(
        cls,
        notes_by_voice: Mapping[Voice, Iterable[NoteEvent]],
        tempo: TempoMap | None = None,
        meter: MeterMap | None = None,
        ppq: int = PPQ,
    ) -> "TrackSet":
        tempo = tempo or TempoMap()
        meter = meter or MeterMap()
        voices = {
            voice: VoiceTrack(voice, tuple(notes), tempo, meter, ppq)
            for voice, notes in notes_by_voice.items()
        }
        return cls(ppq, tempo, meter, voices)

    @property
    def end_ticks(self) -> int:
        return max((t.end_ticks for t in self.voices.values()), default=0)


def ticks_to_seconds(tick: int, tempo: TempoMap, ppq: int) -> float:
    """Piecewise-linear time integration over the tempo segments."""
    if tick < 0:
        raise ValueError("tick must be >= 0")
    seconds = 0.0
    entries = tempo.entries
    for i, (start, us) in enumerate(entries):
        if start >= tick:
            break
        end = entries[i + 1][0] if i + 1 < len(entries) else tick
        span = min(end, tick) - start
        seconds += span * us / (ppq * 1_000_000)
    return seconds


def normalize_overlaps(notes: Iterable[NoteEvent]) -> tuple[NoteEvent, ...]:
    """Resolve same-pitch collisions within one voice.

    An overlapping note is clipped at the next same-pitch onset; exact
    same-onset duplicates keep the louder (then longer) note. Required
    before serialization: one MIDI channel cannot hold two simultaneous
    notes of the same pitch.
    """
    by_pitch: dict[int, list[NoteEvent]] = {}
    for note in sorted(notes):
        by_pitch.setdefault(note.pitch, []).append(note)
    out: list[NoteEvent] = []
    for pitch_notes in by_pitch.values():
        dedup: list[NoteEvent] = []
        for note in pitch_notes:
            if dedup and dedup[-1].onset_ticks == note.onset_ticks:
                prev = dedup[-1]
                keep = max(prev, note, key=lambda n: (n.velocity, n.duration_ticks))
                dedup[-1] = keep
            else:
                dedup.append(note)
        for i, note in enumerate(dedup):
            nxt = dedup[i + 1] if i + 1 < len(dedup) else None
            if nxt is not None and note.end_ticks > nxt.onset_ticks:
                note = NoteEvent(
                    note.onset_ticks,
                    nxt.onset_ticks - note.onset_ticks,
                    note.pitch,
                    note.velocity,
                    note.voice,
                )
            out.append(note)
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# Parsing

class _Reader:
    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = 0
        self.base = base  # offset of this buffer within the whole file

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise SmfParseError(f"truncated {what}", self.offset)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def byte(self, what: str) -> int:
        return self.take(1, what)[0]

    def data_byte(self, what: str) -> int:
        value = self.byte(what)
        if value & 0x80:
            raise SmfParseError(f"expected data byte in {what}, got 0x{value:02X}", self.offset - 1)
        return value

    def vlq(self, what: str) -> int:
        value = 0
        for i in range(4):
            b = self.byte(what)
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise SmfParseError(f"variable-length quantity over 4 bytes in {what}", self.offset)


def parse_smf(data: bytes) -> TrackSet:
    """Parse SMF format 0/1 bytes into a TrackSet.

    Raises SmfParseError (with byte offset) on malformed input; never
    returns partial data.
    """
    reader = _Reader(data)
    magic = reader.take(4, "header chunk")
    if magic != b"MThd":
        raise SmfParseError("missing MThd magic", 0)
    header_len = struct.unpack(">I", reader.take(4, "header chunk"))[0]
    if header_len < 6:
        raise SmfParseError(f"header length {header_len} < 6", 4)
    fmt, ntracks, division = struct.unpack(">HHH", reader.take(6, "header chunk"))
    reader.take(header_len - 6, "header chunk")  # spec allows a longer header
    if fmt == 2:
        raise SmfParseError("SMF format 2 is unsupported", 8)
    if fmt > 2:
        raise SmfParseError(f"unknown SMF format {fmt}", 8)
    if division & 0x8000:
        raise SmfParseError("SMPTE time division is unsupported", 12)
    if division == 0:
        raise SmfParseError("zero ticks-per-quarter division", 12)

    tempo_entries: list[tuple[int, int]] = []
    meter_entries: list[tuple[int, int, int]] = []
    notes_by_voice: dict[Voice, list[NoteEvent]] = {}

    tracks_seen = 0
    while tracks_seen < ntracks:
        chunk_start = reader.offset
        try:
            chunk_type = reader.take(4, "track chunk header")
            chunk_len = struct.unpack(">I", reader.take(4, "track chunk header"))[0]
            body = reader.take(chunk_len, "track chunk")
        except SmfParseError:
            raise SmfParseError(
                f"declared {ntracks} tracks but data ends after {tracks_seen}", chunk_start
            )
        if chunk_type != b"MTrk":
            continue  # alien chunks are skipped per the SMF spec
        tracks_seen += 1
        _parse_track(_Reader(body, chunk_start + 8), tempo_entries, meter_entries, notes_by_voice)

    tempo = TempoMap.from_entries(tempo_entries)
    meter = MeterMap.from_entries(meter_entries)
    voices = {
        voice: VoiceTrack(voice, normalize_overlaps(notes), tempo, meter, division)
        for voice, notes in notes_by_voice.items()
    }
    return TrackSet(division, tempo, meter, voices)


def _parse_track(r, tempo_entries, meter_entries, notes_by_voice) -> None:
    tick = 0
    running_status: int | None = None
    open_notes: dict[tuple[int, int], tuple[int, int]] = {}  # (ch, pitch) -> (onset, vel)

    def close(channel: int, pitch: int, end_tick: int) -> None:
        start = open_notes.pop((channel, pitch), None)
        if start is None:
            return  # unmatched note-off: ignore
        onset, velocity = start
        voice = _CHANNEL_VOICE.get(channel, Voice.PIANO)
        notes_by_voice.setdefault(voice, []).append(
            NoteEvent(onset, end_tick - onset, pitch, velocity, voice)
        )

    while not r.eof():
        tick += r.vlq("delta time")
        status = r.byte("event status")
        if status < 0x80:
            if running_status is None:
                raise SmfParseError("data byte with no running status", r.offset - 1)
            status = running_status
            r.pos -= 1
        elif status < 0xF0:
            running_status = status

        if status == 0xFF:
            running_status = None  # meta events cancel running status
            meta_type = r.byte("meta event")
            length = r.vlq("meta event length")
            payload = r.take(length, "meta event payload")
            if meta_type == 0x51:
                if length != 3:
                    raise SmfParseError(f"set-tempo length {length} != 3", r.offset - length)
                us = int.from_bytes(payload, "big")
                if us == 0:
                    raise SmfParseError("zero tempo", r.offset - length)
                tempo_entries.append((tick, us))
            elif meta_type == 0x58:
                if length != 4:
                    raise SmfParseError(f"time-signature length {length} != 4", r.offset - length)
                num, dd = payload[0], payload[1]
                if num < 1 or dd > 5:
                    raise SmfParseError(f"unsupported time signature {num}/2^{dd}", r.offset - length)
                meter_entries.append((tick, num, 1 << dd))
            elif meta_type == 0x2F:
                break
        elif status in (0xF0, 0xF7):
            length = r.vlq("sysex length")
            r.take(length, "sysex payload")
            running_status = None
        elif status >= 0xF1:
            raise SmfParseError(f"unsupported system message 0x{status:02X}", r.offset - 1)
        else:
            channel = status & 0x0F
            kind = status >> 4
            if kind in (0x8, 0x9, 0xA, 0xB, 0xE):
                a = r.data_byte("channel event")
                b = r.data_byte("channel event")
                if kind == 0x9 and b > 0:
                    if (channel, a) in open_notes:
                        close(channel, a, tick)  # overlap: close earlier at later onset
                    open_notes[(channel, a)] = (tick, b)
                elif kind == 0x8 or (kind == 0x9 and b == 0):
                    close(channel, a, tick)
            elif kind in (0xC, 0xD):
                r.data_byte("channel event")

    for channel, pitch in sorted(open_notes):
        close(channel, pitch, tick)


# ---------------------------------------------------------------------------
# Serialization

def _write_vlq(value: int) -> bytes:
    if value < 0 or value > _MAX_VLQ:
        raise SmfWriteError(f"tick delta {value} outside variable-length range")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _chunk(body: bytes) -> bytes:
    return b"MTrk" + struct.pack(">I", len(body)) + body


def _events_to_bytes(events: list[tuple[int, int, bytes]]) -> bytes:
    """events: (tick, priority, payload) -> delta-encoded track body + EOT."""
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    body = bytearray()
    cursor = 0
    for tick, _, payload in events:
        body += _write_vlq(tick - cursor)
        body += payload
        cursor = tick
    body += _write_vlq(0) + b"\xff\x2f\x00"
    return bytes(body)


def write_smf(track_set: TrackSet) -> bytes:
    """Serialize a TrackSet as SMF format 1.

    Track 0 carries tempo and meter; each voice gets one track on its fixed
    channel. parse_smf(write_smf(x)) == x for normalized track sets.
    """
    conductor: list[tuple[int, int, bytes]] = []
    for tick, us in track_set.tempo.entries:
        conductor.append((tick, 0, b"\xff\x51\x03" + us.to_bytes(3, "big")))
    for tick, num, den in track_set.meter.entries:
        dd = den.bit_length() - 1
        if num > 255:
            raise SmfWriteError(f"time-signature numerator {num} > 255")
        conductor.append((tick, 1, bytes((0xFF, 0x58, 0x04, num, dd, 24, 8))))

    chunks = [_chunk(_events_to_bytes(conductor))]
    for voice in VOICE_ORDER:
        if voice not in track_set.voices:
            continue
        channel = VOICE_CHANNEL[voice]
        events: list[tuple[int, int, bytes]] = []
        for note in track_set.voices[voice].notes:
            on = bytes((0x90 | channel, note.pitch, max(note.velocity, 1)))
            off = bytes((0x80 | channel, note.pitch, 0))
            # offs sort before ons at a shared tick, except a zero-length
            # note's own off, which must follow its on.
            off_priority = 2 if note.duration_ticks == 0 else 0
            events.append((note.onset_ticks, 1, on))
            events.append((note.end_ticks, off_priority, off))
        chunks.append(_chunk(_events_to_bytes(events)))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), track_set.ppq)
    return header + b"".join(chunks)


def resample(track_set: TrackSet, new_ppq: int = PPQ) -> TrackSet:
    """Rescale all tick values to a new resolution (round half up)."""
    if new_ppq <= 0:
        raise ValueError("new_ppq must be positive")
    old = track_set.ppq
    if old == new_ppq:
        return track_set

    def scale(tick: int) -> int:
        return (tick * new_ppq + old // 2) // old

    tempo = TempoMap.from_entries((scale(t), us) for t, us in track_set.tempo.entries)
    meter = MeterMap.from_entries((scale(t), n, d) for t, n, d in track_set.meter.entries)
    voices = {}
    for voice, track in track_set.voices.items():
        notes = [
            NoteEvent(scale(n.onset_ticks), scale(n.end_ticks) - scale(n.onset_ticks),
                      n.pitch, n.velocity, n.voice)
            for n in track.notes
        ]
        voices[voice] = VoiceTrack(voice, normalize_overlaps(notes), tempo, meter, new_ppq)
    return TrackSet(new_ppq, tempo, meter, voices)
