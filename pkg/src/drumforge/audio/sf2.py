"""SoundFont 2 backend: sample playback from .sf2 preset banks.

A deliberately small subset of the format: presets resolve through their
instrument zones to 16-bit samples, honoring key ranges, root key,
coarse/fine tuning and the sample-loop flag. Modulators and volume
envelopes are ignored; notes play velocity-linear, one-shot samples run to
their end, looped samples sustain until the note ends. Good enough for
percussion banks and simple melodic presets; not a general synthesizer.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ForgeError
from ..midi import VoiceTrack, ticks_to_seconds
from .buffers import AudioBuffer

_GEN_INSTRUMENT = 41
_GEN_KEY_RANGE = 43
_GEN_SAMPLE_ID = 53
_GEN_SAMPLE_MODES = 54
_GEN_ROOT_KEY = 58
_GEN_COARSE_TUNE = 51
_GEN_FINE_TUNE = 52


class Sf2Error(ForgeError):
    pass


@dataclass(frozen=True)
class _SampleHeader:
    name: str
    start: int
    end: int
    loop_start: int
    loop_end: int
    sample_rate: int
    root_key: int
    correction_cents: int


@dataclass(frozen=True)
class _Zone:
    key_lo: int
    key_hi: int
    sample_index: int
    root_key: int | None
    coarse_tune: int
    fine_tune: int
    looped: bool


def _parse_riff_chunks(data: bytes, start: int, end: int):
    pos = start
    while pos + 8 <= end:
        tag = data[pos : pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body_start = pos + 8
        if body_start + size > end:
            raise Sf2Error(f"truncated chunk {tag!r} at offset {pos}")
        yield tag, body_start, body_start + size
        pos = body_start + size + (size & 1)


def _records(data: bytes, start: int, end: int, size: int):
    count = (end - start) // size
    for i in range(count):
        yield data[start + i * size : start + (i + 1) * size]


class SoundFont:
    """Parsed .sf2 file exposing presets by (bank, program) and by name."""

    def __init__(self, data: bytes):
        self._load(data)

    @classmethod
    def from_file(cls, path: str | Path) -> "SoundFont":
        return cls(Path(path).read_bytes())

    def _load(self, data: bytes) -> None:
        if data[:4] != b"RIFF" or data[8:12] != b"sfbk":
            raise Sf2Error("not a RIFF sfbk file")
        pdta: dict[bytes, tuple[int, int]] = {}
        smpl_span = None
        for tag, start, end in _parse_riff_chunks(data, 12, len(data)):
            if tag != b"LIST":
                continue
            list_type = data[start : start + 4]
            for sub, sub_start, sub_end in _parse_riff_chunks(data, start + 4, end):
                if list_type == b"sdta" and sub == b"smpl":
                    smpl_span = (sub_start, sub_end)
                elif list_type == b"pdta":
                    pdta[sub] = (sub_start, sub_end)
        if smpl_span is None:
            raise Sf2Error("missing sdta/smpl chunk")
        for required in (b"phdr", b"pbag", b"pgen", b"inst", b"ibag", b"igen", b"shdr"):
            if required not in pdta:
                raise Sf2Error(f"missing pdta/{required.decode()} chunk")

        self._samples = np.frombuffer(
            data[smpl_span[0] : smpl_span[1]], dtype="<i2"
        ).astype(np.float64) / 32768.0

        self._headers = []
        for rec in _records(data, *pdta[b"shdr"], 46):
            name = rec[:20].split(b"\0")[0].decode("ascii", "replace")
            start, end, loop_start, loop_end, rate = struct.unpack_from("<IIIII", rec, 20)
            root_key = rec[40]
            correction = struct.unpack_from("<b", rec, 41)[0]
            self._headers.append(
                _SampleHeader(name, start, end, loop_start, loop_end, rate,
                              root_key, correction)
            )
        if self._headers:
            self._headers.pop()  # terminal EOS record

        inst_zones = self._load_instruments(data, pdta)
        self._presets = self._load_presets(data, pdta, inst_zones)

    def _load_instruments(self, data, pdta):
        inst_records = list(_records(data, *pdta[b"inst"], 22))
        ibag = [struct.unpack("<HH", rec) for rec in _records(data, *pdta[b"ibag"], 4)]
        igen = [struct.unpack("<Hh", rec) for rec in _records(data, *pdta[b"igen"], 4)]

        instruments: list[list[_Zone]] = []
        for i in range(len(inst_records) - 1):  # last record is EOI
            bag_start = struct.unpack_from("<H", inst_records[i], 20)[0]
            bag_end = struct.unpack_from("<H", inst_records[i + 1], 20)[0]
            zones: list[_Zone] = []
            for bag in range(bag_start, bag_end):
                gen_start = ibag[bag][0]
                gen_end = ibag[bag + 1][0] if bag + 1 < len(ibag) else len(igen)
                key_lo, key_hi = 0, 127
                sample_index = root_key = None
                coarse = fine = 0
                looped = False
                for oper, amount in igen[gen_start:gen_end]:
                    if oper == _GEN_KEY_RANGE:
                        unsigned = amount & 0xFFFF
                        key_lo, key_hi = unsigned & 0xFF, unsigned >> 8
                    elif oper == _GEN_SAMPLE_ID:
                        sample_index = amount & 0xFFFF
                    elif oper == _GEN_ROOT_KEY:
                        root_key = amount
                    elif oper == _GEN_COARSE_TUNE:
                        coarse = amount
                    elif oper == _GEN_FINE_TUNE:
                        fine = amount
                    elif oper == _GEN_SAMPLE_MODES:
                        looped = bool(amount & 1)
                if sample_index is not None:
                    zones.append(_Zone(key_lo, key_hi, sample_index, root_key,
                                       coarse, fine, looped))
            instruments.append(zones)
        return instruments

    def _load_presets(self, data, pdta, inst_zones):
        phdr_records = list(_records(data, *pdta[b"phdr"], 38))
        pbag = [struct.unpack("<HH", rec) for rec in _records(data, *pdta[b"pbag"], 4)]
        pgen = [struct.unpack("<Hh", rec) for rec in _records(data, *pdta[b"pgen"], 4)]

        presets: dict[tuple[int, int], list[_Zone]] = {}
        names: dict[str, tuple[int, int]] = {}
        for i in range(len(phdr_records) - 1):  # last record is EOP
            rec = phdr_records[i]
            name = rec[:20].split(b"\0")[0].decode("ascii", "replace")
            program, bank, bag_start = struct.unpack_from("<HHH", rec, 20)
            bag_end = struct.unpack_from("<H", phdr_records[i + 1], 24)[0]
            zones: list[_Zone] = []
            for bag in range(bag_start, bag_end):
                gen_start = pbag[bag][0]
                gen_end = pbag[bag + 1][0] if bag + 1 < len(pbag) else len(pgen)
                for oper, amount in pgen[gen_start:gen_end]:
                    if oper == _GEN_INSTRUMENT:
                        idx = amount & 0xFFFF
                        if idx < len(inst_zones):
                            zones.extend(inst_zones[idx])
            presets[(bank, program)] = zones
            names[name] = (bank, program)
        self._names = names
        return presets

    def preset_keys(self) -> list[tuple[int, int]]:
        return sorted(self._presets)

    def lookup(self, preset_id: str, bank: int | None, program: int | None):
        if bank is not None and program is not None:
            key = (bank, program)
        elif preset_id in self._names:
            key = self._names[preset_id]
        else:
            raise Sf2Error(f"preset {preset_id!r} not found (no bank/program given)")
        zones = self._presets.get(key)
        if zones is None:
            raise Sf2Error(f"preset bank {key[0]} program {key[1]} not in file")
        return zones

    def note_samples(self, zones, pitch: int, out_rate: int,
                     max_s: float) -> np.ndarray | None:
        """Resampled waveform for a pitch, or None if no zone covers it."""
        zone = next((z for z in zones if z.key_lo <= pitch <= z.key_hi), None)
        if zone is None or zone.sample_index >= len(self._headers):
            return None
        header = self._headers[zone.sample_index]
        segment = self._samples[header.start : header.end]
        if len(segment) == 0:
            return None
        root = zone.root_key if zone.root_key is not None else header.root_key
        if root > 127:
            root = 60
        semitones = (pitch - root) + zone.coarse_tune \
            + (zone.fine_tune + header.correction_cents) / 100.0
        rate_ratio = (header.sample_rate / out_rate) * 2.0 ** (semitones / 12.0)

        if zone.looped and header.loop_end > header.loop_start:
            n_out = int(max_s * out_rate)
        else:
            n_out = int(len(segment) / rate_ratio)
        if n_out <= 0:
            return None
        positions = np.arange(n_out) * rate_ratio
        if zone.looped and header.loop_end > header.loop_start:
            loop_start = header.loop_start - header.start
            loop_end = header.loop_end - header.start
            span = loop_end - loop_start
            wrapped = np.where(
                positions < loop_end, positions,
                loop_start + np.mod(positions - loop_start, span),
            )
            positions = wrapped
        else:
            positions = positions[positions < len(segment) - 1]
        return np.interp(positions, np.arange(len(segment)), segment)


class SoundFontBackend:
    """SynthBackend implementation over one or more .sf2 files."""

    def __init__(self, soundfont: SoundFont,
                 preset_map: dict[str, tuple[int, int]] | None = None):
        self.soundfont = soundfont
        self.preset_map = preset_map or {}

    @classmethod
    def from_file(cls, path: str | Path,
                  preset_map: dict[str, tuple[int, int]] | None = None):
        return cls(SoundFont.from_file(path), preset_map)

    def render(self, track: VoiceTrack, preset_id: str,
               sample_rate: int = 44_100, tail_s: float = 0.0) -> AudioBuffer:
        bank = program = None
        if preset_id in self.preset_map:
            bank, program = self.preset_map[preset_id]
        zones = self.soundfont.lookup(preset_id, bank, program)

        events = []
        n_frames = 0
        for note in track.notes:
            onset_s = ticks_to_seconds(note.onset_ticks, track.tempo, track.ppq)
            end_s = ticks_to_seconds(note.end_ticks, track.tempo, track.ppq)
            hold_s = max(end_s - onset_s, 0.05)
            wave = self.soundfont.note_samples(zones, note.pitch, sample_rate, hold_s)
            if wave is None:
                continue
            start = int(round(onset_s * sample_rate))
            events.append((start, note.velocity / 127.0, wave))
            n_frames = max(n_frames, start + len(wave))
        last_end = ticks_to_seconds(track.end_ticks, track.tempo, track.ppq)
        n_frames = max(n_frames, int(np.ceil(last_end * sample_rate)))
        n_frames += int(tail_s * sample_rate)
        out = np.zeros(n_frames)
        for start, gain, wave in events:
            out[start : start + len(wave)] += gain * wave[: len(out) - start]
        return AudioBuffer(out, sample_rate, 1)
