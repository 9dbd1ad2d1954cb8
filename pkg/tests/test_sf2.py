"""SoundFont backend tests against a handcrafted minimal .sf2 file."""

import struct

import numpy as np
import pytest

from drumforge.audio.sf2 import Sf2Error, SoundFont, SoundFontBackend
from drumforge.midi import NoteEvent, Voice

from .helpers import make_track_set


def chunk(tag: bytes, body: bytes) -> bytes:
    padded = body + (b"\0" if len(body) % 2 else b"")
    return tag + struct.pack("<I", len(body)) + padded


def list_chunk(list_type: bytes, body: bytes) -> bytes:
    return chunk(b"LIST", list_type + body)


def build_sf2(samples: np.ndarray, root_key: int = 60, bank: int = 128,
              program: int = 0, looped: bool = False,
              sample_rate: int = 44_100) -> bytes:
    pcm = (np.clip(samples, -1, 1) * 32767).astype("<i2").tobytes()

    def phdr(name, prog, bk, bag):
        return name.ljust(20, "\0").encode() + struct.pack("<HHHIII", prog, bk, bag, 0, 0, 0)

    n = len(samples)
    shdr = (
        b"snare".ljust(20, b"\0")
        + struct.pack("<IIIII", 0, n, n // 4, 3 * n // 4, sample_rate)
        + struct.pack("<BbHH", root_key, 0, 0, 1)
    )
    shdr += b"EOS".ljust(20, b"\0") + struct.pack("<IIIII", 0, 0, 0, 0, 0) \
        + struct.pack("<BbHH", 0, 0, 0, 0)

    igen = (
        struct.pack("<Hh", 43, 0 | (127 << 8))        # keyRange 0..127
        + struct.pack("<Hh", 54, 1 if looped else 0)  # sampleModes
        + struct.pack("<Hh", 58, root_key)            # overridingRootKey
        + struct.pack("<Hh", 53, 0)                   # sampleID (must be last)
        + struct.pack("<Hh", 0, 0)                    # terminal
    )
    ibag = struct.pack("<HH", 0, 0) + struct.pack("<HH", 4, 0)
    inst = (
        b"kitinst".ljust(20, b"\0") + struct.pack("<H", 0)
        + b"EOI".ljust(20, b"\0") + struct.pack("<H", 1)
    )
    pgen = struct.pack("<Hh", 41, 0) + struct.pack("<Hh", 0, 0)
    pbag = struct.pack("<HH", 0, 0) + struct.pack("<HH", 1, 0)
    phdr_body = phdr("kit", program, bank, 0) + phdr("EOP", 0, 0, 1)
    pmod = imod = b"\0" * 10

    pdta = (
        chunk(b"phdr", phdr_body) + chunk(b"pbag", pbag) + chunk(b"pmod", pmod)
        + chunk(b"pgen", pgen) + chunk(b"inst", inst) + chunk(b"ibag", ibag)
        + chunk(b"imod", imod) + chunk(b"igen", igen) + chunk(b"shdr", shdr)
    )
    info = chunk(b"ifil", struct.pack("<HH", 2, 1))
    body = (
        b"sfbk"
        + list_chunk(b"INFO", info)
        + list_chunk(b"sdta", chunk(b"smpl", pcm))
        + list_chunk(b"pdta", pdta)
    )
    return chunk(b"RIFF", body)


@pytest.fixture
def ramp_sf2():
    wave = np.linspace(-0.5, 0.5, 2000)
    return build_sf2(wave), wave


def test_parse_exposes_preset(ramp_sf2):
    data, _ = ramp_sf2
    font = SoundFont(data)
    assert font.preset_keys() == [(128, 0)]


def test_root_key_note_plays_sample_verbatim(ramp_sf2):
    data, wave = ramp_sf2
    backend = SoundFontBackend(SoundFont(data), preset_map={"kit": (128, 0)})
    track = make_track_set(
        {Voice.DRUMS: [NoteEvent(0, 480, 60, 127, Voice.DRUMS)]}
    ).voices[Voice.DRUMS]
    out = backend.render(track, "kit", 44_100)
    m = len(wave) - 1  # interpolation drops the final fractional position
    np.testing.assert_allclose(out.samples[:m], wave[:m], atol=1e-4)


def test_velocity_scales_gain(ramp_sf2):
    data, wave = ramp_sf2
    backend = SoundFontBackend(SoundFont(data), preset_map={"kit": (128, 0)})

    def render_velocity(vel):
        track = make_track_set(
            {Voice.DRUMS: [NoteEvent(0, 480, 60, vel, Voice.DRUMS)]}
        ).voices[Voice.DRUMS]
        return backend.render(track, "kit", 44_100)

    full = render_velocity(127)
    half = render_velocity(64)
    m = len(wave) - 1
    np.testing.assert_allclose(half.samples[:m], full.samples[:m] * (64 / 127),
                               atol=1e-9)


def test_octave_up_doubles_playback_rate(ramp_sf2):
    data, wave = ramp_sf2
    backend = SoundFontBackend(SoundFont(data), preset_map={"kit": (128, 0)})
    track = make_track_set(
        {Voice.DRUMS: [NoteEvent(0, 480, 72, 127, Voice.DRUMS)]}
    ).voices[Voice.DRUMS]
    out = backend.render(track, "kit", 44_100)
    audible = np.flatnonzero(np.abs(out.samples) > 1e-9)
    assert len(audible) == pytest.approx(len(wave) / 2, abs=3)
    # every second source sample, linearly interpolated
    np.testing.assert_allclose(out.samples[:100], wave[:200:2], atol=1e-4)


def test_looped_sample_sustains_for_note_duration():
    wave = np.sin(np.linspace(0, 20 * np.pi, 2000))
    data = build_sf2(wave, looped=True)
    backend = SoundFontBackend(SoundFont(data), preset_map={"kit": (128, 0)})
    track = make_track_set(
        {Voice.DRUMS: [NoteEvent(0, 4 * 480, 60, 127, Voice.DRUMS)]}
    ).voices[Voice.DRUMS]
    out = backend.render(track, "kit", 44_100)  # 2 s note at 120 bpm
    active = np.flatnonzero(np.abs(out.samples) > 1e-6)
    assert active[-1] > 1.9 * 44_100  # rings far past the 2000-sample one-shot


def test_unknown_preset_rejected(ramp_sf2):
    data, _ = ramp_sf2
    backend = SoundFontBackend(SoundFont(data))
    track = make_track_set({Voice.DRUMS: []}).voices[Voice.DRUMS]
    with pytest.raises(Sf2Error, match="not found"):
        backend.render(track, "nope", 44_100)


def test_missing_program_rejected(ramp_sf2):
    data, _ = ramp_sf2
    backend = SoundFontBackend(SoundFont(data), preset_map={"kit": (0, 5)})
    track = make_track_set({Voice.DRUMS: []}).voices[Voice.DRUMS]
    with pytest.raises(Sf2Error, match="not in file"):
        backend.render(track, "kit", 44_100)


def test_not_a_soundfont_rejected():
    with pytest.raises(Sf2Error, match="sfbk"):
        SoundFont(b"RIFF\x04\x00\x00\x00WAVE")


def test_truncated_file_rejected(ramp_sf2):
    data, _ = ramp_sf2
    with pytest.raises(Sf2Error):
        SoundFont(data[: len(data) // 2])
