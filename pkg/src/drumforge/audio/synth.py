"""Stem synthesis: a pluggable backend interface plus the reference backend.

The reference backend is a sample-playback synth with procedurally
generated one-shots: each (preset, pitch) pair maps to a short
deterministic waveform, placed at the note's onset sample with gain
velocity/127 and summed. No envelopes, no assets, and exactly linear,
which makes rendering auditable: render(A+B) == render(A) + render(B) for
disjoint note sets. Realistic timbres come from the SoundFont backend
(drumforge.audio.sf2), a second implementation of the same interface.
"""

import zlib
from functools import lru_cache
from typing import Protocol

import numpy as np

from ..errors import ForgeError
from ..midi import VoiceTrack, ticks_to_seconds
from .buffers import AudioBuffer

DEFAULT_SAMPLE_RATE = 44_100


class RenderError(ForgeError):
    pass


class SynthBackend(Protocol):
    def render(self, track: VoiceTrack, preset_id: str, sample_rate: int,
               tail_s: float = 0.0) -> AudioBuffer: ...


def _pitch_hz(pitch: int) -> float:
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


class ReferenceBackend:
    """Velocity-linear one-shot playback with per-(preset, pitch) waveforms."""

    def __init__(self, shot_s: float = 0.25):
        self.shot_s = shot_s

    @lru_cache(maxsize=4096)
    def one_shot(self, preset_id: str, pitch: int, sample_rate: int) -> np.ndarray:
        """Deterministic decaying tone; percussion pitches carry a noise burst."""
        seed = zlib.crc32(f"{preset_id}/{pitch}".encode())
        rng = np.random.default_rng(seed)
        n = int(self.shot_s * sample_rate)
        t = np.arange(n) / sample_rate
        freq = min(_pitch_hz(pitch), sample_rate / 2 * 0.9)
        detune = 1.0 + rng.uniform(-0.01, 0.01)
        decay = rng.uniform(8.0, 30.0)
        tone = np.sin(2 * np.pi * freq * detune * t)
        noise_mix = rng.uniform(0.4, 0.8) if pitch < 60 else rng.uniform(0.0, 0.2)
        shot = (1 - noise_mix) * tone + noise_mix * rng.standard_normal(n)
        shot *= np.exp(-decay * t)
        peak = np.max(np.abs(shot))
        return 0.9 * shot / peak if peak > 0 else shot

    def render(self, track: VoiceTrack, preset_id: str,
               sample_rate: int = DEFAULT_SAMPLE_RATE,
               tail_s: float = 0.0) -> AudioBuffer:
        onsets = [
            int(round(ticks_to_seconds(n.onset_ticks, track.tempo, track.ppq)
                      * sample_rate))
            for n in track.notes
        ]
        last_end_s = ticks_to_seconds(track.end_ticks, track.tempo, track.ppq)
        shot_len = int(self.shot_s * sample_rate)
        n_frames = int(np.ceil(last_end_s * sample_rate)) + int(tail_s * sample_rate)
        if track.notes:
            n_frames = max(n_frames, max(onsets) + shot_len)
        out = np.zeros(n_frames)
        for note, start in zip(track.notes, onsets):
            shot = self.one_shot(preset_id, note.pitch, sample_rate)
            gain = note.velocity / 127.0
            out[start : start + len(shot)] += gain * shot[: len(out) - start]
        return AudioBuffer(out, sample_rate, 1)


def render_stem(
    track: VoiceTrack,
    preset_id: str,
    backend: SynthBackend,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    tail_s: float = 0.0,
) -> AudioBuffer:
    """Render one voice through a backend, wrapping failures with context."""
    try:
        return backend.render(track, preset_id, sample_rate, tail_s=tail_s)
    except ForgeError:
        raise
    except Exception as exc:
        raise RenderError(
            f"backend {type(backend).__name__} failed on voice "
            f"{track.voice.value!r} preset {preset_id!r}: {exc}"
        ) from exc
