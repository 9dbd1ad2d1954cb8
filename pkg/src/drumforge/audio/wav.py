"""16-bit PCM WAV reading and writing (RIFF, via the stdlib wave module)."""

import wave
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .buffers import AudioBuffer


def write_wav(path: str | Path, buffer: AudioBuffer) -> None:
    """Write a buffer as PCM16; samples are clipped to [-1, 1] first."""
    samples = np.clip(buffer.samples, -1.0, 1.0)
    pcm = (samples * 32767.0).round().astype("<i2")
    if buffer.channels == 2 and pcm.ndim == 2:
        pcm = pcm.reshape(-1)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(buffer.channels)
        handle.setsampwidth(2)
        handle.setframerate(buffer.sample_rate)
        handle.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> AudioBuffer:
    with wave.open(str(path), "rb") as handle:
        channels = handle.getnchannels()
        if handle.getsampwidth() != 2:
            raise ValidationError(f"{path}: only 16-bit PCM supported")
        if channels not in (1, 2):
            raise ValidationError(f"{path}: only mono/stereo supported")
        rate = handle.getframerate()
        frames = handle.readframes(handle.getnframes())
    pcm = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32767.0
    if channels == 2:
        pcm = pcm.reshape(-1, 2)
    return AudioBuffer(pcm, rate, channels)
