"""Audio rendering: synthesis backends, loudness measurement, mixing, WAV I/O."""

from .buffers import AudioBuffer
from .loudness import BELOW_GATE, measure_loudness
from .mix import normalize_and_mix
from .synth import ReferenceBackend, SynthBackend, render_stem
from .wav import read_wav, write_wav

__all__ = [
    "AudioBuffer",
    "BELOW_GATE",
    "measure_loudness",
    "normalize_and_mix",
    "ReferenceBackend",
    "SynthBackend",
    "render_stem",
    "read_wav",
    "write_wav",
]
