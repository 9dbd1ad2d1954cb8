"""Audio buffer type shared by the rendering pipeline."""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(eq=False)
class AudioBuffer:
    """Float samples in [-1, 1]; mono arrays are (n,), stereo (n, 2)."""

    samples: np.ndarray
    sample_rate: int = 44_100
    channels: int = 1

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if self.channels not in (1, 2):
            raise ValidationError("channels must be 1 or 2")
        expected_ndim = 1 if self.channels == 1 else 2
        if self.samples.ndim != expected_ndim:
            raise ValidationError(
                f"{self.channels}-channel buffer requires a {expected_ndim}-D array"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("buffer contains non-finite samples")

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate

    def peak(self) -> float:
        if self.n_frames == 0:
            return 0.0
        return float(np.max(np.abs(self.samples)))

    def scaled(self, gain: float) -> "AudioBuffer":
        return AudioBuffer(self.samples * gain, self.sample_rate, self.channels)

    def as_stereo(self) -> "AudioBuffer":
        if self.channels == 2:
            return self
        return AudioBuffer(np.column_stack([self.samples, self.samples]),
                           self.sample_rate, 2)

    @classmethod
    def silence(cls, n_frames: int, sample_rate: int = 44_100) -> "AudioBuffer":
        return cls(np.zeros(n_frames), sample_rate, 1)
