"""Loudness normalization and mixdown."""

import numpy as np

from ..errors import ValidationError
from .buffers import AudioBuffer
from .loudness import BELOW_GATE, measure_loudness

R128_TARGET_LUFS = -23.0
DEFAULT_PEAK_CEILING_DB = -1.0


def stem_gain(stem: AudioBuffer, target_lufs: float) -> float | None:
    """Linear gain bringing a stem to the target loudness; None if silent."""
    measured = measure_loudness(stem)
    if measured is BELOW_GATE:
        return None
    return 10.0 ** ((target_lufs - measured) / 20.0)


def normalize_and_mix(
    stems: list[AudioBuffer],
    target_lufs: float = R128_TARGET_LUFS,
    peak_ceiling_db: float = DEFAULT_PEAK_CEILING_DB,
) -> AudioBuffer:
    """Gain every stem to the target loudness and sum them.

    If the sum peaks above the ceiling the whole mix is attenuated, never
    clipped. Silent (below-gate) stems pass through at unity gain; all
    stems silent is an error.
    """
    if not stems:
        raise ValidationError("no stems to mix")
    rates = {s.sample_rate for s in stems}
    if len(rates) > 1:
        raise ValidationError(f"stems disagree on sample rate: {sorted(rates)}")
    if any(s.channels != 1 for s in stems):
        raise ValidationError("normalize_and_mix expects mono stems")

    gains = [stem_gain(stem, target_lufs) for stem in stems]
    if all(g is None for g in gains):
        raise ValidationError("all stems are silent (below the loudness gate)")

    n_frames = max(s.n_frames for s in stems)
    mix = np.zeros(n_frames)
    for stem, gain in zip(stems, gains):
        mix[: stem.n_frames] += stem.samples * (1.0 if gain is None else gain)

    ceiling = 10.0 ** (peak_ceiling_db / 20.0)
    peak = float(np.max(np.abs(mix))) if n_frames else 0.0
    if peak > ceiling:
        mix *= ceiling / peak
    return AudioBuffer(mix, stems[0].sample_rate, 1)
