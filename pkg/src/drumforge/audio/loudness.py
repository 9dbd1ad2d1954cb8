"""Integrated loudness per ITU-R BS.1770-4 / EBU R128.

Pipeline: K-weighting prefilters (high-shelf then high-pass, with
coefficients recomputed from the sample rate so 44.1 kHz and 48 kHz are
handled identically), mean-square over 400 ms blocks with 75 % overlap,
then two-stage gating: an absolute gate at -70 LUFS and a relative gate
10 LU below the abs-gated mean. All-gated (effectively silent) input is a
distinguished BELOW_GATE result rather than a number.
"""

import math

import numpy as np
from scipy.signal import lfilter

from ..errors import ValidationError
from .buffers import AudioBuffer

BLOCK_S = 0.400
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = 10.0
_OFFSET = -0.691  # calibrates a 997 Hz sine through the K-filter

SUPPORTED_RATES = (44_100, 48_000)


class _BelowGate:
    """Sentinel for input entirely under the loudness gates."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "BELOW_GATE"


BELOW_GATE = _BelowGate()


def k_weighting_coefficients(sample_rate: int):
    """(b, a) pairs of the two K-weighting stages for a sample rate.

    Parametric shelf/high-pass design; at 48 kHz these reduce to the
    tabulated BS.1770 coefficients.
    """
    # stage 1: +4 dB high shelf
    f0 = 1681.9744509555319
    gain_db = 3.99984385397
    q = 0.7071752369554193
    k = math.tan(math.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = np.array([
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ])
    shelf_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    # stage 2: high-pass removing inaudible rumble
    f0 = 38.13547087613982
    q = 0.5003270373253953
    k = math.tan(math.pi * f0 / sample_rate)
    denom = 1.0 + k / q + k * k
    hp_b = np.array([1.0, -2.0, 1.0])
    hp_a = np.array([1.0, 2.0 * (k * k - 1.0) / denom, (1.0 - k / q + k * k) / denom])
    return (shelf_b, shelf_a), (hp_b, hp_a)


def _block_mean_squares(channel: np.ndarray, sample_rate: int) -> np.ndarray:
    step = int(round(BLOCK_S * (1 - BLOCK_OVERLAP) * sample_rate))
    block = int(round(BLOCK_S * sample_rate))
    n_blocks = (len(channel) - block) // step + 1
    if n_blocks < 1:
        raise ValidationError("input shorter than one 400 ms gating block")
    windows = np.lib.stride_tricks.sliding_window_view(channel, block)[::step]
    return np.mean(np.square(windows[:n_blocks]), axis=1)


def measure_loudness(buffer: AudioBuffer) -> float | _BelowGate:
    """Integrated loudness in LUFS, or BELOW_GATE for silent input."""
    if buffer.sample_rate not in SUPPORTED_RATES:
        raise ValidationError(
            f"sample rate {buffer.sample_rate} not in {SUPPORTED_RATES}"
        )
    if buffer.duration_s < BLOCK_S:
        raise ValidationError("need at least 400 ms of audio to measure loudness")

    samples = buffer.samples if buffer.channels == 2 else buffer.samples[:, None]
    (b1, a1), (b2, a2) = k_weighting_coefficients(buffer.sample_rate)
    weights = np.ones(samples.shape[1])  # L/R/mono all weigh 1.0

    per_channel = []
    for c in range(samples.shape[1]):
        filtered = lfilter(b2, a2, lfilter(b1, a1, samples[:, c]))
        per_channel.append(_block_mean_squares(filtered, buffer.sample_rate))
    z = np.stack(per_channel)  # (channels, blocks)

    with np.errstate(divide="ignore"):
        block_loudness = _OFFSET + 10.0 * np.log10(weights @ z)

    above_absolute = block_loudness > ABSOLUTE_GATE_LUFS
    if not np.any(above_absolute):
        return BELOW_GATE
    z_abs = z[:, above_absolute].mean(axis=1)
    relative_gate = _OFFSET + 10.0 * np.log10(weights @ z_abs) - RELATIVE_GATE_LU

    gated = above_absolute & (block_loudness > relative_gate)
    if not np.any(gated):
        return BELOW_GATE
    z_final = z[:, gated].mean(axis=1)
    return float(_OFFSET + 10.0 * np.log10(weights @ z_final))
