"""FFT band-energy tone detection on gated audio and the restroom probe test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import next_fast_len

from .config import AcousticConfig
from .model import AudioSegment, SemanticClass
from .preprocess import denoise_band

DEFAULT_ACOUSTIC = AcousticConfig()
_PCM_SCALE = 32768.0


class AudioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BandEnergySeries:
    center_freq: float
    t: np.ndarray  # frame centre times
    energy: np.ndarray
    noise_mean: float
    noise_std: float

    @property
    def frame_energies(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.energy.tolist()))


def frame_length(sample_rate: int, config: AcousticConfig = DEFAULT_ACOUSTIC) -> int:
    """Frame size keeping the reference frame duration (4096 samples at 44.1 kHz).

    Rounded up to an FFT-friendly size: the plain scaling gives 743 samples
    at 8 kHz, a prime, whose transform is four times slower.
    """
    return next_fast_len(int(round(config.frame_length * sample_rate / config.reference_rate)), real=True)


def _frame_energies(segment: AudioSegment, center_freq: float, config: AcousticConfig):
    rate = segment.sample_rate
    n_frame = frame_length(rate, config)
    if len(segment.samples) < n_frame:
        raise AudioError(f"segment of {len(segment.samples)} samples shorter than one frame ({n_frame})")
    if not (100.0 < center_freq < rate / 2):
        raise AudioError(f"centre frequency {center_freq} Hz outside (100, {rate / 2}) Hz")
    hop = n_frame // 2
    x = segment.samples.astype(float) / _PCM_SCALE
    window = np.hanning(n_frame)
    frames = sliding_window_view(x, n_frame)[::hop] * window
    spec = np.fft.rfft(frames, axis=1)
    freqs = np.fft.rfftfreq(n_frame, 1.0 / rate)
    band = np.abs(freqs - center_freq) <= config.band_half_width
    power = (spec[:, band].real ** 2 + spec[:, band].imag ** 2).sum(axis=1) / np.sum(window**2)
    starts = np.arange(len(frames)) * hop
    t = segment.start_t + (starts + n_frame / 2) / rate
    return t, power, starts + n_frame, rate


def _noise_stats(power: np.ndarray, frame_ends: np.ndarray | None, span_samples: float | None):
    if span_samples is not None and frame_ends is not None:
        ref = power[frame_ends <= span_samples]
        if len(ref) < 2:
            ref = power[:2]
    else:
        ref = power
    mean = float(ref.mean())
    std = float(ref.std())
    return mean, max(std, 1e-9 * mean, 1e-15)


def band_energy(
    segment: AudioSegment,
    center_freq: float,
    config: AcousticConfig = DEFAULT_ACOUSTIC,
    noise_reference: AudioSegment | None = None,
) -> BandEnergySeries:
    """Per-frame power within ``band_half_width`` of ``center_freq``.

    Noise statistics come from the frames inside the first ``noise_span``
    seconds of the segment, or from all frames of ``noise_reference``.
    """
    t, power, ends, rate = _frame_energies(segment, center_freq, config)
    if noise_reference is None:
        mean, std = _noise_stats(power, ends, config.noise_span * rate)
    else:
        _, ref_power, _, _ = _frame_energies(noise_reference, center_freq, config)
        mean, std = _noise_stats(ref_power, None, None)
    return BandEnergySeries(float(center_freq), t, power, mean, std)


def detect_tone(
    band: BandEnergySeries, sigma: float | None = None, config: AcousticConfig = DEFAULT_ACOUSTIC
) -> list[tuple[float, bool]]:
    """Frame-level decision: smoothed energy above noise mean + ``sigma`` std."""
    sigma = config.sigma if sigma is None else sigma
    e = band.energy
    if len(e) == 0:
        return []
    smoothed = denoise_band(e, min(config.smooth_window, len(e)))
    flags = smoothed > band.noise_mean + sigma * band.noise_std
    return list(zip(band.t.tolist(), flags.tolist()))


def tone_events(
    band: BandEnergySeries, sigma: float | None = None, config: AcousticConfig = DEFAULT_ACOUSTIC
) -> list[tuple[float, float]]:
    """Runs of at least ``debounce`` consecutive detected frames, as (start_t, end_t)."""
    frames = detect_tone(band, sigma, config)
    events = []
    run: list[float] = []
    for t, hit in frames + [(np.inf, False)]:
        if hit:
            run.append(t)
            continue
        if len(run) >= config.debounce:
            events.append((run[0], run[-1]))
        run = []
    return events


def has_tone(segments: Sequence[AudioSegment], freq: float, config: AcousticConfig = DEFAULT_ACOUSTIC) -> bool:
    for seg in segments:
        if len(seg.samples) < frame_length(seg.sample_rate, config) or freq >= seg.sample_rate / 2:
            continue
        if tone_events(band_energy(seg, freq, config), config=config):
            return True
    return False


def classify_coin_machine_sound(
    segments: Sequence[AudioSegment], config: AcousticConfig = DEFAULT_ACOUSTIC
) -> tuple[SemanticClass, bool]:
    """Drink (350 Hz) before ticket (3 kHz) before locker.

    Returns the class and whether it rests on usable audio; without audio the
    answer is a low-confidence locker.
    """
    usable = [s for s in segments if len(s.samples) >= frame_length(s.sample_rate, config)]
    if not usable:
        return SemanticClass.LOCKER, False
    if has_tone(usable, config.drink_freq, config):
        return SemanticClass.DRINK_VENDING, True
    if has_tone(usable, config.ticket_freq, config):
        return SemanticClass.TICKET_VENDING, True
    return SemanticClass.LOCKER, True


def restroom_probe_test(feature: float | None, threshold: float = DEFAULT_ACOUSTIC.restroom_threshold) -> bool | None:
    """True/False against the threshold; None (indeterminate) without a probe."""
    if feature is None:
        return None
    return bool(feature > threshold)
