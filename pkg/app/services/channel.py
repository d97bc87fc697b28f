"""AWGN impairment, jammer injection and per-frame signal statistics."""

import math

import numpy as np

from app.core.config import Config
from app.core.schemas import ComplexFrame, JammerSpec, SignalStats


def noise_power(signal_power: float, snr_db: float) -> float:
    """N0 = Es / 10^(snr/10); zero for the noiseless sentinel."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / 10 ** (snr_db / 10)


def awgn_apply_batch(samples: np.ndarray, snr_db: float, seeds: list[int]) -> np.ndarray:
    """Add circularly-symmetric Gaussian noise, one seed per frame row."""
    if samples.ndim != 2 or samples.shape[1] == 0:
        raise ValueError(f"Expected a non-empty (frames, samples) array, got {samples.shape}")
    if len(seeds) != samples.shape[0]:
        raise ValueError(f"Need one noise seed per frame, got {len(seeds)}")
    if math.isinf(snr_db) and snr_db > 0:
        return samples.copy()

    noisy = np.empty_like(samples, dtype=np.complex128)
    for row, seed in enumerate(seeds):
        frame = samples[row]
        n0 = noise_power(float(np.mean(np.abs(frame) ** 2)), snr_db)
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(frame.size) + 1j * rng.standard_normal(frame.size)
        noisy[row] = frame + np.sqrt(n0 / 2) * noise
    return noisy


def awgn_apply(frame: ComplexFrame, snr_db: float, seed: int) -> ComplexFrame:
    return ComplexFrame(samples=awgn_apply_batch(frame.samples[None, :], snr_db, [seed])[0])


def jammer_tone(length: int, amplitude: float) -> np.ndarray:
    """Constant-envelope tone with a fixed phase ramp."""
    ramp = 2 * np.pi * Config.JAMMER_TONE_CYCLES * np.arange(length)
    return amplitude * np.exp(1j * ramp)


def jammer_apply_batch(samples: np.ndarray, jammer: JammerSpec) -> np.ndarray:
    if not jammer.active:
        return samples
    return samples + jammer_tone(samples.shape[-1], jammer.amplitude)


def jammer_apply(frame: ComplexFrame, jammer: JammerSpec) -> ComplexFrame:
    if not jammer.active:
        return frame
    return ComplexFrame(samples=jammer_apply_batch(frame.samples, jammer))


def signal_stats_batch(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row mean and population SD of sample magnitudes."""
    magnitudes = np.abs(samples)
    return magnitudes.mean(axis=-1), magnitudes.std(axis=-1)


def signal_stats(frame: ComplexFrame | np.ndarray) -> SignalStats:
    samples = frame.samples if isinstance(frame, ComplexFrame) else np.asarray(frame)
    if samples.size == 0:
        raise ValueError("Cannot compute signal statistics of an empty frame")
    magnitudes = np.abs(samples).ravel()
    return SignalStats(
        mean_strength=float(magnitudes.mean()), sd_strength=float(magnitudes.std())
    )
