"""The reconfigurable test bench: SD comparison, windowed BER estimation,
jamming detection and Value-X calibration."""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from app.core.config import Config
from app.core.constants import NOISE_STREAM
from app.core.schemas import (
    CalibrationResult,
    ComplexFrame,
    FrameVerdict,
    JammerSpec,
    JammingState,
    PhyProfile,
    SignalStats,
    ThresholdStore,
    WindowResult,
)
from app.services.channel import awgn_apply_batch, jammer_apply_batch, signal_stats_batch
from app.services.phy import (
    derive_seed,
    generate_window_bits,
    remodulate_batch,
    rx_chain_batch,
    tx_chain_batch,
)

logger = logging.getLogger(__name__)


class CalibrationError(ValueError):
    """Raised when no Value-X brings the estimate within tolerance of the target."""

    def __init__(self, message: str, value_x: float, achieved_ber: float, residual: float):
        super().__init__(message)
        self.value_x = value_x
        self.achieved_ber = achieved_ber
        self.residual = residual


class Window(NamedTuple):
    bits: np.ndarray
    received: np.ndarray


class WindowCheck(NamedTuple):
    decoded: np.ndarray
    sd_rx: np.ndarray
    sd_remod: np.ndarray
    sd_diff: np.ndarray


def simulate_window(
    profile: PhyProfile,
    snr_db: float,
    seed: int,
    jammer: JammerSpec | None = None,
    frames: int | None = None,
) -> Window:
    """Transmitter plus channel for one estimation window."""
    bits = generate_window_bits(seed, profile, frames)
    transmitted = tx_chain_batch(bits, profile)
    noise_seeds = [derive_seed(seed, NOISE_STREAM, i) for i in range(bits.shape[0])]
    received = awgn_apply_batch(transmitted, snr_db, noise_seeds)
    if jammer is not None:
        received = jammer_apply_batch(received, jammer)
    return Window(bits=bits, received=received)


def check_window(received: np.ndarray, profile: PhyProfile) -> WindowCheck:
    """Decode, re-modulate and compare SDs for every frame of a window."""
    decoded = rx_chain_batch(received, profile)
    remodulated = remodulate_batch(decoded, profile)
    _, sd_rx = signal_stats_batch(received)
    _, sd_remod = signal_stats_batch(remodulated)
    return WindowCheck(
        decoded=decoded,
        sd_rx=sd_rx,
        sd_remod=sd_remod,
        sd_diff=np.abs(sd_rx - sd_remod),
    )


def count_erroneous(sd_diff: np.ndarray, value_x: float) -> int:
    return int(np.count_nonzero(sd_diff >= value_x))


def frame_check(
    received: ComplexFrame, profile: PhyProfile, value_x: float | None = None
) -> FrameVerdict:
    if len(received) != profile.symbols_per_frame:
        raise ValueError(
            f"Frame has {len(received)} samples, profile {profile.id} "
            f"expects {profile.symbols_per_frame}"
        )
    check = check_window(received.samples[None, :], profile)
    threshold = profile.value_x if value_x is None else value_x
    return FrameVerdict.compare(float(check.sd_rx[0]), float(check.sd_remod[0]), threshold)


def estimate_window(
    frames: Sequence[ComplexFrame] | np.ndarray,
    profile: PhyProfile,
    value_x: float | None = None,
    reference_bits: np.ndarray | None = None,
    timestamp: float = 0.0,
) -> WindowResult:
    """Count erroneous frames and divide by the window length.

    ``reference_bits`` enables the genie bit-compare BER alongside the
    frame-flag estimate.
    """
    if len(frames) != profile.frames_per_window:
        raise ValueError(
            f"Window has {len(frames)} frames, profile {profile.id} "
            f"expects {profile.frames_per_window}"
        )
    if isinstance(frames, np.ndarray):
        received = frames
    else:
        lengths = {len(f) for f in frames}
        if lengths != {profile.symbols_per_frame}:
            raise ValueError(
                f"Frames must all have {profile.symbols_per_frame} samples, "
                f"got lengths {sorted(lengths)}"
            )
        received = np.stack([f.samples for f in frames])

    check = check_window(received, profile)
    threshold = profile.value_x if value_x is None else value_x
    actual_ber = None
    if reference_bits is not None:
        actual_ber = float(np.mean(check.decoded != reference_bits))
    erroneous = count_erroneous(check.sd_diff, threshold)
    logger.debug(
        f"Window on {profile.id}: {erroneous}/{len(received)} erroneous "
        f"(value_x={threshold})"
    )
    return WindowResult.from_counts(
        erroneous,
        len(received),
        profile.id,
        timestamp=timestamp,
        actual_ber=actual_ber,
        value_x=threshold,
    )


def detect_jamming(
    window_stats: SignalStats, state: JammingState
) -> tuple[bool, JammingState]:
    """D > SD_Rx means jamming.

    The first window only seeds the baseline. The baseline is frozen while
    jamming so it never adapts to the jammer.
    """
    mean = window_stats.mean_strength
    if state.baseline_strength is None:
        return False, JammingState(baseline_strength=mean, alpha=state.alpha, d=0.0)

    d = abs(mean - state.baseline_strength)
    jamming = d > window_stats.sd_strength
    baseline = state.baseline_strength
    if not jamming:
        baseline = (1 - state.alpha) * baseline + state.alpha * mean
    return jamming, JammingState(baseline_strength=baseline, alpha=state.alpha, d=d)


def _bisect_value_x(
    sd_diff: np.ndarray, target: float, tolerance: float, max_iterations: int
) -> tuple[float, float, int]:
    total = sd_diff.size
    high = float(sd_diff.max())
    if high == 0.0:
        # Noiseless probe: any positive threshold clears every frame
        return float(np.finfo(float).tiny), 0.0, 0

    low = 0.0
    best = (high, count_erroneous(sd_diff, high) / total, 0)
    for iteration in range(1, max_iterations + 1):
        mid = (low + high) / 2
        achieved = count_erroneous(sd_diff, mid) / total
        if abs(achieved - target) < abs(best[1] - target):
            best = (mid, achieved, iteration)
        if abs(achieved - target) <= tolerance:
            return mid, achieved, iteration
        # est_ber is non-increasing in value_x
        if achieved > target:
            low = mid
        else:
            high = mid
    return best


def calibrate_value_x(
    profile: PhyProfile,
    snr_db: float,
    target_ber: float | None = None,
    seed: int = Config.DEFAULT_SEED,
    validation_seed: int | None = None,
    tolerance: float = Config.CALIBRATION_TOLERANCE,
    max_iterations: int = Config.CALIBRATION_MAX_ITERATIONS,
    frames: int | None = None,
) -> CalibrationResult:
    """Bisect Value-X over one probe window until the estimate meets the target.

    Without ``target_ber`` the probe window's genie bit error rate is the
    target. ``validation_seed`` re-runs the found threshold on fresh data.
    """
    if not math.isfinite(snr_db):
        raise ValueError(f"Calibration needs a finite SNR, got {snr_db}")
    if target_ber is not None and not 0 <= target_ber < 1:
        raise ValueError(f"Target BER must lie in [0, 1), got {target_ber}")

    probe = simulate_window(profile, snr_db, seed, frames=frames)
    check = check_window(probe.received, profile)
    genie_ber = float(np.mean(check.decoded != probe.bits))
    target = genie_ber if target_ber is None else target_ber

    if target == 0.0 and genie_ber > 0.0:
        # A zero estimate must clear every frame; the probe has corrupted ones
        high = float(check.sd_diff.max())
        achieved = count_erroneous(check.sd_diff, high) / check.sd_diff.size
        raise CalibrationError(
            f"Target BER 0 unreachable on {profile.id} at {snr_db} dB: the probe "
            f"window decodes with bit error rate {genie_ber:.4f}; nearest value_x "
            f"{high:.6g} gives {achieved:.4f}",
            value_x=high,
            achieved_ber=achieved,
            residual=achieved,
        )

    value_x, achieved, iterations = _bisect_value_x(
        check.sd_diff, target, tolerance, max_iterations
    )
    residual = abs(achieved - target)
    if residual > tolerance:
        raise CalibrationError(
            f"Target BER {target:.4f} unreachable on {profile.id} at {snr_db} dB: "
            f"nearest value_x {value_x:.6g} gives {achieved:.4f}",
            value_x=value_x,
            achieved_ber=achieved,
            residual=residual,
        )

    validation_ber = validation_residual = None
    if validation_seed is not None:
        held_out = simulate_window(profile, snr_db, validation_seed, frames=frames)
        held_check = check_window(held_out.received, profile)
        validation_ber = count_erroneous(held_check.sd_diff, value_x) / held_out.bits.shape[0]
        validation_residual = abs(validation_ber - target)

    logger.info(
        f"Calibrated {profile.id} at {snr_db} dB: value_x={value_x:.6g} "
        f"est={achieved:.4f} target={target:.4f} after {iterations} step(s)"
    )
    return CalibrationResult(
        profile_id=profile.id,
        snr_db=snr_db,
        value_x=value_x,
        target_ber=target,
        achieved_ber=achieved,
        residual=residual,
        iterations=iterations,
        validation_ber=validation_ber,
        validation_residual=validation_residual,
    )


def calibrate_store(
    store: ThresholdStore,
    profiles: dict[str, PhyProfile],
    seed: int = Config.DEFAULT_SEED,
    frames: int | None = None,
) -> ThresholdStore:
    """Derive every Value-X so the estimate at min_snr_db meets Value-Y."""
    calibrated = store
    for profile_id, thresholds in store.entries.items():
        profile = profiles.get(profile_id)
        if profile is None:
            continue
        try:
            result = calibrate_value_x(
                profile,
                thresholds.min_snr_db,
                thresholds.value_y,
                seed=seed,
                frames=frames,
            )
            value_x = result.value_x
        except CalibrationError as err:
            logger.warning(f"{err}; using nearest value")
            value_x = err.value_x
        calibrated = calibrated.with_value_x(profile_id, value_x)
    return calibrated
