import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from app.core.schemas import PhyProfile, SweepRow, SweepSpec
from app.services.testbench import check_window, count_erroneous, simulate_window

logger = logging.getLogger(__name__)


def measure_point(
    profile: PhyProfile,
    snr_db: float,
    seed: int,
    frames: int,
    value_x: float | None = None,
) -> SweepRow:
    """Genie BER and frame-flag estimate of one (snr, seed) window."""
    window = simulate_window(profile, snr_db, seed, frames=frames)
    check = check_window(window.received, profile)
    threshold = profile.value_x if value_x is None else value_x
    erroneous = count_erroneous(check.sd_diff, threshold)
    return SweepRow(
        snr_db=snr_db,
        seed=seed,
        actual_ber=float(np.mean(check.decoded != window.bits)),
        estimated_ber=erroneous / frames,
        erroneous_frames=erroneous,
    )


def _measure(point: tuple[float, int], profile: PhyProfile, spec: SweepSpec) -> SweepRow:
    snr_db, seed = point
    return measure_point(profile, snr_db, seed, spec.frames, spec.value_x)


def run_sweep(spec: SweepSpec, profile: PhyProfile, workers: int = 1) -> list[SweepRow]:
    """Rows in (snr, seed) order whatever the worker count."""
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    points = [(snr, seed) for snr in spec.snr_points for seed in spec.seeds]
    measure = partial(_measure, profile=profile, spec=spec)
    logger.info(
        f"Sweeping {profile.id}: {len(points)} point(s) of {spec.frames} frame(s) "
        f"on {workers} worker(s)"
    )
    if workers == 1:
        return [measure(point) for point in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(measure, points))


def snr_range(start: float, stop: float, step: float) -> list[float]:
    """Inclusive ``start..stop`` grid; 0.5 dB steps stay exact."""
    if step <= 0:
        raise ValueError(f"SNR step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"SNR stop {stop} is below start {start}")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 10) for i in range(count)]
