"""Lookup tables, threshold store and the MAP function (BER -> SNR)."""

import csv
import io
import logging
from collections.abc import Iterable
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Literal, TextIO

import numpy as np

from app.core.config import Config
from app.core.constants import (
    DEFAULT_KEY_SEED,
    FRAMES_PER_WINDOW,
    PRINTED_ERRATA,
    TABLE_FILES,
    TABLE_HEADER,
)
from app.core.schemas import LookupRow, LookupTable, SeedEntry, Thresholds, ThresholdStore

logger = logging.getLogger(__name__)


class TableFormatError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


def _parse_record(record: list[str], row: int) -> tuple[float, int, SeedEntry]:
    if len(record) != len(TABLE_HEADER):
        raise TableFormatError(
            f"expected {len(TABLE_HEADER)} columns, got {len(record)}", row
        )
    try:
        snr = float(record[0])
        seed = int(record[1])
        entry = SeedEntry(
            actual_ber=float(record[2]),
            estimated_ber=float(record[3]),
            erroneous_frames=int(record[4]),
        )
    except ValueError as err:
        raise TableFormatError(" ".join(str(err).split()), row) from err
    return snr, seed, entry


def load_table(
    source: TextIO | str | Path,
    table_id: str,
    key_column: Literal["estimated", "actual"] = "estimated",
    key_seed: int | None = DEFAULT_KEY_SEED,
    frames_per_window: int = FRAMES_PER_WINDOW,
    errata: Iterable[tuple[float, int]] = (),
) -> LookupTable:
    """Parse ``snr,seed,actual_ber,estimated_ber,erroneous_frames`` rows.

    Rows listed in ``errata`` may disagree between count and estimate; any
    other disagreement is rejected with the offending row index.
    """
    if isinstance(source, Path):
        try:
            source = source.read_text()
        except OSError as err:
            raise ValueError(f"Cannot read table {source}: {err}") from err
    stream = io.StringIO(source) if isinstance(source, str) else source
    tolerated = set(errata)

    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TABLE_HEADER:
        raise TableFormatError(f"header must be {','.join(TABLE_HEADER)}", 0)

    grouped: dict[float, dict[int, SeedEntry]] = {}
    for row, record in enumerate(reader, start=1):
        if not record or not "".join(record).strip():
            continue
        snr, seed, entry = _parse_record([field.strip() for field in record], row)
        per_seed = grouped.setdefault(snr, {})
        if seed in per_seed:
            raise TableFormatError(f"duplicate SNR {snr:g} for seed {seed}", row)
        if abs(entry.estimated_ber * frames_per_window - entry.erroneous_frames) > 1e-6:
            if (snr, seed) not in tolerated:
                raise TableFormatError(
                    f"{entry.erroneous_frames} erroneous frames do not give "
                    f"estimated BER {entry.estimated_ber}",
                    row,
                )
            logger.warning(
                f"Table {table_id} keeps printed row SNR {snr:g} seed {seed} "
                f"({entry.erroneous_frames}/{frames_per_window} != {entry.estimated_ber})"
            )
        per_seed[seed] = entry

    rows = [LookupRow(snr_db=snr, per_seed=grouped[snr]) for snr in sorted(grouped)]
    return LookupTable(id=table_id, rows=rows, key_column=key_column, key_seed=key_seed)


@lru_cache(maxsize=8)
def load_bundled_table(
    table_id: str,
    key_column: Literal["estimated", "actual"] = "estimated",
    key_seed: int | None = DEFAULT_KEY_SEED,
) -> LookupTable:
    if table_id not in TABLE_FILES:
        raise ValueError(
            f"Unknown table: {table_id}. Expected one of: {', '.join(TABLE_FILES)}"
        )
    text = resources.files("app.data").joinpath(TABLE_FILES[table_id]).read_text()
    table = load_table(
        text,
        table_id,
        key_column=key_column,
        key_seed=key_seed,
        errata=PRINTED_ERRATA.get(table_id, ()),
    )
    logger.info(f"Loaded bundled table {table_id} ({len(table.rows)} rows)")
    return table


def map_ber_to_snr(
    est_ber: float, table: LookupTable, digits: int = Config.ROUND_DIGITS
) -> float:
    """MAP function: SNR of the row whose key BER is closest to the estimate.

    Ties go to the higher SNR, which also resolves the all-zero tail.
    """
    if not 0 <= est_ber <= 1:
        raise ValueError(f"Estimated BER must lie in [0, 1], got {est_ber}")
    rounded = round(est_ber, digits)
    distances = np.abs(table.key_bers() - rounded)
    closest = np.flatnonzero(np.isclose(distances, distances.min(), rtol=0, atol=1e-12))
    # Rows ascend by SNR
    return float(table.snrs()[closest[-1]])


def get_thresholds(profile_id: str, store: ThresholdStore) -> Thresholds:
    if profile_id not in store.entries:
        raise ValueError(
            f"Unknown profile: {profile_id}. Expected one of: {', '.join(store.entries)}"
        )
    return store.entries[profile_id]
