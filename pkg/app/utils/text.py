import csv
import io
import math

from app.core.constants import TABLE_HEADER
from app.core.schemas import ControllerEvent, LookupTable, Scalar, SweepRow

LOG10_COLUMNS = ["log10_actual_ber", "log10_estimated_ber"]


def format_number(value: float) -> str:
    """Stable shortest-ish decimal rendering ('7', '0.072', 'inf')."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = format(value, ".12g")
    return "0" if text == "-0" else text


def format_log10(value: float) -> str:
    """log10 of a rate, with 0 clamped to the '-inf' token."""
    if value <= 0:
        return "-inf"
    return format(math.log10(value), ".6f")


def format_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def format_event(event: ControllerEvent) -> str:
    """``timestamp,kind,key=value,...`` in detail insertion order."""
    fields = [format_number(event.timestamp), event.kind]
    fields.extend(f"{key}={format_scalar(value)}" for key, value in event.detail.items())
    return ",".join(fields)


def format_event_log(events: list[ControllerEvent]) -> str:
    return "".join(f"{format_event(event)}\n" for event in events)


def format_sweep_csv(rows: list[SweepRow], log10: bool = False) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TABLE_HEADER + (LOG10_COLUMNS if log10 else []))
    for row in rows:
        fields = [
            format_number(row.snr_db),
            str(row.seed),
            format_number(row.actual_ber),
            format_number(row.estimated_ber),
            str(row.erroneous_frames),
        ]
        if log10:
            fields += [format_log10(row.actual_ber), format_log10(row.estimated_ber)]
        writer.writerow(fields)
    return buffer.getvalue()


def format_table(table: LookupTable) -> str:
    """Wide layout: one line per SNR, actual/estimated/frames per seed."""
    seeds = sorted({seed for row in table.rows for seed in row.per_seed})
    header = f"{'SNR':>6} | " + " | ".join(
        f"{'seed ' + str(seed):^24}" for seed in seeds
    )
    sub = f"{'':>6} | " + " | ".join(
        f"{'actual':>8}{'est':>8}{'frames':>8}" for _ in seeds
    )
    lines = [f"Table {table.id}", header, sub, "-" * len(header)]
    for row in table.rows:
        cells = []
        for seed in seeds:
            entry = row.per_seed.get(seed)
            if entry is None:
                cells.append(f"{'-':>24}")
                continue
            cells.append(
                f"{format_number(entry.actual_ber):>8}"
                f"{format_number(entry.estimated_ber):>8}"
                f"{entry.erroneous_frames:>8}"
            )
        lines.append(f"{format_number(row.snr_db):>6} | " + " | ".join(cells))
    return "\n".join(lines) + "\n"
