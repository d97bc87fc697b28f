"""Local repository: append-only spatiotemporal BER/SNR records."""

import logging
import math
from pathlib import Path
from typing import Protocol

from app.core.config import Config
from app.core.schemas import RepositoryRecord
from app.utils.text import format_number

logger = logging.getLogger(__name__)


class RepositoryFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Repository(Protocol):
    def append(self, record: RepositoryRecord) -> None: ...

    def query(
        self,
        profile_id: str | None = None,
        start: float = -math.inf,
        end: float = math.inf,
    ) -> list[RepositoryRecord]: ...

    def reset(self) -> None: ...


def format_record(record: RepositoryRecord) -> str:
    """``timestamp,profile_id,est_ber,mapped_snr_db,jamming``."""
    return ",".join(
        [
            format_number(record.timestamp),
            record.profile_id,
            format_number(record.est_ber),
            format_number(record.mapped_snr_db),
            "true" if record.jamming else "false",
        ]
    )


def parse_record(line: str, number: int) -> RepositoryRecord:
    fields = line.strip().split(",")
    if len(fields) != 5:
        raise RepositoryFormatError(f"expected 5 fields, got {len(fields)}", number)
    timestamp, profile_id, est_ber, mapped_snr_db, jamming = fields
    if jamming not in ("true", "false"):
        raise RepositoryFormatError(f"jamming must be true or false, got {jamming!r}", number)
    try:
        return RepositoryRecord(
            timestamp=float(timestamp),
            profile_id=profile_id,
            est_ber=float(est_ber),
            mapped_snr_db=float(mapped_snr_db),
            jamming=jamming == "true",
        )
    except ValueError as err:
        raise RepositoryFormatError(" ".join(str(err).split()), number) from err


def parse_lines(lines: list[str]) -> list[RepositoryRecord]:
    records = [
        parse_record(line, number)
        for number, line in enumerate(lines, start=1)
        if line.strip()
    ]
    return records


def filter_records(
    records: list[RepositoryRecord],
    profile_id: str | None = None,
    start: float = -math.inf,
    end: float = math.inf,
) -> list[RepositoryRecord]:
    """Records within ``[start, end]``, optionally for one profile."""
    return [
        r
        for r in records
        if start <= r.timestamp <= end and (profile_id is None or r.profile_id == profile_id)
    ]


def check_order(last: RepositoryRecord | None, record: RepositoryRecord) -> None:
    if last is not None and record.timestamp < last.timestamp:
        raise ValueError(
            f"Repository is append-only in time: {record.timestamp} after {last.timestamp}"
        )


class FileRepository:
    """One record per line in an append-only text file."""

    def __init__(self, path: str | Path = Config.REPOSITORY_PATH):
        self.path = Path(path)
        self._records: list[RepositoryRecord] = []
        if self.path.exists():
            self._records = parse_lines(self.path.read_text().splitlines())
            logger.info(f"Loaded {len(self._records)} record(s) from {self.path}")

    def append(self, record: RepositoryRecord) -> None:
        check_order(self._records[-1] if self._records else None, record)
        with self.path.open("a") as handle:
            handle.write(format_record(record) + "\n")
            handle.flush()
        self._records.append(record)

    def query(
        self,
        profile_id: str | None = None,
        start: float = -math.inf,
        end: float = math.inf,
    ) -> list[RepositoryRecord]:
        return filter_records(self._records, profile_id, start, end)

    def reset(self) -> None:
        self.path.write_text("")
        self._records = []


def open_repository(path: str | Path | None = None) -> Repository:
    """Repository backend selected by ``Config.REPOSITORY_BACKEND``."""
    if Config.REPOSITORY_BACKEND == "redis":
        from app.services.redis_store import RedisRepository

        return RedisRepository()
    if Config.REPOSITORY_BACKEND != "file":
        raise ValueError(f"Unknown repository backend: {Config.REPOSITORY_BACKEND}")
    return FileRepository(path or Config.REPOSITORY_PATH)
