import math

import redis

from app.core.config import Config
from app.core.schemas import RepositoryRecord
from app.services.repository import (
    check_order,
    filter_records,
    format_record,
    parse_lines,
    parse_record,
)


class RedisRepository:
    """Local repository kept in a redis list, one formatted record per item."""

    def __init__(
        self,
        host: str = Config.REDIS_HOST,
        port: int = Config.REDIS_PORT,
        key: str = Config.REDIS_KEY,
    ):
        self.client = redis.Redis(
            host=host, port=port, db=Config.REDIS_DB, decode_responses=True
        )
        self.key = key

    def append(self, record: RepositoryRecord) -> None:
        """Append a record to the end of the list."""
        try:
            last_line = self.client.lindex(self.key, -1)
            length = self.client.llen(self.key)
            last = parse_record(last_line, length) if last_line else None
            check_order(last, record)
            self.client.rpush(self.key, format_record(record))
        except redis.exceptions.RedisError as err:
            raise RuntimeError(f"Failed to append record: {err}") from err

    def load(self) -> list[RepositoryRecord]:
        """Load every record in append order."""
        try:
            lines = self.client.lrange(self.key, 0, -1)
        except redis.exceptions.RedisError as err:
            raise RuntimeError(f"Failed to load records: {err}") from err
        return parse_lines(list(lines))

    def query(
        self,
        profile_id: str | None = None,
        start: float = -math.inf,
        end: float = math.inf,
    ) -> list[RepositoryRecord]:
        return filter_records(self.load(), profile_id, start, end)

    def reset(self) -> None:
        try:
            self.client.delete(self.key)
        except redis.exceptions.RedisError as err:
            raise RuntimeError(f"Failed to reset repository: {err}") from err
