"""Durable append-only event log.

File format: a sequence of records, each
``length (4 bytes BE) | crc32 of payload (4 bytes BE) | payload (JSON, UTF-8)``.
A torn final record (incomplete header or body, e.g. from a crash mid-write)
is ignored and truncated away on open; a CRC mismatch anywhere is fatal.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

_HEADER = struct.Struct(">II")


class CorruptedLogError(Exception):
    pass


class EventLog:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o600)

    def replay(self) -> list[dict]:
        """Read all complete records; truncate a torn final record."""
        os.lseek(self._fd, 0, os.SEEK_SET)
        data = b""
        while True:
            chunk = os.read(self._fd, 1 << 20)
            if not chunk:
                break
            data += chunk
        events = []
        pos = 0
        while pos < len(data):
            if pos + _HEADER.size > len(data):
                break  # torn header
            length, crc = _HEADER.unpack_from(data, pos)
            body = data[pos + _HEADER.size : pos + _HEADER.size + length]
            if len(body) < length:
                break  # torn body
            if zlib.crc32(body) != crc:
                raise CorruptedLogError(f"CRC mismatch at byte offset {pos}")
            events.append(json.loads(body.decode("utf-8")))
            pos += _HEADER.size + length
        if pos < len(data):
            os.ftruncate(self._fd, pos)
        os.lseek(self._fd, pos, os.SEEK_SET)
        return events

    def append(self, event: dict) -> None:
        """Durably append one record; this is the commit point."""
        self.append_many([event])

    def append_many(self, events: list[dict]) -> None:
        """Append a group of records with a single write + fsync, so a
        multi-event transaction commits (or tears) as one unit."""
        buf = bytearray()
        for event in events:
            body = json.dumps(event, separators=(",", ":"), sort_keys=True).encode("utf-8")
            buf += _HEADER.pack(len(body), zlib.crc32(body)) + body
        os.write(self._fd, bytes(buf))
        os.fsync(self._fd)

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1
