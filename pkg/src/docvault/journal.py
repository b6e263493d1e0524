"""Append-only journal backing the metadata and token stores.

Single-file, crash-safe key/value log.  Each line is one mutation:

    <crc32 hex 8>:<json payload>\n

where the payload is {"op": "put"|"del", "key": ..., "value": ...}.  On
open the whole file is replayed into an in-memory dict; a torn or corrupt
tail line (the only corruption a crashed append can leave) ends the replay,
so every acknowledged write before it survives.  Writes fsync before
returning.
"""

from __future__ import annotations

import json
import os
import threading
import zlib
from pathlib import Path

from .errors import StorageFailure


def _frame(payload: dict) -> bytes:
    body = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode("utf-8")
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return f"{crc:08x}:".encode("ascii") + body + b"\n"


class JournalStore:
    """Durable dict with atomic put/delete and kill-and-reopen recovery."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.RLock()
        self._data: dict[str, dict] = {}
        self._fh = None
        self._open()

    def _open(self):
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                self._replay()
            self._fh = open(self.path, "ab")
        except OSError as e:
            raise StorageFailure(f"cannot open store {self.path}: {e}")

    def _replay(self):
        with open(self.path, "rb") as fh:
            for line in fh:
                if not line.endswith(b"\n"):
                    break  # torn tail write
                crc_hex, sep, body = line[:-1].partition(b":")
                if not sep or len(crc_hex) != 8:
                    break
                try:
                    if int(crc_hex, 16) != (zlib.crc32(body) & 0xFFFFFFFF):
                        break
                    payload = json.loads(body)
                except (ValueError, json.JSONDecodeError):
                    break
                if payload["op"] == "put":
                    self._data[payload["key"]] = payload["value"]
                elif payload["op"] == "del":
                    self._data.pop(payload["key"], None)

    def _append(self, payload: dict):
        frame = _frame(payload)
        try:
            self._fh.write(frame)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as e:
            raise StorageFailure(f"append to {self.path} failed: {e}")

    def put(self, key: str, value: dict):
        with self._lock:
            self._append({"op": "put", "key": key, "value": value})
            self._data[key] = value

    def delete(self, key: str) -> bool:
        with self._lock:
            if key not in self._data:
                return False
            self._append({"op": "del", "key": key, "value": None})
            del self._data[key]
            return True

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._data.get(key)

    def items(self, prefix: str = "") -> list[tuple[str, dict]]:
        with self._lock:
            return [(k, v) for k, v in self._data.items() if k.startswith(prefix)]

    @property
    def lock(self) -> threading.RLock:
        """Shared lock for callers needing multi-step atomicity."""
        return self._lock

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
