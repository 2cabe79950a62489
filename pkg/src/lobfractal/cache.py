"""Binary caches for replayed days: classified events and the mid-price path.

Both files are little-endian record arrays behind an 8-byte magic, in the
same family as the ``LOBF0001`` message log.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .book import ClassifiedEvent
from .durations import EventTable

CLASSIFIED_MAGIC = b"LOBC0001"
MIDPATH_MAGIC = b"LOBM0001"
CACHE_VERSION = 1

CLASSIFIED_DTYPE = np.dtype(
    [
        ("timestamp", "<u4"),
        ("kind", "u1"),
        ("side", "u1"),
        ("at_best", "u1"),
        ("order_id", "<u8"),
        ("lifetime", "<i8"),
        ("quantity", "<u4"),
        ("price", "<u4"),
    ]
)
MIDPATH_DTYPE = np.dtype([("timestamp", "<u4"), ("mid_sum", "<i8")])


class CacheFormatError(ValueError):
    pass


def encode_classified(events: Sequence[ClassifiedEvent]) -> bytes:
    arr = np.zeros(len(events), dtype=CLASSIFIED_DTYPE)
    if events:
        ts, kind, side, best, oid, life, qty, price = zip(*events)
        arr["timestamp"] = ts
        arr["kind"] = kind
        arr["side"] = side
        arr["at_best"] = best
        arr["order_id"] = np.array(oid, dtype=np.uint64)
        arr["lifetime"] = [-1 if x is None else x for x in life]
        arr["quantity"] = qty
        arr["price"] = price
    return CLASSIFIED_MAGIC + arr.tobytes()


def decode_classified(data: bytes) -> EventTable:
    arr = _records(data, CLASSIFIED_MAGIC, CLASSIFIED_DTYPE)
    return EventTable(
        arr["timestamp"].astype(np.int64),
        arr["kind"].astype(np.int8),
        arr["side"].astype(np.int8),
        arr["at_best"].astype(bool),
        arr["lifetime"].astype(np.int64),
        arr["quantity"].astype(np.int64),
    )


def encode_mid_path(path: Sequence[tuple[int, int | None]]) -> bytes:
    arr = np.zeros(len(path), dtype=MIDPATH_DTYPE)
    if path:
        arr["timestamp"] = [t for t, _ in path]
        arr["mid_sum"] = [-1 if m is None else m for _, m in path]
    return MIDPATH_MAGIC + arr.tobytes()


def decode_mid_path(data: bytes) -> list[tuple[int, int | None]]:
    arr = _records(data, MIDPATH_MAGIC, MIDPATH_DTYPE)
    return [(t, None if m < 0 else m) for t, m in zip(arr["timestamp"].tolist(), arr["mid_sum"].tolist())]


def _records(data: bytes, magic: bytes, dtype: np.dtype) -> np.ndarray:
    if data[:8] != magic:
        raise CacheFormatError(f"expected magic {magic!r}")
    body = memoryview(data)[8:]
    if len(body) % dtype.itemsize:
        raise CacheFormatError("truncated cache record")
    return np.frombuffer(body, dtype=dtype)


def cache_key(raw: bytes, **params) -> str:
    """Checksum of the input bytes plus every parameter that shapes the replay."""
    h = hashlib.sha256(raw)
    h.update(json.dumps({"v": CACHE_VERSION, **params}, sort_keys=True).encode())
    return h.hexdigest()


class ReplayCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _paths(self, key: str) -> tuple[Path, Path]:
        return self.root / f"{key}.lobc", self.root / f"{key}.lobm"

    def load(self, key: str) -> tuple[EventTable, list[tuple[int, int | None]]] | None:
        ev_path, mid_path = self._paths(key)
        if not (ev_path.exists() and mid_path.exists()):
            return None
        try:
            return decode_classified(ev_path.read_bytes()), decode_mid_path(mid_path.read_bytes())
        except CacheFormatError:
            return None

    def store(self, key: str, events: Sequence[ClassifiedEvent], path: Sequence[tuple[int, int | None]]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        ev_path, mid_path = self._paths(key)
        # write-then-rename keeps concurrent workers from reading half files
        for target, payload in ((ev_path, encode_classified(events)), (mid_path, encode_mid_path(path))):
            tmp = target.with_suffix(target.suffix + ".tmp")
            tmp.write_bytes(payload)
            tmp.replace(target)
