"""Content-addressed result cache backing incremental, resumable runs.

One JSON file per digest under two-level fan-out directories. Keys are
sha256 digests over the canonical JSON of every input that affects the
output. Writes go through a temp file plus atomic rename, so concurrent
readers of the same key see either nothing or a complete record, and puts
of identical content are idempotent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

log = logging.getLogger(__name__)


class ContentCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(*parts) -> str:
        """Digest over the canonical JSON encoding of the key parts."""
        blob = json.dumps(list(parts), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / key[2:4] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        """Stored record, or None when missing. Corrupt entries read as
        absent; the next put rewrites them."""
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                record = json.load(fh)
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, OSError, UnicodeDecodeError):
            log.warning("corrupt cache entry treated as absent: %s", path)
            return None
        if not isinstance(record, dict):
            return None
        return record

    def put(self, key: str, record: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def __contains__(self, key: str) -> bool:
        return self._path(key).is_file()

    def entries(self):
        yield from sorted(self.root.glob("*/*/*.json"))

    def stats(self) -> tuple[int, int]:
        """(entry count, total bytes)."""
        n = 0
        size = 0
        for p in self.entries():
            n += 1
            size += p.stat().st_size
        return n, size

    def purge(self) -> int:
        """Delete all entries; returns how many were removed."""
        n = 0
        for p in list(self.entries()):
            p.unlink()
            n += 1
        for sub in sorted(self.root.glob("*/*"), reverse=True):
            if sub.is_dir() and not any(sub.iterdir()):
                sub.rmdir()
        for sub in sorted(self.root.glob("*"), reverse=True):
            if sub.is_dir() and not any(sub.iterdir()):
                sub.rmdir()
        return n
