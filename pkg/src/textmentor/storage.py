"""File-backed persistence: content-addressed blobs and JSON-line journals.

Journals are append-only; every append is flushed and fsynced before
returning, which is what makes pipeline stages crash-recoverable.
Blobs are stored under the hex digest of their content, so identical
content is stored once and references are self-verifying.
"""

import hashlib
import json
import os
from pathlib import Path


class BlobStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest[2:]

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self._path(digest)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return digest

    def get(self, digest: str) -> bytes:
        return self._path(digest).read_bytes()

    def exists(self, digest: str) -> bool:
        return self._path(digest).exists()

    def delete(self, digest: str):
        path = self._path(digest)
        if path.exists():
            path.unlink()


class JournalStore:
    """One append-only JSON-lines file per journal name."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        if "/" in name or "\\" in name or name.startswith("."):
            raise ValueError(f"invalid journal name {name!r}")
        return self.root / f"{name}.jsonl"

    def append(self, name: str, record: dict):
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with open(self._path(name), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def read(self, name: str) -> list:
        path = self._path(name)
        if not path.exists():
            return []
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    def exists(self, name: str) -> bool:
        return self._path(name).exists()

    def names(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def delete(self, name: str):
        path = self._path(name)
        if path.exists():
            path.unlink()
