"""File-backed workspace: content-addressed document store with a versioned
index.

Every document body is written once under objects/<digest>.json; the index
maps (kind, id) to the current object, a version counter for optimistic
concurrency, and the full object history. Deletion is append-only
tombstoning, so the audit trail survives. Index writes go through an atomic
temp-file rename and are serialized per process.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from pathlib import Path

from .errors import ConflictError, NotFoundError, VersionConflictError

KIND_ASSIGNMENT = "assignment"
KIND_RESPONSES = "responses"
KIND_LABELS = "labels"
KIND_ITEMS = "items"
KIND_SHOTSET = "shotset"
KIND_RUN = "run"
KIND_REPORTS = "reports"
KIND_FEEDBACK = "feedback"
KIND_RECONCILIATION = "reconciliation"


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, ensure_ascii=False, sort_keys=True).encode("utf-8")


class Workspace:
    """All pipeline state for one project root, shared by CLI and API."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.objects_dir = self.root / "objects"
        self.index_path = self.root / "index.json"
        self.root.mkdir(parents=True, exist_ok=True)
        self.objects_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    # -- index --------------------------------------------------------------

    def _read_index(self) -> dict:
        if not self.index_path.exists():
            return {"documents": {}}
        return json.loads(self.index_path.read_text(encoding="utf-8"))

    def _write_index(self, index: dict) -> None:
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index, ensure_ascii=False, indent=1), encoding="utf-8")
        os.replace(tmp, self.index_path)

    @staticmethod
    def _key(kind: str, doc_id: str) -> str:
        return f"{kind}/{doc_id}"

    # -- objects ------------------------------------------------------------

    def _store_object(self, doc: dict) -> str:
        payload = _canonical(doc)
        digest = hashlib.sha256(payload).hexdigest()[:16]
        path = self.objects_dir / f"{digest}.json"
        if not path.exists():
            tmp = path.with_suffix(".json.tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, path)
        return digest

    def _load_object(self, digest: str) -> dict:
        return json.loads((self.objects_dir / f"{digest}.json").read_text(encoding="utf-8"))

    # -- document API --------------------------------------------------------

    def create(self, kind: str, doc_id: str, doc: dict) -> int:
        """Store a new document; fails if the id already exists (tombstoned
        ids stay reserved for the audit trail)."""
        with self._lock:
            index = self._read_index()
            key = self._key(kind, doc_id)
            if key in index["documents"]:
                raise ConflictError(f"{key} already exists")
            digest = self._store_object(doc)
            index["documents"][key] = {
                "version": 1,
                "object": digest,
                "deleted": False,
                "history": [digest],
            }
            self._write_index(index)
            return 1

    def save(self, kind: str, doc_id: str, doc: dict, *, expected_version: int | None = None) -> int:
        """Create or update a document.

        With expected_version set, the write succeeds only if the current
        version matches (compare-and-swap); a mismatch raises
        VersionConflictError.
        """
        with self._lock:
            index = self._read_index()
            key = self._key(kind, doc_id)
            entry = index["documents"].get(key)
            if entry is None:
                if expected_version not in (None, 0):
                    raise VersionConflictError(f"{key} does not exist yet")
                entry = {"version": 0, "object": None, "deleted": False, "history": []}
                index["documents"][key] = entry
            if entry["deleted"]:
                raise ConflictError(f"{key} is tombstoned")
            if expected_version is not None and entry["version"] != expected_version:
                raise VersionConflictError(
                    f"{key}: expected version {expected_version}, found {entry['version']}"
                )
            digest = self._store_object(doc)
            entry["version"] += 1
            entry["object"] = digest
            entry["history"].append(digest)
            self._write_index(index)
            return entry["version"]

    def load(self, kind: str, doc_id: str) -> tuple[dict, int]:
        with self._lock:
            index = self._read_index()
            entry = index["documents"].get(self._key(kind, doc_id))
            if entry is None or entry["deleted"]:
                raise NotFoundError(f"{kind}/{doc_id} not found")
            return self._load_object(entry["object"]), entry["version"]

    def exists(self, kind: str, doc_id: str) -> bool:
        index = self._read_index()
        entry = index["documents"].get(self._key(kind, doc_id))
        return entry is not None and not entry["deleted"]

    def delete(self, kind: str, doc_id: str, *, expected_version: int | None = None) -> None:
        """Tombstone a document; its history remains readable via history()."""
        with self._lock:
            index = self._read_index()
            key = self._key(kind, doc_id)
            entry = index["documents"].get(key)
            if entry is None or entry["deleted"]:
                raise NotFoundError(f"{key} not found")
            if expected_version is not None and entry["version"] != expected_version:
                raise VersionConflictError(
                    f"{key}: expected version {expected_version}, found {entry['version']}"
                )
            entry["deleted"] = True
            entry["version"] += 1
            self._write_index(index)

    def list(self, kind: str) -> list[str]:
        index = self._read_index()
        prefix = f"{kind}/"
        return sorted(
            key[len(prefix):]
            for key, entry in index["documents"].items()
            if key.startswith(prefix) and not entry["deleted"]
        )

    def history(self, kind: str, doc_id: str) -> list[dict]:
        with self._lock:
            index = self._read_index()
            entry = index["documents"].get(self._key(kind, doc_id))
            if entry is None:
                raise NotFoundError(f"{kind}/{doc_id} not found")
            return [self._load_object(digest) for digest in entry["history"]]

    def version(self, kind: str, doc_id: str) -> int:
        index = self._read_index()
        entry = index["documents"].get(self._key(kind, doc_id))
        if entry is None or entry["deleted"]:
            raise NotFoundError(f"{kind}/{doc_id} not found")
        return entry["version"]


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]
