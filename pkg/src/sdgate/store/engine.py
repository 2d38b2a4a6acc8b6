"""Embedded file-backed entity store.

On disk, a data directory holds ``snapshot.json`` (a compacted snapshot, one
document per entity) and ``commits.jsonl`` (append-only commit log, one
checksummed record per commit).  Loading replays the log over the snapshot.
A commit record without its trailing newline is a torn write from a crash
and is ignored; any other damage is reported as corruption.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from collections import deque
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from filelock import FileLock

from ..model import (
    EntityDocument,
    Reference,
    from_document,
    global_surrogate,
    is_local_surrogate,
    map_references,
    to_document,
)
from ..registry import SchemaRegistry, default_registry
from .resolution import find_match, merge, name_key

logger = logging.getLogger("sdgate.store")

SNAPSHOT_FILE = "snapshot.json"
LOG_FILE = "commits.jsonl"
LOCK_FILE = "store.lock"
FORMAT = 1


class StoreError(RuntimeError):
    pass


class CorruptStoreError(StoreError):
    pass


class NotFoundError(KeyError):
    pass


@dataclass
class StoreSnapshot:
    entities: dict[str, EntityDocument] = field(default_factory=dict)
    aliases: dict[str, str] = field(default_factory=dict)
    sequence: int = 0
    by_name: dict[str, set[str]] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.by_name and self.entities:
            for ent in self.entities.values():
                self._index(ent)

    def _index(self, ent: EntityDocument) -> None:
        key = name_key(ent)
        if key:
            self.by_name.setdefault(key, set()).add(ent.id)

    def resolve(self, identifier: str) -> str:
        return self.aliases.get(identifier, identifier)

    def get(self, identifier: str) -> EntityDocument | None:
        return self.entities.get(self.resolve(identifier))

    def put(self, ent: EntityDocument) -> None:
        old = self.entities.get(ent.id)
        if old is not None:
            key = name_key(old)
            if key and key in self.by_name:
                self.by_name[key].discard(ent.id)
        self.entities[ent.id] = ent
        self._index(ent)

    def copy(self) -> "StoreSnapshot":
        return StoreSnapshot(
            dict(self.entities),
            dict(self.aliases),
            self.sequence,
            {k: set(v) for k, v in self.by_name.items()},
        )

    def __len__(self) -> int:
        return len(self.entities)


@dataclass
class MergeReport:
    created: int = 0
    merged: int = 0
    properties_overwritten: int = 0
    aliases_added: int = 0
    committed: bool = False

    def __iadd__(self, other: "MergeReport") -> "MergeReport":
        self.created += other.created
        self.merged += other.merged
        self.properties_overwritten += other.properties_overwritten
        self.aliases_added += other.aliases_added
        self.committed = self.committed or other.committed
        return self


# --- serialization ------------------------------------------------------------


def _checksum(payload: Any) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _snapshot_payload(snapshot: StoreSnapshot) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "sequence": snapshot.sequence,
        "aliases": dict(sorted(snapshot.aliases.items())),
        "entities": [to_document(snapshot.entities[k]) for k in sorted(snapshot.entities)],
    }


def _write_atomic(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def persist(snapshot: StoreSnapshot, directory: str | Path) -> None:
    """Write a compacted snapshot and clear the commit log."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = _snapshot_payload(snapshot)
    payload["checksum"] = _checksum(payload)
    _write_atomic(directory / SNAPSHOT_FILE, json.dumps(payload, indent=1, sort_keys=True))
    _write_atomic(directory / LOG_FILE, "")


def _decode_entities(docs: Iterable[Any], where: str) -> list[EntityDocument]:
    out = []
    for i, doc in enumerate(docs):
        try:
            out.append(from_document(doc))
        except (KeyError, TypeError, ValueError) as exc:
            ident = doc.get("@id") if isinstance(doc, dict) else None
            raise CorruptStoreError(f"{where}: entity record {i} ({ident!r}) is invalid: {exc}") from exc
    return out


def _read_snapshot(directory: Path) -> StoreSnapshot:
    path = directory / SNAPSHOT_FILE
    if not path.exists():
        return StoreSnapshot()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CorruptStoreError(f"{path}: unreadable snapshot ({exc})") from exc
    if not isinstance(payload, dict) or "checksum" not in payload:
        raise CorruptStoreError(f"{path}: missing checksum")
    checksum = payload.pop("checksum")
    if _checksum(payload) != checksum:
        raise CorruptStoreError(f"{path}: checksum mismatch")
    entities = _decode_entities(payload["entities"], str(path))
    return StoreSnapshot({e.id: e for e in entities}, dict(payload["aliases"]), int(payload["sequence"]))


def _replay(snapshot: StoreSnapshot, directory: Path) -> int:
    """Apply committed log records; returns the byte length of the valid log prefix."""
    path = directory / LOG_FILE
    if not path.exists():
        return 0
    raw = path.read_bytes()
    good = 0
    lines = raw.split(b"\n")
    for lineno, line in enumerate(lines, start=1):
        is_last = lineno == len(lines)
        if is_last:
            if line:
                logger.warning("ignoring torn commit record at %s line %d", path, lineno)
            break
        try:
            record = json.loads(line)
            checksum = record.pop("checksum")
        except (ValueError, KeyError, AttributeError) as exc:
            raise CorruptStoreError(f"{path} line {lineno}: unreadable commit record") from exc
        if _checksum(record) != checksum:
            raise CorruptStoreError(f"{path} line {lineno}: checksum mismatch")
        seq = int(record["sequence"])
        good += len(line) + 1
        if seq <= snapshot.sequence:
            continue
        if seq != snapshot.sequence + 1:
            raise CorruptStoreError(f"{path} line {lineno}: sequence {seq} follows {snapshot.sequence}")
        for ent in _decode_entities(record["entities"], f"{path} line {lineno}"):
            snapshot.put(ent)
        snapshot.aliases.update(record["aliases"])
        snapshot.sequence = seq
    return good


def load(directory: str | Path | None) -> StoreSnapshot:
    """Load the committed state of a data directory (empty if absent)."""
    if directory is None:
        return StoreSnapshot()
    directory = Path(directory)
    if not directory.exists():
        return StoreSnapshot()
    snapshot = _read_snapshot(directory)
    _replay(snapshot, directory)
    return snapshot


def subgraph(snapshot: StoreSnapshot, identifier: str, depth: int) -> list[EntityDocument]:
    """Breadth-first reference closure, ordered by (distance, id)."""
    root = snapshot.resolve(identifier)
    if root not in snapshot.entities:
        raise NotFoundError(identifier)
    distance = {root: 0}
    queue = deque([root])
    while queue:
        current = queue.popleft()
        if distance[current] >= depth:
            continue
        for target in snapshot.entities[current].references():
            target = snapshot.resolve(target)
            if target in snapshot.entities and target not in distance:
                distance[target] = distance[current] + 1
                queue.append(target)
    ordered = sorted(distance, key=lambda k: (distance[k], k))
    return [snapshot.entities[k] for k in ordered]


def globalize(batch: list[EntityDocument]) -> list[EntityDocument]:
    """Replace page-local surrogate ids with store-wide ones."""
    mapping = {e.id: global_surrogate(e.id, e.provenance[0]) for e in batch if is_local_surrogate(e.id)}
    if not mapping:
        return batch

    def remap(ref: Reference) -> Reference:
        return Reference(mapping.get(ref.target, ref.target), ref.dangling)

    return [
        EntityDocument(
            mapping.get(e.id, e.id),
            e.types,
            {k: map_references(v, remap) for k, v in e.properties.items()},
            e.provenance,
        )
        for e in batch
    ]


def _rewrite(ent: EntityDocument, fn) -> EntityDocument:
    return EntityDocument(ent.id, ent.types, {k: map_references(v, fn) for k, v in ent.properties.items()}, ent.provenance)


class EntityStore:
    """Single-writer, multi-reader entity store over a data directory.

    Pass ``directory=None`` for a purely in-memory store.
    """

    def __init__(
        self,
        directory: str | Path | None = None,
        registry: SchemaRegistry | None = None,
        compact_every: int = 50,
    ):
        self.directory = Path(directory) if directory is not None else None
        self.registry = registry or default_registry()
        self.compact_every = compact_every
        self._lock = threading.RLock()
        self._file_lock = None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._file_lock = FileLock(str(self.directory / LOCK_FILE))
        self._snapshot = load(self.directory)
        self._stamp = self._disk_stamp()
        self._since_compact = 0

    def _disk_stamp(self):
        if self.directory is None:
            return None
        out = []
        for name in (SNAPSHOT_FILE, LOG_FILE):
            p = self.directory / name
            out.append((p.stat().st_mtime_ns, p.stat().st_size) if p.exists() else None)
        return tuple(out)

    def snapshot(self) -> StoreSnapshot:
        return self._snapshot

    def refresh(self) -> StoreSnapshot:
        """Pick up commits made by another process."""
        with self._lock:
            stamp = self._disk_stamp()
            if stamp != self._stamp:
                self._snapshot = load(self.directory)
                self._stamp = stamp
            return self._snapshot

    def _writer(self):
        return self._file_lock if self._file_lock is not None else nullcontext()

    def upsert(self, batch: Iterable[EntityDocument]) -> MergeReport:
        with self._lock, self._writer():
            if self.directory is not None:
                self.refresh()
            base = self._snapshot
            work = base.copy()
            report = MergeReport()
            batch = globalize(list(batch))
            batch_index = {e.id: e for e in batch}
            mapping: dict[str, str] = {}
            new_aliases: dict[str, str] = {}
            touched: list[str] = []

            def lookup(identifier: str) -> EntityDocument | None:
                return batch_index.get(identifier) or work.get(identifier)

            def through(ref: Reference) -> Reference:
                return Reference(mapping.get(ref.target, ref.target), ref.dangling)

            for incoming in batch:
                incoming = _rewrite(incoming, through)
                match = find_match(incoming, work, self.registry, lookup=lookup)
                if match is None:
                    work.put(incoming)
                    report.created += 1
                    canonical = incoming.id
                else:
                    existing = work.entities[match]
                    merged = merge(existing, incoming, self.registry)
                    report.properties_overwritten += sum(
                        1
                        for k in incoming.properties
                        if self.registry.is_functional(k)
                        and k in existing.properties
                        and merged.properties[k] != existing.properties[k]
                    )
                    work.put(merged)
                    report.merged += 1
                    canonical = match
                    if incoming.id != match and incoming.id not in work.aliases:
                        work.aliases[incoming.id] = match
                        new_aliases[incoming.id] = match
                        report.aliases_added += 1
                mapping[incoming.id] = canonical
                touched.append(canonical)

            def settle(ref: Reference) -> Reference:
                target = work.resolve(mapping.get(ref.target, ref.target))
                return Reference(target, dangling=target not in work.entities)

            dangling_holders = [
                k for k, e in work.entities.items()
                if any(isinstance(v, Reference) and v.dangling for vs in e.properties.values() for v in vs)
            ]
            for cid in dict.fromkeys(touched + dangling_holders):
                work.put(_rewrite(work.entities[cid], settle))

            changed = [
                cid for cid in dict.fromkeys(touched + dangling_holders)
                if cid not in base.entities or to_document(base.entities[cid]) != to_document(work.entities[cid])
            ]
            if not changed and not new_aliases:
                return report
            work.sequence = base.sequence + 1
            self._commit(work, changed, new_aliases)
            report.committed = True
            return report

    def _commit(self, work: StoreSnapshot, changed: list[str], aliases: dict[str, str]) -> None:
        if self.directory is not None:
            record = {
                "sequence": work.sequence,
                "entities": [to_document(work.entities[c]) for c in changed],
                "aliases": aliases,
            }
            record["checksum"] = _checksum(record)
            line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
            path = self.directory / LOG_FILE
            try:
                self._truncate_torn_tail(path)
                with open(path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"commit {work.sequence} failed: {exc}") from exc
        self._snapshot = work
        self._stamp = self._disk_stamp()
        self._since_compact += 1
        if self.directory is not None and self._since_compact >= self.compact_every:
            self.compact()

    def _truncate_torn_tail(self, path: Path) -> None:
        if not path.exists():
            return
        good = _replay(StoreSnapshot(sequence=10**18), self.directory)
        if path.stat().st_size != good:
            with open(path, "r+b") as fh:
                fh.truncate(good)

    def compact(self) -> None:
        with self._lock, self._writer():
            if self.directory is None:
                return
            persist(self._snapshot, self.directory)
            self._stamp = self._disk_stamp()
            self._since_compact = 0

    def subgraph(self, identifier: str, depth: int) -> list[EntityDocument]:
        return subgraph(self._snapshot, identifier, depth)
