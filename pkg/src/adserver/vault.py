"""Durability: inventory snapshots, the append-only event log, recovery.

Snapshots are canonical JSON (version field first, remaining keys sorted,
UTF-8, compact separators) written atomically via temp-file rename, so an
unchanged state always produces byte-identical files. The event log holds
one JSON object per line, delivery and admin events interleaved in exact
append order; recovery folds the delivery events back into ledger buckets.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from .inventory import Inventory
from .ledger import DeliveryEvent, Ledger, iso_utc, parse_iso_utc

SNAPSHOT_VERSION = 1
SNAPSHOT_FILENAME = "inventory.snapshot.json"
EVENTS_FILENAME = "events.log"


class VaultError(Exception):
    """Snapshot or event-log failure; message carries the offending context."""


@dataclass
class Snapshot:
    version: int
    created_at: datetime
    entities: dict

    @classmethod
    def capture(cls, inventory: Inventory, created_at: datetime | None = None) -> "Snapshot":
        if created_at is None:
            created_at = datetime.now(timezone.utc)
        return cls(version=SNAPSHOT_VERSION, created_at=created_at,
                   entities=inventory.dump_state())


def canonical_snapshot_bytes(snapshot: Snapshot) -> bytes:
    rest = json.dumps({"created_at": iso_utc(snapshot.created_at),
                       "entities": snapshot.entities},
                      sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return ('{"version":%d,%s' % (snapshot.version, rest[1:])).encode("utf-8")


def save_snapshot(snapshot: Snapshot, path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(prefix=".snapshot-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(canonical_snapshot_bytes(snapshot))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise VaultError(f"cannot write snapshot to {path}: {exc}") from exc


def load_snapshot(path) -> Snapshot:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise VaultError(f"cannot read snapshot at {path}: {exc}") from exc
    except ValueError as exc:
        raise VaultError(f"corrupt snapshot at {path}: {exc}") from exc
    version = raw.get("version")
    if version != SNAPSHOT_VERSION:
        raise VaultError(f"corrupt snapshot at {path}: version {version!r}, "
                         f"expected {SNAPSHOT_VERSION}")
    return Snapshot(version=version, created_at=parse_iso_utc(raw["created_at"]),
                    entities=raw["entities"])


class EventLog:
    """Append-only, line-oriented JSON event stream."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, event: dict) -> None:
        line = json.dumps(event, ensure_ascii=False, separators=(", ", ": "))
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


def read_events(path):
    """Yield (line_number, event_dict); abort on the first corrupt line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except ValueError as exc:
                raise VaultError(f"event log line {lineno}: {exc}") from exc
            if not isinstance(row, dict) or "kind" not in row:
                raise VaultError(f"event log line {lineno}: not an event object")
            yield lineno, row


def fold_events(path, ledger: Ledger | None = None) -> Ledger:
    """Rebuild ledger buckets from a log file; admin events are skipped."""
    if ledger is None:
        ledger = Ledger()
    for lineno, row in read_events(path):
        if row.get("kind") == "admin":
            continue
        try:
            event = DeliveryEvent.from_wire(row)
        except (KeyError, ValueError, TypeError) as exc:
            raise VaultError(f"event log line {lineno}: {exc}") from exc
        ledger.replay(event)
    return ledger


def replay_admin_events(path) -> Inventory:
    """Regenerate an inventory purely from the log's admin events."""
    inv = Inventory()
    for lineno, row in read_events(path):
        if row.get("kind") != "admin":
            continue
        try:
            _apply_admin_event(inv, row)
        except Exception as exc:
            raise VaultError(f"event log line {lineno}: {exc}") from exc
    return inv


def _apply_admin_event(inv: Inventory, row: dict) -> None:
    op = row.get("op")
    if op == "register":
        fields = dict(row["fields"])
        fields.pop("id", None)
        inv.register(row["entity"], fields, entity_id=row["id"])
    elif op == "update":
        inv.update(row["entity"], row["id"], dict(row["fields"]))
    elif op == "link":
        inv.link(row["zone_id"], row["target_kind"], row["target_id"])
    elif op == "unlink":
        inv.unlink(row["zone_id"], row["target_kind"], row["target_id"])
    elif op == "set_targeting":
        inv.set_targeting(row["owner_kind"], row["owner_id"],
                          row["dimension"], row["values"])
    else:
        raise VaultError(f"unknown admin op {op!r}")


def recover(snapshot_path, log_path):
    """(inventory, ledger) from the snapshot plus a fold of the event log.

    Absent files mean empty state. A corrupt log line aborts with its
    1-based line number in the error message.
    """
    if snapshot_path is not None and os.path.exists(snapshot_path):
        inventory = Inventory.from_state(load_snapshot(snapshot_path).entities)
    else:
        inventory = Inventory()
    ledger = Ledger()
    if log_path is not None and os.path.exists(log_path):
        fold_events(log_path, ledger)
    return inventory, ledger
