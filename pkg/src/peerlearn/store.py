"""Append-only event log with snapshot compaction.

Layout under the storage directory:

    events.jsonl          one JSON event per line, dense seq from 1
    snapshot.json         optional {seq, state} checkpoint

The log is the source of truth and is never truncated; a snapshot only
short-circuits replay on startup.  Appends are flushed (and fsynced unless
disabled) before the command acknowledges.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from .domain import OfferingConfig
from .engine import Engine, EventRecord
from .errors import StoreError


class EventStore:
    def __init__(self, root: str | Path, durable: bool = True, snapshot_every: Optional[int] = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.events_path = self.root / "events.jsonl"
        self.snapshot_path = self.root / "snapshot.json"
        self.durable = durable
        self.snapshot_every = snapshot_every  # compaction cadence, in events
        self._fh = open(self.events_path, "a", encoding="utf-8")

    def snapshot_due(self, seq: int) -> bool:
        return bool(self.snapshot_every) and seq % self.snapshot_every == 0

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def append(self, event: EventRecord) -> None:
        line = json.dumps(event.to_json(), separators=(",", ":"), ensure_ascii=True)
        self._fh.write(line + "\n")
        self._fh.flush()
        if self.durable:
            os.fsync(self._fh.fileno())

    def read_events(self, after_seq: int = 0) -> list[EventRecord]:
        if not self.events_path.exists():
            return []
        events = []
        with open(self.events_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    data = json.loads(line)
                    event = EventRecord.from_json(data)
                except (json.JSONDecodeError, KeyError) as exc:
                    raise StoreError(
                        f"corrupt event log at {self.events_path}:{lineno}: {exc}",
                        path=str(self.events_path),
                        line=lineno,
                    ) from None
                if event.seq > after_seq:
                    events.append(event)
        return events

    def write_snapshot(self, engine: Engine) -> None:
        """Checkpoint the full state; replay afterwards starts from here."""
        payload = {"seq": len(engine.events), "state": engine.to_state_dict()}
        tmp = self.snapshot_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, separators=(",", ":"), ensure_ascii=True)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(self.snapshot_path)

    def read_snapshot(self) -> Optional[dict]:
        if not self.snapshot_path.exists():
            return None
        try:
            with open(self.snapshot_path, encoding="utf-8") as fh:
                return json.load(fh)
        except json.JSONDecodeError as exc:
            raise StoreError(
                f"corrupt snapshot at {self.snapshot_path}: {exc}",
                path=str(self.snapshot_path),
            ) from None

    def load(self, defaults: Optional[OfferingConfig] = None) -> Engine:
        """Rebuild the engine: snapshot (if any) plus the log tail."""
        snapshot = self.read_snapshot()
        if snapshot is None:
            engine = Engine(defaults=defaults)
            engine.apply_events(self.read_events())
        else:
            engine = Engine.from_state_dict(
                snapshot["state"], seq=snapshot["seq"], defaults=defaults
            )
            engine.apply_events(self.read_events(after_seq=snapshot["seq"]))
        engine.store = self
        return engine


def open_store(root: str | Path, durable: bool = True, defaults=None) -> Engine:
    return EventStore(root, durable=durable).load(defaults=defaults)
