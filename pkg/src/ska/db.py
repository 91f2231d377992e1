"""Single-file durable storage for workbench state.

The whole state is one canonical JSON document in a one-row sqlite table.
sqlite gives atomic replacement and write-ahead durability for free; WAL
mode keeps readers from blocking the writer.  A process-wide lock
serializes save() because the document is written whole.
"""
from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path

from .errors import ValidationError
from .serialize import canonical_json, from_document, to_document
from .store import Workbench

_SCHEMA = """
CREATE TABLE IF NOT EXISTS workbench (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    document TEXT NOT NULL,
    saved_at TEXT NOT NULL DEFAULT (strftime('%Y-%m-%dT%H:%M:%fZ', 'now'))
)
"""


class Database:
    def __init__(self, path: str | Path):
        self.path = str(path)
        self._lock = threading.Lock()
        with self._connect() as conn:
            conn.execute(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30.0)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=NORMAL")
        return conn

    def save(self, bench: Workbench) -> None:
        doc = to_document(bench, include_auth=True)
        payload = canonical_json(doc)
        with self._lock, self._connect() as conn:
            conn.execute(
                "INSERT INTO workbench (id, document) VALUES (1, ?) "
                "ON CONFLICT (id) DO UPDATE SET document = excluded.document, "
                "saved_at = strftime('%Y-%m-%dT%H:%M:%fZ', 'now')",
                (payload,),
            )

    def load(self) -> Workbench | None:
        """Restore the saved state, or None for a fresh database."""
        with self._lock, self._connect() as conn:
            row = conn.execute(
                "SELECT document FROM workbench WHERE id = 1"
            ).fetchone()
        if row is None:
            return None
        try:
            doc = json.loads(row[0])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"stored document is not valid JSON: {exc}") from exc
        return from_document(doc)

    def load_or_create(self) -> Workbench:
        bench = self.load()
        if bench is None:
            bench = Workbench()
            self.save(bench)
        return bench
