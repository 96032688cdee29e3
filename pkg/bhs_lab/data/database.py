"""
Database - SQLite storage for run history and cached exploration sequences
"""

import json
import sqlite3
from typing import Optional, List
from datetime import datetime
from contextlib import contextmanager

from ..core.runtime import SCHEMA_VERSION


class Database:
    """SQLite database for persistent storage"""

    def __init__(self, db_path: str):
        """
        Initialize database.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self._create_tables()

    @contextmanager
    def _get_connection(self):
        """Get database connection context manager"""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def _create_tables(self):
        """Create database tables if they don't exist"""
        with self._get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    graph TEXT NOT NULL,
                    n INTEGER NOT NULL,
                    m INTEGER NOT NULL,
                    delta_bh INTEGER NOT NULL,
                    agents INTEGER NOT NULL,
                    adversary TEXT NOT NULL,
                    algorithm TEXT NOT NULL,
                    rounds INTEGER DEFAULT 0,
                    deaths INTEGER DEFAULT 0,
                    verdict TEXT NOT NULL,
                    outcome_json TEXT,
                    created_at TEXT
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS uxs_cache (
                    n_max INTEGER PRIMARY KEY,
                    sequence TEXT NOT NULL,
                    created_at TEXT
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS settings (
                    key TEXT PRIMARY KEY,
                    value TEXT
                )
            """)

            cursor.execute(
                "INSERT OR IGNORE INTO settings (key, value) VALUES ('schema', ?)",
                (str(SCHEMA_VERSION),)
            )
            conn.commit()

    def save_run(self, row: dict, outcome: Optional[dict] = None) -> int:
        """
        Record one run.

        Args:
            row: Summary with graph, n, m, delta_bh, agents, adversary,
                algorithm, rounds, deaths and verdict
            outcome: Full outcome document, stored as JSON

        Returns:
            The run's id
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                INSERT INTO runs (
                    graph, n, m, delta_bh, agents, adversary, algorithm,
                    rounds, deaths, verdict, outcome_json, created_at
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, (
                row["graph"],
                row["n"],
                row["m"],
                row["delta_bh"],
                row["agents"],
                row["adversary"],
                row.get("algorithm", ""),
                row.get("rounds", 0),
                row.get("deaths", 0),
                row["verdict"],
                json.dumps(outcome) if outcome is not None else None,
                datetime.now().isoformat(),
            ))
            conn.commit()
            return cursor.lastrowid

    def get_run(self, run_id: int) -> Optional[dict]:
        """Get a run by id"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
            row = cursor.fetchone()
            return self._row_to_run(row) if row else None

    def get_all_runs(self) -> List[dict]:
        """Get all runs, newest first"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM runs ORDER BY id DESC")
            return [self._row_to_run(row) for row in cursor.fetchall()]

    def delete_run(self, run_id: int):
        """Delete a run"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("DELETE FROM runs WHERE id = ?", (run_id,))
            conn.commit()

    def _row_to_run(self, row: sqlite3.Row) -> dict:
        run = dict(row)
        outcome = run.pop("outcome_json")
        run["outcome"] = json.loads(outcome) if outcome else None
        return run

    def save_uxs(self, n_max: int, sequence: List[int]):
        """Cache an exploration sequence"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                "INSERT OR REPLACE INTO uxs_cache (n_max, sequence, created_at) VALUES (?, ?, ?)",
                (n_max, json.dumps(sequence), datetime.now().isoformat())
            )
            conn.commit()

    def get_uxs(self, n_max: int) -> Optional[List[int]]:
        """Cached exploration sequence, or None"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT sequence FROM uxs_cache WHERE n_max = ?", (n_max,))
            row = cursor.fetchone()
            return json.loads(row["sequence"]) if row else None

    def get_setting(self, key: str, default: str = "") -> str:
        """Get a setting value"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT value FROM settings WHERE key = ?", (key,))
            row = cursor.fetchone()
            return row['value'] if row else default

    def set_setting(self, key: str, value: str):
        """Set a setting value"""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                "INSERT OR REPLACE INTO settings (key, value) VALUES (?, ?)",
                (key, value)
            )
            conn.commit()
