"""Pluggable notifier; the default keeps messages in memory and on disk.

Real mail delivery is out of scope: payment details and decision notices go
through this interface so tests and the UI can observe them.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional, Protocol


class Notifier(Protocol):
    def send(self, user_id: str, email: str, subject: str, body: dict) -> None: ...


class InMemoryNotifier:
    def __init__(self, log_path: Optional[Path] = None):
        self.messages: list[dict] = []
        self.log_path = Path(log_path) if log_path else None
        self._lock = threading.Lock()

    def send(self, user_id: str, email: str, subject: str, body: dict) -> None:
        message = {"user_id": user_id, "email": email, "subject": subject, "body": body}
        with self._lock:
            self.messages.append(message)
            if self.log_path is not None:
                self.log_path.parent.mkdir(parents=True, exist_ok=True)
                with self.log_path.open("a") as fh:
                    fh.write(json.dumps(message, sort_keys=True) + "\n")

    def for_user(self, user_id: str) -> list[dict]:
        with self._lock:
            return [m for m in self.messages if m["user_id"] == user_id]
