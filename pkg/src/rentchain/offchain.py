"""Encrypted off-chain store for personal and listing data.

Three linked tables (users, advertises, photos) persist as one file each in
the data directory. Rows are encrypted with AES-256-GCM under a per-table
data key; the data key itself is stored wrapped by a master key loaded from a
keyfile, so deleting the keyfile cryptographically erases everything. No
plaintext personal value ever touches disk.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Callable, Optional
from uuid import uuid4

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .canonical import b64decode, b64encode, canonical_json

OPEN = "OPEN"
LOCKED = "LOCKED"
CLOSED = "CLOSED"

DEFAULT_MAX_PHOTO_BYTES = 5 * 1024 * 1024

# resolver(kind, ref) -> bool, with kind in {"property", "contract"}
ChainResolver = Callable[[str, str], bool]


class StoreError(Exception):
    code = "STORE_ERROR"


class NotFound(StoreError):
    code = "NOT_FOUND"


class DuplicateUser(StoreError):
    code = "DUPLICATE_USER"


class DanglingReference(StoreError):
    code = "DANGLING_REFERENCE"


class PhotoTooLarge(StoreError):
    code = "PHOTO_TOO_LARGE"


class KeyUnavailable(StoreError):
    code = "KEY_UNAVAILABLE"


def load_or_create_master_key(keyfile: Path) -> bytes:
    keyfile = Path(keyfile)
    if keyfile.exists():
        return b64decode(keyfile.read_text().strip())
    key = AESGCM.generate_key(bit_length=256)
    keyfile.parent.mkdir(parents=True, exist_ok=True)
    keyfile.write_text(b64encode(key))
    return key


class EncryptedTable:
    """One table file: a wrapped data key plus encrypted rows keyed by id."""

    def __init__(self, name: str, path: Path, master_key: bytes):
        self.name = name
        self.path = Path(path)
        self._master = AESGCM(master_key)
        self._lock = threading.RLock()
        self._rows: dict[str, str] = {}  # id -> b64(nonce + ciphertext)
        if self.path.exists():
            self._load()
        else:
            self._data_key = AESGCM.generate_key(bit_length=256)
            self._flush()
        self._aes = AESGCM(self._data_key)

    def _load(self) -> None:
        doc = json.loads(self.path.read_text())
        wrapped = b64decode(doc["wrapped_key"])
        try:
            self._data_key = self._master.decrypt(wrapped[:12], wrapped[12:], self.name.encode())
        except InvalidTag:
            raise KeyUnavailable(
                f"table {self.name}: data key cannot be unwrapped (wrong or missing master key)"
            )
        self._rows = dict(doc["rows"])

    def _flush(self) -> None:
        nonce = os.urandom(12)
        wrapped = nonce + self._master.encrypt(nonce, self._data_key, self.name.encode())
        doc = {"table": self.name, "wrapped_key": b64encode(wrapped), "rows": self._rows}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(canonical_json(doc))
        tmp.replace(self.path)

    def put(self, row_id: str, row: dict) -> None:
        with self._lock:
            nonce = os.urandom(12)
            blob = nonce + self._aes.encrypt(nonce, canonical_json(row).encode(), row_id.encode())
            self._rows[row_id] = b64encode(blob)
            self._flush()

    def get(self, row_id: str) -> Optional[dict]:
        with self._lock:
            blob_b64 = self._rows.get(row_id)
            if blob_b64 is None:
                return None
            blob = b64decode(blob_b64)
            try:
                plain = self._aes.decrypt(blob[:12], blob[12:], row_id.encode())
            except InvalidTag:
                raise KeyUnavailable(f"table {self.name}: row {row_id} cannot be decrypted")
            return json.loads(plain.decode())

    def delete(self, row_id: str) -> bool:
        with self._lock:
            existed = self._rows.pop(row_id, None) is not None
            if existed:
                self._flush()
            return existed

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._rows)

    def all_rows(self) -> list[dict]:
        return [row for row_id in self.ids() if (row := self.get(row_id)) is not None]


class OffchainDb:
    """User, advertise, and property-photo tables with on-chain reference checks."""

    def __init__(
        self,
        data_dir: Path,
        keyfile: Path,
        chain_resolver: Optional[ChainResolver] = None,
        max_photo_bytes: int = DEFAULT_MAX_PHOTO_BYTES,
    ):
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        master = load_or_create_master_key(keyfile)
        self.users = EncryptedTable("users", data_dir / "users.tbl", master)
        self.advertises = EncryptedTable("advertises", data_dir / "advertises.tbl", master)
        self.photos = EncryptedTable("photos", data_dir / "photos.tbl", master)
        self.chain_resolver = chain_resolver
        self.max_photo_bytes = max_photo_bytes

    # -- users ------------------------------------------------------------------

    def create_user(
        self, user_id: str, personal: Optional[dict] = None, app_attributes: Optional[dict] = None
    ) -> dict:
        if self.users.get(user_id) is not None:
            raise DuplicateUser(f"user row exists: {user_id}")
        row = {
            "user_id": user_id,
            "personal": personal or {},
            "app_attributes": app_attributes or {},
        }
        self.users.put(user_id, row)
        return row

    def get_user(self, user_id: str) -> dict:
        row = self.users.get(user_id)
        if row is None:
            raise NotFound(f"no user row: {user_id}")
        return row

    def update_user(
        self, user_id: str, personal: Optional[dict] = None, app_attributes: Optional[dict] = None
    ) -> dict:
        row = self.get_user(user_id)
        if personal:
            row["personal"].update(personal)
        if app_attributes:
            row["app_attributes"].update(app_attributes)
        self.users.put(user_id, row)
        return row

    def delete_user(self, user_id: str) -> None:
        if not self.users.delete(user_id):
            raise NotFound(f"no user row: {user_id}")

    # -- advertisements ------------------------------------------------------------

    def _check_ref(self, kind: str, ref: str) -> None:
        if self.chain_resolver is not None and not self.chain_resolver(kind, ref):
            raise DanglingReference(f"{kind} reference does not resolve on-chain: {ref}")

    def register_advertise(
        self,
        advertise_id: str,
        property_ref: str,
        contract_ref: str,
        photo_refs: Optional[list[str]] = None,
        **extra,
    ) -> dict:
        self._check_ref("property", property_ref)
        self._check_ref("contract", contract_ref)
        row = {
            "advertise_id": advertise_id,
            "property_ref": property_ref,
            "contract_ref": contract_ref,
            "status": OPEN,
            "photo_refs": photo_refs or [],
            **extra,
        }
        self.advertises.put(advertise_id, row)
        return row

    def get_advertise(self, advertise_id: str) -> dict:
        row = self.advertises.get(advertise_id)
        if row is None:
            raise NotFound(f"no advertisement: {advertise_id}")
        return row

    def update_advertise(self, advertise_id: str, **fields) -> dict:
        row = self.get_advertise(advertise_id)
        row.update(fields)
        self.advertises.put(advertise_id, row)
        return row

    def list_advertises(self, status: Optional[str] = OPEN) -> list[dict]:
        rows = self.advertises.all_rows()
        if status is None:
            return rows
        return [r for r in rows if r["status"] == status]

    def find_advertise_by_contract(self, contract_ref: str) -> Optional[dict]:
        for row in self.advertises.all_rows():
            if row["contract_ref"] == contract_ref:
                return row
        return None

    def delete_advertise(self, advertise_id: str) -> None:
        row = self.advertises.get(advertise_id)
        if row is None:
            return
        for photo_id in row.get("photo_refs", []):
            self.photos.delete(photo_id)
        self.advertises.delete(advertise_id)

    # -- photos -----------------------------------------------------------------------

    def register_property_photo(
        self, advertise_ref: str, image_bytes: bytes, pending_ok: bool = False
    ) -> str:
        if len(image_bytes) > self.max_photo_bytes:
            raise PhotoTooLarge(f"photo exceeds {self.max_photo_bytes} bytes")
        if not pending_ok and self.advertises.get(advertise_ref) is None:
            raise DanglingReference(f"no advertisement: {advertise_ref}")
        photo_id = f"photo-{uuid4().hex}"
        self.photos.put(
            photo_id,
            {"photo_id": photo_id, "advertise_ref": advertise_ref, "image": b64encode(image_bytes)},
        )
        return photo_id

    def get_photo(self, photo_id: str) -> tuple[str, bytes]:
        row = self.photos.get(photo_id)
        if row is None:
            raise NotFound(f"no photo: {photo_id}")
        return row["advertise_ref"], b64decode(row["image"])

    # -- export -----------------------------------------------------------------------

    def export_user(self, user_id: str) -> dict:
        """Single JSON document with the user's row, for data portability."""
        return {"user": self.get_user(user_id)}
