"""User credentials, wallets, the encrypted-id protocol, and contract signing.

A single in-process certificate authority issues one RSA keypair per user,
bound to an X.509 certificate whose subject is the user id. The same keypair
serves both roles the platform needs: OAEP encryption for the on-chain
encrypted-id record that proves identity at login and before every write, and
PKCS1v15 signatures over the SHA-256 digest of a contract's canonical digest
string. Identities live in two file-system wallets: the public wallet holds
certificates only, the private wallet adds the private key.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.x509.oid import NameOID

from .canonical import b64decode, b64encode, canonical_json

PUBLIC = "public"
PRIVATE = "private"

RSA_KEY_SIZE = 2048
CERT_LIFETIME_DAYS = 3650

TERM_LABELS = {
    "FIXED_TERM": "fixed-term",
    "MONTH_TO_MONTH": "month-to-month",
    "SHORT_TERM": "short-term",
    "ROOM": "room",
}


class IdentityError(Exception):
    code = "IDENTITY_ERROR"


class DuplicateUser(IdentityError):
    code = "DUPLICATE_USER"


class MissingPrivateIdentity(IdentityError):
    code = "MISSING_PRIVATE_IDENTITY"


class MissingField(IdentityError):
    code = "MISSING_FIELD"


class WalletViolation(IdentityError):
    code = "WALLET_VIOLATION"


@dataclass
class PublicIdentity:
    user_id: str
    certificate_pem: str

    def certificate(self) -> x509.Certificate:
        return x509.load_pem_x509_certificate(self.certificate_pem.encode())

    def to_document(self) -> str:
        return canonical_json(
            {
                "kind": PUBLIC,
                "user_id": self.user_id,
                "certificate": b64encode(self.certificate_pem.encode()),
            }
        )


@dataclass
class PrivateIdentity:
    user_id: str
    certificate_pem: str
    private_key_pem: str

    def certificate(self) -> x509.Certificate:
        return x509.load_pem_x509_certificate(self.certificate_pem.encode())

    def private_key(self) -> rsa.RSAPrivateKey:
        return serialization.load_pem_private_key(self.private_key_pem.encode(), password=None)

    def to_document(self) -> str:
        return canonical_json(
            {
                "kind": PRIVATE,
                "user_id": self.user_id,
                "certificate": b64encode(self.certificate_pem.encode()),
                "private_key": b64encode(self.private_key_pem.encode()),
            }
        )


def _identity_from_document(doc: str):
    data = json.loads(doc)
    cert_pem = b64decode(data["certificate"]).decode()
    if data["kind"] == PRIVATE:
        key_pem = b64decode(data["private_key"]).decode()
        return PrivateIdentity(data["user_id"], cert_pem, key_pem)
    return PublicIdentity(data["user_id"], cert_pem)


class Wallet:
    """File-system identity store: one `<userId>.id` JSON document per user."""

    def __init__(self, kind: str, root: Path):
        assert kind in (PUBLIC, PRIVATE)
        self.kind = kind
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, user_id: str) -> Path:
        return self.root / f"{user_id}.id"

    def exists(self, user_id: str) -> bool:
        return self._path(user_id).exists()

    def put(self, identity) -> None:
        if self.kind == PUBLIC and isinstance(identity, PrivateIdentity):
            raise WalletViolation("public wallet must not hold private key material")
        if self.kind == PRIVATE and not isinstance(identity, PrivateIdentity):
            raise WalletViolation("private wallet holds private identities only")
        self._path(identity.user_id).write_text(identity.to_document())

    def get(self, user_id: str):
        path = self._path(user_id)
        if not path.exists():
            if self.kind == PRIVATE:
                raise MissingPrivateIdentity(f"no private identity for {user_id}")
            raise IdentityError(f"no public identity for {user_id}")
        return _identity_from_document(path.read_text())

    def delete(self, user_id: str) -> None:
        self._path(user_id).unlink(missing_ok=True)

    def list_users(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.id"))


class CertificateAuthority:
    """Single root CA issuing user certificates; key material kept in one keyfile."""

    def __init__(self, key_pem: str, cert_pem: str):
        self._key = serialization.load_pem_private_key(key_pem.encode(), password=None)
        self.root_cert_pem = cert_pem
        self._lock = threading.Lock()

    @classmethod
    def load_or_create(cls, keyfile: Path, name: str = "rentchain-root-ca") -> "CertificateAuthority":
        keyfile = Path(keyfile)
        if keyfile.exists():
            data = json.loads(keyfile.read_text())
            return cls(b64decode(data["key"]).decode(), b64decode(data["cert"]).decode())
        key = rsa.generate_private_key(public_exponent=65537, key_size=RSA_KEY_SIZE)
        subject = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, name)])
        now = datetime.now(timezone.utc)
        cert = (
            x509.CertificateBuilder()
            .subject_name(subject)
            .issuer_name(subject)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now)
            .not_valid_after(now + timedelta(days=CERT_LIFETIME_DAYS))
            .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
            .sign(key, hashes.SHA256())
        )
        key_pem = key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ).decode()
        cert_pem = cert.public_bytes(serialization.Encoding.PEM).decode()
        keyfile.parent.mkdir(parents=True, exist_ok=True)
        keyfile.write_text(
            canonical_json({"key": b64encode(key_pem.encode()), "cert": b64encode(cert_pem.encode())})
        )
        return cls(key_pem, cert_pem)

    def issue(self, user_id: str) -> tuple[str, str]:
        """Issue a certificate + private key for user_id; returns PEM pair."""
        with self._lock:
            key = rsa.generate_private_key(public_exponent=65537, key_size=RSA_KEY_SIZE)
            root = x509.load_pem_x509_certificate(self.root_cert_pem.encode())
            now = datetime.now(timezone.utc)
            cert = (
                x509.CertificateBuilder()
                .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, user_id)]))
                .issuer_name(root.subject)
                .public_key(key.public_key())
                .serial_number(x509.random_serial_number())
                .not_valid_before(now)
                .not_valid_after(now + timedelta(days=CERT_LIFETIME_DAYS))
                .sign(self._key, hashes.SHA256())
            )
        cert_pem = cert.public_bytes(serialization.Encoding.PEM).decode()
        key_pem = key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ).decode()
        return cert_pem, key_pem


def certificate_subject(cert_pem: str) -> str:
    cert = x509.load_pem_x509_certificate(cert_pem.encode())
    return cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)[0].value


def verify_issued_by(cert_pem: str, ca_root_pem: str) -> bool:
    cert = x509.load_pem_x509_certificate(cert_pem.encode())
    root = x509.load_pem_x509_certificate(ca_root_pem.encode())
    try:
        root.public_key().verify(
            cert.signature,
            cert.tbs_certificate_bytes,
            padding.PKCS1v15(),
            cert.signature_hash_algorithm,
        )
        return True
    except InvalidSignature:
        return False


class IdentityRegistry:
    """Issues credentials and maintains the paired public/private wallets."""

    def __init__(self, ca: CertificateAuthority, wallet_root: Path):
        self.ca = ca
        self.public_wallet = Wallet(PUBLIC, Path(wallet_root) / PUBLIC)
        self.private_wallet = Wallet(PRIVATE, Path(wallet_root) / PRIVATE)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _user_lock(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(user_id, threading.Lock())

    def register_user(self, user_id: str) -> tuple[PublicIdentity, PrivateIdentity]:
        with self._user_lock(user_id):
            if self.public_wallet.exists(user_id) or self.private_wallet.exists(user_id):
                raise DuplicateUser(f"user already registered: {user_id}")
            cert_pem, key_pem = self.ca.issue(user_id)
            public = PublicIdentity(user_id, cert_pem)
            private = PrivateIdentity(user_id, cert_pem, key_pem)
            self.public_wallet.put(public)
            self.private_wallet.put(private)
            return public, private

    def is_registered(self, user_id: str) -> bool:
        return self.public_wallet.exists(user_id)

    def remove_user(self, user_id: str) -> None:
        with self._user_lock(user_id):
            self.public_wallet.delete(user_id)
            self.private_wallet.delete(user_id)


# -- encrypted-id protocol -----------------------------------------------------

ENCRYPTED_ID_PREFIX = "encryptedid:"

_OAEP = padding.OAEP(
    mgf=padding.MGF1(algorithm=hashes.SHA256()), algorithm=hashes.SHA256(), label=None
)


def encrypted_id_key(user_id: str) -> str:
    return ENCRYPTED_ID_PREFIX + user_id


def make_encrypted_id(user_id: str, certificate_pem: str) -> dict:
    """Encrypt user_id under the certificate's public key; record for the chain."""
    cert = x509.load_pem_x509_certificate(certificate_pem.encode())
    ciphertext = cert.public_key().encrypt(user_id.encode(), _OAEP)
    return {"key": encrypted_id_key(user_id), "ciphertext": b64encode(ciphertext)}


def decrypt_encrypted_id(record: dict, private_identity: PrivateIdentity) -> Optional[str]:
    try:
        return private_identity.private_key().decrypt(b64decode(record["ciphertext"]), _OAEP).decode()
    except (ValueError, KeyError):
        return None


def verify_encrypted_id(user_id: str, private_wallet: Wallet, record: dict) -> bool:
    """True iff the wallet's private key decrypts the record back to user_id.

    Raises MissingPrivateIdentity when the wallet has no entry for the user,
    which callers must treat as a failed login.
    """
    private = private_wallet.get(user_id)  # raises MissingPrivateIdentity
    return decrypt_encrypted_id(record, private) == user_id


# -- contract digital signatures -------------------------------------------------

DIGEST_FIELDS = ("contract_id", "property_id", "term", "initial_date", "final_date", "conditions")


def contract_digest_string(contract: dict) -> str:
    """Canonical pipe-delimited digest string both parties sign.

    Field order is fixed; dates are ISO-8601; the term uses its lowercase
    hyphenated label. Any missing mandatory field raises MissingField.
    """
    values = []
    for name in DIGEST_FIELDS:
        value = contract.get(name)
        if value is None or value == "":
            raise MissingField(f"contract missing mandatory field: {name}")
        if name == "term":
            value = TERM_LABELS.get(value, value)
        values.append(str(value))
    return "|".join(values)


@dataclass
class SignatureEnvelope:
    digest_algorithm: str
    signature: str  # base64
    signer_certificate_pem: str

    def to_dict(self) -> dict:
        return {
            "digest_algorithm": self.digest_algorithm,
            "signature": self.signature,
            "signer_certificate": b64encode(self.signer_certificate_pem.encode()),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureEnvelope":
        return cls(
            digest_algorithm=d["digest_algorithm"],
            signature=d["signature"],
            signer_certificate_pem=b64decode(d["signer_certificate"]).decode(),
        )


def sign_contract(contract: dict, private_identity: PrivateIdentity) -> SignatureEnvelope:
    message = contract_digest_string(contract).encode()
    signature = private_identity.private_key().sign(message, padding.PKCS1v15(), hashes.SHA256())
    return SignatureEnvelope("SHA-256", b64encode(signature), private_identity.certificate_pem)


def verify_contract_signature(
    contract: dict, envelope: SignatureEnvelope, ca_root_pem: Optional[str] = None
) -> bool:
    """True iff the signature verifies over the contract's digest string.

    When ca_root_pem is given, the signer certificate must also chain to it.
    """
    if ca_root_pem is not None and not verify_issued_by(envelope.signer_certificate_pem, ca_root_pem):
        return False
    try:
        message = contract_digest_string(contract).encode()
    except MissingField:
        return False
    cert = x509.load_pem_x509_certificate(envelope.signer_certificate_pem.encode())
    try:
        cert.public_key().verify(
            b64decode(envelope.signature), message, padding.PKCS1v15(), hashes.SHA256()
        )
        return True
    except InvalidSignature:
        return False
