"""Pluggable authorization provider.

The simulated provider stands in for the external OAuth flow: it mints
HMAC-signed bearer tokens binding a subject and an expiry, and verifies them
against the simulated clock. Every request except token issuance must carry a
valid token whose subject is the acting user.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Protocol

from ..canonical import b64decode, b64encode


class InvalidToken(Exception):
    code = "INVALID_TOKEN"


@dataclass
class AuthToken:
    subject: str
    issuer: str
    expiry: datetime
    token: str


class AuthProvider(Protocol):
    def issue(self, user_id: str, ttl_seconds: int | None = None) -> AuthToken: ...

    def verify(self, token: str) -> str:
        """Return the subject of a valid, unexpired token; raise InvalidToken."""


class SimulatedAuthProvider:
    issuer = "simulated-oauth"

    def __init__(self, secret: str, clock: Callable[[], datetime], default_ttl: int = 3600):
        self._secret = secret.encode()
        self._clock = clock
        self._default_ttl = default_ttl

    def _sign(self, payload: bytes) -> str:
        return hmac.new(self._secret, payload, hashlib.sha256).hexdigest()

    def issue(self, user_id: str, ttl_seconds: int | None = None) -> AuthToken:
        expiry = self._clock() + timedelta(seconds=ttl_seconds or self._default_ttl)
        payload = json.dumps(
            {"sub": user_id, "iss": self.issuer, "exp": expiry.isoformat()},
            sort_keys=True,
        ).encode()
        token = b64encode(payload) + "." + self._sign(payload)
        return AuthToken(subject=user_id, issuer=self.issuer, expiry=expiry, token=token)

    def verify(self, token: str) -> str:
        try:
            payload_b64, signature = token.split(".", 1)
            payload = b64decode(payload_b64)
        except Exception:
            raise InvalidToken("malformed token")
        if not hmac.compare_digest(signature, self._sign(payload)):
            raise InvalidToken("bad token signature")
        claims = json.loads(payload)
        if datetime.fromisoformat(claims["exp"]) < self._clock():
            raise InvalidToken("token expired")
        return claims["sub"]


class ExternalAuthProvider:
    """Placeholder for a real OAuth 2.0 integration; verification is injected."""

    def __init__(self, verifier: Callable[[str], str]):
        self._verifier = verifier

    def issue(self, user_id: str, ttl_seconds: int | None = None) -> AuthToken:
        raise InvalidToken("external provider issues tokens out of band")

    def verify(self, token: str) -> str:
        return self._verifier(token)
