"""HTTP/JSON API over the platform: the blockchain-interface service, the
records service, and the ops/admin surface, mountable together or separately.

Every endpoint except token issuance requires a bearer token; the verified
token subject is the acting user for all downstream checks, including the
caller id injected as the first chaincode argument on writes.
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import APIRouter, Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .. import chaincode as cc
from .. import identity as idm
from .. import ledger as ledger_mod
from .. import offchain, paynet
from ..canonical import b64decode
from ..ledger import LedgerUnavailable
from .auth import InvalidToken
from .config import CHAIN_SERVICE, RECORDS_SERVICE
from .platform import GatewayError, Platform

_SEMANTIC_STATUS = [
    (InvalidToken, 401),
    (idm.MissingPrivateIdentity, 403),
    (idm.DuplicateUser, 409),
    (cc.NotOwner, 403),
    (cc.NotParty, 403),
    (cc.NotFound, 404),
    (cc.ContractNotFound, 404),
    (cc.AdvertisementLocked, 409),
    (cc.NotPending, 409),
    (cc.ActiveContractConstraint, 409),
    (cc.PendingPaymentConstraint, 409),
    (cc.AlreadyExists, 409),
    (cc.DuplicateProperty, 409),
    (cc.ChaincodeError, 422),
    (offchain.DuplicateUser, 409),
    (offchain.NotFound, 404),
    (offchain.PhotoTooLarge, 413),
    (offchain.DanglingReference, 422),
    (paynet.InsufficientFunds, 402),
    (paynet.PaynetError, 422),
    (LedgerUnavailable, 503),
    (idm.IdentityError, 422),
    (ledger_mod.LedgerError, 422),
]

# exception bases wired into the app's handler table; lookup walks the MRO,
# so one registration per hierarchy suffices
_HANDLED_BASES = (
    GatewayError,
    InvalidToken,
    idm.IdentityError,
    cc.ChaincodeError,
    offchain.StoreError,
    paynet.PaynetError,
    ledger_mod.LedgerError,
)


def _status_for(exc: Exception) -> int:
    if isinstance(exc, GatewayError):
        return exc.http_status
    for klass, status in _SEMANTIC_STATUS:
        if isinstance(exc, klass):
            return status
    return 500


def _error_body(exc: Exception) -> dict:
    return {"error": getattr(exc, "code", "INTERNAL_ERROR"), "message": str(exc)}


class TokenRequest(BaseModel):
    user_id: str
    ttl_seconds: Optional[int] = None


class EvaluateRequest(BaseModel):
    function: str
    args: list[str] = Field(default_factory=list)


class PublishRequest(BaseModel):
    property: dict
    contract: dict
    photos: list[str] = Field(default_factory=list)  # base64 image blobs
    deadline_hours: Optional[float] = None


class ProposalRequest(BaseModel):
    amount: int


class DecisionRequest(BaseModel):
    decision: str
    payment_details: Optional[dict] = None


class PersonalUpdate(BaseModel):
    personal: dict


class AdvanceTimeRequest(BaseModel):
    seconds: float


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="rentchain gateway", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.platform = platform

    async def handle_platform_error(request: Request, exc: Exception):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    for base in _HANDLED_BASES:
        app.add_exception_handler(base, handle_platform_error)

    def current_user(authorization: Optional[str] = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise InvalidToken("missing bearer token")
        return platform.auth.verify(authorization.removeprefix("Bearer "))

    auth_router = APIRouter()

    @auth_router.post("/auth/token")
    def issue_token(body: TokenRequest):
        token = platform.issue_token(body.user_id, body.ttl_seconds)
        return {"token": token.token, "expires_at": token.expiry.isoformat()}

    chain_router = APIRouter()

    @chain_router.post("/signup")
    def signup(user_id: str = Depends(current_user)):
        return platform.signup(user_id)

    @chain_router.post("/login")
    def login(user_id: str = Depends(current_user)):
        return platform.login(user_id)

    @chain_router.post("/evaluate")
    def evaluate(body: EvaluateRequest, user_id: str = Depends(current_user)):
        payload = platform.evaluate_as(user_id, body.function, body.args)
        try:
            return {"result": json.loads(payload)}
        except (TypeError, ValueError):
            return {"result": payload}

    @chain_router.post("/submit")
    def submit(body: EvaluateRequest, user_id: str = Depends(current_user)):
        try:
            payload = platform.submit_as(user_id, body.function, body.args)
        except cc.ChaincodeError as exc:
            # rejected by the smart contract: surface the chaincode error code
            return JSONResponse(status_code=422, content=_error_body(exc))
        try:
            return {"result": json.loads(payload)}
        except (TypeError, ValueError):
            return {"result": payload}

    records_router = APIRouter()

    @records_router.get("/advertisements")
    def list_advertisements(status: str = "OPEN", user_id: str = Depends(current_user)):
        wanted = None if status in ("all", "ALL") else status
        return {"advertisements": platform.list_advertisements(wanted)}

    @records_router.post("/advertisements")
    def publish(body: PublishRequest, user_id: str = Depends(current_user)):
        photos = [b64decode(p) for p in body.photos]
        return platform.publish_advertisement(
            user_id, body.property, body.contract, photos, body.deadline_hours
        )

    @records_router.post("/advertisements/{advertise_id}/proposals")
    def propose(advertise_id: str, body: ProposalRequest, user_id: str = Depends(current_user)):
        return platform.submit_proposal(user_id, advertise_id, body.amount)

    @records_router.post("/proposals/{proposal_id}/decision")
    def decide(proposal_id: str, body: DecisionRequest, user_id: str = Depends(current_user)):
        return platform.decide_proposal(user_id, proposal_id, body.decision, body.payment_details)

    @records_router.post("/payments/{payment_id}/pay")
    def pay(payment_id: str, user_id: str = Depends(current_user)):
        return platform.pay_installment(user_id, payment_id)

    @records_router.post("/payments/{payment_id}/poll")
    def poll(payment_id: str, user_id: str = Depends(current_user)):
        return platform.poll_and_confirm(user_id, payment_id)

    @records_router.get("/me")
    def get_me(user_id: str = Depends(current_user)):
        return platform.get_me(user_id)

    @records_router.put("/me")
    def put_me(body: PersonalUpdate, user_id: str = Depends(current_user)):
        return platform.update_me(user_id, body.personal)

    @records_router.get("/me/export")
    def export_me(user_id: str = Depends(current_user)):
        return platform.export_me(user_id)

    @records_router.delete("/me")
    def delete_me(user_id: str = Depends(current_user)):
        return platform.delete_me(user_id)

    admin_router = APIRouter()

    @admin_router.get("/admin/time")
    def get_time(user_id: str = Depends(current_user)):
        return {"now": platform.clock.now.isoformat()}

    @admin_router.post("/admin/time/advance")
    def advance_time(body: AdvanceTimeRequest, user_id: str = Depends(current_user)):
        return platform.advance_time(body.seconds)

    app.include_router(auth_router)
    if CHAIN_SERVICE in platform.config.services:
        app.include_router(chain_router)
    if RECORDS_SERVICE in platform.config.services:
        app.include_router(records_router)
    app.include_router(admin_router)
    return app
