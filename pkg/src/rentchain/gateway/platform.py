"""Platform wiring and the rental-process orchestration.

Builds the ledger, chaincode, identity registry, off-chain store, payment
network, and auth provider from one config, then implements the composite
operations the HTTP layer exposes: signup/login with the encrypted-id
protocol, advertisement publication, proposals, decisions, payments with
confirmation polling, and the GDPR endpoints.

Multi-store flows write the chain first and the database last; when a later
step fails, chain assets created earlier in the flow are deleted through
their own chaincode functions before the error propagates.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timedelta
from typing import Optional
from uuid import uuid4

from .. import chaincode as cc
from .. import identity as idm
from .. import offchain
from ..canonical import canonical_json
from ..ledger import ChannelConfig, Ledger, LedgerUnavailable
from ..paynet import SimClock, StablecoinNetwork, TOKENS, TX_CONFIRMED, TX_FAILED
from .auth import InvalidToken, SimulatedAuthProvider
from .config import PlatformConfig
from .notify import InMemoryNotifier

REQUIRED_PERSONAL_FIELDS = ("name", "email", "contact", "identification")


class GatewayError(Exception):
    code = "GATEWAY_ERROR"
    http_status = 400


class IdentityVerificationFailed(GatewayError):
    code = "IDENTITY_VERIFICATION_FAILED"
    http_status = 403


class ProfileIncomplete(GatewayError):
    code = "PROFILE_INCOMPLETE"
    http_status = 403


class NotReadOnly(GatewayError):
    code = "NOT_READ_ONLY"
    http_status = 400


class NotStateChanging(GatewayError):
    code = "NOT_STATE_CHANGING"
    http_status = 400


class DeadlinePassed(GatewayError):
    code = "DEADLINE_PASSED"
    http_status = 409


class NothingDue(GatewayError):
    code = "NOTHING_DUE"
    http_status = 409


class ValidationFailure(GatewayError):
    code = "VALIDATION_FAILURE"
    http_status = 400


class ChaincodeRejection(GatewayError):
    """A committed-stage rejection (endorsement policy or MVCC flag)."""

    code = "CHAINCODE_REJECTION"
    http_status = 422

    def __init__(self, flag: str):
        super().__init__(f"transaction invalidated: {flag}")
        self.flag = flag


class ChainClient:
    """Submits and evaluates chaincode calls over the simulated channel.

    Writes are endorsed by the writer org and serialized through one lock so
    a submission never conflicts with itself; reads go through the query org.
    """

    def __init__(self, ledger: Ledger, read_org: str, write_org: str):
        self.ledger = ledger
        self.read_org = read_org
        self.write_org = write_org
        self.available = True
        self._submit_lock = threading.Lock()

    def _check_available(self) -> None:
        if not self.available:
            raise LedgerUnavailable("the blockchain network is not active")

    def evaluate(self, function: str, args: list[str], creator: str = "") -> str:
        self._check_available()
        draft = self.ledger.new_draft(creator, self.read_org, function, args)
        self.ledger.endorse(draft, self.read_org)
        return draft.payload

    def submit(self, creator: str, function: str, args: list[str]) -> str:
        self._check_available()
        with self._submit_lock:
            draft = self.ledger.new_draft(creator, self.write_org, function, args)
            self.ledger.endorse(draft, self.write_org)
            block = self.ledger.order([draft])
            flags = self.ledger.validate_and_commit(block)
        if flags[0] != "VALID":
            raise ChaincodeRejection(flags[0])
        return draft.payload


class Platform:
    def __init__(self, config: PlatformConfig):
        self.config = config
        self.clock = SimClock(datetime.fromisoformat(config.start_time))
        self.ca = idm.CertificateAuthority.load_or_create(config.path("ca_keyfile"))
        self.registry = idm.IdentityRegistry(self.ca, config.path("wallet_root"))
        self.chaincode = cc.RentalChaincode(self.ca.root_cert_pem)
        self.ledger = Ledger(
            ChannelConfig.default(config.channel),
            self.chaincode,
            config.path("ledger_log"),
            lambda: self.clock.now,
        )
        self.chain = ChainClient(self.ledger, config.read_org, config.write_org)
        self.db = offchain.OffchainDb(
            config.path("db_dir"),
            config.path("db_keyfile"),
            chain_resolver=self._resolve_on_chain,
            max_photo_bytes=config.max_photo_bytes,
        )
        self.paynet = StablecoinNetwork(self.clock, config.paynet_seed, config.latency_range)
        self.auth = SimulatedAuthProvider(
            config.auth_secret, lambda: self.clock.now, config.token_ttl_seconds
        )
        self.notifier = InMemoryNotifier(config.path("notifier_log"))
        self.wallets: dict[str, object] = {}
        self._ad_locks: dict[str, threading.Lock] = {}
        self._payment_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.scheduler_id = "system:scheduler"
        self._bootstrap_scheduler()
        self.paynet.register_cron(self._run_monthly_payments)
        self._restore_wallets()

    # -- wiring helpers ---------------------------------------------------------

    def _resolve_on_chain(self, kind: str, ref: str) -> bool:
        return self.ledger.query_state(f"{kind}:{ref}") is not None

    def _bootstrap_scheduler(self) -> None:
        if not self.registry.is_registered(self.scheduler_id):
            self.registry.register_user(self.scheduler_id)

    def _restore_wallets(self) -> None:
        # The payment network is in-memory; re-fund accounts for known users
        # so a restarted service keeps working addresses.
        for user_id in self.db.users.ids():
            if user_id not in self.wallets:
                self._create_wallet(user_id)

    def _create_wallet(self, user_id: str):
        wallet = self.paynet.create_account(dict(self.config.initial_funding))
        self.wallets[user_id] = wallet
        try:
            self.db.update_user(user_id, app_attributes={"wallet_address": wallet.address})
        except offchain.NotFound:
            pass
        return wallet

    def _lock_for(self, registry: dict, key: str) -> threading.Lock:
        with self._locks_guard:
            return registry.setdefault(key, threading.Lock())

    def _public_cert(self, user_id: str) -> str:
        return self.registry.public_wallet.get(user_id).certificate_pem

    def _private_identity(self, user_id: str) -> idm.PrivateIdentity:
        return self.registry.private_wallet.get(user_id)

    def verify_identity(self, user_id: str) -> None:
        """The second security barrier: the on-chain encrypted id must decrypt
        back to the caller's id with the private-wallet key."""
        try:
            raw = self.chain.evaluate("ReadAsset", [idm.encrypted_id_key(user_id)])
        except cc.NotFound:
            raise IdentityVerificationFailed(f"no encrypted id on chain for {user_id}")
        record = json.loads(raw)
        try:
            if not idm.verify_encrypted_id(user_id, self.registry.private_wallet, record):
                raise IdentityVerificationFailed("encrypted id does not match the user id")
        except idm.MissingPrivateIdentity:
            raise IdentityVerificationFailed(f"private wallet missing for {user_id}")

    def submit_as(self, user_id: str, function: str, args: list[str], verify: bool = True) -> str:
        """Run a state-changing function with the verified user id prepended."""
        if self.chaincode.is_read_only(function):
            raise NotStateChanging(f"{function} is read-only; use evaluate")
        if verify:
            self.verify_identity(user_id)
        creator = self._public_cert(user_id)
        return self.chain.submit(creator, function, [user_id, *args])

    def evaluate_as(self, user_id: Optional[str], function: str, args: list[str]) -> str:
        if not self.chaincode.is_read_only(function):
            raise NotReadOnly(f"{function} changes state; use submit")
        creator = self._public_cert(user_id) if user_id and self.registry.is_registered(user_id) else ""
        return self.chain.evaluate(function, args, creator)

    # -- auth -----------------------------------------------------------------------

    def issue_token(self, user_id: str, ttl_seconds: Optional[int] = None):
        if self.config.auth_mode != "simulated":
            raise InvalidToken("token issuance is external in this deployment")
        return self.auth.issue(user_id, ttl_seconds)

    # -- signup / login ----------------------------------------------------------------

    def signup(self, user_id: str) -> dict:
        if self.registry.is_registered(user_id):
            raise idm.DuplicateUser(f"user already registered: {user_id}")
        public, _private = self.registry.register_user(user_id)
        record = idm.make_encrypted_id(user_id, public.certificate_pem)
        try:
            key = self.submit_as(user_id, "CreateEncryptedId", [canonical_json(record)], verify=False)
        except Exception:
            self.registry.remove_user(user_id)
            raise
        try:
            self.db.create_user(user_id, personal={}, app_attributes={"registration_complete": False})
        except Exception:
            self.submit_as(user_id, "EraseUserData", [], verify=False)
            self.registry.remove_user(user_id)
            raise
        wallet = self._create_wallet(user_id)
        return {"user_id": user_id, "encrypted_id_key": key, "wallet_address": wallet.address}

    def login(self, user_id: str) -> dict:
        self.verify_identity(user_id)
        return {"user_id": user_id, "status": "ok"}

    # -- profile ------------------------------------------------------------------------

    def _profile_complete(self, user_id: str) -> bool:
        try:
            row = self.db.get_user(user_id)
        except offchain.NotFound:
            return False
        personal = row.get("personal", {})
        return all(personal.get(f) for f in REQUIRED_PERSONAL_FIELDS)

    def _require_profile(self, user_id: str) -> None:
        if not self._profile_complete(user_id):
            raise ProfileIncomplete(
                "personal information must be registered before using the marketplace"
            )

    def get_me(self, user_id: str) -> dict:
        row = self.db.get_user(user_id)
        wallet = self.wallets.get(user_id)
        if wallet is not None:
            row["wallet"] = {
                "address": wallet.address,
                "balances": {t: wallet.balance(t) for t in TOKENS},
            }
        return row

    def update_me(self, user_id: str, personal: dict) -> dict:
        unknown = set(personal) - set(REQUIRED_PERSONAL_FIELDS)
        if unknown:
            raise ValidationFailure(f"unknown personal fields: {sorted(unknown)}")
        self.db.update_user(user_id, personal=personal)
        complete = self._profile_complete(user_id)
        return self.db.update_user(user_id, app_attributes={"registration_complete": complete})

    # -- publication -----------------------------------------------------------------------

    def publish_advertisement(
        self,
        user_id: str,
        property_details: dict,
        contract_details: dict,
        photos: Optional[list[bytes]] = None,
        deadline_hours: Optional[float] = None,
    ) -> dict:
        self._require_profile(user_id)
        property_id = f"prop-{uuid4().hex[:12]}"
        contract_id = f"con-{uuid4().hex[:12]}"
        advertise_id = f"ad-{uuid4().hex[:12]}"
        contract = {
            "contract_id": contract_id,
            "property_id": property_id,
            "landlord_id": user_id,
            "term": contract_details.get("term"),
            "initial_date": contract_details.get("initial_date"),
            "final_date": contract_details.get("final_date"),
            "conditions": contract_details.get("conditions", ""),
            "rent_amount": contract_details.get("rent_amount"),
        }
        signature = idm.sign_contract(contract, self._private_identity(user_id))
        contract["landlord_signature"] = signature.to_dict()
        prop = {
            "property_id": property_id,
            "landlord_id": user_id,
            "kind": property_details.get("kind"),
            "typology": property_details.get("typology"),
            "address_details": property_details.get("address_details"),
        }
        created_contract = created_property = False
        photo_ids: list[str] = []
        try:
            # the five publication steps, in the platform's measured order
            self.submit_as(user_id, "CreateContractAsset", [canonical_json(contract)])
            created_contract = True
            self.submit_as(user_id, "CreatePropertyAsset", [canonical_json(prop)])
            created_property = True
            for image in photos or []:
                photo_ids.append(
                    self.db.register_property_photo(advertise_id, image, pending_ok=True)
                )
            self.db.get_user(user_id)
            self.db.register_advertise(
                advertise_id,
                property_ref=property_id,
                contract_ref=contract_id,
                photo_refs=photo_ids,
                deadline_hours=deadline_hours or self.config.default_payment_deadline_hours,
            )
        except Exception:
            for photo_id in photo_ids:
                self.db.photos.delete(photo_id)
            if created_property:
                self.submit_as(user_id, "DeletePropertyAsset", [property_id], verify=False)
            if created_contract:
                self.submit_as(user_id, "DeleteContractAsset", [contract_id], verify=False)
            raise
        return {"advertise_id": advertise_id, "property_id": property_id, "contract_id": contract_id}

    def list_advertisements(self, status: Optional[str] = offchain.OPEN) -> list[dict]:
        cards = []
        for row in self.db.list_advertises(status):
            contract_raw = self.ledger.query_state(cc.contract_key(row["contract_ref"]))
            property_raw = self.ledger.query_state(cc.property_key(row["property_ref"]))
            if contract_raw is None or property_raw is None:
                continue
            contract = json.loads(contract_raw)
            contract.pop("landlord_signature", None)
            contract.pop("tenant_signature", None)
            cards.append(
                {
                    "advertise_id": row["advertise_id"],
                    "status": row["status"],
                    "photo_refs": row.get("photo_refs", []),
                    "property": json.loads(property_raw),
                    "contract": contract,
                }
            )
        return cards

    # -- proposals --------------------------------------------------------------------------

    def submit_proposal(self, user_id: str, advertise_id: str, amount: int) -> dict:
        self._require_profile(user_id)
        ad = self.db.get_advertise(advertise_id)
        if ad["status"] != offchain.OPEN:
            raise cc.AdvertisementLocked("advertisement is temporarily unavailable")
        if not isinstance(amount, int) or amount <= 0:
            raise ValidationFailure("amount must be a positive integer of micro-units")
        contract = json.loads(
            self.chain.evaluate("ReadAsset", [cc.contract_key(ad["contract_ref"])])
        )
        signature = idm.sign_contract(contract, self._private_identity(user_id))
        proposal_id = f"pro-{uuid4().hex[:12]}"
        proposal = {
            "proposal_id": proposal_id,
            "contract_id": ad["contract_ref"],
            "tenant_id": user_id,
            "amount": amount,
            "tenant_signature": signature.to_dict(),
        }
        # the three proposal steps, in the platform's measured order
        self.submit_as(user_id, "CreateProposal", [canonical_json(proposal)])
        try:
            row = self.db.get_user(user_id)
            proposals = row["app_attributes"].get("proposals", [])
            self.db.update_user(user_id, app_attributes={"proposals": proposals + [proposal_id]})
            self.db.update_advertise(
                advertise_id, proposal_refs=ad.get("proposal_refs", []) + [proposal_id]
            )
        except Exception:
            self.submit_as(user_id, "DeleteProposal", [proposal_id], verify=False)
            raise
        return {"proposal_id": proposal_id}

    def decide_proposal(
        self,
        user_id: str,
        proposal_id: str,
        decision: str,
        payment_details: Optional[dict] = None,
    ) -> dict:
        if decision not in ("ACCEPT", "REJECT"):
            raise ValidationFailure("decision must be ACCEPT or REJECT")
        proposal = json.loads(self.chain.evaluate("ReadAsset", [cc.proposal_key(proposal_id)]))
        contract = json.loads(
            self.chain.evaluate("ReadAsset", [cc.contract_key(proposal["contract_id"])])
        )
        if user_id != contract["landlord_id"]:
            raise cc.NotOwner("only the advertisement's landlord decides proposals")
        ad = self.db.find_advertise_by_contract(proposal["contract_id"])
        if ad is None:
            raise offchain.NotFound(f"no advertisement for contract {proposal['contract_id']}")
        tenant_row = self.db.get_user(proposal["tenant_id"])
        with self._lock_for(self._ad_locks, ad["advertise_id"]):
            if decision == "REJECT":
                self.submit_as(user_id, "SetProposalStatus", [proposal_id, cc.REJECTED])
                self.notifier.send(
                    proposal["tenant_id"],
                    tenant_row["personal"].get("email", ""),
                    "Proposal rejected",
                    {"proposal_id": proposal_id, "note": "you may resubmit another proposal"},
                )
                return {"proposal_id": proposal_id, "status": cc.REJECTED}
            details = payment_details or {}
            token = details.get("token")
            recipient = details.get("recipient_address")
            if token not in TOKENS:
                raise ValidationFailure(f"token must be one of {TOKENS}")
            if not recipient:
                raise ValidationFailure("recipient_address (the landlord's) is required")
            deadline_hours = float(
                details.get("deadline_hours")
                or ad.get("deadline_hours")
                or self.config.default_payment_deadline_hours
            )
            expires_at = self.clock.now + timedelta(hours=deadline_hours)
            payment_id = f"pay-{uuid4().hex[:12]}"
            payment = {
                "payment_id": payment_id,
                "contract_id": proposal["contract_id"],
                "amount": proposal["amount"],
                "token": token,
                "recipient_address": recipient,
                "tenant_id": proposal["tenant_id"],
                "first_payment_expires_at": expires_at.isoformat(),
            }
            self.submit_as(user_id, "SetProposalStatus", [proposal_id, cc.ACCEPTED])
            self.submit_as(user_id, "CreatePayment", [canonical_json(payment)])
            self.db.update_advertise(ad["advertise_id"], status=offchain.LOCKED)
            self.notifier.send(
                proposal["tenant_id"],
                tenant_row["personal"].get("email", ""),
                "Proposal accepted: payment details",
                {
                    "payment_id": payment_id,
                    "amount": proposal["amount"],
                    "token": token,
                    "recipient_address": recipient,
                    "expires_at": expires_at.isoformat(),
                },
            )
            return {"proposal_id": proposal_id, "status": cc.ACCEPTED, "payment_id": payment_id}

    # -- payments ------------------------------------------------------------------------------

    def _read_payment(self, payment_id: str) -> dict:
        return json.loads(self.chain.evaluate("ReadAsset", [cc.payment_key(payment_id)]))

    def _expire_first_installment(self, caller_id: str, payment: dict) -> None:
        self.submit_as(caller_id, "UpdatePayment", [payment["payment_id"], "0", cc.EXPIRED])
        ad = self.db.find_advertise_by_contract(payment["contract_id"])
        if ad is not None:
            self.db.update_advertise(ad["advertise_id"], status=offchain.OPEN)
        self.notifier.send(
            payment["tenant_id"],
            "",
            "Payment deadline passed",
            {"payment_id": payment["payment_id"], "note": "the advertisement is open again"},
        )

    def pay_installment(self, user_id: str, payment_id: str) -> dict:
        with self._lock_for(self._payment_locks, payment_id):
            payment = self._read_payment(payment_id)
            if user_id != payment["tenant_id"]:
                raise cc.NotParty("only the accepted proposer pays this record")
            wallet = self.wallets.get(user_id)
            if wallet is None:
                raise ValidationFailure("no connected wallet for this user")
            index = next(
                (
                    i
                    for i, s in enumerate(payment["statuses"])
                    if s["status"] == cc.PENDING and s["due_at"] and not s["network_tx_id"]
                ),
                None,
            )
            if index is None:
                raise NothingDue("no due installment awaiting payment")
            if index == 0:
                expires = datetime.fromisoformat(payment["first_payment_expires_at"])
                if self.clock.now > expires:
                    self._expire_first_installment(user_id, payment)
                    raise DeadlinePassed("payment deadline passed; proposal rejected")
            tx_id = wallet.submit_transfer(
                payment["recipient_address"], payment["amount"], payment["token"]
            )
            self.submit_as(
                user_id,
                "UpdatePayment",
                [payment_id, str(index), cc.PENDING, tx_id, wallet.address],
            )
            return {"payment_id": payment_id, "installment_index": index, "tx_id": tx_id}

    def poll_and_confirm(self, user_id: str, payment_id: str) -> dict:
        with self._lock_for(self._payment_locks, payment_id):
            payment = self._read_payment(payment_id)
            if user_id not in (payment["landlord_id"], payment["tenant_id"]):
                raise cc.NotParty("only the landlord and tenant of a payment can poll it")
            contract = json.loads(
                self.chain.evaluate("ReadAsset", [cc.contract_key(payment["contract_id"])])
            )
            mutated = False
            for index, installment in enumerate(payment["statuses"]):
                if installment["status"] != cc.PENDING:
                    continue
                tx_id = installment["network_tx_id"]
                if tx_id:
                    status = self.paynet.get_tx_status(tx_id)
                    if status == TX_CONFIRMED:
                        self.submit_as(
                            user_id, "UpdatePayment", [payment_id, str(index), cc.CONFIRMED, tx_id]
                        )
                        mutated = True
                        if index == 0 and contract["status"] == cc.AWAITING_PAYMENT:
                            self._activate_contract(user_id, contract)
                    elif status == TX_FAILED and index == 0:
                        self._expire_first_installment(user_id, payment)
                        mutated = True
                elif index == 0 and contract["status"] == cc.AWAITING_PAYMENT:
                    expires = datetime.fromisoformat(payment["first_payment_expires_at"])
                    if self.clock.now > expires:
                        self._expire_first_installment(user_id, payment)
                        mutated = True
            payment = self._read_payment(payment_id)
            contract = json.loads(
                self.chain.evaluate("ReadAsset", [cc.contract_key(payment["contract_id"])])
            )
            return {
                "payment_id": payment_id,
                "mutated": mutated,
                "contract_status": contract["status"],
                "installments": payment["statuses"],
            }

    def _activate_contract(self, caller_id: str, contract: dict) -> None:
        """First payment confirmed: attach the tenant, activate, record metrics."""
        proposal = json.loads(
            self.chain.evaluate("ReadAsset", [cc.proposal_key(contract["accepted_proposal_id"])])
        )
        self.submit_as(
            caller_id,
            "ConfirmTenant",
            [
                contract["contract_id"],
                proposal["tenant_id"],
                canonical_json(proposal["tenant_signature"]),
            ],
        )
        self.submit_as(caller_id, "CreateRentalInfo", [contract["contract_id"]])
        ad = self.db.find_advertise_by_contract(contract["contract_id"])
        if ad is not None:
            self.db.update_advertise(ad["advertise_id"], status=offchain.CLOSED)

    # -- GDPR -------------------------------------------------------------------------------------

    def export_me(self, user_id: str) -> dict:
        export = self.db.export_user(user_id)
        chain_assets = {}
        for asset_type in ("property", "contract", "proposal", "payment"):
            raw = self.evaluate_as(user_id, "ListAssetsByOwner", [user_id, asset_type])
            chain_assets[asset_type] = json.loads(raw)
        my_contract_ids = {c["contract_id"] for c in chain_assets["contract"]}
        export["advertises"] = [
            row for row in self.db.list_advertises(None) if row["contract_ref"] in my_contract_ids
        ]
        export["chain_assets"] = chain_assets
        return export

    def delete_me(self, user_id: str) -> dict:
        report = json.loads(self.submit_as(user_id, "EraseUserData", []))
        removed_contracts = [
            key.split(":", 1)[1]
            for key in report["removed_keys"]
            if key.startswith("contract:")
        ]
        for contract_id in removed_contracts:
            ad = self.db.find_advertise_by_contract(contract_id)
            if ad is not None:
                self.db.delete_advertise(ad["advertise_id"])
        self.db.delete_user(user_id)
        self.registry.remove_user(user_id)
        self.wallets.pop(user_id, None)
        return report

    # -- time ---------------------------------------------------------------------------------------

    def _run_monthly_payments(self, when: datetime) -> None:
        self.submit_as(
            self.scheduler_id, "ProcessMonthlyPayments", [when.isoformat()], verify=False
        )

    def advance_time(self, seconds: float) -> dict:
        until = self.clock.now + timedelta(seconds=seconds)
        events = self.paynet.tick(until)
        return {"now": self.clock.now.isoformat(), "events": events}
