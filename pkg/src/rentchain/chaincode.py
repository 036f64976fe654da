"""The rental smart contract: six asset types and their chaincode functions.

Every state-changing function takes the verified caller id as its first
argument and compares it against the owner field(s) of the assets it touches.
Assets are stored as canonical JSON under `<type>:<id>` keys, with secondary
index keys `owner:<userId>:<type>:<id>` so ownership scans and the
right-to-erasure sweep never walk the whole state.

Contract lifecycle: DRAFT_PUBLISHED -> AWAITING_PAYMENT (proposal accepted,
payment record created) -> ACTIVE (first payment confirmed, tenant signature
attached) -> ENDED (term over, nothing pending). Payment records carry one
installment for short-term contracts and one per month otherwise; the monthly
processor marks the next installment due at each simulated month start.
"""

from __future__ import annotations

import calendar
import json
from datetime import date, datetime
from typing import Optional

from . import identity
from .canonical import canonical_json
from .ledger import ChaincodeExecutor, TxSimulator

HOUSE = "HOUSE"
APARTMENT = "APARTMENT"
ROOM_KIND = "ROOM"
PROPERTY_KINDS = (HOUSE, APARTMENT, ROOM_KIND)

FIXED_TERM = "FIXED_TERM"
MONTH_TO_MONTH = "MONTH_TO_MONTH"
SHORT_TERM = "SHORT_TERM"
ROOM = "ROOM"
CONTRACT_TERMS = (FIXED_TERM, MONTH_TO_MONTH, SHORT_TERM, ROOM)

DRAFT_PUBLISHED = "DRAFT_PUBLISHED"
AWAITING_PAYMENT = "AWAITING_PAYMENT"
ACTIVE = "ACTIVE"
ENDED = "ENDED"

PENDING = "PENDING"
ACCEPTED = "ACCEPTED"
REJECTED = "REJECTED"

CONFIRMED = "CONFIRMED"
EXPIRED = "EXPIRED"


class ChaincodeError(Exception):
    code = "CHAINCODE_ERROR"


class NotFound(ChaincodeError):
    code = "NOT_FOUND"


class AlreadyExists(ChaincodeError):
    code = "ALREADY_EXISTS"


class DuplicateProperty(ChaincodeError):
    code = "DUPLICATE_PROPERTY"


class IdentityMismatch(ChaincodeError):
    code = "IDENTITY_MISMATCH"


class NotOwner(ChaincodeError):
    code = "NOT_OWNER"


class NotParty(ChaincodeError):
    code = "NOT_PARTY"


class NotPending(ChaincodeError):
    code = "NOT_PENDING"


class BadSignature(ChaincodeError):
    code = "BAD_SIGNATURE"


class PropertyNotOwned(ChaincodeError):
    code = "PROPERTY_NOT_OWNED"


class ContractNotFound(ChaincodeError):
    code = "CONTRACT_NOT_FOUND"


class PaymentNotConfirmed(ChaincodeError):
    code = "PAYMENT_NOT_CONFIRMED"


class AdvertisementLocked(ChaincodeError):
    code = "ADVERTISEMENT_LOCKED"


class ActiveContractConstraint(ChaincodeError):
    code = "ACTIVE_CONTRACT_CONSTRAINT"


class PendingPaymentConstraint(ChaincodeError):
    code = "PENDING_PAYMENT_CONSTRAINT"


class IllegalTransition(ChaincodeError):
    code = "ILLEGAL_TRANSITION"


class InvalidArgument(ChaincodeError):
    code = "INVALID_ARGUMENT"


ERRORS_BY_CODE = {
    cls.code: cls
    for cls in (
        NotFound, AlreadyExists, DuplicateProperty, IdentityMismatch, NotOwner,
        NotParty, NotPending, BadSignature, PropertyNotOwned, ContractNotFound,
        PaymentNotConfirmed, AdvertisementLocked, ActiveContractConstraint,
        PendingPaymentConstraint, IllegalTransition, InvalidArgument, ChaincodeError,
    )
}


# -- world-state keys ------------------------------------------------------------

def property_key(property_id: str) -> str:
    return f"property:{property_id}"


def contract_key(contract_id: str) -> str:
    return f"contract:{contract_id}"


def proposal_key(proposal_id: str) -> str:
    return f"proposal:{proposal_id}"


def rental_info_key(contract_id: str) -> str:
    return f"rentalinfo:{contract_id}"


def payment_key(payment_id: str) -> str:
    return f"payment:{payment_id}"


def owner_index_key(user_id: str, asset_type: str, asset_id: str) -> str:
    return f"owner:{user_id}:{asset_type}:{asset_id}"


def contract_payment_index(contract_id: str) -> str:
    return f"contractpay:{contract_id}"


def month_marker_key(when: date) -> str:
    return f"paymarker:{when.year:04d}-{when.month:02d}"


# -- calendar arithmetic -----------------------------------------------------------

def add_months(day: date, months: int) -> date:
    """Anniversary date `months` ahead, clamping to the target month's end."""
    month_index = day.month - 1 + months
    year = day.year + month_index // 12
    month = month_index % 12 + 1
    return date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


def month_count(initial: date, final: date) -> int:
    """Whole months between the dates; a partial tail month counts as one."""
    if final <= initial:
        raise InvalidArgument("final date must be after initial date")
    k = 0
    while add_months(initial, k) < final:
        k += 1
    return k


def installment_count(term: str, initial: date, final: date) -> int:
    if term == SHORT_TERM:
        return 1
    return month_count(initial, final)


def installment_due_month(initial: date, index: int) -> date:
    """First day of the month in which installment `index` (>= 1) falls due."""
    anniversary = add_months(initial, index)
    return date(anniversary.year, anniversary.month, 1)


def _parse_date(value: str, field_name: str) -> date:
    try:
        return date.fromisoformat(value)
    except (TypeError, ValueError):
        raise InvalidArgument(f"bad date in {field_name}: {value!r}")


# -- the chaincode ------------------------------------------------------------------

class RentalChaincode(ChaincodeExecutor):
    """Executes rental-domain functions against a transaction simulator stub."""

    def __init__(self, ca_root_pem: Optional[str] = None):
        self.ca_root_pem = ca_root_pem
        self._functions = {
            "CreateEncryptedId": (self.create_encrypted_id, False),
            "ReadAsset": (self.read_asset, True),
            "ListAssetsByOwner": (self.list_assets_by_owner, True),
            "ListProposalsByContract": (self.list_proposals_by_contract, True),
            "CreatePropertyAsset": (self.create_property_asset, False),
            "DeletePropertyAsset": (self.delete_property_asset, False),
            "CreateContractAsset": (self.create_contract_asset, False),
            "UpdateContractAsset": (self.update_contract_asset, False),
            "DeleteContractAsset": (self.delete_contract_asset, False),
            "ConfirmTenant": (self.confirm_tenant, False),
            "CreateProposal": (self.create_proposal, False),
            "DeleteProposal": (self.delete_proposal, False),
            "SetProposalStatus": (self.set_proposal_status, False),
            "CreateRentalInfo": (self.create_rental_info, False),
            "CreatePayment": (self.create_payment, False),
            "UpdatePayment": (self.update_payment, False),
            "ProcessMonthlyPayments": (self.process_monthly_payments, False),
            "EraseUserData": (self.erase_user_data, False),
        }

    def invoke(self, function: str, args: list[str], stub: TxSimulator) -> str:
        if function not in self._functions:
            raise InvalidArgument(f"unknown chaincode function: {function}")
        handler, _ = self._functions[function]
        return handler(stub, *args)

    def is_read_only(self, function: str) -> bool:
        if function not in self._functions:
            raise InvalidArgument(f"unknown chaincode function: {function}")
        return self._functions[function][1]

    def function_names(self) -> list[str]:
        return sorted(self._functions)

    def read_only_functions(self) -> list[str]:
        return sorted(f for f, (_, ro) in self._functions.items() if ro)

    def state_changing_functions(self) -> list[str]:
        return sorted(f for f, (_, ro) in self._functions.items() if not ro)

    # -- shared helpers ----------------------------------------------------------

    @staticmethod
    def _get_json(stub: TxSimulator, key: str) -> Optional[dict]:
        raw = stub.get_state(key)
        return json.loads(raw) if raw is not None else None

    @staticmethod
    def _put_json(stub: TxSimulator, key: str, value: dict) -> None:
        stub.put_state(key, canonical_json(value))

    def _require_contract(self, stub: TxSimulator, contract_id: str) -> dict:
        contract = self._get_json(stub, contract_key(contract_id))
        if contract is None:
            raise ContractNotFound(f"no contract {contract_id}")
        return contract

    def _verify_signature(self, contract: dict, envelope_dict: dict, expected_signer: str) -> None:
        envelope = identity.SignatureEnvelope.from_dict(envelope_dict)
        if identity.certificate_subject(envelope.signer_certificate_pem) != expected_signer:
            raise BadSignature(f"signature not issued by {expected_signer}")
        if not identity.verify_contract_signature(contract, envelope, self.ca_root_pem):
            raise BadSignature("signature does not verify over the contract digest string")

    def _payment_for_contract(self, stub: TxSimulator, contract_id: str) -> Optional[dict]:
        payment_id = stub.get_state(contract_payment_index(contract_id))
        if payment_id is None:
            return None
        return self._get_json(stub, payment_key(payment_id))

    # -- encrypted id ------------------------------------------------------------

    def create_encrypted_id(self, stub: TxSimulator, caller_id: str, record_json: str) -> str:
        record = json.loads(record_json)
        key = identity.encrypted_id_key(caller_id)
        if record.get("key") != key:
            raise InvalidArgument("record key must derive from the caller id")
        if stub.get_state(key) is not None:
            raise AlreadyExists(f"encrypted id already registered for {caller_id}")
        self._put_json(stub, key, record)
        stub.put_state(owner_index_key(caller_id, "encryptedid", caller_id), key)
        return key

    # -- generic reads -------------------------------------------------------------

    def read_asset(self, stub: TxSimulator, key: str) -> str:
        value = stub.get_state(key)
        if value is None:
            raise NotFound(f"no asset at key {key}")
        return value

    def list_assets_by_owner(self, stub: TxSimulator, owner_id: str, asset_type: str) -> str:
        prefix = f"owner:{owner_id}:{asset_type}:"
        keys = [v for _, v in stub.get_range(prefix)]
        assets = []
        for key in keys:
            raw = stub.get_state(key)
            if raw is not None:
                assets.append(json.loads(raw))
        return canonical_json(assets)

    def list_proposals_by_contract(self, stub: TxSimulator, contract_id: str) -> str:
        proposals = [
            json.loads(raw)
            for _, raw in stub.get_range("proposal:")
            if json.loads(raw)["contract_id"] == contract_id
        ]
        return canonical_json(proposals)

    # -- properties -----------------------------------------------------------------

    def create_property_asset(self, stub: TxSimulator, caller_id: str, property_json: str) -> str:
        prop = json.loads(property_json)
        if caller_id != prop.get("landlord_id"):
            raise IdentityMismatch("caller must equal landlord_id")
        if prop.get("kind") not in PROPERTY_KINDS:
            raise InvalidArgument(f"unknown property kind: {prop.get('kind')}")
        pid = prop["property_id"]
        if stub.get_state(property_key(pid)) is not None:
            raise DuplicateProperty(f"property {pid} already exists")
        self._put_json(stub, property_key(pid), prop)
        stub.put_state(owner_index_key(caller_id, "property", pid), property_key(pid))
        return pid

    def delete_property_asset(self, stub: TxSimulator, caller_id: str, property_id: str) -> str:
        key = property_key(property_id)
        prop = self._get_json(stub, key)
        if prop is None:
            raise NotFound(f"no property {property_id}")
        if caller_id != prop["landlord_id"]:
            raise NotOwner("only the property's landlord can delete it")
        for _, raw in stub.get_range("contract:"):
            contract = json.loads(raw)
            if contract["property_id"] == property_id and contract["status"] == ACTIVE:
                raise ActiveContractConstraint(
                    f"property {property_id} is under an active rental contract"
                )
        stub.delete_state(key)
        stub.delete_state(owner_index_key(caller_id, "property", property_id))
        return key

    # -- contracts --------------------------------------------------------------------

    def _validate_term_duration(self, contract: dict) -> tuple[date, date]:
        term = contract.get("term")
        if term not in CONTRACT_TERMS:
            raise InvalidArgument(f"unknown term: {term}")
        initial = _parse_date(contract.get("initial_date"), "initial_date")
        final = _parse_date(contract.get("final_date"), "final_date")
        if final <= initial:
            raise InvalidArgument("final_date must be after initial_date")
        one_month = add_months(initial, 1)
        if term == SHORT_TERM and final >= one_month:
            raise InvalidArgument("short-term contracts must last less than one month")
        if term != SHORT_TERM and final < one_month:
            raise InvalidArgument(f"{term} contracts must last at least one month")
        return initial, final

    def create_contract_asset(self, stub: TxSimulator, caller_id: str, contract_json: str) -> str:
        contract = json.loads(contract_json)
        if caller_id != contract.get("landlord_id"):
            raise IdentityMismatch("caller must equal landlord_id")
        self._validate_term_duration(contract)
        if not isinstance(contract.get("rent_amount"), int) or contract["rent_amount"] <= 0:
            raise InvalidArgument("rent_amount must be a positive integer of micro-units")
        cid = contract["contract_id"]
        if stub.get_state(contract_key(cid)) is not None:
            raise AlreadyExists(f"contract {cid} already exists")
        # The property may be registered later in the same publication flow;
        # when it already exists it must belong to the caller.
        prop = self._get_json(stub, property_key(contract["property_id"]))
        if prop is not None and prop["landlord_id"] != caller_id:
            raise PropertyNotOwned(f"property {contract['property_id']} belongs to another landlord")
        self._verify_signature(contract, contract["landlord_signature"], caller_id)
        contract["tenant_id"] = None
        contract["tenant_signature"] = None
        contract["status"] = DRAFT_PUBLISHED
        contract["locked"] = False
        contract["accepted_proposal_id"] = None
        self._put_json(stub, contract_key(cid), contract)
        stub.put_state(owner_index_key(caller_id, "contract", cid), contract_key(cid))
        return cid

    def update_contract_asset(
        self, stub: TxSimulator, caller_id: str, contract_id: str, updates_json: str
    ) -> str:
        contract = self._get_json(stub, contract_key(contract_id))
        if contract is None:
            raise NotFound(f"no contract {contract_id}")
        if caller_id != contract["landlord_id"]:
            raise NotOwner("only the contract's landlord can update it")
        updates = json.loads(updates_json)
        if updates.get("status") == ENDED:
            return self._end_contract(stub, contract)
        if contract["status"] != DRAFT_PUBLISHED:
            raise ActiveContractConstraint(
                f"contract in status {contract['status']} cannot be edited"
            )
        editable = {"term", "initial_date", "final_date", "conditions", "rent_amount"}
        unknown = set(updates) - editable - {"landlord_signature"}
        if unknown:
            raise InvalidArgument(f"fields not editable: {sorted(unknown)}")
        if "landlord_signature" not in updates:
            raise BadSignature("updated contract must be re-signed by the landlord")
        contract.update(updates)
        self._validate_term_duration(contract)
        self._verify_signature(contract, contract["landlord_signature"], caller_id)
        self._put_json(stub, contract_key(contract_id), contract)
        return contract_id

    def _end_contract(self, stub: TxSimulator, contract: dict) -> str:
        if contract["status"] != ACTIVE:
            raise IllegalTransition("only active contracts can be ended")
        final = _parse_date(contract["final_date"], "final_date")
        if stub.timestamp.date() < final:
            raise IllegalTransition("contract term has not finished yet")
        payment = self._payment_for_contract(stub, contract["contract_id"])
        if payment is not None and any(s["status"] == PENDING for s in payment["statuses"]):
            raise PendingPaymentConstraint("installments are still pending")
        contract["status"] = ENDED
        contract["locked"] = False
        self._put_json(stub, contract_key(contract["contract_id"]), contract)
        return contract["contract_id"]

    def delete_contract_asset(self, stub: TxSimulator, caller_id: str, contract_id: str) -> str:
        contract = self._get_json(stub, contract_key(contract_id))
        if contract is None:
            raise NotFound(f"no contract {contract_id}")
        if caller_id != contract["landlord_id"]:
            raise NotOwner("only the contract's landlord can delete it")
        if contract["status"] == ACTIVE:
            raise ActiveContractConstraint("active rental contracts cannot be deleted")
        stub.delete_state(contract_key(contract_id))
        stub.delete_state(owner_index_key(contract["landlord_id"], "contract", contract_id))
        if contract.get("tenant_id"):
            stub.delete_state(owner_index_key(contract["tenant_id"], "contract", contract_id))
        return contract_key(contract_id)

    def confirm_tenant(
        self,
        stub: TxSimulator,
        caller_id: str,
        contract_id: str,
        tenant_id: str,
        tenant_signature_json: str,
    ) -> str:
        contract = self._require_contract(stub, contract_id)
        if contract["status"] == ACTIVE and contract.get("tenant_id") == tenant_id:
            return contract_id  # poll races resolve as a no-op
        if contract["status"] != AWAITING_PAYMENT:
            raise PaymentNotConfirmed(f"contract is {contract['status']}, not awaiting payment")
        payment = self._payment_for_contract(stub, contract_id)
        if payment is None or payment["statuses"][0]["status"] != CONFIRMED:
            raise PaymentNotConfirmed("first installment is not confirmed on the payment network")
        self._verify_signature(contract, json.loads(tenant_signature_json), tenant_id)
        contract["tenant_id"] = tenant_id
        contract["tenant_signature"] = json.loads(tenant_signature_json)
        contract["status"] = ACTIVE
        contract["locked"] = False
        self._put_json(stub, contract_key(contract_id), contract)
        stub.put_state(owner_index_key(tenant_id, "contract", contract_id), contract_key(contract_id))
        return contract_id

    # -- proposals ----------------------------------------------------------------------

    def create_proposal(self, stub: TxSimulator, caller_id: str, proposal_json: str) -> str:
        proposal = json.loads(proposal_json)
        if caller_id != proposal.get("tenant_id"):
            raise IdentityMismatch("caller must equal tenant_id")
        if not isinstance(proposal.get("amount"), int) or proposal["amount"] <= 0:
            raise InvalidArgument("amount must be a positive integer of micro-units")
        contract = self._require_contract(stub, proposal["contract_id"])
        if contract["locked"] or contract["status"] != DRAFT_PUBLISHED:
            raise AdvertisementLocked("advertisement is temporarily unavailable")
        self._verify_signature(contract, proposal["tenant_signature"], caller_id)
        prid = proposal["proposal_id"]
        if stub.get_state(proposal_key(prid)) is not None:
            raise AlreadyExists(f"proposal {prid} already exists")
        proposal["status"] = PENDING
        self._put_json(stub, proposal_key(prid), proposal)
        stub.put_state(owner_index_key(caller_id, "proposal", prid), proposal_key(prid))
        return prid

    def delete_proposal(self, stub: TxSimulator, caller_id: str, proposal_id: str) -> str:
        proposal = self._get_json(stub, proposal_key(proposal_id))
        if proposal is None:
            raise NotFound(f"no proposal {proposal_id}")
        if caller_id != proposal["tenant_id"]:
            raise NotOwner("only the tenant who submitted the proposal can delete it")
        if proposal["status"] != PENDING:
            raise NotPending(f"proposal is {proposal['status']}")
        stub.delete_state(proposal_key(proposal_id))
        stub.delete_state(owner_index_key(caller_id, "proposal", proposal_id))
        return proposal_key(proposal_id)

    def set_proposal_status(
        self, stub: TxSimulator, caller_id: str, proposal_id: str, status: str
    ) -> str:
        if status not in (ACCEPTED, REJECTED):
            raise InvalidArgument(f"status must be ACCEPTED or REJECTED, got {status}")
        proposal = self._get_json(stub, proposal_key(proposal_id))
        if proposal is None:
            raise NotFound(f"no proposal {proposal_id}")
        contract = self._require_contract(stub, proposal["contract_id"])
        if caller_id != contract["landlord_id"]:
            raise NotOwner("only the advertisement's landlord decides proposals")
        if proposal["status"] != PENDING:
            raise NotPending(f"proposal is {proposal['status']}")
        proposal["status"] = status
        self._put_json(stub, proposal_key(proposal_id), proposal)
        if status == ACCEPTED:
            contract["locked"] = True
            contract["status"] = AWAITING_PAYMENT
            contract["accepted_proposal_id"] = proposal_id
            self._put_json(stub, contract_key(contract["contract_id"]), contract)
        return proposal_id

    def create_rental_info(self, stub: TxSimulator, caller_id: str, contract_id: str) -> str:
        contract = self._require_contract(stub, contract_id)
        if contract["status"] not in (ACTIVE, ENDED):
            raise InvalidArgument("rental info is only created once a contract is confirmed")
        key = rental_info_key(contract_id)
        if stub.get_state(key) is not None:
            raise AlreadyExists(f"rental info for {contract_id} already exists")
        proposals = json.loads(self.list_proposals_by_contract(stub, contract_id))
        info = {
            "advertise_ref": contract_id,
            "proposal_count": len(proposals),
            "highest_proposal_amount": max((p["amount"] for p in proposals), default=0),
        }
        self._put_json(stub, key, info)
        return key

    # -- payments --------------------------------------------------------------------------

    def create_payment(self, stub: TxSimulator, caller_id: str, payment_json: str) -> str:
        payment = json.loads(payment_json)
        contract = self._require_contract(stub, payment["contract_id"])
        if caller_id != contract["landlord_id"]:
            raise NotOwner("payments are always generated by the landlord")
        if contract["status"] != AWAITING_PAYMENT or not contract.get("accepted_proposal_id"):
            raise InvalidArgument("payment requires an accepted proposal awaiting payment")
        proposal = self._get_json(stub, proposal_key(contract["accepted_proposal_id"]))
        if payment.get("tenant_id") != proposal["tenant_id"]:
            raise InvalidArgument("payment tenant must be the accepted proposer")
        if payment.get("amount") != proposal["amount"]:
            raise InvalidArgument("installment amount must equal the accepted proposal amount")
        if stub.get_state(contract_payment_index(payment["contract_id"])) is not None:
            raise AlreadyExists(f"payment already exists for contract {payment['contract_id']}")
        pay_id = payment["payment_id"]
        if stub.get_state(payment_key(pay_id)) is not None:
            raise AlreadyExists(f"payment {pay_id} already exists")
        initial = _parse_date(contract["initial_date"], "initial_date")
        final = _parse_date(contract["final_date"], "final_date")
        count = installment_count(contract["term"], initial, final)
        statuses = [
            {
                "status": PENDING,
                "network_tx_id": None,
                "due_at": stub.timestamp.isoformat() if i == 0 else None,
            }
            for i in range(count)
        ]
        payment["landlord_id"] = contract["landlord_id"]
        payment["sender_address"] = payment.get("sender_address")
        payment["statuses"] = statuses
        payment["final_date"] = contract["final_date"]
        self._put_json(stub, payment_key(pay_id), payment)
        stub.put_state(contract_payment_index(payment["contract_id"]), pay_id)
        stub.put_state(owner_index_key(contract["landlord_id"], "payment", pay_id), payment_key(pay_id))
        stub.put_state(owner_index_key(payment["tenant_id"], "payment", pay_id), payment_key(pay_id))
        return pay_id

    def update_payment(
        self,
        stub: TxSimulator,
        caller_id: str,
        payment_id: str,
        installment_index: str,
        new_status: str,
        network_tx_id: str = "",
        sender_address: str = "",
    ) -> str:
        payment = self._get_json(stub, payment_key(payment_id))
        if payment is None:
            raise NotFound(f"no payment {payment_id}")
        if caller_id not in (payment["landlord_id"], payment["tenant_id"]):
            raise NotParty("only the landlord and tenant of a payment can update it")
        try:
            index = int(installment_index)
            installment = payment["statuses"][index]
        except (ValueError, IndexError):
            raise InvalidArgument(f"bad installment index: {installment_index}")
        if installment["status"] != PENDING:
            raise IllegalTransition(f"installment {index} is already {installment['status']}")
        if new_status == PENDING:
            # no transition: attach the submitted network transaction
            if network_tx_id:
                installment["network_tx_id"] = network_tx_id
            if sender_address:
                payment["sender_address"] = sender_address
        elif new_status == CONFIRMED:
            installment["status"] = CONFIRMED
            if network_tx_id:
                installment["network_tx_id"] = network_tx_id
        elif new_status == EXPIRED:
            self._expire_installment(stub, payment, index)
        else:
            raise IllegalTransition(f"no transition PENDING -> {new_status}")
        self._put_json(stub, payment_key(payment_id), payment)
        return payment_id

    def _expire_installment(self, stub: TxSimulator, payment: dict, index: int) -> None:
        """Expire an installment; for the first one, reopen the advertisement."""
        if index != 0:
            raise IllegalTransition("only the first installment carries an expiration")
        expires_at = payment.get("first_payment_expires_at")
        if expires_at and stub.timestamp < datetime.fromisoformat(expires_at):
            raise IllegalTransition("first payment deadline has not passed")
        payment["statuses"][0]["status"] = EXPIRED
        contract = self._require_contract(stub, payment["contract_id"])
        accepted = contract.get("accepted_proposal_id")
        if accepted:
            proposal = self._get_json(stub, proposal_key(accepted))
            if proposal is not None:
                proposal["status"] = REJECTED
                self._put_json(stub, proposal_key(accepted), proposal)
        contract["locked"] = False
        contract["status"] = DRAFT_PUBLISHED
        contract["accepted_proposal_id"] = None
        self._put_json(stub, contract_key(contract["contract_id"]), contract)

    def process_monthly_payments(self, stub: TxSimulator, caller_id: str, now_iso: str) -> str:
        """Mark the next installment due on every active long-term contract.

        Runs at midnight on the first of a simulated month; a second call in
        the same month is a no-op, enforced through a per-month marker key.
        """
        now = datetime.fromisoformat(now_iso)
        if now.day != 1 or (now.hour, now.minute, now.second) != (0, 0, 0):
            raise InvalidArgument("must run at midnight on the first day of a month")
        marker = month_marker_key(now.date())
        if stub.get_state(marker) is not None:
            return canonical_json([])
        activated = []
        for key, raw in stub.get_range("payment:"):
            payment = json.loads(raw)
            contract = self._get_json(stub, contract_key(payment["contract_id"]))
            if contract is None or contract["status"] != ACTIVE or contract["term"] == SHORT_TERM:
                continue
            for index, installment in enumerate(payment["statuses"]):
                if installment["due_at"] is None:
                    installment["due_at"] = now.isoformat()
                    self._put_json(stub, key, payment)
                    activated.append(
                        {"payment_id": payment["payment_id"], "installment_index": index}
                    )
                    break
        stub.put_state(marker, canonical_json({"fired_at": now.isoformat()}))
        return canonical_json(activated)

    # -- right to erasure ------------------------------------------------------------------

    def erase_user_data(self, stub: TxSimulator, caller_id: str) -> str:
        """Remove every world-state asset keyed to the caller.

        Refused while the caller has an active contract or any pending
        installment. The transaction log keeps the full history.
        """
        prefix = f"owner:{caller_id}:"
        owned = dict(stub.get_range(prefix))
        for index_key, asset_ref in owned.items():
            asset_type = index_key[len(prefix):].split(":", 1)[0]
            if asset_type == "contract":
                contract = self._get_json(stub, asset_ref)
                if contract is not None and contract["status"] == ACTIVE:
                    raise ActiveContractConstraint(
                        "user is involved in an ongoing rental contract"
                    )
            if asset_type == "payment":
                payment = self._get_json(stub, asset_ref)
                if payment is not None and any(
                    s["status"] == PENDING for s in payment["statuses"]
                ):
                    raise PendingPaymentConstraint("user has pending payments to receive or send")
        removed = []
        for index_key, asset_ref in owned.items():
            asset = self._get_json(stub, asset_ref)
            if asset is not None:
                removed.extend(self._erase_asset(stub, asset_ref, asset))
            stub.delete_state(index_key)
            removed.append(index_key)
        report = {"user_id": caller_id, "removed_keys": sorted(set(removed))}
        return canonical_json(report)

    def _erase_asset(self, stub: TxSimulator, asset_key: str, asset: dict) -> list[str]:
        """Delete one asset plus every index key and satellite record of it."""
        removed = [asset_key]
        stub.delete_state(asset_key)
        asset_type, _, asset_id = asset_key.partition(":")
        if asset_type == "contract":
            for party in (asset.get("landlord_id"), asset.get("tenant_id")):
                if party:
                    idx = owner_index_key(party, "contract", asset_id)
                    stub.delete_state(idx)
                    removed.append(idx)
            for satellite in (rental_info_key(asset_id), contract_payment_index(asset_id)):
                if stub.get_state(satellite) is not None:
                    stub.delete_state(satellite)
                    removed.append(satellite)
        elif asset_type == "payment":
            for party in (asset.get("landlord_id"), asset.get("tenant_id")):
                if party:
                    idx = owner_index_key(party, "payment", asset_id)
                    stub.delete_state(idx)
                    removed.append(idx)
            index = contract_payment_index(asset["contract_id"])
            if stub.get_state(index) is not None:
                stub.delete_state(index)
                removed.append(index)
        elif asset_type == "property":
            idx = owner_index_key(asset["landlord_id"], "property", asset_id)
            stub.delete_state(idx)
            removed.append(idx)
        elif asset_type == "proposal":
            idx = owner_index_key(asset["tenant_id"], "proposal", asset_id)
            stub.delete_state(idx)
            removed.append(idx)
        elif asset_type == "encryptedid":
            idx = owner_index_key(asset_id, "encryptedid", asset_id)
            stub.delete_state(idx)
            removed.append(idx)
        return removed
