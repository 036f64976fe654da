"""Shared fixtures: a direct chain harness for chaincode-level tests and a
full platform + HTTP client for gateway-level tests."""

from __future__ import annotations

import json
import warnings
from datetime import datetime, timezone
from uuid import uuid4

import pytest

from rentchain import chaincode as cc
from rentchain import identity as idm
from rentchain.canonical import canonical_json
from rentchain.gateway import Platform, PlatformConfig, create_app
from rentchain.ledger import ChannelConfig, Ledger

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")

START = datetime(2024, 1, 1, tzinfo=timezone.utc)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE {outcome}] {name}", flush=True)


class ChainHarness:
    """Drives chaincode functions through the real endorse/order/commit path."""

    def __init__(self, tmp_path=None, log_name="chain.log"):
        self.now = START
        keyfile = (tmp_path / "ca.json") if tmp_path else None
        if keyfile is not None:
            self.ca = idm.CertificateAuthority.load_or_create(keyfile)
            self.registry = idm.IdentityRegistry(self.ca, tmp_path / "wallets")
        else:
            raise ValueError("tmp_path required")
        self.chaincode = cc.RentalChaincode(self.ca.root_cert_pem)
        self.ledger = Ledger(
            ChannelConfig.default(),
            self.chaincode,
            tmp_path / log_name,
            lambda: self.now,
        )
        self.users: dict[str, tuple[idm.PublicIdentity, idm.PrivateIdentity]] = {}

    def register(self, user_id: str, with_encrypted_id: bool = True):
        public, private = self.registry.register_user(user_id)
        self.users[user_id] = (public, private)
        if with_encrypted_id:
            record = idm.make_encrypted_id(user_id, public.certificate_pem)
            self.submit(user_id, "CreateEncryptedId", [canonical_json(record)])
        return public, private

    def cert(self, user_id: str) -> str:
        return self.users[user_id][0].certificate_pem

    def private(self, user_id: str) -> idm.PrivateIdentity:
        return self.users[user_id][1]

    def submit(self, caller: str, function: str, args: list[str], org: str = "Org1") -> str:
        creator = self.cert(caller) if caller in self.users else caller
        draft = self.ledger.new_draft(creator, org, function, [caller, *args])
        self.ledger.endorse(draft, org)
        block = self.ledger.order([draft])
        flags = self.ledger.validate_and_commit(block)
        assert flags == ["VALID"], f"{function} flagged {flags}"
        return draft.payload

    def evaluate(self, function: str, args: list[str], org: str = "Org2") -> str:
        draft = self.ledger.new_draft("", org, function, args)
        self.ledger.endorse(draft, org)
        return draft.payload

    def query_json(self, key: str):
        raw = self.ledger.query_state(key)
        return json.loads(raw) if raw is not None else None

    # -- domain builders -----------------------------------------------------------

    def make_property(self, landlord: str, property_id: str | None = None) -> str:
        property_id = property_id or f"prop-{uuid4().hex[:8]}"
        prop = {
            "property_id": property_id,
            "landlord_id": landlord,
            "kind": "HOUSE",
            "address_details": f"Street {property_id}",
        }
        self.submit(landlord, "CreatePropertyAsset", [canonical_json(prop)])
        return property_id

    def make_contract(
        self,
        landlord: str,
        property_id: str,
        term: str = "FIXED_TERM",
        initial_date: str = "2024-01-15",
        final_date: str = "2024-04-15",
        conditions: str = "no pets",
        rent_amount: int = 900_000000,
        contract_id: str | None = None,
    ) -> str:
        contract_id = contract_id or f"con-{uuid4().hex[:8]}"
        contract = {
            "contract_id": contract_id,
            "property_id": property_id,
            "landlord_id": landlord,
            "term": term,
            "initial_date": initial_date,
            "final_date": final_date,
            "conditions": conditions,
            "rent_amount": rent_amount,
        }
        signature = idm.sign_contract(contract, self.private(landlord))
        contract["landlord_signature"] = signature.to_dict()
        self.submit(landlord, "CreateContractAsset", [canonical_json(contract)])
        return contract_id

    def make_proposal(
        self, tenant: str, contract_id: str, amount: int = 850_000000, proposal_id: str | None = None
    ) -> str:
        proposal_id = proposal_id or f"pro-{uuid4().hex[:8]}"
        contract = self.query_json(cc.contract_key(contract_id))
        signature = idm.sign_contract(contract, self.private(tenant))
        proposal = {
            "proposal_id": proposal_id,
            "contract_id": contract_id,
            "tenant_id": tenant,
            "amount": amount,
            "tenant_signature": signature.to_dict(),
        }
        self.submit(tenant, "CreateProposal", [canonical_json(proposal)])
        return proposal_id

    def accept_and_pay(
        self,
        landlord: str,
        tenant: str,
        contract_id: str,
        proposal_id: str,
        payment_id: str | None = None,
        expires_at: str | None = None,
    ) -> str:
        """Accept, create the payment, confirm installment 0, confirm the tenant."""
        payment_id = payment_id or f"pay-{uuid4().hex[:8]}"
        proposal = self.query_json(cc.proposal_key(proposal_id))
        self.submit(landlord, "SetProposalStatus", [proposal_id, "ACCEPTED"])
        payment = {
            "payment_id": payment_id,
            "contract_id": contract_id,
            "amount": proposal["amount"],
            "token": "USDC",
            "recipient_address": f"scaddr-{landlord}",
            "tenant_id": tenant,
            "first_payment_expires_at": expires_at or (self.now.isoformat()),
        }
        self.submit(landlord, "CreatePayment", [canonical_json(payment)])
        self.submit(tenant, "UpdatePayment", [payment_id, "0", "CONFIRMED", "tx-test-1"])
        self.submit(
            tenant,
            "ConfirmTenant",
            [contract_id, tenant, canonical_json(proposal["tenant_signature"])],
        )
        self.submit(landlord, "CreateRentalInfo", [contract_id])
        return payment_id

    def end_contract(self, landlord: str, contract_id: str, payment_id: str) -> None:
        """Confirm every remaining installment, jump past the term, mark ENDED."""
        payment = self.query_json(cc.payment_key(payment_id))
        for index, installment in enumerate(payment["statuses"]):
            if installment["status"] == "PENDING":
                tenant = payment["tenant_id"]
                self.submit(
                    tenant, "UpdatePayment", [payment_id, str(index), "CONFIRMED", f"tx-{index}"]
                )
        contract = self.query_json(cc.contract_key(contract_id))
        final = datetime.fromisoformat(contract["final_date"] + "T00:00:00+00:00")
        if self.now < final:
            self.now = final
        self.submit(landlord, "UpdateContractAsset", [contract_id, canonical_json({"status": "ENDED"})])


@pytest.fixture
def harness(tmp_path):
    return ChainHarness(tmp_path)


@pytest.fixture
def platform(tmp_path):
    config = PlatformConfig(data_dir=str(tmp_path / "platform"), latency_range=(1.0, 5.0))
    return Platform(config)


@pytest.fixture
def client(platform):
    from fastapi.testclient import TestClient

    return TestClient(create_app(platform), raise_server_exceptions=True)


PERSONAL = {
    "name": "Pat Example",
    "email": "pat@example.com",
    "contact": "+351000000",
    "identification": "ID-0001",
}


YEAR = 365 * 86400


def auth_headers(client, user_id: str, ttl: int | None = YEAR) -> dict:
    # tests drive the simulated clock across months, so default to a long TTL
    body = {"user_id": user_id}
    if ttl is not None:
        body["ttl_seconds"] = ttl
    response = client.post("/auth/token", json=body)
    assert response.status_code == 200, response.text
    return {"Authorization": "Bearer " + response.json()["token"]}


def signup_user(client, user_id: str, complete_profile: bool = True) -> dict:
    headers = auth_headers(client, user_id)
    response = client.post("/signup", headers=headers)
    assert response.status_code == 200, response.text
    if complete_profile:
        personal = dict(PERSONAL, name=f"User {user_id}", email=f"{user_id}@example.com")
        response = client.put("/me", headers=headers, json={"personal": personal})
        assert response.status_code == 200, response.text
    return headers


def publish_body(**overrides) -> dict:
    body = {
        "property": {
            "kind": "APARTMENT",
            "typology": "T2",
            "address_details": f"Rua {uuid4().hex[:8]}, Lisboa",
        },
        "contract": {
            "term": "FIXED_TERM",
            "initial_date": "2024-01-15",
            "final_date": "2024-04-15",
            "conditions": "no pets",
            "rent_amount": 900_000000,
        },
        "photos": [],
        "deadline_hours": 48.0,
    }
    body.update(overrides)
    return body
