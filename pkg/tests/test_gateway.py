"""Gateway HTTP API: auth totality, the encrypted-id barrier, orchestration
flows with compensation, payments with polling, and the GDPR endpoints."""

from __future__ import annotations

import json

import pytest

from conftest import auth_headers, publish_body, signup_user

MICRO = 1_000000


def list_route_paths(client) -> list[tuple[str, str]]:
    routes = []
    for route in client.app.routes:
        if hasattr(route, "methods") and route.path not in ("/openapi.json",):
            for method in route.methods - {"HEAD", "OPTIONS"}:
                routes.append((method, route.path))
    return routes


def fill_path(path: str) -> str:
    return (
        path.replace("{advertise_id}", "x")
        .replace("{proposal_id}", "x")
        .replace("{payment_id}", "x")
    )


def test_auth_totality_every_endpoint_requires_token(client):
    for method, path in list_route_paths(client):
        if path == "/auth/token":
            continue
        response = client.request(method, fill_path(path))
        assert response.status_code == 401, f"{method} {path} -> {response.status_code}"
        assert response.json()["error"] == "INVALID_TOKEN"


def test_garbage_and_expired_tokens_rejected(client, platform):
    assert client.post("/login", headers={"Authorization": "Bearer junk"}).status_code == 401
    headers = auth_headers(client, "u1", ttl=1)
    platform.advance_time(5)
    assert client.post("/signup", headers=headers).status_code == 401


def test_signup_populates_wallets_chain_and_db(client, platform):
    headers = signup_user(client, "u1", complete_profile=False)
    assert platform.registry.public_wallet.exists("u1")
    assert platform.registry.private_wallet.exists("u1")
    assert platform.ledger.query_state("encryptedid:u1") is not None
    assert platform.db.get_user("u1")["app_attributes"]["registration_complete"] is False
    assert client.post("/signup", headers=headers).status_code == 409  # replay


def test_login_success_and_identity_failures(client, platform):
    signup_user(client, "u1", complete_profile=False)
    signup_user(client, "u2", complete_profile=False)
    h1 = auth_headers(client, "u1")
    assert client.post("/login", headers=h1).status_code == 200

    # tamper fixture: swap the two users' on-chain ciphertexts directly in the
    # world state, bypassing the endorsement pipeline
    entries = platform.ledger._entries
    a, b = "encryptedid:u1", "encryptedid:u2"
    entries[a], entries[b] = (entries[b][0], entries[a][1]), (entries[a][0], entries[b][1])
    response = client.post("/login", headers=h1)
    assert response.status_code == 403
    assert response.json()["error"] == "IDENTITY_VERIFICATION_FAILED"
    entries[a], entries[b] = (entries[b][0], entries[a][1]), (entries[a][0], entries[b][1])

    # missing private wallet: login must fail
    platform.registry.private_wallet.delete("u1")
    assert client.post("/login", headers=h1).status_code == 403


def test_login_when_ledger_unavailable(client, platform):
    signup_user(client, "u1", complete_profile=False)
    platform.chain.available = False
    response = client.post("/login", headers=auth_headers(client, "u1"))
    assert response.status_code == 503
    platform.chain.available = True


def test_evaluate_allowlist_and_routing(client, platform):
    headers = signup_user(client, "u1", complete_profile=False)
    response = client.post(
        "/evaluate", headers=headers, json={"function": "ReadAsset", "args": ["encryptedid:u1"]}
    )
    assert response.status_code == 200
    assert response.json()["result"]["key"] == "encryptedid:u1"
    # state-changing functions are unreachable through /evaluate
    response = client.post(
        "/evaluate", headers=headers, json={"function": "CreatePropertyAsset", "args": ["{}"]}
    )
    assert response.status_code == 400
    assert response.json()["error"] == "NOT_READ_ONLY"
    # queries run through the auditor org
    assert platform.chain.read_org == "Org2"


def test_submit_injects_verified_caller_and_verifies_id(client, platform, monkeypatch):
    headers = signup_user(client, "u1", complete_profile=False)
    calls = []
    original = platform.verify_identity
    monkeypatch.setattr(
        platform, "verify_identity", lambda uid: (calls.append(uid), original(uid))[1]
    )
    prop = {"property_id": "p1", "landlord_id": "u1", "kind": "HOUSE", "address_details": "x"}
    response = client.post(
        "/submit", headers=headers, json={"function": "CreatePropertyAsset", "args": [json.dumps(prop)]}
    )
    assert response.status_code == 200
    assert response.json()["result"] == "p1"
    assert calls == ["u1"]  # encrypted-id verification ran exactly once

    # the server prepends the token subject: claiming another owner fails
    foreign = dict(prop, property_id="p2", landlord_id="someone-else")
    response = client.post(
        "/submit", headers=headers, json={"function": "CreatePropertyAsset", "args": [json.dumps(foreign)]}
    )
    assert response.status_code == 422
    assert response.json()["error"] == "IDENTITY_MISMATCH"


def test_submit_rejects_read_only_and_unverified_users(client, platform):
    headers = signup_user(client, "u1", complete_profile=False)
    response = client.post(
        "/submit", headers=headers, json={"function": "ReadAsset", "args": ["k"]}
    )
    assert response.status_code == 400
    platform.registry.private_wallet.delete("u1")
    prop = {"property_id": "p9", "landlord_id": "u1", "kind": "HOUSE", "address_details": "x"}
    response = client.post(
        "/submit", headers=headers, json={"function": "CreatePropertyAsset", "args": [json.dumps(prop)]}
    )
    assert response.status_code == 403


def test_evaluate_never_triggers_identity_verification(client, platform, monkeypatch):
    headers = signup_user(client, "u1", complete_profile=False)
    monkeypatch.setattr(
        platform, "verify_identity", lambda uid: pytest.fail("evaluate must not verify ids")
    )
    client.post("/evaluate", headers=headers, json={"function": "ReadAsset", "args": ["encryptedid:u1"]})


# -- publication ------------------------------------------------------------------------


def test_publish_requires_complete_profile(client):
    headers = signup_user(client, "u1", complete_profile=False)
    response = client.post("/advertisements", headers=headers, json=publish_body())
    assert response.status_code == 403
    assert response.json()["error"] == "PROFILE_INCOMPLETE"


def test_publish_creates_open_ad_with_signed_draft_contract(client, platform):
    headers = signup_user(client, "landlord")
    body = publish_body(photos=["aGVsbG8="])  # one 5-byte photo
    response = client.post("/advertisements", headers=headers, json=body)
    assert response.status_code == 200
    ids = response.json()
    ad = platform.db.get_advertise(ids["advertise_id"])
    assert ad["status"] == "OPEN"
    assert len(ad["photo_refs"]) == 1
    contract = json.loads(platform.ledger.query_state(f"contract:{ids['contract_id']}"))
    assert contract["status"] == "DRAFT_PUBLISHED"
    from rentchain import identity as idm

    envelope = idm.SignatureEnvelope.from_dict(contract["landlord_signature"])
    assert idm.verify_contract_signature(contract, envelope, platform.ca.root_cert_pem)
    listing = client.get("/advertisements", headers=headers).json()["advertisements"]
    assert [row["advertise_id"] for row in listing] == [ids["advertise_id"]]


@pytest.mark.parametrize("failing_step", ["photo", "get_user", "register_advertise"])
def test_publish_fault_injection_rolls_back_chain_and_db(client, platform, monkeypatch, failing_step):
    headers = signup_user(client, "landlord")

    def boom(*args, **kwargs):
        raise RuntimeError("injected fault")

    if failing_step == "photo":
        monkeypatch.setattr(platform.db, "register_property_photo", boom)
    elif failing_step == "get_user":
        monkeypatch.setattr(platform.db, "get_user", boom)
    else:
        monkeypatch.setattr(platform.db, "register_advertise", boom)

    body = publish_body(photos=["aGVsbG8="])
    with pytest.raises(RuntimeError):
        client.post("/advertisements", headers=headers, json=body)
    monkeypatch.undo()
    # no orphan rows or chain assets survive the failed flow
    assert platform.db.list_advertises(None) == []
    assert platform.db.photos.ids() == []
    state = platform.ledger.snapshot()
    assert not any(k.startswith("contract:") and v[0] is not None for k, v in state.items())
    assert not any(k.startswith("property:") and v[0] is not None for k, v in state.items())
    # and the platform still accepts a clean publication afterwards
    assert client.post("/advertisements", headers=headers, json=publish_body()).status_code == 200


# -- proposals ---------------------------------------------------------------------------


def _published(client, landlord="landlord", **overrides):
    headers = signup_user(client, landlord)
    response = client.post("/advertisements", headers=headers, json=publish_body(**overrides))
    assert response.status_code == 200, response.text
    return headers, response.json()


def test_proposal_requires_complete_profile(client):
    _landlord, ids = _published(client)
    incomplete = signup_user(client, "bare-tenant", complete_profile=False)
    response = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals",
        headers=incomplete,
        json={"amount": 850 * MICRO},
    )
    assert response.status_code == 403
    assert response.json()["error"] == "PROFILE_INCOMPLETE"


def test_proposal_flow_and_validation(client, platform):
    landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    response = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 0}
    )
    assert response.status_code == 400
    response = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals",
        headers=tenant,
        json={"amount": 850 * MICRO},
    )
    assert response.status_code == 200
    proposal_id = response.json()["proposal_id"]
    stored = json.loads(platform.ledger.query_state(f"proposal:{proposal_id}"))
    assert stored["status"] == "PENDING"
    row = platform.db.get_user("tenant")
    assert proposal_id in row["app_attributes"]["proposals"]


def test_proposal_fault_injection_removes_chain_proposal(client, platform, monkeypatch):
    _landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    monkeypatch.setattr(platform.db, "update_advertise", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("injected")))
    with pytest.raises(RuntimeError):
        client.post(
            f"/advertisements/{ids['advertise_id']}/proposals",
            headers=tenant,
            json={"amount": 850 * MICRO},
        )
    monkeypatch.undo()
    state = platform.ledger.snapshot()
    assert not any(k.startswith("proposal:") and v[0] is not None for k, v in state.items())


def _accept(client, landlord, platform, proposal_id, deadline_hours=48.0):
    address = client.get("/me", headers=landlord).json()["wallet"]["address"]
    response = client.post(
        f"/proposals/{proposal_id}/decision",
        headers=landlord,
        json={
            "decision": "ACCEPT",
            "payment_details": {
                "token": "USDC",
                "recipient_address": address,
                "deadline_hours": deadline_hours,
            },
        },
    )
    assert response.status_code == 200, response.text
    return response.json()


def test_decision_validation_and_gating(client, platform):
    landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    response = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 850 * MICRO}
    )
    proposal_id = response.json()["proposal_id"]
    # only the landlord decides
    response = client.post(
        f"/proposals/{proposal_id}/decision", headers=tenant, json={"decision": "REJECT"}
    )
    assert response.status_code == 403
    # accepting without payment details fails validation
    response = client.post(
        f"/proposals/{proposal_id}/decision", headers=landlord, json={"decision": "ACCEPT"}
    )
    assert response.status_code == 400
    response = client.post(
        f"/proposals/{proposal_id}/decision",
        headers=landlord,
        json={"decision": "ACCEPT", "payment_details": {"token": "DOGE", "recipient_address": "x"}},
    )
    assert response.status_code == 400


def test_accept_locks_ad_sets_deadline_and_notifies(client, platform):
    landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    proposal_id = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 850 * MICRO}
    ).json()["proposal_id"]
    accepted = _accept(client, landlord, platform, proposal_id, deadline_hours=48.0)
    payment = json.loads(platform.ledger.query_state(f"payment:{accepted['payment_id']}"))
    from datetime import datetime, timedelta

    expires = datetime.fromisoformat(payment["first_payment_expires_at"])
    assert expires == platform.clock.now + timedelta(hours=48)
    assert payment["amount"] == 850 * MICRO  # auto-filled from the proposal
    assert platform.db.get_advertise(ids["advertise_id"])["status"] == "LOCKED"
    # lock safety: every other proposal now bounces
    other = signup_user(client, "tenant2")
    response = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=other, json={"amount": 1 * MICRO}
    )
    assert response.status_code == 409
    assert response.json()["error"] == "ADVERTISEMENT_LOCKED"
    # the tenant got the payment details "by email"
    messages = platform.notifier.for_user("tenant")
    assert messages and messages[-1]["body"]["payment_id"] == accepted["payment_id"]


def test_reject_keeps_ad_open_and_allows_resubmission(client, platform):
    landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    proposal_id = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 800 * MICRO}
    ).json()["proposal_id"]
    response = client.post(
        f"/proposals/{proposal_id}/decision", headers=landlord, json={"decision": "REJECT"}
    )
    assert response.status_code == 200
    assert platform.db.get_advertise(ids["advertise_id"])["status"] == "OPEN"
    retry = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 820 * MICRO}
    )
    assert retry.status_code == 200


# -- payment and confirmation ------------------------------------------------------------------


def _accepted_rental(client, platform, amount=850 * MICRO, deadline_hours=48.0):
    landlord, ids = _published(client)
    tenant = signup_user(client, "tenant")
    proposal_id = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": amount}
    ).json()["proposal_id"]
    accepted = _accept(client, landlord, platform, proposal_id, deadline_hours)
    return landlord, tenant, ids, proposal_id, accepted["payment_id"]


def test_pay_poll_activates_contract(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    response = client.post(f"/payments/{payment_id}/pay", headers=tenant)
    assert response.status_code == 200
    tx_id = response.json()["tx_id"]
    assert platform.paynet.get_tx_status(tx_id) == "PENDING"
    # polling before the network confirms mutates nothing
    poll = client.post(f"/payments/{payment_id}/poll", headers=landlord).json()
    assert poll["contract_status"] == "AWAITING_PAYMENT" and poll["mutated"] is False
    client.post("/admin/time/advance", headers=landlord, json={"seconds": 10})
    poll = client.post(f"/payments/{payment_id}/poll", headers=tenant).json()
    assert poll["contract_status"] == "ACTIVE"
    # double confirmation is a no-op
    again = client.post(f"/payments/{payment_id}/poll", headers=tenant).json()
    assert again["mutated"] is False
    contract = json.loads(platform.ledger.query_state(f"contract:{ids['contract_id']}"))
    from rentchain import identity as idm

    digest = idm.contract_digest_string(contract)
    for field in ("landlord_signature", "tenant_signature"):
        envelope = idm.SignatureEnvelope.from_dict(contract[field])
        assert idm.verify_contract_signature(contract, envelope, platform.ca.root_cert_pem)
    assert platform.db.get_advertise(ids["advertise_id"])["status"] == "CLOSED"
    info = json.loads(platform.ledger.query_state(f"rentalinfo:{ids['contract_id']}"))
    assert info["highest_proposal_amount"] == 850 * MICRO
    # payment record carries the tenant's network transaction
    payment = json.loads(platform.ledger.query_state(f"payment:{payment_id}"))
    assert payment["statuses"][0]["network_tx_id"] == tx_id
    assert payment["sender_address"] == platform.wallets["tenant"].address


def test_outsider_cannot_pay_or_poll(client, platform):
    _landlord, _tenant, _ids, _proposal_id, payment_id = _accepted_rental(client, platform)
    outsider = signup_user(client, "outsider")
    assert client.post(f"/payments/{payment_id}/pay", headers=outsider).status_code == 403
    assert client.post(f"/payments/{payment_id}/poll", headers=outsider).status_code == 403


def test_insufficient_funds_surfaces_402(client, platform):
    funding = platform.config.initial_funding["USDC"]
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(
        client, platform, amount=funding + 1
    )
    response = client.post(f"/payments/{payment_id}/pay", headers=tenant)
    assert response.status_code == 402
    assert response.json()["error"] == "INSUFFICIENT_FUNDS"


def test_deadline_expiry_reopens_advertisement(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(
        client, platform, deadline_hours=1.0
    )
    client.post("/admin/time/advance", headers=landlord, json={"seconds": 3700})
    response = client.post(f"/payments/{payment_id}/pay", headers=tenant)
    assert response.status_code == 409
    assert response.json()["error"] == "DEADLINE_PASSED"
    assert platform.db.get_advertise(ids["advertise_id"])["status"] == "OPEN"
    proposal = json.loads(platform.ledger.query_state(f"proposal:{proposal_id}"))
    assert proposal["status"] == "REJECTED"
    payment = json.loads(platform.ledger.query_state(f"payment:{payment_id}"))
    assert payment["statuses"][0]["status"] == "EXPIRED"
    # the advertisement accepts new proposals again
    retry = client.post(
        f"/advertisements/{ids['advertise_id']}/proposals", headers=tenant, json={"amount": 1 * MICRO}
    )
    assert retry.status_code == 200


def test_reject_refused_after_payment_submitted(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    assert client.post(f"/payments/{payment_id}/pay", headers=tenant).status_code == 200
    response = client.post(
        f"/proposals/{proposal_id}/decision", headers=landlord, json={"decision": "REJECT"}
    )
    assert response.status_code == 409  # proposal is no longer PENDING


# -- monthly schedule through the gateway ----------------------------------------------------------


def _activate(client, platform, landlord, tenant, payment_id):
    client.post(f"/payments/{payment_id}/pay", headers=tenant)
    client.post("/admin/time/advance", headers=landlord, json={"seconds": 10})
    poll = client.post(f"/payments/{payment_id}/poll", headers=tenant).json()
    assert poll["contract_status"] == "ACTIVE"


def test_cron_generates_subsequent_installments(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    _activate(client, platform, landlord, tenant, payment_id)
    # cross the February boundary: the cron marks installment 1 due
    client.post("/admin/time/advance", headers=landlord, json={"seconds": 32 * 86400})
    payment = json.loads(platform.ledger.query_state(f"payment:{payment_id}"))
    assert payment["statuses"][1]["due_at"] is not None
    assert payment["statuses"][1]["status"] == "PENDING"
    # the tenant pays it through the same endpoint; no deadline applies
    response = client.post(f"/payments/{payment_id}/pay", headers=tenant)
    assert response.status_code == 200 and response.json()["installment_index"] == 1
    client.post("/admin/time/advance", headers=landlord, json={"seconds": 10})
    poll = client.post(f"/payments/{payment_id}/poll", headers=tenant).json()
    assert [s["status"] for s in poll["installments"]][:2] == ["CONFIRMED", "CONFIRMED"]


# -- GDPR --------------------------------------------------------------------------------------------


def test_me_access_rectify_export(client, platform):
    headers = signup_user(client, "u1")
    me = client.get("/me", headers=headers).json()
    assert me["personal"]["email"] == "u1@example.com"
    assert me["wallet"]["balances"]["USDC"] > 0
    response = client.put("/me", headers=headers, json={"personal": {"contact": "+351-999"}})
    assert response.status_code == 200
    assert client.get("/me", headers=headers).json()["personal"]["contact"] == "+351-999"
    response = client.put("/me", headers=headers, json={"personal": {"ssn": "nope"}})
    assert response.status_code == 400
    export = client.get("/me/export", headers=headers).json()
    assert export["user"]["user_id"] == "u1"
    assert "chain_assets" in export


def test_delete_me_blocked_while_contract_active(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    _activate(client, platform, landlord, tenant, payment_id)
    response = client.delete("/me", headers=tenant)
    assert response.status_code == 409
    assert response.json()["error"] == "ACTIVE_CONTRACT_CONSTRAINT"


def test_delete_me_blocked_while_installment_pending(client, platform):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    # accepted but unpaid: the pending first installment blocks erasure
    response = client.delete("/me", headers=tenant)
    assert response.status_code == 409
    assert response.json()["error"] == "PENDING_PAYMENT_CONSTRAINT"


def _end_rental(client, platform, landlord, tenant, ids, payment_id):
    """Pay every installment, cross the term end, and mark the contract ENDED."""
    _activate(client, platform, landlord, tenant, payment_id)
    for _ in range(4):  # cross enough month boundaries for all installments
        client.post("/admin/time/advance", headers=landlord, json={"seconds": 31 * 86400})
        response = client.post(f"/payments/{payment_id}/pay", headers=tenant)
        if response.status_code == 409:  # nothing due any more
            continue
        client.post("/admin/time/advance", headers=landlord, json={"seconds": 10})
        client.post(f"/payments/{payment_id}/poll", headers=tenant)
    response = client.post(
        "/submit",
        headers=landlord,
        json={
            "function": "UpdateContractAsset",
            "args": [ids["contract_id"], json.dumps({"status": "ENDED"})],
        },
    )
    assert response.status_code == 200, response.text


def test_delete_me_with_ended_contract_erases_everything(client, platform, tmp_path):
    landlord, tenant, ids, proposal_id, payment_id = _accepted_rental(client, platform)
    _end_rental(client, platform, landlord, tenant, ids, payment_id)
    response = client.delete("/me", headers=tenant)
    assert response.status_code == 200, response.text
    removed = response.json()["removed_keys"]
    assert f"contract:{ids['contract_id']}" in removed
    # nothing in the world state mentions the erased user
    for key, (value, _) in platform.ledger.snapshot().items():
        if value is None:
            continue
        assert '"tenant"' not in value, key
        if key.startswith("owner:"):
            assert key.split(":")[1] != "tenant"
    # the DB retains no rows, and the transaction log keeps the history
    with pytest.raises(Exception):
        platform.db.get_user("tenant")
    mentions = sum(
        1
        for block in platform.ledger.blocks
        for env in block.envelopes
        for key, value in env.write_set
        if key.startswith("owner:tenant:") or (value is not None and '"tenant"' in value)
    )
    assert mentions >= 1
    # wallets are gone too
    assert not platform.registry.public_wallet.exists("tenant")
    assert not platform.registry.private_wallet.exists("tenant")
    # the token still verifies but the platform no longer knows the user
    assert client.get("/me", headers=tenant).status_code == 404


def test_db_files_never_hold_plaintext_personal_values(client, platform):
    headers = signup_user(client, "scanned-user")
    data_dir = platform.config.path("db_dir")
    blobs = b"".join(p.read_bytes() for p in data_dir.glob("*.tbl"))
    assert b"scanned-user@example.com" not in blobs
    assert b"User scanned-user" not in blobs


def test_services_separable_by_configuration(tmp_path):
    from fastapi.testclient import TestClient

    from rentchain.gateway import Platform, PlatformConfig, create_app

    config = PlatformConfig(data_dir=str(tmp_path / "chain-only"), services=["chain"])
    chain_only = TestClient(create_app(Platform(config)))
    headers = auth_headers(chain_only, "u1")
    assert chain_only.post("/signup", headers=headers).status_code == 200
    assert chain_only.get("/advertisements", headers=headers).status_code == 404

    config = PlatformConfig(data_dir=str(tmp_path / "records-only"), services=["records"])
    records_only = TestClient(create_app(Platform(config)))
    headers = auth_headers(records_only, "u1")
    assert records_only.post("/signup", headers=headers).status_code == 404
    assert records_only.get("/advertisements", headers=headers).status_code == 200
