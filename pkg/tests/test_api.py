from __future__ import annotations

import os
import random

import pytest

from pyom import protocol as P
from pyom.api import create_app
from pyom.client import ApiError, LedgerClient
from pyom.encoding import b64u
from pyom.ledger import Ledger

USD = lambda units: P.MoneyAmount(units, "USD")


@pytest.fixture
def app(tmp_path):
    ledger = Ledger(tmp_path / "data", rng=random.Random(17))
    yield create_app(ledger)
    ledger.close()


@pytest.fixture
def client(app):
    c = LedgerClient.loopback(app)
    yield c
    c.close()


def issue(client, units=1000, merchant=None):
    kp = P.generate_cash_keypair(os.urandom(32))
    kind = "merchant-bound" if merchant else "standard"
    cash_id, sig, binding = client.issue_cash(USD(units), kp.public, kind, merchant)
    note_kind = P.NoteKind.MERCHANT_BOUND if merchant else P.NoteKind.STANDARD
    return P.CashNote(note_kind, cash_id, USD(units), kp.secret, kp.public, sig, binding)


def test_account_lifecycle(client):
    account_id, token = client.create_account("user", 10000, "USD")
    assert len(account_id) == 16 and token
    assert client.get_balance(account_id) == USD(10000)


def test_issue_redeem_over_http(client):
    alice, alice_token = client.create_account("user", 5000, "USD")
    bob, _ = client.create_account("user", 0, "USD")
    client.token = alice_token
    note = issue(client, 1000)
    assert client.get_balance(alice) == USD(4000)
    assert client.get_status(note.cash_id) == "active"
    assert P.verify_issuance(note, client.get_mint_public())

    sig = P.sign(note.cash_secret, P.redeem_message(note.cash_id, bob))
    assert client.redeem(note.cash_id, bob, sig) == USD(1000)
    with pytest.raises(ApiError) as e:
        client.redeem(note.cash_id, bob, sig)
    assert e.value.code == "already-redeemed"


def test_issue_requires_token(client):
    client.token = "bogus"
    kp = P.generate_cash_keypair(os.urandom(32))
    with pytest.raises(ApiError) as e:
        client.issue_cash(USD(100), kp.public, "standard")
    assert e.value.code == "unauthorized"


def test_bound_issue_and_epoch_endpoints(client):
    alice, alice_token = client.create_account("user", 5000, "USD")
    mid, merchant_token = client.create_account("merchant", 0, "USD")
    client.token = alice_token
    note = issue(client, 1000, merchant=mid)
    epoch_id, epoch_public = client.get_epoch(mid)
    assert note.binding.epoch_id == epoch_id == 1
    assert P.verify_endorsement(note, epoch_public)

    client.token = merchant_token
    new_id, new_pub = client.rotate_epoch(mid)
    assert new_id == 2 and new_pub != epoch_public

    # rotate with the wrong token is refused
    client.token = alice_token
    with pytest.raises(ApiError) as e:
        client.rotate_epoch(mid)
    assert e.value.code == "unauthorized"


def test_revoke_endpoint(client):
    alice, token = client.create_account("user", 1000, "USD")
    client.token = token
    note = issue(client, 1000)
    assert client.revoke(note.cash_id) == "finalized"
    assert client.get_status(note.cash_id) == "revoked"
    assert client.get_balance(alice) == USD(1000)


def test_settlements_endpoint(client):
    alice, alice_token = client.create_account("user", 2000, "USD")
    mid, merchant_token = client.create_account("merchant", 0, "USD")
    client.token = alice_token
    notes = [issue(client, 1000, merchant=mid) for _ in range(2)]
    receipts = [
        {
            "payload": P.encode_note(n),
            "redeem_sig": P.sign(n.cash_secret, P.redeem_message(n.cash_id, mid)),
            "accepted_at": "2026-08-23T00:00:00Z",
        }
        for n in notes
    ]
    client.token = merchant_token
    results = client.settle(mid, receipts + [dict(receipts[0])])
    assert [r["status"] for r in results] == ["settled", "settled", "double-spent"]
    assert client.get_balance(mid) == USD(2000)


def test_redeem_batch_endpoint(client):
    alice, token = client.create_account("user", 1000, "USD")
    shop, _ = client.create_account("merchant", 0, "USD")
    client.token = token
    note = issue(client, 1000)
    sig = P.sign(note.cash_secret, P.redeem_message(note.cash_id, shop))
    result = client.redeem_batch([(note.cash_id, sig)], USD(750), shop)
    assert result["merchant_credit"]["minor_units"] == 750
    assert result["change_credits"] == [{"account_id": b64u(alice), "minor_units": 250, "currency": "USD"}]
    assert client.get_balance(alice) == USD(250)


def test_error_body_shape(client):
    c = client._http
    response = c.get("/cash/AAAAAAAAAAAAAAAAAAAAAA/status")
    assert response.status_code == 404
    body = response.json()
    assert body["error_code"] == "unknown-cash"
    assert "message" in body
