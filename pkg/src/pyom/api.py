"""HTTP/JSON surface of the ledger service.

All binary fields travel as unpadded URL-safe base64. Domain failures map to
4xx responses with ``{"error_code": ..., "message": ...}`` bodies; the codes
are the exact strings the ledger raises.
"""

from __future__ import annotations

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import protocol
from .encoding import b64u, unb64u
from .ledger import Ledger, LedgerError
from .protocol import MoneyAmount, NoteKind, ProtocolError

_STATUS_BY_CODE = {
    "unknown-account": 404,
    "unknown-merchant": 404,
    "unknown-cash": 404,
    "unknown-payee": 404,
    "unauthorized": 401,
    "not-creator": 403,
    "not-allowed": 403,
    "already-redeemed": 409,
    "already-revoked": 409,
}


class Amount(BaseModel):
    minor_units: int
    currency: str

    def to_money(self) -> MoneyAmount:
        return MoneyAmount(self.minor_units, self.currency)


class CreateAccountBody(BaseModel):
    kind: str
    initial_minor_units: int
    currency: str
    allowlist: list[str] | None = None


class IssueBody(BaseModel):
    amount: Amount
    cash_public: str
    kind: str  # "standard" | "merchant-bound"
    target_merchant: str | None = None


class RedeemBody(BaseModel):
    cash_id: str
    payee: str
    redeem_sig: str


class BatchNote(BaseModel):
    cash_id: str
    redeem_sig: str


class RedeemBatchBody(BaseModel):
    notes: list[BatchNote]
    bill: Amount
    payee: str


class Receipt(BaseModel):
    payload: str
    redeem_sig: str
    accepted_at: str | None = None


class SettlementsBody(BaseModel):
    receipts: list[Receipt]


def _money_json(m: MoneyAmount) -> dict:
    return {"minor_units": m.minor_units, "currency": m.currency}


def create_app(ledger: Ledger) -> FastAPI:
    app = FastAPI(title="pyom ledger")
    app.state.ledger = ledger

    @app.exception_handler(LedgerError)
    async def ledger_error(request: Request, exc: LedgerError):
        body = {"error_code": exc.code, "message": str(exc)}
        if exc.details is not None:
            body["details"] = exc.details
        return JSONResponse(status_code=_STATUS_BY_CODE.get(exc.code, 400), content=body)

    @app.exception_handler(ProtocolError)
    async def protocol_error(request: Request, exc: ProtocolError):
        return JSONResponse(status_code=400, content={"error_code": exc.code, "message": str(exc)})

    def bearer(authorization: str | None) -> bytes:
        if not authorization or not authorization.startswith("Bearer "):
            raise LedgerError("unauthorized", "missing bearer token")
        return ledger.account_for_token(authorization.removeprefix("Bearer "))

    @app.post("/accounts")
    def create_account(body: CreateAccountBody):
        allowlist = [unb64u(a) for a in body.allowlist or []]
        account_id, token = ledger.create_account(
            body.kind, MoneyAmount(body.initial_minor_units, body.currency), allowlist=allowlist
        )
        return {"account_id": b64u(account_id), "token": token}

    @app.get("/accounts/{account_id}/balance")
    def get_balance(account_id: str):
        return _money_json(ledger.get_balance(unb64u(account_id)))

    @app.post("/cash")
    def issue_cash(body: IssueBody, authorization: str | None = Header(default=None)):
        requester = bearer(authorization)
        kind = NoteKind.MERCHANT_BOUND if body.kind == "merchant-bound" else NoteKind.STANDARD
        target = unb64u(body.target_merchant) if body.target_merchant else None
        cash_id, sig, binding = ledger.issue_cash(
            requester, body.amount.to_money(), unb64u(body.cash_public), kind, target
        )
        out = {"cash_id": b64u(cash_id), "issuance_sig": b64u(sig)}
        if binding is not None:
            out["binding"] = {
                "merchant_id": b64u(binding.merchant_id),
                "epoch_id": binding.epoch_id,
                "endorsement_sig": b64u(binding.endorsement_sig),
            }
        return out

    @app.post("/cash/redeem")
    def redeem(body: RedeemBody):
        credited = ledger.redeem_cash(unb64u(body.cash_id), unb64u(body.payee), unb64u(body.redeem_sig))
        return {"credited": _money_json(credited)}

    @app.post("/cash/redeem-batch")
    def redeem_batch(body: RedeemBatchBody):
        result = ledger.redeem_batch_with_change(
            [(unb64u(n.cash_id), unb64u(n.redeem_sig)) for n in body.notes],
            body.bill.to_money(),
            unb64u(body.payee),
        )
        return {
            "merchant_credit": _money_json(result["merchant_credit"]),
            "change_credits": [
                {"account_id": b64u(aid), **_money_json(amount)}
                for aid, amount in result["change_credits"]
            ],
            "per_note": result["per_note"],
        }

    @app.post("/cash/{cash_id}/revoke")
    def revoke(cash_id: str, authorization: str | None = Header(default=None)):
        requester = bearer(authorization)
        return {"result": ledger.revoke_cash(unb64u(cash_id), requester)}

    @app.get("/cash/{cash_id}/status")
    def status(cash_id: str):
        return {"status": ledger.get_status(unb64u(cash_id))}

    @app.get("/mint/public-key")
    def mint_public():
        return {"mint_public": b64u(ledger.mint_public)}

    @app.get("/merchants/{merchant_id}/epoch")
    def get_epoch(merchant_id: str):
        epoch_id, epoch_public = ledger.get_epoch(unb64u(merchant_id))
        return {"epoch_id": epoch_id, "epoch_public": b64u(epoch_public)}

    @app.post("/merchants/{merchant_id}/epoch/rotate")
    def rotate(merchant_id: str, authorization: str | None = Header(default=None)):
        mid = unb64u(merchant_id)
        ledger.authenticate(mid, (authorization or "").removeprefix("Bearer "))
        epoch_id, epoch_public = ledger.rotate_merchant_epoch(mid)
        return {"epoch_id": epoch_id, "epoch_public": b64u(epoch_public)}

    @app.post("/merchants/{merchant_id}/settlements")
    def settlements(merchant_id: str, body: SettlementsBody, authorization: str | None = Header(default=None)):
        mid = unb64u(merchant_id)
        ledger.authenticate(mid, (authorization or "").removeprefix("Bearer "))
        receipts = [
            {"payload": unb64u(r.payload), "redeem_sig": unb64u(r.redeem_sig), "accepted_at": r.accepted_at}
            for r in body.receipts
        ]
        return {"results": ledger.settle_offline_receipts(mid, receipts)}

    return app
