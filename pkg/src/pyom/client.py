"""Typed client for the ledger HTTP API.

Works over a real socket (``LedgerClient.connect(url)``) or in-process against
the FastAPI app via an ASGI transport (``LedgerClient.loopback(app)``), which
the scenario harness uses for deterministic runs. Both paths exercise the
same routes, JSON bodies, and error mapping.
"""

from __future__ import annotations

import httpx

from .encoding import b64u, unb64u
from .protocol import MerchantBinding, MoneyAmount


class ApiError(Exception):
    """A 4xx/5xx response carrying the service's error_code."""

    def __init__(self, code: str, message: str = "", details: object = None):
        super().__init__(message or code)
        self.code = code
        self.details = details


class NetworkError(Exception):
    pass


class LedgerClient:
    def __init__(self, http: httpx.Client, token: str | None = None):
        self._http = http
        self.token = token

    @classmethod
    def connect(cls, server_url: str, token: str | None = None) -> "LedgerClient":
        return cls(httpx.Client(base_url=server_url, timeout=10.0), token)

    @classmethod
    def loopback(cls, app, token: str | None = None) -> "LedgerClient":
        from starlette.testclient import TestClient  # sync in-process ASGI bridge

        return cls(TestClient(app, base_url="http://ledger", raise_server_exceptions=False), token)

    def close(self) -> None:
        self._http.close()

    # ------------------------------------------------------------------

    def _request(self, method: str, path: str, json_body: dict | None = None, auth: bool = False) -> dict:
        headers = {}
        if auth:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = self._http.request(method, path, json=json_body, headers=headers)
        except httpx.HTTPError as exc:
            raise NetworkError(str(exc)) from exc
        if response.status_code >= 400:
            try:
                body = response.json()
            except ValueError:
                raise NetworkError(f"HTTP {response.status_code}: {response.text[:200]}")
            raise ApiError(body.get("error_code", "unknown"), body.get("message", ""), body.get("details"))
        return response.json()

    # ------------------------------------------------------------------

    def create_account(self, kind: str, initial_minor_units: int, currency: str) -> tuple[bytes, str]:
        body = self._request("POST", "/accounts", {
            "kind": kind, "initial_minor_units": initial_minor_units, "currency": currency,
        })
        return unb64u(body["account_id"]), body["token"]

    def get_balance(self, account_id: bytes) -> MoneyAmount:
        body = self._request("GET", f"/accounts/{b64u(account_id)}/balance")
        return MoneyAmount(body["minor_units"], body["currency"])

    def issue_cash(self, amount: MoneyAmount, cash_public: bytes, kind: str,
                   target_merchant: bytes | None = None) -> tuple[bytes, bytes, MerchantBinding | None]:
        body = self._request("POST", "/cash", {
            "amount": {"minor_units": amount.minor_units, "currency": amount.currency},
            "cash_public": b64u(cash_public),
            "kind": kind,
            "target_merchant": b64u(target_merchant) if target_merchant else None,
        }, auth=True)
        binding = None
        if body.get("binding"):
            b = body["binding"]
            binding = MerchantBinding(unb64u(b["merchant_id"]), b["epoch_id"], unb64u(b["endorsement_sig"]))
        return unb64u(body["cash_id"]), unb64u(body["issuance_sig"]), binding

    def redeem(self, cash_id: bytes, payee: bytes, redeem_sig: bytes) -> MoneyAmount:
        body = self._request("POST", "/cash/redeem", {
            "cash_id": b64u(cash_id), "payee": b64u(payee), "redeem_sig": b64u(redeem_sig),
        })
        return MoneyAmount(body["credited"]["minor_units"], body["credited"]["currency"])

    def redeem_batch(self, notes: list[tuple[bytes, bytes]], bill: MoneyAmount, payee: bytes) -> dict:
        return self._request("POST", "/cash/redeem-batch", {
            "notes": [{"cash_id": b64u(c), "redeem_sig": b64u(s)} for c, s in notes],
            "bill": {"minor_units": bill.minor_units, "currency": bill.currency},
            "payee": b64u(payee),
        })

    def revoke(self, cash_id: bytes) -> str:
        return self._request("POST", f"/cash/{b64u(cash_id)}/revoke", auth=True)["result"]

    def get_status(self, cash_id: bytes) -> str:
        return self._request("GET", f"/cash/{b64u(cash_id)}/status")["status"]

    def get_mint_public(self) -> bytes:
        return unb64u(self._request("GET", "/mint/public-key")["mint_public"])

    def get_epoch(self, merchant_id: bytes) -> tuple[int, bytes]:
        body = self._request("GET", f"/merchants/{b64u(merchant_id)}/epoch")
        return body["epoch_id"], unb64u(body["epoch_public"])

    def rotate_epoch(self, merchant_id: bytes) -> tuple[int, bytes]:
        body = self._request("POST", f"/merchants/{b64u(merchant_id)}/epoch/rotate", auth=True)
        return body["epoch_id"], unb64u(body["epoch_public"])

    def settle(self, merchant_id: bytes, receipts: list[dict]) -> list[dict]:
        body = self._request("POST", f"/merchants/{b64u(merchant_id)}/settlements", {
            "receipts": [
                {
                    "payload": b64u(r["payload"]),
                    "redeem_sig": b64u(r["redeem_sig"]),
                    "accepted_at": r.get("accepted_at"),
                }
                for r in receipts
            ],
        }, auth=True)
        return body["results"]
