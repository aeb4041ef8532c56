"""The central-bank ledger: accounts, note lifecycle, merchant epochs,
settlement, revocation.

All state is a pure fold over an append-only event log (see eventlog.py); the
log append is the commit point for every mutation. A single re-entrant lock
makes per-cash_id transitions linearizable and batch settlement atomic -- the
service is single-process by design.
"""

from __future__ import annotations

import hashlib
import json
import random
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import protocol
from .encoding import b64u, unb64u
from .eventlog import EventLog
from .protocol import (
    CashNote,
    MerchantBinding,
    MoneyAmount,
    NoteKind,
    ProtocolError,
)

# note lifecycle states
ACTIVE = "active"
REVOKE_PENDING = "revoke-pending"
REDEEMED = "redeemed"
REVOKED = "revoked"

LIVE_STATES = (ACTIVE, REVOKE_PENDING)  # states whose value still backs a note


class LedgerError(Exception):
    def __init__(self, code: str, message: str = "", details: object = None):
        super().__init__(message or code)
        self.code = code
        self.details = details


@dataclass
class Account:
    account_id: bytes
    kind: str  # "user" | "merchant"
    balance: int  # minor units
    token: str
    allowlist: set[bytes] = field(default_factory=set)  # merchant-bound issuance; empty = open


@dataclass
class CashRecord:
    cash_id: bytes
    amount: int
    cash_public: bytes
    creator: bytes
    kind: NoteKind
    binding: tuple[bytes, int] | None  # (merchant_id, epoch_id)
    status: str = ACTIVE
    payee: bytes | None = None
    created_seq: int = 0


@dataclass
class MerchantEpoch:
    epoch_id: int
    secret: bytes
    public: bytes
    state: str = "current"  # "current" | "retired"


class Ledger:
    """Single-currency ledger service core.

    Pass a seeded ``random.Random`` as ``rng`` for deterministic simulation;
    production uses the OS CSPRNG.
    """

    def __init__(self, data_dir: Path | str, currency: str = "USD", rng: random.Random | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.currency = currency
        self._rng = rng
        self._lock = threading.RLock()

        mint_path = self.data_dir / "mint.key"
        if mint_path.exists():
            self._mint_secret = mint_path.read_bytes()
        else:
            self._mint_secret = self._random_bytes(32)
            mint_path.write_bytes(self._mint_secret)
            mint_path.chmod(0o600)
        self.mint_public = protocol.derive_public(self._mint_secret)

        self.accounts: dict[bytes, Account] = {}
        self.cash: dict[bytes, CashRecord] = {}
        self.epochs: dict[bytes, dict[int, MerchantEpoch]] = {}
        self.current_epoch: dict[bytes, int] = {}
        self.seq = 0
        self.events: list[dict] = []  # in-memory copy of every applied event

        self._log = EventLog(self.data_dir / "events.log")
        for event in self._log.replay():
            self._apply(event)

    def close(self) -> None:
        self._log.close()

    # ------------------------------------------------------------------
    # randomness
    # ------------------------------------------------------------------

    def _random_bytes(self, n: int) -> bytes:
        if self._rng is not None:
            return self._rng.randbytes(n)
        return secrets.token_bytes(n)

    # ------------------------------------------------------------------
    # event fold
    # ------------------------------------------------------------------

    def _commit(self, event: dict) -> dict:
        """Append to the durable log, then apply. Caller holds the lock."""
        self._commit_many([event])
        return event

    def _commit_many(self, events: list[dict]) -> None:
        """One durable write for a multi-event transaction."""
        for i, event in enumerate(events):
            event["seq"] = self.seq + 1 + i
        self._log.append_many(events)
        for event in events:
            self._apply(event)

    def _apply(self, event: dict) -> None:
        self.seq = event["seq"]
        self.events.append(event)
        kind = event["type"]
        if kind == "account_created":
            aid = unb64u(event["account_id"])
            self.accounts[aid] = Account(
                account_id=aid,
                kind=event["kind"],
                balance=event["minor_units"],
                token=event["token"],
                allowlist={unb64u(a) for a in event.get("allowlist", [])},
            )
            if event["kind"] == "merchant":
                epoch = MerchantEpoch(
                    epoch_id=1,
                    secret=unb64u(event["epoch_secret"]),
                    public=unb64u(event["epoch_public"]),
                )
                self.epochs[aid] = {1: epoch}
                self.current_epoch[aid] = 1
        elif kind == "cash_issued":
            cid = unb64u(event["cash_id"])
            creator = unb64u(event["creator"])
            binding = None
            if event.get("binding"):
                binding = (unb64u(event["binding"]["merchant_id"]), event["binding"]["epoch_id"])
            self.accounts[creator].balance -= event["minor_units"]
            self.cash[cid] = CashRecord(
                cash_id=cid,
                amount=event["minor_units"],
                cash_public=unb64u(event["cash_public"]),
                creator=creator,
                kind=NoteKind(event["note_kind"]),
                binding=binding,
                created_seq=event["seq"],
            )
        elif kind == "cash_redeemed":
            record = self.cash[unb64u(event["cash_id"])]
            payee = unb64u(event["payee"])
            record.status = REDEEMED
            record.payee = payee
            self.accounts[payee].balance += event["credited"]
        elif kind == "change_returned":
            self.accounts[unb64u(event["creator"])].balance += event["minor_units"]
        elif kind == "cash_revoked":
            record = self.cash[unb64u(event["cash_id"])]
            if event["finalized"]:
                record.status = REVOKED
                self.accounts[record.creator].balance += record.amount
            else:
                record.status = REVOKE_PENDING
        elif kind == "epoch_rotated":
            mid = unb64u(event["merchant_id"])
            new_id = event["epoch_id"]
            self.epochs[mid][self.current_epoch[mid]].state = "retired"
            self.epochs[mid][new_id] = MerchantEpoch(
                epoch_id=new_id,
                secret=unb64u(event["epoch_secret"]),
                public=unb64u(event["epoch_public"]),
            )
            self.current_epoch[mid] = new_id
            # pending revocations bound to a now-retired epoch finalize here
            for record in self.cash.values():
                if (
                    record.status == REVOKE_PENDING
                    and record.binding is not None
                    and record.binding[0] == mid
                    and record.binding[1] < new_id
                ):
                    record.status = REVOKED
                    self.accounts[record.creator].balance += record.amount
        elif kind == "settlement_processed":
            pass  # informational summary; per-receipt effects are their own events
        else:
            raise ValueError(f"unknown event type {kind!r}")

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------

    def create_account(self, kind: str, initial_balance: MoneyAmount, allowlist: list[bytes] | None = None) -> tuple[bytes, str]:
        if kind not in ("user", "merchant"):
            raise LedgerError("invalid-argument", f"bad account kind {kind!r}")
        self._check_currency(initial_balance.currency)
        with self._lock:
            account_id = self._random_bytes(16)
            token = b64u(self._random_bytes(32))
            event = {
                "type": "account_created",
                "account_id": b64u(account_id),
                "kind": kind,
                "minor_units": initial_balance.minor_units,
                "currency": initial_balance.currency,
                "token": token,
                "allowlist": [b64u(a) for a in (allowlist or [])],
            }
            if kind == "merchant":
                epoch_secret = self._random_bytes(32)
                event["epoch_secret"] = b64u(epoch_secret)
                event["epoch_public"] = b64u(protocol.derive_public(epoch_secret))
            self._commit(event)
            return account_id, token

    def issue_cash(
        self,
        requester: bytes,
        amount: MoneyAmount,
        cash_public: bytes,
        kind: NoteKind,
        target_merchant: bytes | None = None,
    ) -> tuple[bytes, bytes, MerchantBinding | None]:
        self._check_currency(amount.currency)
        if amount.minor_units == 0:
            raise LedgerError("zero-amount")
        if len(cash_public) != 32:
            raise LedgerError("invalid-argument", "cash_public must be 32 bytes")
        with self._lock:
            account = self.accounts.get(requester)
            if account is None:
                raise LedgerError("unknown-account")
            if kind is NoteKind.MERCHANT_BOUND:
                if target_merchant is None or target_merchant not in self.accounts or self.accounts[target_merchant].kind != "merchant":
                    raise LedgerError("unknown-merchant")
                merchant = self.accounts[target_merchant]
                if merchant.allowlist and requester not in merchant.allowlist:
                    raise LedgerError("not-allowed", "requester not on the merchant's allowlist")
            if account.balance < amount.minor_units:
                raise LedgerError("insufficient-balance")

            cash_id = self._random_bytes(16)
            while cash_id in self.cash:
                cash_id = self._random_bytes(16)
            issuance_sig = protocol.sign(
                self._mint_secret,
                protocol.issuance_message(kind, amount, cash_id, cash_public),
            )
            binding = None
            binding_event = None
            if kind is NoteKind.MERCHANT_BOUND:
                epoch_id = self.current_epoch[target_merchant]
                epoch = self.epochs[target_merchant][epoch_id]
                endorsement_sig = protocol.sign(
                    epoch.secret,
                    protocol.endorsement_message(cash_id, amount, cash_public, target_merchant, epoch_id),
                )
                binding = MerchantBinding(target_merchant, epoch_id, endorsement_sig)
                binding_event = {"merchant_id": b64u(target_merchant), "epoch_id": epoch_id}
            self._commit({
                "type": "cash_issued",
                "cash_id": b64u(cash_id),
                "creator": b64u(requester),
                "minor_units": amount.minor_units,
                "currency": amount.currency,
                "cash_public": b64u(cash_public),
                "note_kind": kind.value,
                "binding": binding_event,
            })
            return cash_id, issuance_sig, binding

    def redeem_cash(self, cash_id: bytes, payee: bytes, redeem_sig: bytes) -> MoneyAmount:
        with self._lock:
            if payee not in self.accounts:
                raise LedgerError("unknown-payee")
            record = self.cash.get(cash_id)
            if record is None:
                raise LedgerError("unknown-cash")
            if record.status == REDEEMED:
                raise LedgerError("already-redeemed")
            if record.status == REVOKED:
                raise LedgerError("already-revoked")
            # REVOKE_PENDING still redeems: a settlement that lands before the
            # pending revocation finalizes wins
            if not protocol.verify(record.cash_public, protocol.redeem_message(cash_id, payee), redeem_sig):
                raise LedgerError("bad-signature")
            self._commit({
                "type": "cash_redeemed",
                "cash_id": b64u(cash_id),
                "payee": b64u(payee),
                "credited": record.amount,
            })
            return MoneyAmount(record.amount, self.currency)

    def redeem_batch_with_change(
        self,
        notes: list[tuple[bytes, bytes]],
        bill: MoneyAmount,
        payee: bytes,
    ) -> dict:
        """All-or-nothing batch redeem; the boundary note splits into
        merchant credit and change back to that note's creator."""
        if not notes:
            raise LedgerError("invalid-argument", "notes must be non-empty")
        self._check_currency(bill.currency)
        if bill.minor_units == 0:
            raise LedgerError("zero-amount")
        with self._lock:
            if payee not in self.accounts:
                raise LedgerError("unknown-payee")
            offenders = []
            seen: set[bytes] = set()
            for cash_id, sig in notes:
                record = self.cash.get(cash_id)
                if record is None:
                    offenders.append((cash_id, "unknown-cash"))
                elif cash_id in seen:
                    offenders.append((cash_id, "duplicate-in-batch"))
                elif record.status != ACTIVE:
                    offenders.append((cash_id, "not-active"))
                elif not protocol.verify(record.cash_public, protocol.redeem_message(cash_id, payee), sig):
                    offenders.append((cash_id, "bad-signature"))
                seen.add(cash_id)
            if offenders:
                raise LedgerError(
                    "whole-batch-rejected",
                    "one or more notes are unusable",
                    details=[{"cash_id": b64u(c), "reason": r} for c, r in offenders],
                )
            amounts = [self.cash[c].amount for c, _ in notes]
            if sum(amounts) < bill.minor_units:
                raise LedgerError("insufficient-total")
            running = 0
            boundary = None
            for i, amt in enumerate(amounts):
                running += amt
                if running >= bill.minor_units:
                    boundary = i
                    break
            if boundary < len(notes) - 1:
                raise LedgerError("excess-notes", "notes beyond the bill boundary were submitted")

            per_note = []
            change_credits = []
            events = []
            consumed = 0
            for i, (cash_id, _) in enumerate(notes):
                record = self.cash[cash_id]
                used = record.amount if i < boundary else bill.minor_units - consumed
                consumed += used
                events.append({
                    "type": "cash_redeemed",
                    "cash_id": b64u(cash_id),
                    "payee": b64u(payee),
                    "credited": used,
                })
                remainder = record.amount - used
                if remainder > 0:
                    events.append({
                        "type": "change_returned",
                        "cash_id": b64u(cash_id),
                        "creator": b64u(record.creator),
                        "minor_units": remainder,
                    })
                    change_credits.append((record.creator, MoneyAmount(remainder, self.currency)))
                per_note.append({"cash_id": b64u(cash_id), "credited": used, "change": remainder})
            self._commit_many(events)
            return {
                "merchant_credit": MoneyAmount(bill.minor_units, self.currency),
                "change_credits": change_credits,
                "per_note": per_note,
            }

    def revoke_cash(self, cash_id: bytes, requester: bytes) -> str:
        """Returns "finalized" or "pending"."""
        with self._lock:
            if requester not in self.accounts:
                raise LedgerError("unknown-account")
            record = self.cash.get(cash_id)
            if record is None:
                raise LedgerError("unknown-cash")
            if record.creator != requester:
                raise LedgerError("not-creator")
            if record.status == REDEEMED:
                raise LedgerError("already-redeemed")
            if record.status in (REVOKED, REVOKE_PENDING):
                raise LedgerError("already-revoked")
            if record.kind is NoteKind.MERCHANT_BOUND:
                merchant_id, epoch_id = record.binding
                # pending until the bound epoch is no longer current; if the
                # epoch already rotated away, finalize immediately
                finalized = epoch_id < self.current_epoch[merchant_id]
            else:
                finalized = True
            self._commit({
                "type": "cash_revoked",
                "cash_id": b64u(cash_id),
                "requester": b64u(requester),
                "finalized": finalized,
            })
            return "finalized" if finalized else "pending"

    def rotate_merchant_epoch(self, merchant_id: bytes) -> tuple[int, bytes]:
        with self._lock:
            merchant = self.accounts.get(merchant_id)
            if merchant is None or merchant.kind != "merchant":
                raise LedgerError("unknown-merchant")
            new_id = self.current_epoch[merchant_id] + 1
            epoch_secret = self._random_bytes(32)
            epoch_public = protocol.derive_public(epoch_secret)
            self._commit({
                "type": "epoch_rotated",
                "merchant_id": b64u(merchant_id),
                "epoch_id": new_id,
                "epoch_secret": b64u(epoch_secret),
                "epoch_public": b64u(epoch_public),
            })
            return new_id, epoch_public

    def settle_offline_receipts(self, merchant_id: bytes, receipts: list[dict]) -> list[dict]:
        """Each receipt: {"payload": bytes, "redeem_sig": bytes, "accepted_at": str?}.
        Processed independently in order; first submission of a duplicate wins."""
        with self._lock:
            merchant = self.accounts.get(merchant_id)
            if merchant is None or merchant.kind != "merchant":
                raise LedgerError("unknown-merchant")
            results = []
            for receipt in receipts:
                results.append(self._settle_one(merchant_id, receipt))
            self._commit({
                "type": "settlement_processed",
                "merchant_id": b64u(merchant_id),
                "receipts": len(receipts),
                "settled": sum(1 for r in results if r["status"] == "settled"),
            })
            return results

    def _settle_one(self, merchant_id: bytes, receipt: dict) -> dict:
        try:
            note = protocol.decode_note(receipt["payload"])
        except ProtocolError:
            return {"cash_id": None, "status": "malformed"}
        result = {"cash_id": b64u(note.cash_id), "status": None}
        record = self.cash.get(note.cash_id)
        if record is None:
            result["status"] = "unknown-cash"
            return result
        if record.kind is not NoteKind.MERCHANT_BOUND or record.binding[0] != merchant_id:
            result["status"] = "wrong-merchant"
            return result
        if record.status == REDEEMED:
            result["status"] = "double-spent"
            return result
        if record.status == REVOKED:
            result["status"] = "revoked"
            return result
        sig = receipt["redeem_sig"]
        if not protocol.verify(record.cash_public, protocol.redeem_message(note.cash_id, merchant_id), sig):
            result["status"] = "bad-signature"
            return result
        self._commit({
            "type": "cash_redeemed",
            "cash_id": b64u(note.cash_id),
            "payee": b64u(merchant_id),
            "credited": record.amount,
        })
        result["status"] = "settled"
        result["minor_units"] = record.amount
        return result

    # ------------------------------------------------------------------
    # reads
    # ------------------------------------------------------------------

    def get_balance(self, account_id: bytes) -> MoneyAmount:
        account = self.accounts.get(account_id)
        if account is None:
            raise LedgerError("unknown-account")
        return MoneyAmount(account.balance, self.currency)

    def get_status(self, cash_id: bytes) -> str:
        record = self.cash.get(cash_id)
        if record is None:
            raise LedgerError("unknown-cash")
        return record.status

    def get_epoch(self, merchant_id: bytes) -> tuple[int, bytes]:
        merchant = self.accounts.get(merchant_id)
        if merchant is None or merchant.kind != "merchant":
            raise LedgerError("unknown-merchant")
        epoch_id = self.current_epoch[merchant_id]
        return epoch_id, self.epochs[merchant_id][epoch_id].public

    def authenticate(self, account_id: bytes, token: str) -> None:
        account = self.accounts.get(account_id)
        if account is None or account.token != token:
            raise LedgerError("unauthorized", "bad or missing bearer token")

    def account_for_token(self, token: str) -> bytes:
        with self._lock:
            for account in self.accounts.values():
                if account.token == token:
                    return account.account_id
        raise LedgerError("unauthorized", "bad or missing bearer token")

    # ------------------------------------------------------------------
    # invariant helpers
    # ------------------------------------------------------------------

    def total_minor_units(self) -> int:
        """Conserved quantity: account balances plus value of live notes."""
        with self._lock:
            return sum(a.balance for a in self.accounts.values()) + sum(
                c.amount for c in self.cash.values() if c.status in LIVE_STATES
            )

    def state_digest(self) -> str:
        """Stable hash of the full observable state, for crash-recovery checks."""
        with self._lock:
            snapshot = {
                "seq": self.seq,
                "accounts": {
                    b64u(a.account_id): [a.kind, a.balance, a.token, sorted(b64u(x) for x in a.allowlist)]
                    for a in self.accounts.values()
                },
                "cash": {
                    b64u(c.cash_id): [
                        c.amount,
                        b64u(c.cash_public),
                        b64u(c.creator),
                        c.kind.value,
                        [b64u(c.binding[0]), c.binding[1]] if c.binding else None,
                        c.status,
                        b64u(c.payee) if c.payee else None,
                    ]
                    for c in self.cash.values()
                },
                "epochs": {
                    b64u(mid): {
                        str(eid): [b64u(e.secret), b64u(e.public), e.state]
                        for eid, e in eps.items()
                    }
                    for mid, eps in self.epochs.items()
                },
                "current_epoch": {b64u(mid): eid for mid, eid in self.current_epoch.items()},
            }
        blob = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _check_currency(self, currency: str) -> None:
        if currency != self.currency:
            raise LedgerError("bad-currency", f"this ledger serves {self.currency}, not {currency}")
