"""Local wallet / merchant-terminal state and operations.

Store layout (one account per store):

    credentials.json   account_id, bearer token, server URL, account kind
    keys.json          cached mint public key + this merchant's epoch keys
    notes/<id>/        note.bin, note.txt, note.png for every printed note
    queue/             one JSON file per offline receipt, fsynced on accept
    rejected/          receipts the server refused at settlement, with reasons

``accept_offline`` touches the network never; it relies entirely on the keys
cached by ``refresh_keys``.
"""

from __future__ import annotations

import json
import os
import secrets
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import protocol, qr
from .client import LedgerClient
from .encoding import b64u, unb64u
from .protocol import CashNote, MoneyAmount, NoteKind, ProtocolError


class WalletError(Exception):
    """Domain failure surfaced to the user (CLI exit code 1)."""


@dataclass
class Credentials:
    server: str
    account_id: bytes
    token: str
    kind: str
    currency: str


class WalletStore:
    def __init__(self, directory: Path | str):
        self.dir = Path(directory)
        self.credentials_path = self.dir / "credentials.json"
        self.keys_path = self.dir / "keys.json"
        self.notes_dir = self.dir / "notes"
        self.queue_dir = self.dir / "queue"
        self.rejected_dir = self.dir / "rejected"

    # ------------------------------------------------------------------
    # store files
    # ------------------------------------------------------------------

    @property
    def initialized(self) -> bool:
        return self.credentials_path.exists()

    def load_credentials(self) -> Credentials:
        if not self.initialized:
            raise WalletError(f"wallet store {self.dir} is not initialized (run `pyom init`)")
        raw = json.loads(self.credentials_path.read_text())
        return Credentials(
            server=raw["server"],
            account_id=unb64u(raw["account_id"]),
            token=raw["token"],
            kind=raw["kind"],
            currency=raw["currency"],
        )

    def save_credentials(self, creds: Credentials) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        for sub in (self.notes_dir, self.queue_dir, self.rejected_dir):
            sub.mkdir(exist_ok=True)
        self.credentials_path.write_text(json.dumps({
            "server": creds.server,
            "account_id": b64u(creds.account_id),
            "token": creds.token,
            "kind": creds.kind,
            "currency": creds.currency,
        }, indent=2))
        self.credentials_path.chmod(0o600)

    def load_keys(self) -> dict:
        if not self.keys_path.exists():
            raise WalletError("no cached keys; run `pyom refresh-keys` while online")
        return json.loads(self.keys_path.read_text())

    def save_keys(self, keys: dict) -> None:
        self.keys_path.write_text(json.dumps(keys, indent=2))

    def queued_receipts(self) -> list[Path]:
        return sorted(self.queue_dir.glob("*.json"))


class Wallet:
    def __init__(self, store: WalletStore, client: LedgerClient | None = None, server: str | None = None):
        self.store = store
        if client is None:
            creds = store.load_credentials()
            client = LedgerClient.connect(server or creds.server, creds.token)
        self.client = client

    @property
    def creds(self) -> Credentials:
        return self.store.load_credentials()

    # ------------------------------------------------------------------
    # online operations
    # ------------------------------------------------------------------

    @classmethod
    def init(cls, store: WalletStore, client: LedgerClient, server: str, kind: str,
             initial_minor_units: int, currency: str) -> "Wallet":
        if store.initialized:
            raise WalletError(f"already initialized: {store.credentials_path}")
        account_id, token = client.create_account(kind, initial_minor_units, currency)
        client.token = token
        store.save_credentials(Credentials(server, account_id, token, kind, currency))
        return cls(store, client)

    def balance(self) -> MoneyAmount:
        return self.client.get_balance(self.creds.account_id)

    def status(self, cash_id: bytes) -> str:
        return self.client.get_status(cash_id)

    def print_note(self, amount: MoneyAmount, kind: str, merchant_id: bytes | None = None,
                   out_dir: Path | None = None) -> tuple[CashNote, Path]:
        """Issue a note and write note.bin / note.txt / note.png atomically."""
        entropy = secrets.token_bytes(32)
        keypair = protocol.generate_cash_keypair(entropy)
        cash_id, issuance_sig, binding = self.client.issue_cash(
            amount, keypair.public, kind, merchant_id)
        note_kind = NoteKind.MERCHANT_BOUND if kind == "merchant-bound" else NoteKind.STANDARD
        note = CashNote(note_kind, cash_id, amount, keypair.secret, keypair.public,
                        issuance_sig, binding)
        payload = protocol.encode_note(note)
        text = protocol.encode_note_text(note)

        target = Path(out_dir) if out_dir else self.store.notes_dir / b64u(cash_id)
        target.parent.mkdir(parents=True, exist_ok=True)
        # stage in a temp dir so a partial failure leaves no note files behind
        staging = Path(tempfile.mkdtemp(dir=target.parent, prefix=".print-"))
        try:
            (staging / "note.bin").write_bytes(payload)
            (staging / "note.txt").write_text(text + "\n")
            qr.render_qr(text, staging / "note.png")
            os.rename(staging, target)
        except BaseException:
            for f in staging.glob("*"):
                f.unlink()
            staging.rmdir()
            raise
        return note, target

    def deposit(self, source: str | Path | bytes) -> MoneyAmount:
        note = self._read_note(source)
        payee = self.creds.account_id
        sig = protocol.sign(note.cash_secret, protocol.redeem_message(note.cash_id, payee))
        credited = self.client.redeem(note.cash_id, payee, sig)
        self._mark_spent(note.cash_id)
        return credited

    def refresh_keys(self) -> dict:
        creds = self.creds
        keys = {"mint_public": b64u(self.client.get_mint_public())}
        if creds.kind == "merchant":
            epoch_id, epoch_public = self.client.get_epoch(creds.account_id)
            # only the current epoch stays accepted: rotation invalidates
            # offline acceptance of older colored notes
            keys["epochs"] = [[epoch_id, b64u(epoch_public)]]
        self.store.save_keys(keys)
        return keys

    def revoke(self, cash_id: bytes) -> str:
        return self.client.revoke(cash_id)

    def rotate_epoch(self) -> tuple[int, bytes]:
        creds = self.creds
        if creds.kind != "merchant":
            raise WalletError("only merchant wallets own an epoch")
        result = self.client.rotate_epoch(creds.account_id)
        self.refresh_keys()
        return result

    # ------------------------------------------------------------------
    # offline operations
    # ------------------------------------------------------------------

    def accept_offline(self, source: str | Path | bytes) -> protocol.VerifyReport:
        """Verify a colored note with cached keys only and, on accept, enqueue
        a settlement receipt. Performs zero network operations."""
        creds = self.creds
        if creds.kind != "merchant":
            raise WalletError("offline acceptance requires a merchant wallet")
        keys = self.store.load_keys()
        if "epochs" not in keys:
            raise WalletError("no cached epoch keys; run `pyom refresh-keys` while online")
        note = self._read_note(source)
        report = protocol.offline_verify(
            note,
            creds.account_id,
            [(eid, unb64u(pub)) for eid, pub in keys["epochs"]],
            unb64u(keys["mint_public"]),
        )
        if report.accepted:
            sig = protocol.sign(note.cash_secret,
                                protocol.redeem_message(note.cash_id, creds.account_id))
            self._enqueue_receipt(note, sig)
        return report

    def _enqueue_receipt(self, note: CashNote, redeem_sig: bytes) -> Path:
        receipt = {
            "payload": b64u(protocol.encode_note(note)),
            "redeem_sig": b64u(redeem_sig),
            "accepted_at": datetime.now(timezone.utc).isoformat(),
        }
        name = f"{b64u(note.cash_id)}-{secrets.token_hex(8)}.json"
        path = self.store.queue_dir / name
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
        try:
            os.write(fd, json.dumps(receipt, indent=2).encode())
            os.fsync(fd)  # the receipt must survive a crash once ACCEPT is shown
        finally:
            os.close(fd)
        return path

    def sync(self) -> dict:
        """Submit the receipt queue for settlement. Settled receipts are
        removed; refused ones move to rejected/ with the server's reason.
        On network failure the queue is left intact (resubmission is safe)."""
        creds = self.creds
        paths = self.store.queued_receipts()
        receipts = []
        for path in paths:
            raw = json.loads(path.read_text())
            receipts.append({
                "payload": unb64u(raw["payload"]),
                "redeem_sig": unb64u(raw["redeem_sig"]),
                "accepted_at": raw.get("accepted_at"),
            })
        if not receipts:
            return {"settled": 0, "rejected": 0, "results": []}
        results = self.client.settle(creds.account_id, receipts)
        settled = rejected = 0
        for path, result in zip(paths, results):
            if result["status"] == "settled":
                settled += 1
                path.unlink()
            else:
                rejected += 1
                raw = json.loads(path.read_text())
                raw["rejected_reason"] = result["status"]
                dest = self.store.rejected_dir / path.name
                dest.write_text(json.dumps(raw, indent=2))
                path.unlink()
        return {"settled": settled, "rejected": rejected, "results": results}

    # ------------------------------------------------------------------

    def _read_note(self, source: str | Path | bytes) -> CashNote:
        if isinstance(source, bytes):
            return protocol.decode_note(source)
        path = Path(source)
        if path.exists():
            data = path.read_bytes()
            if data[:8] == b"\x89PNG\r\n\x1a\n":
                from .qr import decode_qr
                return protocol.decode_note(decode_qr(path))
            if data.lstrip()[:6] == b"PYOM1:":
                return protocol.decode_note(data.decode("ascii").strip())
            return protocol.decode_note(data)
        if isinstance(source, str) and source.strip().startswith("PYOM1:"):
            return protocol.decode_note(source)
        raise ProtocolError("truncated", f"no such file and not a PYOM1: payload: {source}")

    def _mark_spent(self, cash_id: bytes) -> None:
        note_dir = self.store.notes_dir / b64u(cash_id)
        if note_dir.is_dir():
            (note_dir / "SPENT").touch()

    def close(self) -> None:
        self.client.close()
