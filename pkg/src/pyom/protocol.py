"""Pure protocol core: note types, canonical encodings, signatures, verification.

Everything in this module is a deterministic function of its inputs. Entropy is
always an explicit argument, so both the ledger service and fully offline
verifiers (merchant terminals, the web wallet) can share the exact same logic.

Canonical note layout (all integers big-endian):

    offset 0   magic  b"PYOM" (4)
           4   version 0x01 (1)
           5   kind: 0x00 Standard, 0x01 MerchantBound (1)
           6   currency, 3 ASCII uppercase letters (3)
           9   minor_units (8)
          17   cash_id (16)
          33   cash_secret (32)
          65   issuance_sig (64)          -- Standard notes end here: 129 bytes
    if kind == MerchantBound:
         129   merchant_id (16)
         145   epoch_id (4)
         149   endorsement_sig (64)       -- end: 213 bytes

cash_public is never encoded; it is re-derived from cash_secret on decode.
Text transport is ``PYOM1:`` + unpadded base64url of the bytes (the exact QR
string).
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

MAGIC = b"PYOM"
VERSION = 1
TEXT_PREFIX = "PYOM1:"

MAX_PAYLOAD_BYTES = 888  # NFC chip budget
STANDARD_NOTE_SIZE = 129
BOUND_NOTE_SIZE = 213

ISSUE_TAG = b"PYOM-ISSUE"
MERCH_TAG = b"PYOM-MERCH"
REDEEM_TAG = b"PYOM-REDEEM"


class ProtocolError(Exception):
    """Protocol-level failure with a stable machine-readable code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code


class NoteKind(Enum):
    STANDARD = 0x00
    MERCHANT_BOUND = 0x01


@dataclass(frozen=True)
class MoneyAmount:
    minor_units: int
    currency: str

    def __post_init__(self):
        # zero is a legal account balance; notes and bills must be positive,
        # enforced where they are created (issuance, decode, batch redeem)
        if not (0 <= self.minor_units < 2**64):
            raise ProtocolError("invalid-argument", "minor_units must be a u64")
        if len(self.currency) != 3 or not self.currency.isascii() or not self.currency.isupper() or not self.currency.isalpha():
            raise ProtocolError("bad-currency", f"bad currency code {self.currency!r}")

    def __str__(self) -> str:
        return f"{self.minor_units // 100}.{self.minor_units % 100:02d} {self.currency}"


@dataclass(frozen=True)
class CashKeypair:
    secret: bytes  # 32-byte signing seed
    public: bytes  # 32-byte verification key


@dataclass(frozen=True)
class MerchantBinding:
    merchant_id: bytes  # 16 bytes
    epoch_id: int  # u32
    endorsement_sig: bytes  # 64 bytes


@dataclass(frozen=True)
class CashNote:
    kind: NoteKind
    cash_id: bytes  # 16 bytes
    amount: MoneyAmount
    cash_secret: bytes  # 32 bytes
    cash_public: bytes  # 32 bytes
    issuance_sig: bytes  # 64 bytes, by the mint root key
    binding: MerchantBinding | None = None

    def __post_init__(self):
        if (self.kind is NoteKind.MERCHANT_BOUND) != (self.binding is not None):
            raise ProtocolError("invalid-note", "binding presence must match note kind")


@dataclass(frozen=True)
class VerifyReport:
    authentic: bool
    key_consistent: bool
    bound_ok: bool | None  # None = not applicable (unbound note)
    overall: str  # "accept" | "reject"
    reason: str | None = None  # reject reason code

    @property
    def accepted(self) -> bool:
        return self.overall == "accept"


# ---------------------------------------------------------------------------
# Ed25519 primitives (deterministic: 32-byte seed, 32-byte pk, 64-byte sig)
# ---------------------------------------------------------------------------

def derive_public(secret: bytes) -> bytes:
    if len(secret) != 32:
        raise ProtocolError("invalid-argument", "seed must be 32 bytes")
    priv = ed25519.Ed25519PrivateKey.from_private_bytes(secret)
    return priv.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


def generate_cash_keypair(entropy: bytes) -> CashKeypair:
    if len(entropy) != 32:
        raise ProtocolError("invalid-argument", "entropy must be exactly 32 bytes")
    return CashKeypair(secret=entropy, public=derive_public(entropy))


def sign(secret: bytes, message: bytes) -> bytes:
    priv = ed25519.Ed25519PrivateKey.from_private_bytes(secret)
    return priv.sign(message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    if len(public) != 32 or len(signature) != 64:
        return False
    try:
        ed25519.Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


# ---------------------------------------------------------------------------
# Canonical signature messages (domain-separated by ASCII tags)
# ---------------------------------------------------------------------------

def _amount_bytes(amount: MoneyAmount) -> bytes:
    return amount.currency.encode("ascii") + amount.minor_units.to_bytes(8, "big")


def issuance_message(kind: NoteKind, amount: MoneyAmount, cash_id: bytes, cash_public: bytes) -> bytes:
    """71-byte message the mint root key signs at issuance."""
    _check_len(cash_id, 16, "cash_id")
    _check_len(cash_public, 32, "cash_public")
    return (
        ISSUE_TAG
        + bytes([VERSION, kind.value])
        + _amount_bytes(amount)
        + cash_id
        + cash_public
    )


def endorsement_message(cash_id: bytes, amount: MoneyAmount, cash_public: bytes, merchant_id: bytes, epoch_id: int) -> bytes:
    """90-byte message the merchant-epoch key signs to color a note."""
    _check_len(cash_id, 16, "cash_id")
    _check_len(cash_public, 32, "cash_public")
    _check_len(merchant_id, 16, "merchant_id")
    if not (0 <= epoch_id < 2**32):
        raise ProtocolError("invalid-argument", "epoch_id must be a u32")
    return (
        MERCH_TAG
        + bytes([VERSION])
        + _amount_bytes(amount)
        + cash_id
        + cash_public
        + merchant_id
        + epoch_id.to_bytes(4, "big")
    )


def redeem_message(cash_id: bytes, payee_account: bytes) -> bytes:
    """43-byte message the note's own secret signs to authorize redemption."""
    _check_len(cash_id, 16, "cash_id")
    _check_len(payee_account, 16, "payee_account")
    return REDEEM_TAG + cash_id + payee_account


def _check_len(value: bytes, n: int, name: str) -> None:
    if len(value) != n:
        raise ProtocolError("invalid-argument", f"{name} must be {n} bytes, got {len(value)}")


# ---------------------------------------------------------------------------
# Note codec
# ---------------------------------------------------------------------------

def encode_note(note: CashNote) -> bytes:
    """Canonical bytes of a note. Always 129 (Standard) or 213 (MerchantBound)."""
    if derive_public(note.cash_secret) != note.cash_public:
        raise ProtocolError("invalid-note", "cash_public does not derive from cash_secret")
    _check_len(note.cash_id, 16, "cash_id")
    _check_len(note.issuance_sig, 64, "issuance_sig")
    out = bytearray()
    out += MAGIC
    out.append(VERSION)
    out.append(note.kind.value)
    out += _amount_bytes(note.amount)
    out += note.cash_id
    out += note.cash_secret
    out += note.issuance_sig
    if note.kind is NoteKind.MERCHANT_BOUND:
        b = note.binding
        _check_len(b.merchant_id, 16, "merchant_id")
        _check_len(b.endorsement_sig, 64, "endorsement_sig")
        out += b.merchant_id
        out += b.epoch_id.to_bytes(4, "big")
        out += b.endorsement_sig
    assert len(out) <= MAX_PAYLOAD_BYTES
    return bytes(out)


def encode_note_text(note: CashNote) -> str:
    """The exact string a QR code carries."""
    return TEXT_PREFIX + base64.urlsafe_b64encode(encode_note(note)).decode("ascii").rstrip("=")


def decode_note(payload: bytes | str) -> CashNote:
    """Structural decode only; signature checks are separate operations."""
    if isinstance(payload, str):
        text = payload.strip()
        if not text.startswith(TEXT_PREFIX):
            raise ProtocolError("bad-magic", "missing PYOM1: prefix")
        b64 = text[len(TEXT_PREFIX):]
        try:
            payload = base64.urlsafe_b64decode(b64 + "=" * (-len(b64) % 4))
        except Exception:
            raise ProtocolError("bad-magic", "undecodable base64url body")
    data = bytes(payload)
    if len(data) < 6:
        raise ProtocolError("truncated", f"payload too short ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise ProtocolError("bad-magic", "bad magic bytes")
    if data[4] != VERSION:
        raise ProtocolError("bad-version", f"unsupported version {data[4]}")
    try:
        kind = NoteKind(data[5])
    except ValueError:
        raise ProtocolError("invalid-note", f"unknown kind byte {data[5]:#x}")
    expected = STANDARD_NOTE_SIZE if kind is NoteKind.STANDARD else BOUND_NOTE_SIZE
    if len(data) < expected:
        raise ProtocolError("truncated", f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise ProtocolError("trailing-bytes", f"expected {expected} bytes, got {len(data)}")
    currency = data[6:9]
    if not (currency.isalpha() and currency.isupper() and currency.isascii()):
        raise ProtocolError("bad-currency", f"bad currency field {currency!r}")
    minor_units = int.from_bytes(data[9:17], "big")
    if minor_units == 0:
        raise ProtocolError("invalid-note", "zero-value note")
    amount = MoneyAmount(minor_units, currency.decode("ascii"))
    cash_id = data[17:33]
    cash_secret = data[33:65]
    issuance_sig = data[65:129]
    binding = None
    if kind is NoteKind.MERCHANT_BOUND:
        binding = MerchantBinding(
            merchant_id=data[129:145],
            epoch_id=int.from_bytes(data[145:149], "big"),
            endorsement_sig=data[149:213],
        )
    return CashNote(
        kind=kind,
        cash_id=cash_id,
        amount=amount,
        cash_secret=cash_secret,
        cash_public=derive_public(cash_secret),
        issuance_sig=issuance_sig,
        binding=binding,
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify_issuance(note: CashNote, mint_public: bytes) -> bool:
    msg = issuance_message(note.kind, note.amount, note.cash_id, note.cash_public)
    return verify(mint_public, msg, note.issuance_sig)


def verify_endorsement(note: CashNote, epoch_public: bytes) -> bool:
    if note.kind is not NoteKind.MERCHANT_BOUND:
        raise ProtocolError("not-applicable", "note carries no merchant binding")
    b = note.binding
    msg = endorsement_message(note.cash_id, note.amount, note.cash_public, b.merchant_id, b.epoch_id)
    return verify(epoch_public, msg, b.endorsement_sig)


def offline_verify(
    note: CashNote,
    expected_merchant: bytes,
    accepted_epochs: list[tuple[int, bytes]],
    mint_public: bytes,
) -> VerifyReport:
    """Full offline acceptance decision for a merchant terminal.

    Requires zero network access: mint_public and accepted_epochs are cached
    while online. Unbound notes are refused outright; offline acceptance is
    only safe for notes colored to this merchant.
    """
    if not accepted_epochs:
        raise ProtocolError("invalid-argument", "accepted_epochs must be non-empty")
    authentic = verify_issuance(note, mint_public)
    key_consistent = derive_public(note.cash_secret) == note.cash_public

    if note.kind is not NoteKind.MERCHANT_BOUND:
        return VerifyReport(authentic, key_consistent, None, "reject", "not-merchant-bound")

    b = note.binding
    bound_ok = False
    binding_reason = None
    if b.merchant_id != expected_merchant:
        binding_reason = "wrong-merchant"
    else:
        epoch_key = next((pk for eid, pk in accepted_epochs if eid == b.epoch_id), None)
        if epoch_key is None:
            binding_reason = "stale-epoch"
        elif not verify_endorsement(note, epoch_key):
            binding_reason = "bad-endorsement"
        else:
            bound_ok = True

    if not authentic:
        return VerifyReport(authentic, key_consistent, bound_ok, "reject", "not-authentic")
    if not key_consistent:
        return VerifyReport(authentic, key_consistent, bound_ok, "reject", "key-mismatch")
    if not bound_ok:
        return VerifyReport(authentic, key_consistent, bound_ok, "reject", binding_reason)
    return VerifyReport(True, True, True, "accept")
