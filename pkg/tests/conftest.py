from __future__ import annotations

import random

import pytest

from pyom import protocol as P


class MintHarness:
    """Standalone note factory for protocol-level tests (no ledger)."""

    def __init__(self, seed: int = 7):
        self.rng = random.Random(seed)
        self.mint_secret = self.rng.randbytes(32)
        self.mint_public = P.derive_public(self.mint_secret)

    def keypair(self) -> P.CashKeypair:
        return P.generate_cash_keypair(self.rng.randbytes(32))

    def make_note(
        self,
        minor_units: int = 1000,
        currency: str = "USD",
        merchant_id: bytes | None = None,
        epoch_id: int = 1,
        epoch_secret: bytes | None = None,
    ) -> P.CashNote:
        kp = self.keypair()
        cash_id = self.rng.randbytes(16)
        amount = P.MoneyAmount(minor_units, currency)
        kind = P.NoteKind.STANDARD if merchant_id is None else P.NoteKind.MERCHANT_BOUND
        sig = P.sign(self.mint_secret, P.issuance_message(kind, amount, cash_id, kp.public))
        binding = None
        if merchant_id is not None:
            msg = P.endorsement_message(cash_id, amount, kp.public, merchant_id, epoch_id)
            binding = P.MerchantBinding(merchant_id, epoch_id, P.sign(epoch_secret, msg))
        return P.CashNote(
            kind=kind,
            cash_id=cash_id,
            amount=amount,
            cash_secret=kp.secret,
            cash_public=kp.public,
            issuance_sig=sig,
            binding=binding,
        )


@pytest.fixture
def mint() -> MintHarness:
    return MintHarness()
