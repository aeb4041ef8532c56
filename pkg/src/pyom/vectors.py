"""Golden test vectors for alternative codec implementations.

``python3 -m pyom.vectors [OUT]`` writes ``golden_vectors.json``: a fixed,
seeded set of notes with their canonical encodings, verification verdicts,
redeem signatures, and decode failures. Any reimplementation of the note
codec (e.g. the browser wallet) must reproduce these byte-for-byte.
"""

from __future__ import annotations

import json
import random
import sys

from . import protocol as P

SEED = 0x50594F4D  # "PYOM"


def _note_entry(note: P.CashNote) -> dict:
    fields = {
        "kind": note.kind.name,
        "currency": note.amount.currency,
        # string, not JSON number: u64 values exceed IEEE-754 exactness
        "minor_units": str(note.amount.minor_units),
        "cash_id": note.cash_id.hex(),
        "cash_secret": note.cash_secret.hex(),
        "cash_public": note.cash_public.hex(),
        "issuance_sig": note.issuance_sig.hex(),
    }
    if note.binding is not None:
        fields.update(
            merchant_id=note.binding.merchant_id.hex(),
            epoch_id=note.binding.epoch_id,
            endorsement_sig=note.binding.endorsement_sig.hex(),
        )
    return {
        "payload_hex": P.encode_note(note).hex(),
        "text": P.encode_note_text(note),
        "fields": fields,
    }


def build_vectors() -> dict:
    rng = random.Random(SEED)
    mint_secret = rng.randbytes(32)
    mint_public = P.derive_public(mint_secret)
    merchant_id = rng.randbytes(16)
    other_merchant = rng.randbytes(16)
    epoch_secret = rng.randbytes(32)
    epoch_public = P.derive_public(epoch_secret)
    epoch_id = 7

    def mint_note(minor_units, currency="USD", bound=False, *, tamper_sig=False):
        kp = P.generate_cash_keypair(rng.randbytes(32))
        cash_id = rng.randbytes(16)
        amount = P.MoneyAmount(minor_units, currency)
        kind = P.NoteKind.MERCHANT_BOUND if bound else P.NoteKind.STANDARD
        sig = P.sign(mint_secret, P.issuance_message(kind, amount, cash_id, kp.public))
        if tamper_sig:
            sig = bytes([sig[0] ^ 0x01]) + sig[1:]
        binding = None
        if bound:
            msg = P.endorsement_message(cash_id, amount, kp.public, merchant_id, epoch_id)
            binding = P.MerchantBinding(merchant_id, epoch_id, P.sign(epoch_secret, msg))
        return P.CashNote(kind, cash_id, amount, kp.secret, kp.public, sig, binding)

    notes = [
        mint_note(1000),                      # 0: standard $10.00
        mint_note(1, "EUR"),                  # 1: minimum value, other currency
        mint_note(2**64 - 1, "JPY"),          # 2: maximum u64 value
        mint_note(750, bound=True),           # 3: merchant-bound, genuine
        mint_note(123456789, bound=True),     # 4: merchant-bound, large value
        mint_note(500, bound=True, tamper_sig=True),   # 5: bad issuance sig
    ]
    # 6: payload-level splice — someone else's secret pasted into note 3;
    # the re-derived public key no longer matches the issuance signature
    spliced = bytearray(P.encode_note(notes[3]))
    spliced[33:65] = rng.randbytes(32)
    notes.append(P.decode_note(bytes(spliced)))

    current_epochs = [[epoch_id, epoch_public.hex()]]
    newer_epochs = [[epoch_id + 1, P.derive_public(rng.randbytes(32)).hex()]]

    def verdict(note, expected_merchant, epochs):
        report = P.offline_verify(
            note, expected_merchant,
            [(eid, bytes.fromhex(pk)) for eid, pk in epochs], mint_public)
        return {"overall": report.overall, "reason": report.reason}

    offline_cases = [
        {"name": "genuine bound note", "note_index": 3,
         "merchant_id": merchant_id.hex(), "epochs": current_epochs},
        {"name": "standard note refused offline", "note_index": 0,
         "merchant_id": merchant_id.hex(), "epochs": current_epochs},
        {"name": "presented to the wrong merchant", "note_index": 3,
         "merchant_id": other_merchant.hex(), "epochs": current_epochs},
        {"name": "epoch rotated away", "note_index": 3,
         "merchant_id": merchant_id.hex(), "epochs": newer_epochs},
        {"name": "forged issuance signature", "note_index": 5,
         "merchant_id": merchant_id.hex(), "epochs": current_epochs},
        {"name": "spliced payload", "note_index": 6,
         "merchant_id": merchant_id.hex(), "epochs": current_epochs},
    ]
    for case in offline_cases:
        case["expected"] = verdict(
            notes[case["note_index"]],
            bytes.fromhex(case["merchant_id"]), case["epochs"])

    redeem_cases = []
    for index in (0, 3):
        note = notes[index]
        payee = rng.randbytes(16)
        message = P.redeem_message(note.cash_id, payee)
        redeem_cases.append({
            "note_index": index,
            "payee_id": payee.hex(),
            "message_hex": message.hex(),
            "redeem_sig": P.sign(note.cash_secret, message).hex(),
        })

    good = P.encode_note(notes[0])
    decode_errors = [
        {"payload_hex": b"XYZQ".hex() + good.hex()[8:], "error_code": "bad-magic"},
        {"payload_hex": good[:4].hex() + "63" + good[5:].hex(), "error_code": "bad-version"},
        {"payload_hex": good[:64].hex(), "error_code": "truncated"},
        {"payload_hex": good.hex() + "00", "error_code": "trailing-bytes"},
        {"payload_hex": good[:6].hex() + b"us1".hex() + good[9:].hex(),
         "error_code": "bad-currency"},
        {"payload_hex": good[:9].hex() + (0).to_bytes(8, "big").hex() + good[17:].hex(),
         "error_code": "invalid-note"},
        {"text": "PAY1:abcd", "error_code": "bad-magic"},
    ]

    return {
        "seed": SEED,
        "mint_public": mint_public.hex(),
        "merchant_id": merchant_id.hex(),
        "epoch": {"epoch_id": epoch_id, "epoch_public": epoch_public.hex()},
        "notes": [_note_entry(n) for n in notes],
        "offline_verify": offline_cases,
        "redeem_signatures": redeem_cases,
        "decode_errors": decode_errors,
    }


def main(argv: list[str] | None = None) -> None:
    args = sys.argv[1:] if argv is None else argv
    out = args[0] if args else "golden_vectors.json"
    with open(out, "w") as fh:
        json.dump(build_vectors(), fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
