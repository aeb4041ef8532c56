/**
 * Golden-vector conformance: this codec must agree byte-for-byte with the
 * reference implementation on the shipped vector set (../golden_vectors.json).
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  CashNote,
  MerchantBinding,
  ProtocolError,
  bytesToHex,
  decodeNote,
  encodeNote,
  encodeNoteText,
  hexToBytes,
  offlineVerify,
  redeemSignature,
  sign,
} from "../src/protocol.js";

interface VectorNote {
  payload_hex: string;
  text: string;
  fields: {
    kind: "STANDARD" | "MERCHANT_BOUND";
    currency: string;
    minor_units: number | string;
    cash_id: string;
    cash_secret: string;
    cash_public: string;
    issuance_sig: string;
    merchant_id?: string;
    epoch_id?: number;
    endorsement_sig?: string;
  };
}

const vectors = JSON.parse(
  readFileSync(join(__dirname, "..", "..", "golden_vectors.json"), "utf-8")
);

function noteFromFields(fields: VectorNote["fields"]): CashNote {
  let binding: MerchantBinding | undefined;
  if (fields.kind === "MERCHANT_BOUND") {
    binding = {
      merchantId: hexToBytes(fields.merchant_id!),
      epochId: fields.epoch_id!,
      endorsementSig: hexToBytes(fields.endorsement_sig!),
    };
  }
  return {
    kind: fields.kind === "MERCHANT_BOUND" ? "merchant-bound" : "standard",
    cashId: hexToBytes(fields.cash_id),
    amount: { minorUnits: BigInt(fields.minor_units), currency: fields.currency },
    cashSecret: hexToBytes(fields.cash_secret),
    cashPublic: hexToBytes(fields.cash_public),
    issuanceSig: hexToBytes(fields.issuance_sig),
    binding,
  };
}

describe("golden vector conformance", () => {
  it("encodes every vector note bit-exactly from its fields", () => {
    for (const entry of vectors.notes as VectorNote[]) {
      const note = noteFromFields(entry.fields);
      expect(bytesToHex(encodeNote(note))).toBe(entry.payload_hex);
      expect(encodeNoteText(note)).toBe(entry.text);
    }
  });

  it("decodes every vector payload to the expected fields", async () => {
    for (const entry of vectors.notes as VectorNote[]) {
      const note = await decodeNote(hexToBytes(entry.payload_hex));
      const f = entry.fields;
      expect(note.kind).toBe(f.kind === "MERCHANT_BOUND" ? "merchant-bound" : "standard");
      expect(note.amount.currency).toBe(f.currency);
      expect(note.amount.minorUnits).toBe(BigInt(f.minor_units));
      expect(bytesToHex(note.cashId)).toBe(f.cash_id);
      expect(bytesToHex(note.cashSecret)).toBe(f.cash_secret);
      expect(bytesToHex(note.cashPublic)).toBe(f.cash_public);
      expect(bytesToHex(note.issuanceSig)).toBe(f.issuance_sig);
      if (note.binding) {
        expect(bytesToHex(note.binding.merchantId)).toBe(f.merchant_id);
        expect(note.binding.epochId).toBe(f.epoch_id);
        expect(bytesToHex(note.binding.endorsementSig)).toBe(f.endorsement_sig);
      }
      // text form round-trips to the same note
      const fromText = await decodeNote(entry.text);
      expect(bytesToHex(encodeNote(fromText))).toBe(entry.payload_hex);
    }
  });

  it("reproduces every offline verification verdict", async () => {
    const mintPublic = hexToBytes(vectors.mint_public);
    for (const vector of vectors.offline_verify) {
      const note = await decodeNote(hexToBytes(vectors.notes[vector.note_index].payload_hex));
      const report = await offlineVerify(
        note,
        hexToBytes(vector.merchant_id),
        vector.epochs.map(([eid, pub]: [number, string]) => [eid, hexToBytes(pub)]),
        mintPublic
      );
      expect(report.overall, vector.name).toBe(vector.expected.overall);
      expect(report.reason, vector.name).toBe(vector.expected.reason);
    }
  });

  it("reproduces redeem signatures bit-exactly", async () => {
    for (const vector of vectors.redeem_signatures) {
      const note = await decodeNote(hexToBytes(vectors.notes[vector.note_index].payload_hex));
      const sig = await redeemSignature(note, hexToBytes(vector.payee_id));
      expect(bytesToHex(sig)).toBe(vector.redeem_sig);
      // and the canonical message matches too
      const direct = await sign(note.cashSecret, hexToBytes(vector.message_hex));
      expect(bytesToHex(direct)).toBe(vector.redeem_sig);
    }
  });

  it("rejects every malformed payload with the expected error code", async () => {
    for (const vector of vectors.decode_errors) {
      const input = vector.text ?? hexToBytes(vector.payload_hex);
      const error = await decodeNote(input).then(
        () => null,
        (err) => err
      );
      expect(error).toBeInstanceOf(ProtocolError);
      expect(error.code).toBe(vector.error_code);
    }
  });
});
