/**
 * Browser-side implementation of the canonical note protocol.
 *
 * Mirrors the Python reference byte-for-byte: same magic, layout, signature
 * messages and reject-reason ordering. Conformance is pinned by
 * golden_vectors.json at the repository root.
 */

import { getPublicKeyAsync, signAsync, verifyAsync } from "@noble/ed25519";

export const MAGIC = new Uint8Array([0x50, 0x59, 0x4f, 0x4d]); // "PYOM"
export const VERSION = 1;
export const TEXT_PREFIX = "PYOM1:";
export const STANDARD_NOTE_SIZE = 129;
export const BOUND_NOTE_SIZE = 213;
export const MAX_PAYLOAD_BYTES = 888;

const ISSUE_TAG = new TextEncoder().encode("PYOM-ISSUE");
const MERCH_TAG = new TextEncoder().encode("PYOM-MERCH");
const REDEEM_TAG = new TextEncoder().encode("PYOM-REDEEM");

export class ProtocolError extends Error {
  constructor(public readonly code: string, message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

export type NoteKind = "standard" | "merchant-bound";

export interface MoneyAmount {
  minorUnits: bigint;
  currency: string;
}

export interface MerchantBinding {
  merchantId: Uint8Array; // 16 bytes
  epochId: number; // u32
  endorsementSig: Uint8Array; // 64 bytes
}

export interface CashNote {
  kind: NoteKind;
  cashId: Uint8Array; // 16 bytes
  amount: MoneyAmount;
  cashSecret: Uint8Array; // 32 bytes
  cashPublic: Uint8Array; // 32 bytes, always derived from cashSecret
  issuanceSig: Uint8Array; // 64 bytes
  binding?: MerchantBinding;
}

export interface VerifyReport {
  authentic: boolean;
  keyConsistent: boolean;
  boundOk: boolean | null;
  overall: "accept" | "reject";
  reason: string | null;
}

// ---------------------------------------------------------------------------
// byte helpers
// ---------------------------------------------------------------------------

export function hexToBytes(hex: string): Uint8Array {
  if (hex.length % 2 !== 0) throw new ProtocolError("invalid-argument", "odd hex length");
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function b64u(bytes: Uint8Array): string {
  let binary = "";
  for (const b of bytes) binary += String.fromCharCode(b);
  return btoa(binary).replace(/\+/g, "-").replace(/\//g, "_").replace(/=+$/, "");
}

export function unb64u(text: string): Uint8Array {
  const padded = text.replace(/-/g, "+").replace(/_/g, "/") + "=".repeat((4 - (text.length % 4)) % 4);
  const binary = atob(padded);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

function concat(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  let diff = 0;
  for (let i = 0; i < a.length; i++) diff |= a[i] ^ b[i];
  return diff === 0;
}

function u64be(value: bigint): Uint8Array {
  if (value < 0n || value >= 1n << 64n) {
    throw new ProtocolError("invalid-argument", "minor_units must be a u64");
  }
  const out = new Uint8Array(8);
  new DataView(out.buffer).setBigUint64(0, value);
  return out;
}

function u32be(value: number): Uint8Array {
  if (!Number.isInteger(value) || value < 0 || value >= 2 ** 32) {
    throw new ProtocolError("invalid-argument", "epoch_id must be a u32");
  }
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, value);
  return out;
}

function checkLen(value: Uint8Array, n: number, name: string): void {
  if (value.length !== n) {
    throw new ProtocolError("invalid-argument", `${name} must be ${n} bytes, got ${value.length}`);
  }
}

function amountBytes(amount: MoneyAmount): Uint8Array {
  if (!/^[A-Z]{3}$/.test(amount.currency)) {
    throw new ProtocolError("bad-currency", `bad currency code ${amount.currency}`);
  }
  return concat(new TextEncoder().encode(amount.currency), u64be(amount.minorUnits));
}

// ---------------------------------------------------------------------------
// Ed25519 and canonical signature messages
// ---------------------------------------------------------------------------

export function derivePublic(secret: Uint8Array): Promise<Uint8Array> {
  checkLen(secret, 32, "seed");
  return getPublicKeyAsync(secret);
}

export function sign(secret: Uint8Array, message: Uint8Array): Promise<Uint8Array> {
  return signAsync(message, secret);
}

export async function verify(
  publicKey: Uint8Array,
  message: Uint8Array,
  signature: Uint8Array
): Promise<boolean> {
  if (publicKey.length !== 32 || signature.length !== 64) return false;
  try {
    return await verifyAsync(signature, message, publicKey);
  } catch {
    return false;
  }
}

const KIND_BYTE: Record<NoteKind, number> = { standard: 0x00, "merchant-bound": 0x01 };

export function issuanceMessage(
  kind: NoteKind,
  amount: MoneyAmount,
  cashId: Uint8Array,
  cashPublic: Uint8Array
): Uint8Array {
  checkLen(cashId, 16, "cash_id");
  checkLen(cashPublic, 32, "cash_public");
  return concat(
    ISSUE_TAG,
    new Uint8Array([VERSION, KIND_BYTE[kind]]),
    amountBytes(amount),
    cashId,
    cashPublic
  );
}

export function endorsementMessage(
  cashId: Uint8Array,
  amount: MoneyAmount,
  cashPublic: Uint8Array,
  merchantId: Uint8Array,
  epochId: number
): Uint8Array {
  checkLen(cashId, 16, "cash_id");
  checkLen(cashPublic, 32, "cash_public");
  checkLen(merchantId, 16, "merchant_id");
  return concat(
    MERCH_TAG,
    new Uint8Array([VERSION]),
    amountBytes(amount),
    cashId,
    cashPublic,
    merchantId,
    u32be(epochId)
  );
}

export function redeemMessage(cashId: Uint8Array, payeeAccount: Uint8Array): Uint8Array {
  checkLen(cashId, 16, "cash_id");
  checkLen(payeeAccount, 16, "payee_account");
  return concat(REDEEM_TAG, cashId, payeeAccount);
}

// ---------------------------------------------------------------------------
// note codec
// ---------------------------------------------------------------------------

export function encodeNote(note: CashNote): Uint8Array {
  checkLen(note.cashId, 16, "cash_id");
  checkLen(note.cashSecret, 32, "cash_secret");
  checkLen(note.issuanceSig, 64, "issuance_sig");
  const parts = [
    MAGIC,
    new Uint8Array([VERSION, KIND_BYTE[note.kind]]),
    amountBytes(note.amount),
    note.cashId,
    note.cashSecret,
    note.issuanceSig,
  ];
  if (note.kind === "merchant-bound") {
    if (!note.binding) throw new ProtocolError("invalid-note", "binding presence must match note kind");
    checkLen(note.binding.merchantId, 16, "merchant_id");
    checkLen(note.binding.endorsementSig, 64, "endorsement_sig");
    parts.push(note.binding.merchantId, u32be(note.binding.epochId), note.binding.endorsementSig);
  } else if (note.binding) {
    throw new ProtocolError("invalid-note", "binding presence must match note kind");
  }
  return concat(...parts);
}

export function encodeNoteText(note: CashNote): string {
  return TEXT_PREFIX + b64u(encodeNote(note));
}

export async function decodeNote(payload: Uint8Array | string): Promise<CashNote> {
  let data: Uint8Array;
  if (typeof payload === "string") {
    const text = payload.trim();
    if (!text.startsWith(TEXT_PREFIX)) throw new ProtocolError("bad-magic", "missing PYOM1: prefix");
    try {
      data = unb64u(text.slice(TEXT_PREFIX.length));
    } catch {
      throw new ProtocolError("bad-magic", "undecodable base64url body");
    }
  } else {
    data = payload;
  }
  if (data.length < 6) throw new ProtocolError("truncated", `payload too short (${data.length} bytes)`);
  if (!bytesEqual(data.slice(0, 4), MAGIC)) throw new ProtocolError("bad-magic", "bad magic bytes");
  if (data[4] !== VERSION) throw new ProtocolError("bad-version", `unsupported version ${data[4]}`);
  let kind: NoteKind;
  if (data[5] === 0x00) kind = "standard";
  else if (data[5] === 0x01) kind = "merchant-bound";
  else throw new ProtocolError("invalid-note", `unknown kind byte ${data[5]}`);
  const expected = kind === "standard" ? STANDARD_NOTE_SIZE : BOUND_NOTE_SIZE;
  if (data.length < expected) {
    throw new ProtocolError("truncated", `expected ${expected} bytes, got ${data.length}`);
  }
  if (data.length > expected) {
    throw new ProtocolError("trailing-bytes", `expected ${expected} bytes, got ${data.length}`);
  }
  const currency = new TextDecoder().decode(data.slice(6, 9));
  if (!/^[A-Z]{3}$/.test(currency)) {
    throw new ProtocolError("bad-currency", `bad currency field ${currency}`);
  }
  const minorUnits = new DataView(data.buffer, data.byteOffset + 9, 8).getBigUint64(0);
  if (minorUnits === 0n) throw new ProtocolError("invalid-note", "zero-value note");
  const cashSecret = data.slice(33, 65);
  const note: CashNote = {
    kind,
    cashId: data.slice(17, 33),
    amount: { minorUnits, currency },
    cashSecret,
    cashPublic: await derivePublic(cashSecret),
    issuanceSig: data.slice(65, 129),
  };
  if (kind === "merchant-bound") {
    note.binding = {
      merchantId: data.slice(129, 145),
      epochId: new DataView(data.buffer, data.byteOffset + 145, 4).getUint32(0),
      endorsementSig: data.slice(149, 213),
    };
  }
  return note;
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

export function verifyIssuance(note: CashNote, mintPublic: Uint8Array): Promise<boolean> {
  return verify(
    mintPublic,
    issuanceMessage(note.kind, note.amount, note.cashId, note.cashPublic),
    note.issuanceSig
  );
}

export function verifyEndorsement(note: CashNote, epochPublic: Uint8Array): Promise<boolean> {
  if (note.kind !== "merchant-bound" || !note.binding) {
    throw new ProtocolError("not-applicable", "note carries no merchant binding");
  }
  const b = note.binding;
  return verify(
    epochPublic,
    endorsementMessage(note.cashId, note.amount, note.cashPublic, b.merchantId, b.epochId),
    b.endorsementSig
  );
}

export async function offlineVerify(
  note: CashNote,
  expectedMerchant: Uint8Array,
  acceptedEpochs: Array<[number, Uint8Array]>,
  mintPublic: Uint8Array
): Promise<VerifyReport> {
  if (acceptedEpochs.length === 0) {
    throw new ProtocolError("invalid-argument", "accepted_epochs must be non-empty");
  }
  const authentic = await verifyIssuance(note, mintPublic);
  const keyConsistent = bytesEqual(await derivePublic(note.cashSecret), note.cashPublic);

  const reject = (boundOk: boolean | null, reason: string): VerifyReport => ({
    authentic,
    keyConsistent,
    boundOk,
    overall: "reject",
    reason,
  });

  if (note.kind !== "merchant-bound" || !note.binding) {
    return reject(null, "not-merchant-bound");
  }

  let boundOk = false;
  let bindingReason: string | null = null;
  if (!bytesEqual(note.binding.merchantId, expectedMerchant)) {
    bindingReason = "wrong-merchant";
  } else {
    const match = acceptedEpochs.find(([eid]) => eid === note.binding!.epochId);
    if (!match) bindingReason = "stale-epoch";
    else if (!(await verifyEndorsement(note, match[1]))) bindingReason = "bad-endorsement";
    else boundOk = true;
  }

  if (!authentic) return reject(boundOk, "not-authentic");
  if (!keyConsistent) return reject(boundOk, "key-mismatch");
  if (!boundOk) return reject(boundOk, bindingReason!);
  return { authentic: true, keyConsistent: true, boundOk: true, overall: "accept", reason: null };
}

export async function redeemSignature(note: CashNote, payeeAccount: Uint8Array): Promise<Uint8Array> {
  return sign(note.cashSecret, redeemMessage(note.cashId, payeeAccount));
}
