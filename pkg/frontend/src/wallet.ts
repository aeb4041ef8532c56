/**
 * The web wallet's operations: the same human payment loop as the CLI
 * wallet, built on SessionState + ApiClient + the browser-side protocol.
 *
 * merchantAccept is the offline decision surface: it must never touch the
 * network — it consumes only cached keys and appends to the persisted queue.
 */

import { ApiClient, NetworkError, ReceiptJson } from "./api.js";
import {
  CashNote,
  MerchantBinding,
  NoteKind,
  VerifyReport,
  b64u,
  decodeNote,
  derivePublic,
  encodeNote,
  encodeNoteText,
  offlineVerify,
  redeemSignature,
  unb64u,
} from "./protocol.js";
import { QueuedReceipt, SessionState } from "./session.js";

export class WalletError extends Error {}

export interface SyncReport {
  settled: number;
  rejected: Array<{ status: string; receipt: QueuedReceipt }>;
  results: Array<Record<string, any>>;
}

export class WebWallet {
  constructor(
    public readonly session: SessionState,
    public readonly api: ApiClient
  ) {}

  private get creds() {
    const creds = this.session.credentials;
    if (!creds) throw new WalletError("wallet not initialized");
    return creds;
  }

  async init(
    kind: "user" | "merchant",
    initialMinorUnits: number,
    currency = "USD"
  ): Promise<string> {
    if (this.session.credentials) throw new WalletError("wallet already initialized");
    const { account_id, token } = await this.api.createAccount(kind, initialMinorUnits, currency);
    this.session.credentials = { accountId: account_id, token, kind, currency };
    await this.refreshKeys();
    return account_id;
  }

  async viewBalance(): Promise<{ minorUnits: number; currency: string }> {
    const balance = await this.api.getBalance(unb64u(this.creds.accountId));
    return { minorUnits: balance.minor_units, currency: balance.currency };
  }

  async refreshKeys(): Promise<void> {
    const creds = this.creds;
    const mintPublic = b64u(await this.api.getMintPublic());
    if (creds.kind === "merchant") {
      // only the current epoch stays accepted: rotation invalidates
      // offline acceptance of older colored notes
      const [epochId, epochPublic] = await this.api.getEpoch(unb64u(creds.accountId));
      this.session.cachedKeys = { mintPublic, epochs: [[epochId, b64u(epochPublic)]] };
    } else {
      this.session.cachedKeys = { mintPublic };
    }
  }

  async printNote(
    minorUnits: number,
    kind: NoteKind = "standard",
    merchantId?: Uint8Array
  ): Promise<{ note: CashNote; text: string }> {
    const creds = this.creds;
    const secret = crypto.getRandomValues(new Uint8Array(32));
    const cashPublic = await derivePublic(secret);
    const issued = await this.api.issueCash(
      creds.token,
      { minor_units: minorUnits, currency: creds.currency },
      cashPublic,
      kind,
      merchantId
    );
    let binding: MerchantBinding | undefined;
    if (issued.binding) {
      binding = {
        merchantId: unb64u(issued.binding.merchant_id),
        epochId: issued.binding.epoch_id,
        endorsementSig: unb64u(issued.binding.endorsement_sig),
      };
    }
    const note: CashNote = {
      kind,
      cashId: unb64u(issued.cash_id),
      amount: { minorUnits: BigInt(minorUnits), currency: creds.currency },
      cashSecret: secret,
      cashPublic,
      issuanceSig: unb64u(issued.issuance_sig),
      binding,
    };
    return { note, text: encodeNoteText(note) };
  }

  async deposit(scanned: string): Promise<{ minorUnits: number; currency: string }> {
    const note = await decodeNote(scanned);
    const payee = unb64u(this.creds.accountId);
    const { credited } = await this.api.redeem(note.cashId, payee, await redeemSignature(note, payee));
    return { minorUnits: credited.minor_units, currency: credited.currency };
  }

  /** Offline acceptance: cached keys only, zero network requests. */
  async merchantAccept(scanned: string, now: () => string = () => new Date().toISOString()): Promise<VerifyReport> {
    const creds = this.creds;
    if (creds.kind !== "merchant") throw new WalletError("only merchant wallets accept offline");
    const keys = this.session.cachedKeys;
    if (!keys || !keys.epochs) throw new WalletError("no cached keys: run refreshKeys while online");
    const note = await decodeNote(scanned);
    const report = await offlineVerify(
      note,
      unb64u(creds.accountId),
      keys.epochs.map(([eid, pub]) => [eid, unb64u(pub)] as [number, Uint8Array]),
      unb64u(keys.mintPublic)
    );
    if (report.overall === "accept") {
      const sig = await redeemSignature(note, unb64u(creds.accountId));
      this.session.enqueue({
        payload: b64u(encodeNote(note)),
        redeem_sig: b64u(sig),
        accepted_at: now(),
      });
    }
    return report;
  }

  async merchantSync(): Promise<SyncReport> {
    const creds = this.creds;
    if (creds.kind !== "merchant") throw new WalletError("only merchant wallets sync receipts");
    const queue = this.session.queue;
    if (queue.length === 0) return { settled: 0, rejected: [], results: [] };
    const receipts: ReceiptJson[] = queue.map((r) => ({
      payload: r.payload,
      redeem_sig: r.redeem_sig,
      accepted_at: r.accepted_at,
    }));
    let results: Array<Record<string, any>>;
    try {
      results = await this.api.settle(creds.token, unb64u(creds.accountId), receipts);
    } catch (err) {
      if (err instanceof NetworkError) throw err; // queue stays intact
      throw err;
    }
    const rejected = results
      .map((result, i) => ({ status: result.status as string, receipt: queue[i] }))
      .filter((entry) => entry.status !== "settled");
    this.session.replaceQueue([]);
    return { settled: results.length - rejected.length, rejected, results };
  }
}
