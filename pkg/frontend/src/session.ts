/**
 * Persistent session state: credentials, cached verification keys, and the
 * merchant receipt queue. Everything is written through to storage on every
 * change so offline acceptance survives a page reload.
 *
 * Storage is an injected key-value interface; the browser uses localStorage,
 * tests use an in-memory map. Secrets in browser storage are acceptable for
 * this reference artifact only — documented as non-production.
 */

export interface KVStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStorage implements KVStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export interface Credentials {
  accountId: string; // base64url
  token: string;
  kind: "user" | "merchant";
  currency: string;
}

export interface CachedKeys {
  mintPublic: string; // base64url
  epochs?: Array<[number, string]>; // [epoch_id, base64url public]
}

export interface QueuedReceipt {
  payload: string; // base64url note bytes
  redeem_sig: string; // base64url
  accepted_at: string; // ISO timestamp
}

const PREFIX = "pyom.";

export class SessionState {
  constructor(
    public serverUrl: string,
    private readonly storage: KVStorage = globalThis.localStorage ?? new MemoryStorage()
  ) {}

  private read<T>(key: string): T | null {
    const raw = this.storage.getItem(PREFIX + key);
    return raw === null ? null : (JSON.parse(raw) as T);
  }

  private write(key: string, value: unknown): void {
    this.storage.setItem(PREFIX + key, JSON.stringify(value));
  }

  get credentials(): Credentials | null {
    return this.read<Credentials>("credentials");
  }

  set credentials(value: Credentials | null) {
    if (value === null) this.storage.removeItem(PREFIX + "credentials");
    else this.write("credentials", value);
  }

  get cachedKeys(): CachedKeys | null {
    return this.read<CachedKeys>("keys");
  }

  set cachedKeys(value: CachedKeys | null) {
    if (value === null) this.storage.removeItem(PREFIX + "keys");
    else this.write("keys", value);
  }

  get queue(): QueuedReceipt[] {
    return this.read<QueuedReceipt[]>("queue") ?? [];
  }

  enqueue(receipt: QueuedReceipt): void {
    this.write("queue", [...this.queue, receipt]);
  }

  replaceQueue(receipts: QueuedReceipt[]): void {
    this.write("queue", receipts);
  }
}
