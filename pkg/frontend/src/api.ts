/** Thin typed client for the ledger's HTTP/JSON API. */

import { b64u, unb64u } from "./protocol.js";

export class ApiError extends Error {
  constructor(
    public readonly errorCode: string,
    message: string,
    public readonly details?: unknown
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export type FetchLike = typeof fetch;

export interface AmountJson {
  minor_units: number;
  currency: string;
}

export interface BindingJson {
  merchant_id: string;
  epoch_id: number;
  endorsement_sig: string;
}

export interface ReceiptJson {
  payload: string;
  redeem_sig: string;
  accepted_at?: string;
}

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch
  ) {}

  private async request(method: string, path: string, body?: unknown, token?: string): Promise<any> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (token) headers["authorization"] = `Bearer ${token}`;
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new NetworkError(`cannot reach ${this.baseUrl}: ${err}`);
    }
    const data = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(data.error_code ?? `http-${response.status}`, data.message ?? "", data.details);
    }
    return data;
  }

  createAccount(
    kind: "user" | "merchant",
    initialMinorUnits: number,
    currency: string,
    allowlist?: Uint8Array[]
  ): Promise<{ account_id: string; token: string }> {
    return this.request("POST", "/accounts", {
      kind,
      initial_minor_units: initialMinorUnits,
      currency,
      allowlist: allowlist?.map(b64u),
    });
  }

  getBalance(accountId: Uint8Array): Promise<AmountJson> {
    return this.request("GET", `/accounts/${b64u(accountId)}/balance`);
  }

  issueCash(
    token: string,
    amount: AmountJson,
    cashPublic: Uint8Array,
    kind: "standard" | "merchant-bound",
    targetMerchant?: Uint8Array
  ): Promise<{ cash_id: string; issuance_sig: string; binding?: BindingJson }> {
    return this.request(
      "POST",
      "/cash",
      {
        amount,
        cash_public: b64u(cashPublic),
        kind,
        target_merchant: targetMerchant ? b64u(targetMerchant) : null,
      },
      token
    );
  }

  redeem(cashId: Uint8Array, payee: Uint8Array, redeemSig: Uint8Array): Promise<{ credited: AmountJson }> {
    return this.request("POST", "/cash/redeem", {
      cash_id: b64u(cashId),
      payee: b64u(payee),
      redeem_sig: b64u(redeemSig),
    });
  }

  getStatus(cashId: Uint8Array): Promise<{ status: string }> {
    return this.request("GET", `/cash/${b64u(cashId)}/status`);
  }

  revoke(token: string, cashId: Uint8Array): Promise<{ result: string }> {
    return this.request("POST", `/cash/${b64u(cashId)}/revoke`, {}, token);
  }

  async getMintPublic(): Promise<Uint8Array> {
    const data = await this.request("GET", "/mint/public-key");
    return unb64u(data.mint_public);
  }

  async getEpoch(merchantId: Uint8Array): Promise<[number, Uint8Array]> {
    const data = await this.request("GET", `/merchants/${b64u(merchantId)}/epoch`);
    return [data.epoch_id, unb64u(data.epoch_public)];
  }

  async rotateEpoch(token: string, merchantId: Uint8Array): Promise<[number, Uint8Array]> {
    const data = await this.request("POST", `/merchants/${b64u(merchantId)}/epoch/rotate`, {}, token);
    return [data.epoch_id, unb64u(data.epoch_public)];
  }

  async settle(
    token: string,
    merchantId: Uint8Array,
    receipts: ReceiptJson[]
  ): Promise<Array<Record<string, any>>> {
    const data = await this.request(
      "POST",
      `/merchants/${b64u(merchantId)}/settlements`,
      { receipts },
      token
    );
    return data.results;
  }
}
