/** Single-page wallet UI: one logical event loop, no framework. */

import QRCode from "qrcode";

import { ApiClient } from "./api.js";
import { SessionState } from "./session.js";
import { WebWallet } from "./wallet.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function formatAmount(minorUnits: number, currency: string): string {
  return `${(minorUnits / 100).toFixed(2)} ${currency}`;
}

function flash(message: string, isError = false): void {
  const box = $("status");
  box.textContent = message;
  box.className = isError ? "error" : "ok";
}

function getWallet(): WebWallet {
  const serverUrl = ($("server") as HTMLInputElement).value.replace(/\/$/, "");
  const session = new SessionState(serverUrl);
  return new WebWallet(session, new ApiClient(serverUrl));
}

async function guarded(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err: any) {
    flash(err.errorCode ? `${err.errorCode}: ${err.message}` : String(err), true);
  }
}

function refreshQueueView(wallet: WebWallet): void {
  $("queue-count").textContent = String(wallet.session.queue.length);
}

function wire(): void {
  $("btn-init").onclick = () =>
    guarded(async () => {
      const wallet = getWallet();
      const kind = ($("init-kind") as HTMLSelectElement).value as "user" | "merchant";
      const balance = Math.round(parseFloat(($("init-balance") as HTMLInputElement).value || "0") * 100);
      const accountId = await wallet.init(kind, balance);
      flash(`account ${accountId} created`);
    });

  $("btn-balance").onclick = () =>
    guarded(async () => {
      const balance = await getWallet().viewBalance();
      flash(`balance: ${formatAmount(balance.minorUnits, balance.currency)}`);
    });

  $("btn-print").onclick = () =>
    guarded(async () => {
      const wallet = getWallet();
      const minorUnits = Math.round(parseFloat(($("print-amount") as HTMLInputElement).value) * 100);
      const bound = ($("print-kind") as HTMLSelectElement).value === "merchant-bound";
      const merchantField = ($("print-merchant") as HTMLInputElement).value.trim();
      const { text } = await wallet.printNote(
        minorUnits,
        bound ? "merchant-bound" : "standard",
        bound ? (await import("./protocol.js")).unb64u(merchantField) : undefined
      );
      await QRCode.toCanvas($("qr-canvas") as HTMLCanvasElement, text, { errorCorrectionLevel: "M" });
      ($("note-text") as HTMLTextAreaElement).value = text;
      flash("note printed — scan or copy it, then hand it over");
    });

  $("btn-deposit").onclick = () =>
    guarded(async () => {
      const credited = await getWallet().deposit(($("deposit-text") as HTMLTextAreaElement).value);
      flash(`credited ${formatAmount(credited.minorUnits, credited.currency)}`);
    });

  $("btn-refresh-keys").onclick = () =>
    guarded(async () => {
      await getWallet().refreshKeys();
      flash("verification keys cached — offline acceptance ready");
    });

  $("btn-accept").onclick = () =>
    guarded(async () => {
      const wallet = getWallet();
      const report = await wallet.merchantAccept(($("accept-text") as HTMLTextAreaElement).value);
      refreshQueueView(wallet);
      if (report.overall === "accept") flash("ACCEPT — receipt queued for settlement");
      else flash(`REJECT ${report.reason}`, true);
    });

  $("btn-sync").onclick = () =>
    guarded(async () => {
      const wallet = getWallet();
      const report = await wallet.merchantSync();
      refreshQueueView(wallet);
      const rejects = report.rejected.map((r) => r.status).join(", ");
      flash(`synced: ${report.settled} settled${rejects ? `, rejected: ${rejects}` : ""}`);
    });
}

wire();
