"""``pyom`` command-line wallet and merchant terminal.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 network error.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .client import ApiError, LedgerClient, NetworkError
from .encoding import b64u, unb64u
from .protocol import MoneyAmount, ProtocolError
from .wallet import Wallet, WalletError, WalletStore


def parse_amount(text: str, currency: str) -> MoneyAmount:
    try:
        if "." in text:
            whole, frac = text.split(".", 1)
            if len(frac) > 2 or not (whole + frac).isdigit():
                raise ValueError
            minor = int(whole) * 100 + int(frac.ljust(2, "0"))
        else:
            minor = int(text) * 100
    except ValueError:
        raise click.UsageError(f"bad amount {text!r}; use e.g. 10.00")
    return MoneyAmount(minor, currency)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (WalletError, ApiError, ProtocolError) as exc:
            # surface the stable error code verbatim; it is the scriptable part
            click.echo(getattr(exc, "code", None) or str(exc), err=True)
            sys.exit(1)
        except NetworkError as exc:
            click.echo(f"network error: {exc}", err=True)
            sys.exit(3)
    return wrapper


@click.group()
@click.option("--store", "store_dir", envvar="PYOM_STORE", default=str(Path.home() / ".pyom"),
              show_default=True, help="wallet store directory")
@click.option("--server", envvar="PYOM_SERVER", default=None, help="ledger service URL")
@click.pass_context
def main(ctx, store_dir: str, server: str | None):
    ctx.obj = {"store": WalletStore(store_dir), "server": server}


def open_wallet(ctx) -> Wallet:
    return Wallet(ctx.obj["store"], server=ctx.obj["server"])


@main.command()
@click.option("--kind", type=click.Choice(["user", "merchant"]), default="user", show_default=True)
@click.option("--balance", "initial", default="0", show_default=True,
              help="initial (faucet) balance, e.g. 100.00")
@click.option("--currency", default="USD", show_default=True)
@click.pass_context
@handle_errors
def init(ctx, kind: str, initial: str, currency: str):
    """Create an account on the ledger and store credentials locally."""
    server = ctx.obj["server"]
    if not server:
        raise click.UsageError("init requires --server (or PYOM_SERVER)")
    amount = parse_amount(initial, currency)
    client = LedgerClient.connect(server)
    wallet = Wallet.init(ctx.obj["store"], client, server, kind, amount.minor_units, currency)
    if kind == "merchant":
        wallet.refresh_keys()
    click.echo(f"account {b64u(wallet.creds.account_id)} ({kind})")


@main.command()
@click.pass_context
@handle_errors
def balance(ctx):
    """Show the account balance."""
    click.echo(str(open_wallet(ctx).balance()))


@main.command()
@click.argument("cash_id")
@click.pass_context
@handle_errors
def status(ctx, cash_id: str):
    """Show a note's lifecycle status."""
    click.echo(open_wallet(ctx).status(unb64u(cash_id)))


@main.command("print")
@click.argument("amount")
@click.option("--kind", type=click.Choice(["standard", "merchant-bound"]), default="standard",
              show_default=True)
@click.option("--merchant", default=None, help="merchant id for a bound note")
@click.option("--out", "out_dir", default=None, type=click.Path(), help="output directory")
@click.pass_context
@handle_errors
def print_cmd(ctx, amount: str, kind: str, merchant: str | None, out_dir: str | None):
    """Print a note: writes note.bin, note.txt and a QR image note.png."""
    wallet = open_wallet(ctx)
    if kind == "merchant-bound" and not merchant:
        raise click.UsageError("--merchant is required for merchant-bound notes")
    money = parse_amount(amount, wallet.creds.currency)
    note, target = wallet.print_note(
        money, kind, unb64u(merchant) if merchant else None,
        Path(out_dir) if out_dir else None)
    click.echo(f"{b64u(note.cash_id)} {money} -> {target}")


@main.command()
@click.argument("source")
@click.pass_context
@handle_errors
def deposit(ctx, source: str):
    """Deposit a note from a file (note.bin / note.txt) or pasted PYOM1: text."""
    credited = open_wallet(ctx).deposit(source)
    click.echo(f"credited {credited}")


@main.command("accept-offline")
@click.argument("source")
@click.pass_context
@handle_errors
def accept_offline(ctx, source: str):
    """Offline-verify a merchant-bound note with cached keys and enqueue a receipt."""
    store = ctx.obj["store"]
    wallet = Wallet(store, client=_offline_client())
    report = wallet.accept_offline(source)
    if report.accepted:
        click.echo("ACCEPT")
    else:
        click.echo(f"REJECT {report.reason}")
        sys.exit(1)


class _offline_client:
    """Placeholder client that trips if anything touches the network."""

    token = None

    def __getattr__(self, name):
        raise AssertionError("offline command attempted a network operation")

    def close(self):
        pass


@main.command()
@click.pass_context
@handle_errors
def sync(ctx):
    """Settle the offline receipt queue with the ledger."""
    report = open_wallet(ctx).sync()
    click.echo(f"{report['settled']} settled, {report['rejected']} rejected")
    for result in report["results"]:
        if result["status"] != "settled":
            click.echo(f"  rejected: {result['status']} ({result.get('cash_id')})")


@main.command("refresh-keys")
@click.pass_context
@handle_errors
def refresh_keys(ctx):
    """Cache the mint public key (and this merchant's epoch key) for offline use."""
    keys = open_wallet(ctx).refresh_keys()
    click.echo("cached mint key" + (" + epoch keys" if "epochs" in keys else ""))


@main.command()
@click.argument("cash_id")
@click.pass_context
@handle_errors
def revoke(ctx, cash_id: str):
    """Invalidate an unspent note this account printed."""
    click.echo(open_wallet(ctx).revoke(unb64u(cash_id)))


@main.command("rotate-epoch")
@click.pass_context
@handle_errors
def rotate_epoch(ctx):
    """Rotate this merchant's endorsement keypair."""
    epoch_id, _ = open_wallet(ctx).rotate_epoch()
    click.echo(f"epoch {epoch_id}")


if __name__ == "__main__":
    main()
