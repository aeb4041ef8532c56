from __future__ import annotations

import random
import socket
import threading
import time

import pytest
import uvicorn
from click.testing import CliRunner

from pyom import protocol as P
from pyom.api import create_app
from pyom.cli import main, parse_amount
from pyom.encoding import b64u
from pyom.ledger import Ledger
from pyom.qr import decode_qr


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    """Real HTTP server on a loopback port, backed by a fresh ledger."""
    data_dir = tmp_path_factory.mktemp("ledger")
    ledger = Ledger(data_dir, rng=random.Random(23))
    app = create_app(ledger)
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    srv = uvicorn.Server(config)
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not srv.started:
        assert time.time() < deadline, "server failed to start"
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    srv.should_exit = True
    thread.join(timeout=5)
    ledger.close()


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, store, server, *args, expect=0):
    result = runner.invoke(main, ["--store", str(store), "--server", server, *args])
    assert result.exit_code == expect, f"{args}: exit {result.exit_code}\n{result.output}"
    return result.output


def test_parse_amount():
    assert parse_amount("10.00", "USD") == P.MoneyAmount(1000, "USD")
    assert parse_amount("7.5", "USD") == P.MoneyAmount(750, "USD")
    assert parse_amount("100", "USD") == P.MoneyAmount(10000, "USD")
    with pytest.raises(Exception):
        parse_amount("10.005", "USD")


def test_init_balance_and_reinit_guard(runner, server, tmp_path):
    store = tmp_path / "w"
    run(runner, store, server, "init", "--kind", "user", "--balance", "100.00")
    out = run(runner, store, server, "balance")
    assert out.strip() == "100.00 USD"
    result = runner.invoke(main, ["--store", str(store), "--server", server, "init"])
    assert result.exit_code == 1
    assert "already initialized" in result.output


def test_status_of_unknown_cash(runner, server, tmp_path):
    store = tmp_path / "w"
    run(runner, store, server, "init", "--balance", "1.00")
    result = runner.invoke(main, ["--store", str(store), "--server", server,
                                  "status", b64u(b"\x00" * 16)])
    assert result.exit_code == 1
    assert "unknown-cash" in result.output


def test_print_five_tens_then_insufficient(runner, server, tmp_path):
    store = tmp_path / "w"
    run(runner, store, server, "init", "--balance", "50.00")
    for _ in range(5):
        run(runner, store, server, "print", "10.00")
    result = runner.invoke(main, ["--store", str(store), "--server", server, "print", "10.00"])
    assert result.exit_code == 1
    assert "insufficient-balance" in result.output


def test_print_writes_verifiable_files(runner, server, tmp_path):
    store = tmp_path / "w"
    run(runner, store, server, "init", "--balance", "10.00")
    run(runner, store, server, "print", "10.00", "--out", str(tmp_path / "note"))
    payload = (tmp_path / "note" / "note.bin").read_bytes()
    assert len(payload) == 129
    text = (tmp_path / "note" / "note.txt").read_text().strip()
    note = P.decode_note(payload)
    assert P.decode_note(text) == note
    assert decode_qr(tmp_path / "note" / "note.png") == text


def test_print_bound_note_and_deposit_flow(runner, server, tmp_path):
    merchant_store = tmp_path / "m"
    user_store = tmp_path / "u"
    out = run(runner, merchant_store, server, "init", "--kind", "merchant")
    merchant_id = out.split()[1]
    run(runner, user_store, server, "init", "--balance", "30.00")

    run(runner, user_store, server, "print", "10.00", "--kind", "merchant-bound",
        "--merchant", merchant_id, "--out", str(tmp_path / "bound"))
    assert len((tmp_path / "bound" / "note.bin").read_bytes()) == 213

    # standard note deposits into another user wallet, once
    run(runner, user_store, server, "print", "10.00", "--out", str(tmp_path / "std"))
    payee_store = tmp_path / "p"
    run(runner, payee_store, server, "init")
    out = run(runner, payee_store, server, "deposit", str(tmp_path / "std" / "note.bin"))
    assert "credited 10.00 USD" in out
    result = runner.invoke(main, ["--store", str(payee_store), "--server", server,
                                  "deposit", str(tmp_path / "std" / "note.bin")])
    assert result.exit_code == 1
    assert "already-redeemed" in result.output


def test_deposit_from_qr_png(runner, server, tmp_path):
    payer, payee = tmp_path / "payer", tmp_path / "payee"
    run(runner, payer, server, "init", "--balance", "10.00")
    run(runner, payee, server, "init")
    run(runner, payer, server, "print", "10.00", "--out", str(tmp_path / "note"))
    out = run(runner, payee, server, "deposit", str(tmp_path / "note" / "note.png"))
    assert "credited 10.00 USD" in out


def test_deposit_truncated_file(runner, server, tmp_path):
    store = tmp_path / "w"
    run(runner, store, server, "init")
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"PYOM\x01\x00")
    result = runner.invoke(main, ["--store", str(store), "--server", server,
                                  "deposit", str(bad)])
    assert result.exit_code == 1
    assert "truncated" in result.output


def test_offline_accept_and_sync(runner, server, tmp_path, monkeypatch):
    merchant_store = tmp_path / "m"
    user_store = tmp_path / "u"
    out = run(runner, merchant_store, server, "init", "--kind", "merchant")
    merchant_id = out.split()[1]
    run(runner, user_store, server, "init", "--balance", "30.00")
    for i in range(3):
        run(runner, user_store, server, "print", "10.00", "--kind", "merchant-bound",
            "--merchant", merchant_id, "--out", str(tmp_path / f"n{i}"))

    # acceptance must work with networking hard-disabled
    def no_sockets(*a, **k):
        raise AssertionError("socket use during offline acceptance")
    monkeypatch.setattr(socket, "socket", no_sockets)
    monkeypatch.setattr(socket, "create_connection", no_sockets)
    for i in range(3):
        out = run(runner, merchant_store, server, "accept-offline",
                  str(tmp_path / f"n{i}" / "note.txt"))
        assert out.strip() == "ACCEPT"
    monkeypatch.undo()

    queue = list((merchant_store / "queue").glob("*.json"))
    assert len(queue) == 3
    out = run(runner, merchant_store, server, "sync")
    assert "3 settled, 0 rejected" in out
    assert list((merchant_store / "queue").glob("*.json")) == []
    assert run(runner, merchant_store, server, "balance").strip() == "30.00 USD"


def test_offline_reject_wrong_merchant(runner, server, tmp_path):
    m1, m2, u = tmp_path / "m1", tmp_path / "m2", tmp_path / "u"
    out = run(runner, m1, server, "init", "--kind", "merchant")
    m1_id = out.split()[1]
    run(runner, m2, server, "init", "--kind", "merchant")
    run(runner, u, server, "init", "--balance", "10.00")
    run(runner, u, server, "print", "10.00", "--kind", "merchant-bound",
        "--merchant", m1_id, "--out", str(tmp_path / "n"))
    result = CliRunner().invoke(main, ["--store", str(m2), "--server", server,
                                       "accept-offline", str(tmp_path / "n" / "note.txt")])
    assert result.exit_code == 1
    assert "REJECT wrong-merchant" in result.output
    assert list((m2 / "queue").glob("*.json")) == []


def test_duplicate_offline_accepts_settle_once(runner, server, tmp_path):
    m, u = tmp_path / "m", tmp_path / "u"
    out = run(runner, m, server, "init", "--kind", "merchant")
    merchant_id = out.split()[1]
    run(runner, u, server, "init", "--balance", "10.00")
    run(runner, u, server, "print", "10.00", "--kind", "merchant-bound",
        "--merchant", merchant_id, "--out", str(tmp_path / "n"))
    # same printed payload accepted twice offline (a copy is indistinguishable)
    run(runner, m, server, "accept-offline", str(tmp_path / "n" / "note.txt"))
    run(runner, m, server, "accept-offline", str(tmp_path / "n" / "note.txt"))
    out = run(runner, m, server, "sync")
    assert "1 settled, 1 rejected" in out
    assert "double-spent" in out
    assert len(list((m / "rejected").glob("*.json"))) == 1
    assert run(runner, m, server, "balance").strip() == "10.00 USD"


def test_sync_with_server_down_keeps_queue(runner, server, tmp_path):
    m, u = tmp_path / "m", tmp_path / "u"
    out = run(runner, m, server, "init", "--kind", "merchant")
    merchant_id = out.split()[1]
    run(runner, u, server, "init", "--balance", "10.00")
    run(runner, u, server, "print", "10.00", "--kind", "merchant-bound",
        "--merchant", merchant_id, "--out", str(tmp_path / "n"))
    run(runner, m, server, "accept-offline", str(tmp_path / "n" / "note.txt"))

    dead = "http://127.0.0.1:1"  # nothing listens here
    result = runner.invoke(main, ["--store", str(m), "--server", dead, "sync"])
    assert result.exit_code == 3
    assert len(list((m / "queue").glob("*.json"))) == 1
    # rerun against the live server succeeds
    out = run(runner, m, server, "sync")
    assert "1 settled, 0 rejected" in out


def test_revoke_and_rotate_via_cli(runner, server, tmp_path):
    m, u = tmp_path / "m", tmp_path / "u"
    out = run(runner, m, server, "init", "--kind", "merchant")
    merchant_id = out.split()[1]
    run(runner, u, server, "init", "--balance", "20.00")

    out = run(runner, u, server, "print", "10.00", "--out", str(tmp_path / "std"))
    cash_id = out.split()[0]
    assert run(runner, u, server, "revoke", cash_id).strip() == "finalized"
    assert run(runner, u, server, "balance").strip() == "20.00 USD"

    out = run(runner, u, server, "print", "10.00", "--kind", "merchant-bound",
              "--merchant", merchant_id, "--out", str(tmp_path / "bound"))
    bound_id = out.split()[0]
    assert run(runner, u, server, "revoke", bound_id).strip() == "pending"
    assert run(runner, m, server, "rotate-epoch").strip() == "epoch 2"
    assert run(runner, u, server, "status", bound_id).strip() == "revoked"
    assert run(runner, u, server, "balance").strip() == "20.00 USD"
