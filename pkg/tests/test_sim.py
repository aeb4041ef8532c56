from __future__ import annotations

import json
import random

from click.testing import CliRunner

from pyom import protocol as P
from pyom.ledger import Ledger
from pyom.sim import (
    Scenario,
    conservation_oracle,
    corpus_dir,
    replay_oracle,
    run_corpus,
    run_scenario,
)
from pyom.sim_cli import main as sim_main

USD = lambda units: P.MoneyAmount(units, "USD")


def scenario(path_name: str) -> Scenario:
    return Scenario.from_file(corpus_dir() / path_name)


def test_corpus_is_large_enough():
    assert len(list(corpus_dir().glob("*.json"))) >= 12


def test_corpus_all_pass():
    for report in run_corpus():
        assert report["ok"], f"{report['name']}: {report['violations']}"


def test_same_seed_identical_traces():
    for name in ("01_basic_issue_redeem.json", "10_crash_recovery.json",
                 "12_concurrent_redeem_race.json"):
        s = scenario(name)
        a = run_scenario(s)
        b = run_scenario(s)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_race_trace_shows_single_success():
    report = run_scenario(scenario("12_concurrent_redeem_race.json"))
    race = report["trace"][1]["result"]["results"]
    assert len(race) == 100
    credited = [r for r in race if "credited" in r]
    assert len(credited) == 1
    assert race.count('{"error": "already-redeemed"}') == 99


def test_forgery_trace_counts():
    report = run_scenario(scenario("06_forged_notes.json"))
    result = report["trace"][1]["result"]
    assert result == {"forged": 1000, "accepted_offline": 0, "settled": 0}


def test_crash_equals_no_crash():
    crashing = scenario("10_crash_recovery.json")
    smooth = Scenario(
        name=crashing.name, seed=crashing.seed, actors=crashing.actors,
        schedule=[s for s in crashing.schedule
                  if s["op"] not in ("crash-service", "restart-service")
                  and s != {"op": "sync", "actor": "shop"}] + [],
        expected=crashing.expected,
    )
    # keep exactly one sync in the smooth run
    smooth.schedule.insert(2, {"op": "sync", "actor": "shop"})
    report_a = run_scenario(crashing)
    report_b = run_scenario(smooth)
    assert report_a["ok"] and report_b["ok"]


def test_failing_expectation_names_the_step():
    s = scenario("01_basic_issue_redeem.json")
    s.schedule = s.schedule + [{"op": "expect-balance", "actor": "bob", "minor_units": 999}]
    report = run_scenario(s)
    assert not report["ok"]
    assert report["violations"][0]["step"] == len(s.schedule) - 1
    assert "expected 999" in report["violations"][0]["violation"]


def test_conservation_oracle_flags_conjured_credit(tmp_path):
    ledger = Ledger(tmp_path / "data", rng=random.Random(1))
    uid, _ = ledger.create_account("user", USD(1000))
    assert conservation_oracle(ledger, 1000)
    ledger.accounts[uid].balance += 100  # conjured money
    assert not conservation_oracle(ledger, 1000)
    ledger.close()


def test_replay_oracle_matches_batch_settlement(tmp_path):
    def build(path):
        led = Ledger(path, rng=random.Random(5))
        alice, _ = led.create_account("user", USD(10000))
        mid, _ = led.create_account("merchant", USD(0))
        receipts = []
        for i in range(10):
            kp = P.generate_cash_keypair(random.Random(100 + i).randbytes(32))
            cash_id, sig, binding = led.issue_cash(
                alice, USD(100), kp.public, P.NoteKind.MERCHANT_BOUND, mid)
            note = P.CashNote(P.NoteKind.MERCHANT_BOUND, cash_id, USD(100),
                              kp.secret, kp.public, sig, binding)
            receipts.append({
                "payload": P.encode_note(note),
                "redeem_sig": P.sign(kp.secret, P.redeem_message(cash_id, mid)),
            })
        receipts += [dict(receipts[0]), dict(receipts[3])]  # planted duplicates
        return led, mid, receipts

    led_a, mid_a, receipts_a = build(tmp_path / "a")
    led_b, mid_b, receipts_b = build(tmp_path / "b")
    batch = led_a.settle_offline_receipts(mid_a, receipts_a)
    sequential = replay_oracle(led_b, mid_b, receipts_b)
    assert [r["status"] for r in batch] == [r["status"] for r in sequential]
    assert led_a.get_balance(mid_a) == led_b.get_balance(mid_b)
    led_a.close()
    led_b.close()


def test_sim_cli_run_and_seed_override(tmp_path):
    runner = CliRunner()
    path = str(corpus_dir() / "02_change_mechanism_b.json")
    result = runner.invoke(sim_main, ["run", path, "--seed", "777"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["ok"] and report["seed"] == 777
