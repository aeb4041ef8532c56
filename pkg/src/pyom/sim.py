"""Deterministic end-to-end simulator.

Runs a ledger service in-process behind the loopback API transport and drives
users, merchants, and adversaries through a scripted schedule. After every
step it checks the global invariants (conservation, terminal statuses, no
double spend) and at the end compares explicit expected outcomes. All
randomness flows from the scenario seed, so equal seeds produce byte-identical
traces.

Scenario JSON:

    {
      "name": "...",
      "seed": 42,
      "currency": "USD",
      "actors": [{"name": "alice", "kind": "user", "balance": 5000}, ...],
      "schedule": [ {"op": "...", ...}, ... ],
      "expected": {"balances": {"alice": 4000}, "statuses": {"n1": "redeemed"}}
    }

Step ops: issue, redeem, redeem-batch, accept-offline, sync, refresh-keys,
revoke, rotate, crash-service, restart-service, partition, adversary,
concurrent, expect-balance, expect-status. Adversary actions: duplicate-note,
forge-note, replay-redeem, stale-epoch-spend, splice-notes.
"""

from __future__ import annotations

import json
import random
import shutil
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import protocol
from .api import create_app
from .client import ApiError, LedgerClient, NetworkError
from .encoding import b64u
from .ledger import LIVE_STATES, Ledger
from .protocol import CashNote, MoneyAmount, NoteKind


class InvariantViolation(Exception):
    pass


@dataclass
class Scenario:
    name: str
    seed: int
    actors: list[dict]
    schedule: list[dict]
    expected: dict = field(default_factory=dict)
    currency: str = "USD"

    @classmethod
    def from_file(cls, path: Path | str) -> "Scenario":
        raw = json.loads(Path(path).read_text())
        return cls(
            name=raw["name"],
            seed=raw.get("seed", 0),
            actors=raw["actors"],
            schedule=raw["schedule"],
            expected=raw.get("expected", {}),
            currency=raw.get("currency", "USD"),
        )


@dataclass
class Actor:
    name: str
    kind: str
    account_id: bytes
    token: str
    cached_mint: bytes | None = None
    cached_epochs: list[tuple[int, bytes]] = field(default_factory=list)
    queue: list[dict] = field(default_factory=list)  # offline receipts


class PartitionableClient(LedgerClient):
    """Loopback client whose transport can be switched off (network partition)."""

    def __init__(self, http, token=None):
        super().__init__(http, token)
        self.partitioned = False
        self.crashed = False

    def _request(self, method, path, json_body=None, auth=False):
        if self.partitioned:
            raise NetworkError("network partitioned")
        if self.crashed:
            raise NetworkError("service down")
        return super()._request(method, path, json_body, auth)


class Harness:
    def __init__(self, scenario: Scenario, data_dir: Path | str | None = None):
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self._own_dir = data_dir is None
        self.data_dir = Path(data_dir) if data_dir else Path(tempfile.mkdtemp(prefix="pyom-sim-"))
        self._restarts = 0
        self._start_service()

        self.actors: dict[str, Actor] = {}
        self.notes: dict[str, CashNote] = {}
        self.last_redeem: dict[str, tuple[bytes, bytes, bytes]] = {}
        self.trace: list = []
        self.expected_total = 0

        for spec in scenario.actors:
            account_id, token = self.client.create_account(
                spec["kind"], spec.get("balance", 0), scenario.currency)
            self.actors[spec["name"]] = Actor(spec["name"], spec["kind"], account_id, token)
            self.expected_total += spec.get("balance", 0)
        for actor in self.actors.values():
            self._refresh_keys(actor)

    # ------------------------------------------------------------------
    # service lifecycle
    # ------------------------------------------------------------------

    def _start_service(self):
        self.ledger = Ledger(
            self.data_dir, currency=self.scenario.currency,
            rng=random.Random(self.scenario.seed * 1000003 + self._restarts),
        )
        self.app = create_app(self.ledger)
        inner = LedgerClient.loopback(self.app)
        self.client = PartitionableClient(inner._http)

    def close(self):
        self.client.close()
        self.ledger.close()
        if self._own_dir:
            shutil.rmtree(self.data_dir, ignore_errors=True)

    # ------------------------------------------------------------------
    # run loop
    # ------------------------------------------------------------------

    def run(self) -> dict:
        violations = []
        for index, step in enumerate(self.scenario.schedule):
            try:
                result = self._do_step(step)
                self.trace.append({"step": index, "op": step["op"], "result": result})
                self.check_invariants()
            except InvariantViolation as exc:
                violations.append({"step": index, "violation": str(exc)})
                break
        if not violations:
            violations.extend(self._check_expected())
        return {
            "name": self.scenario.name,
            "seed": self.scenario.seed,
            "ok": not violations,
            "violations": violations,
            "trace": self.trace,
        }

    def _do_step(self, step: dict):
        op = step["op"]
        handler = getattr(self, "_op_" + op.replace("-", "_"), None)
        if handler is None:
            raise ValueError(f"unknown scenario op {op!r}")
        try:
            return handler(step)
        except ApiError as exc:
            return {"error": exc.code}
        except NetworkError:
            return {"error": "network"}

    # ------------------------------------------------------------------
    # step handlers
    # ------------------------------------------------------------------

    def _with_token(self, actor: Actor):
        self.client.token = actor.token
        return self.client

    def _op_issue(self, step):
        actor = self.actors[step["actor"]]
        merchant = self.actors[step["merchant"]].account_id if step.get("merchant") else None
        amount = MoneyAmount(step["amount"], self.scenario.currency)
        keypair = protocol.generate_cash_keypair(self.rng.randbytes(32))
        kind = "merchant-bound" if merchant else "standard"
        cash_id, sig, binding = self._with_token(actor).issue_cash(
            amount, keypair.public, kind, merchant)
        note = CashNote(
            NoteKind.MERCHANT_BOUND if merchant else NoteKind.STANDARD,
            cash_id, amount, keypair.secret, keypair.public, sig, binding)
        self.notes[step["note"]] = note
        return {"cash_id": b64u(cash_id)}

    def _op_redeem(self, step):
        actor = self.actors[step["actor"]]
        note = self.notes[step["note"]]
        sig = protocol.sign(note.cash_secret,
                            protocol.redeem_message(note.cash_id, actor.account_id))
        self.last_redeem[step["note"]] = (note.cash_id, actor.account_id, sig)
        credited = self.client.redeem(note.cash_id, actor.account_id, sig)
        return {"credited": credited.minor_units}

    def _op_redeem_batch(self, step):
        actor = self.actors[step["actor"]]
        entries = []
        for label in step["notes"]:
            note = self.notes[label]
            sig = protocol.sign(note.cash_secret,
                                protocol.redeem_message(note.cash_id, actor.account_id))
            entries.append((note.cash_id, sig))
        bill = MoneyAmount(step["bill"], self.scenario.currency)
        result = self.client.redeem_batch(entries, bill, actor.account_id)
        return {
            "merchant_credit": result["merchant_credit"]["minor_units"],
            "change": [(c["account_id"], c["minor_units"]) for c in result["change_credits"]],
        }

    def _op_accept_offline(self, step):
        actor = self.actors[step["actor"]]
        note = self.notes[step["note"]]
        report = protocol.offline_verify(
            note, actor.account_id, actor.cached_epochs or [(0, bytes(32))], actor.cached_mint)
        if report.accepted:
            sig = protocol.sign(note.cash_secret,
                                protocol.redeem_message(note.cash_id, actor.account_id))
            actor.queue.append({
                "payload": protocol.encode_note(note),
                "redeem_sig": sig,
            })
        result = {"verdict": report.overall}
        if report.reason:
            result["reason"] = report.reason
        return result

    def _op_enqueue_raw(self, step):
        # adversarial merchant: enqueue without offline verification
        actor = self.actors[step["actor"]]
        note = self.notes[step["note"]]
        sig = protocol.sign(note.cash_secret,
                            protocol.redeem_message(note.cash_id, actor.account_id))
        actor.queue.append({"payload": protocol.encode_note(note), "redeem_sig": sig})
        return {"queued": len(actor.queue)}

    def _op_sync(self, step):
        actor = self.actors[step["actor"]]
        results = self._with_token(actor).settle(actor.account_id, actor.queue)
        actor.queue = []
        return {
            "settled": sum(1 for r in results if r["status"] == "settled"),
            "results": [r["status"] for r in results],
        }

    def _op_refresh_keys(self, step):
        self._refresh_keys(self.actors[step["actor"]])
        return {}

    def _refresh_keys(self, actor: Actor):
        actor.cached_mint = self.client.get_mint_public()
        if actor.kind == "merchant":
            actor.cached_epochs = [self.client.get_epoch(actor.account_id)]

    def _op_revoke(self, step):
        actor = self.actors[step["actor"]]
        note = self.notes[step["note"]]
        return {"result": self._with_token(actor).revoke(note.cash_id)}

    def _op_rotate(self, step):
        actor = self.actors[step["actor"]]
        epoch_id, _ = self._with_token(actor).rotate_epoch(actor.account_id)
        if step.get("refresh", True):
            self._refresh_keys(actor)
        return {"epoch_id": epoch_id}

    def _op_crash_service(self, step):
        self.ledger.close()  # no flushing needed; every commit was fsynced
        self.client.crashed = True
        return {}

    def _op_restart_service(self, step):
        self._restarts += 1
        self._start_service()
        return {"seq": self.ledger.seq}

    def _op_partition(self, step):
        self.client.partitioned = bool(step.get("on", True))
        return {"partitioned": self.client.partitioned}

    def _op_concurrent(self, step):
        substeps = step["steps"] * step.get("repeat", 1)
        results = [None] * len(substeps)

        def runner(i, sub):
            results[i] = self._do_step(sub)

        threads = [threading.Thread(target=runner, args=(i, sub))
                   for i, sub in enumerate(substeps)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        # order-independent summary keeps the trace deterministic
        return {"results": sorted(json.dumps(r, sort_keys=True) for r in results)}

    def _op_expect_balance(self, step):
        actor = self.actors[step["actor"]]
        balance = self.client.get_balance(actor.account_id).minor_units
        if balance != step["minor_units"]:
            raise InvariantViolation(
                f"balance of {actor.name}: expected {step['minor_units']}, got {balance}")
        return {"balance": balance}

    def _op_expect_status(self, step):
        status = self.client.get_status(self.notes[step["note"]].cash_id)
        if status != step["status"]:
            raise InvariantViolation(
                f"status of {step['note']}: expected {step['status']}, got {status}")
        return {"status": status}

    # ------------------------------------------------------------------
    # adversary
    # ------------------------------------------------------------------

    def _op_adversary(self, step):
        action = step["action"].replace("-", "_")
        return getattr(self, "_adv_" + action)(step)

    def _adv_duplicate_note(self, step):
        # a payload-level copy: exactly the bytes a fraudster would photograph
        original = self.notes[step["note"]]
        self.notes[step["as"]] = protocol.decode_note(protocol.encode_note(original))
        return {"copied": step["note"]}

    def _adv_forge_note(self, step):
        """Attempt acceptance of notes with random / bit-flipped signatures."""
        actor = self.actors[step["actor"]]
        base = self.notes[step["base"]]
        count = step.get("count", 100)
        accepted = settled = 0
        for i in range(count):
            if i % 2 == 0:
                issuance_sig = self.rng.randbytes(64)
            else:
                flipped = bytearray(base.issuance_sig)
                flipped[self.rng.randrange(64)] ^= 1 << self.rng.randrange(8)
                issuance_sig = bytes(flipped)
            forged = CashNote(
                base.kind, self.rng.randbytes(16), base.amount,
                base.cash_secret, base.cash_public, issuance_sig, base.binding)
            report = protocol.offline_verify(
                forged, actor.account_id, actor.cached_epochs, actor.cached_mint)
            if report.accepted:
                accepted += 1
            sig = protocol.sign(forged.cash_secret,
                                protocol.redeem_message(forged.cash_id, actor.account_id))
            results = self._with_token(actor).settle(actor.account_id, [{
                "payload": protocol.encode_note(forged), "redeem_sig": sig,
            }])
            settled += sum(1 for r in results if r["status"] == "settled")
        return {"forged": count, "accepted_offline": accepted, "settled": settled}

    def _adv_replay_redeem(self, step):
        cash_id, payee, sig = self.last_redeem[step["note"]]
        try:
            self.client.redeem(cash_id, payee, sig)
            return {"replayed": "accepted"}
        except ApiError as exc:
            return {"replayed": exc.code}

    def _adv_stale_epoch_spend(self, step):
        # spend a note endorsed under a retired epoch at its own merchant
        return self._op_accept_offline(step)

    def _adv_splice_notes(self, step):
        # graft note B's secret into note A, keeping A's printed public key
        a, b = self.notes[step["a"]], self.notes[step["b"]]
        self.notes[step["as"]] = CashNote(
            a.kind, a.cash_id, a.amount, b.cash_secret, a.cash_public,
            a.issuance_sig, a.binding)
        return {"spliced": [step["a"], step["b"]]}

    # ------------------------------------------------------------------
    # invariants & oracles
    # ------------------------------------------------------------------

    def check_invariants(self):
        if self.client.crashed:
            return  # nothing to observe while the service is down
        if not conservation_oracle(self.ledger, self.expected_total):
            raise InvariantViolation(
                f"conservation broken: expected {self.expected_total}, "
                f"got {self.ledger.total_minor_units()}")
        redeemed_counts: dict[str, int] = {}
        for event in self.ledger.events:
            if event["type"] == "cash_redeemed":
                redeemed_counts[event["cash_id"]] = redeemed_counts.get(event["cash_id"], 0) + 1
        doubles = [c for c, n in redeemed_counts.items() if n > 1]
        if doubles:
            raise InvariantViolation(f"double spend of {doubles}")
        self._check_terminal_statuses()

    def _check_terminal_statuses(self):
        status: dict[str, str] = {}
        for event in self.ledger.events:
            if event["type"] == "cash_issued":
                status[event["cash_id"]] = "active"
            elif event["type"] == "cash_redeemed":
                if status.get(event["cash_id"]) in ("redeemed", "revoked"):
                    raise InvariantViolation(f"transition out of terminal state for {event['cash_id']}")
                status[event["cash_id"]] = "redeemed"
            elif event["type"] == "cash_revoked":
                if status.get(event["cash_id"]) in ("redeemed", "revoked"):
                    raise InvariantViolation(f"transition out of terminal state for {event['cash_id']}")
                if event["finalized"]:
                    status[event["cash_id"]] = "revoked"

    def _check_expected(self) -> list[dict]:
        violations = []
        for name, minor_units in self.scenario.expected.get("balances", {}).items():
            actual = self.client.get_balance(self.actors[name].account_id).minor_units
            if actual != minor_units:
                violations.append({"expected_balance": {name: minor_units, "actual": actual}})
        for label, status in self.scenario.expected.get("statuses", {}).items():
            actual = self.client.get_status(self.notes[label].cash_id)
            if actual != status:
                violations.append({"expected_status": {label: status, "actual": actual}})
        return violations


# ---------------------------------------------------------------------------
# module-level entry points
# ---------------------------------------------------------------------------

def run_scenario(scenario: Scenario, data_dir: Path | str | None = None) -> dict:
    harness = Harness(scenario, data_dir=data_dir)
    try:
        return harness.run()
    finally:
        harness.close()


def conservation_oracle(ledger: Ledger, expected_total: int) -> bool:
    """Recompute the conserved sum from scratch against the tracked total."""
    balances = sum(a.balance for a in ledger.accounts.values())
    live_notes = sum(c.amount for c in ledger.cash.values() if c.status in LIVE_STATES)
    return balances + live_notes == expected_total


def replay_oracle(shadow: Ledger, merchant_id: bytes, receipts: list[dict]) -> list[dict]:
    """Settle receipts one at a time; the brute-force reference for batching."""
    results = []
    for receipt in receipts:
        results.extend(shadow.settle_offline_receipts(merchant_id, [receipt]))
    return results


def corpus_dir() -> Path:
    return Path(__file__).parent / "scenarios"


def run_corpus() -> list[dict]:
    reports = []
    for path in sorted(corpus_dir().glob("*.json")):
        reports.append(run_scenario(Scenario.from_file(path)))
    return reports
