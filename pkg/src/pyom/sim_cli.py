"""``pyom-sim``: run adversarial scenarios and print machine-readable reports."""

from __future__ import annotations

import json
import sys

import click

from .sim import Scenario, corpus_dir, run_scenario


@click.group()
def main():
    pass


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="override the scenario's seed")
def run(scenario_file: str, seed: int | None):
    """Run one scenario file and print its JSON report."""
    scenario = Scenario.from_file(scenario_file)
    if seed is not None:
        scenario.seed = seed
    report = run_scenario(scenario)
    click.echo(json.dumps(report, indent=2))
    sys.exit(0 if report["ok"] else 1)


@main.command()
def corpus():
    """Run every scenario shipped with the package."""
    reports = []
    failures = 0
    for path in sorted(corpus_dir().glob("*.json")):
        report = run_scenario(Scenario.from_file(path))
        reports.append(report)
        if not report["ok"]:
            failures += 1
    click.echo(json.dumps({
        "scenarios": len(reports),
        "failures": failures,
        "reports": reports,
    }, indent=2))
    sys.exit(0 if failures == 0 else 1)


if __name__ == "__main__":
    main()
