"""Command-line front end: run scenarios, drive attacks, audit artifacts."""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from pathlib import Path

import click

from .errors import EpitraceError
from .ledger import load_jsonl, verify_ledger
from .runner import attack_suite as run_attack_suite
from .runner import run as run_scenario
from .world import ScenarioConfig


def _load_config(path: str, seed: int | None) -> ScenarioConfig:
    config = ScenarioConfig.from_json(Path(path).read_text())
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


@click.group()
def main() -> None:
    """Deterministic contact-tracing infrastructure simulator."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="Scenario JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Directory for run artifacts.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--faults", default=None, help="Fault spec, e.g. vault:2=byzantine,vault:3=crashed.")
def run(config_path: str, out_dir: str, seed: int | None, faults: str | None) -> None:
    """Run the full pipeline and write report + artifacts."""
    started = time.perf_counter()
    try:
        config = _load_config(config_path, seed)
        report = run_scenario(config, out_dir, faults)
    except EpitraceError as exc:
        click.echo(f"run aborted: {exc}", err=True)
        sys.exit(2)
    click.echo(report.summary_text(), nl=False)
    click.echo(f"wall time: {time.perf_counter() - started:.2f}s", err=True)
    sys.exit(0 if report.ok else 1)


@main.command("attack-suite")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
def attack_suite(config_path: str, seed: int | None) -> None:
    """Run the adversarial drivers; every attack must fail safely."""
    try:
        config = _load_config(config_path, seed)
        results = run_attack_suite(config)
    except EpitraceError as exc:
        click.echo(f"attack suite aborted: {exc}", err=True)
        sys.exit(2)
    width = max(len(r.name) for r in results)
    for r in results:
        click.echo(f"{r.name:<{width}}  {'SAFE' if r.safe else 'BREACHED'}  {r.detail}")
    sys.exit(0 if all(r.safe for r in results) else 1)


@main.command("verify-ledger")
@click.argument("ledger_path", type=click.Path(exists=True))
def verify_ledger_cmd(ledger_path: str) -> None:
    """Check the hash chain of an exported ledger file."""
    entries = load_jsonl(Path(ledger_path).read_text())
    ok = verify_ledger(entries)
    click.echo(f"{len(entries)} entries: {'VALID' if ok else 'BROKEN CHAIN'}")
    sys.exit(0 if ok else 1)


@main.command("export-dag")
@click.option("--run-dir", "run_dir", required=True, type=click.Path(exists=True), help="Directory of a completed run.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Output DOT file (default: stdout).")
def export_dag(run_dir: str, out_path: str | None) -> None:
    """Re-export a run's contamination DAG as DOT graph text."""
    dag = json.loads((Path(run_dir) / "dag.json").read_text())
    lines = ["digraph contamination {"]
    for node in dag["nodes"]:
        lines.append(f'  "{node}";')
    for edge in dag["edges"]:
        lines.append(f'  "{edge["src"]}" -> "{edge["dst"]}" [label="{edge["weight"]:.2f}"];')
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
