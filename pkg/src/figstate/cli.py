"""Operator entry points: serve the API, seed demo data, run evaluation
suites, and export / import / replay / verify artifact bundles.

Exit codes: 0 ok, 1 user error, 2 verification failure, 3 internal error.
Every subcommand works without network access and without any LLM
configured; the deterministic backend is the default everywhere.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from figstate.demo import DEFAULT_SEED, WALKTHROUGH, demo_catalog, register_demo
from figstate.engine.catalog import TableCatalog
from figstate.errors import BundleFormatError, FigstateError
from figstate.ledger.store import load_ledger, save_ledger
from figstate.ledger.versions import VersionLedger
from figstate.runtime import Runtime

LEDGER_FILE = "ledger.db"

EXIT_OK = 0
EXIT_USER = 1
EXIT_VERIFY = 2
EXIT_INTERNAL = 3

#: synonyms the demo walkthrough understands on top of exact column names
DEMO_SYNONYMS = {
    "temperature": "temp",
    "temperatures": "temp",
    "papers": "papers_cited_by_patents",
    "disclosures": "invention_disclosures",
}


def _open_runtime(data_dir: str | None, backend: str) -> Runtime:
    if data_dir is None:
        return Runtime(demo_catalog(), default_backend=backend, synonyms=DEMO_SYNONYMS)
    root = Path(data_dir)
    catalog = TableCatalog.load_dir(root)
    ledger_path = root / LEDGER_FILE
    ledger = load_ledger(ledger_path) if ledger_path.exists() else VersionLedger()
    return Runtime(catalog, ledger, default_backend=backend, synonyms=DEMO_SYNONYMS,
                   ledger_path=ledger_path)


@click.group()
def main() -> None:
    """Provenance-carrying interactive figures."""


@main.command()
@click.option("--port", default=8000, show_default=True, help="HTTP port.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(), default=None,
              help="Catalog + ledger directory; defaults to an in-memory demo.")
@click.option("--backend", default="deterministic", show_default=True,
              help="Intent backend: deterministic or http.")
@click.option("--static-dir", type=click.Path(), default=None,
              help="Directory with the built web client (frontend/); served at /.")
def serve(port: int, host: str, data_dir: str | None, backend: str, static_dir: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from figstate.service import create_app

    runtime = _open_runtime(data_dir, backend)
    uvicorn.run(create_app(runtime, static_dir=static_dir), host=host, port=port)


@main.command()
@click.option("--data-dir", type=click.Path(), required=True,
              help="Directory to seed with the demo catalog.")
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def demo(data_dir: str, seed: int) -> None:
    """Seed the synthetic climate and innovation fixtures."""
    root = Path(data_dir)
    catalog = TableCatalog()
    register_demo(catalog, seed)
    catalog.save_dir(root)
    save_ledger(VersionLedger(), root / LEDGER_FILE)
    for table_id in catalog.table_ids():
        click.echo(f"registered {table_id}: {len(catalog.get_table(table_id).rows)} rows")
    click.echo(WALKTHROUGH)


@main.command("eval")
@click.option("--suite", "suite_path", type=click.Path(exists=False), default=None,
              help="Suite JSONL to run; omit to generate the bundled grid.")
@click.option("--generate", "generate_only", is_flag=True,
              help="Only generate the suite (with --out), do not run it.")
@click.option("--seed", default=7, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write suite or metrics here.")
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--backend", default="deterministic", show_default=True)
@click.option("--workers", default=0, show_default=True, help="Parallel case execution.")
def eval_cmd(suite_path, generate_only, seed, out, data_dir, backend, workers) -> None:
    """Generate and/or run a mapping-fidelity suite."""
    from figstate.agent.backends import make_backend
    from figstate.harness import generate_suite, load_suite, run_suite, save_suite

    runtime = _open_runtime(data_dir, backend)
    if suite_path is not None:
        path = Path(suite_path)
        if not path.exists():
            raise click.ClickException(f"no suite at {path}")
        cases = load_suite(path)
    else:
        cases = generate_suite(runtime.catalog, seed=seed)
        if generate_only:
            target = Path(out or "suite.jsonl")
            save_suite(cases, target)
            click.echo(f"wrote {len(cases)} cases to {target}")
            return

    metrics, results = run_suite(cases, make_backend(backend, DEMO_SYNONYMS),
                                 runtime.catalog, workers=workers)
    click.echo(metrics.table())
    if out:
        report = {
            "metrics": metrics.to_jsonable(),
            "cases": [
                {
                    "case_id": r.case_id,
                    "phases": {k: {"executed": v.executed, "correct": v.correct, "error": v.error}
                               for k, v in r.phases.items()},
                }
                for r in results
            ],
        }
        Path(out).write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
        click.echo(f"wrote metrics to {out}")


@main.command()
@click.option("--artifact", required=True, help="Artifact id to export.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--data-dir", type=click.Path(), default=None)
def export(artifact: str, out: str, data_dir: str | None) -> None:
    """Export an artifact as a self-contained bundle."""
    runtime = _open_runtime(data_dir, "deterministic")
    path = runtime.export_artifact(artifact, out)
    click.echo(f"exported {artifact} to {path}")


@main.command("import")
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--data-dir", type=click.Path(), default=None)
def import_cmd(bundle: str, data_dir: str | None) -> None:
    """Import a bundle into the ledger."""
    runtime = _open_runtime(data_dir, "deterministic")
    artifact_id = runtime.import_artifact(bundle)
    click.echo(f"imported {artifact_id}")


@main.command()
@click.option("--artifact", default=None, help="Artifact id (replays its head).")
@click.option("--version", default=None, help="Specific version id.")
@click.option("--data-dir", type=click.Path(), default=None)
def replay(artifact: str | None, version: str | None, data_dir: str | None) -> None:
    """Replay a committed artifact version against the catalog."""
    if not artifact and not version:
        raise click.ClickException("need --artifact or --version")
    runtime = _open_runtime(data_dir, "deterministic")
    report = runtime.replay(version or artifact)
    _print_report(report)
    if not report.acceptable():
        sys.exit(EXIT_VERIFY)


@main.command()
@click.option("--bundle", type=click.Path(), required=True)
def verify(bundle: str) -> None:
    """Replay every figure in a bundle against its attached sources."""
    from figstate.ledger.bundle import verify_bundle

    reports = verify_bundle(bundle)
    failed = False
    for report in reports:
        _print_report(report)
        if not report.acceptable():
            failed = True
    click.echo("verification " + ("FAILED" if failed else "passed"))
    if failed:
        sys.exit(EXIT_VERIFY)


def _print_report(report) -> None:
    click.echo(f"version {report.version_id}")
    for result in report.results:
        status = "match" if (result.digest_match and result.chart_match) else (
            "declared-nondeterministic" if result.declared_nondeterministic else "MISMATCH"
        )
        click.echo(f"  {result.figure_id:<24} {status}")
        for note in result.notes:
            click.echo(f"    note: {note}")


@main.command()
@click.option("--out", type=click.Path(), default="docs/openapi.json", show_default=True)
def openapi(out: str) -> None:
    """Regenerate the committed OpenAPI description."""
    from figstate.service import create_app

    app = create_app(Runtime(demo_catalog()))
    Path(out).write_text(json.dumps(app.openapi(), indent=2, sort_keys=True), encoding="utf-8")
    click.echo(f"wrote {out}")


def entrypoint() -> None:
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USER)
    except click.Abort:
        sys.exit(EXIT_USER)
    except BundleFormatError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USER)
    except FigstateError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USER)
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - internal failures
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    entrypoint()
