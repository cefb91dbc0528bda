"""Command-line entry points: trace, batch, export, evaluate, sweep, serve.

Exit codes: 0 patches found, 2 no patch found, 3 partial source failure
(takes precedence whenever any enabled advisory source failed), 1 usage or
fatal error.

A GitHub credential for live mode is read from the environment variable
named by --token-env (default GITHUB_TOKEN).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .errors import PatchTraceError
from .evaluation import (
    aggregate,
    load_ground_truth,
    run_experiment,
    score_cve,
    standard_variant_grid,
)
from .models import SourceId, validate_cve_id
from .report import ReportStore, RunConfig, TraceReport, export_graph, run_trace
from .selection import ConnectivityVariant
from .transport import TransportMode, TransportPolicy

EXIT_FOUND = 0
EXIT_USAGE = 1
EXIT_NOT_FOUND = 2
EXIT_SOURCE_FAILURE = 3

_VARIANTS = {
    "full": ConnectivityVariant.FULL,
    "path-length": ConnectivityVariant.PATH_LENGTH_ONLY,
    "path-number": ConnectivityVariant.PATH_NUMBER_ONLY,
}


def _transport_policy(
    mode: str, cache_dir: str | None, replay_dir: str | None, token_env: str
) -> TransportPolicy:
    auth = {}
    token = os.environ.get(token_env, "")
    if token:
        auth["api.github.com"] = token
    if replay_dir:
        return TransportPolicy(
            mode=TransportMode.REPLAY_ONLY, cache_dir=replay_dir, auth_tokens=auth
        )
    if mode == "replay":
        raise click.UsageError("--transport replay requires --replay DIR")
    if mode == "cache":
        if not cache_dir:
            raise click.UsageError("--transport cache requires --cache-dir DIR")
        return TransportPolicy(
            mode=TransportMode.CACHE_THEN_LIVE, cache_dir=cache_dir, auth_tokens=auth
        )
    return TransportPolicy(mode=TransportMode.LIVE, auth_tokens=auth)


def _run_config(params: dict) -> RunConfig:
    sources = params["source"] or tuple(s.value for s in SourceId)
    return RunConfig(
        depth_limit=params["depth"],
        span_days=params["span"],
        sources=frozenset(SourceId(s) for s in sources),
        flat=params["flat"],
        use_confidence=not params["no_confidence"],
        use_connectivity=not params["no_connectivity"],
        connectivity_variant=_VARIANTS[params["variant"]],
        select_all=params["select_all"],
        expansion=not params["no_expansion"],
        top_k=params["top_k"],
        transport=_transport_policy(
            params["transport"],
            params["cache_dir"],
            params["replay"],
            params["token_env"],
        ),
    )


def _trace_options(fn):
    options = [
        click.option("--depth", type=int, default=5, show_default=True,
                     help="Reference network depth limit."),
        click.option("--span", type=int, default=30, show_default=True,
                     help="Expansion commit span in days."),
        click.option("--source", multiple=True,
                     type=click.Choice([s.value for s in SourceId]),
                     help="Enable only these sources (repeatable)."),
        click.option("--flat", is_flag=True,
                     help="Direct advisory references only (skip reference analysis)."),
        click.option("--no-confidence", is_flag=True,
                     help="Disable the confidence heuristic."),
        click.option("--no-connectivity", is_flag=True,
                     help="Disable the connectivity heuristic."),
        click.option("--variant", type=click.Choice(sorted(_VARIANTS)),
                     default="full", show_default=True,
                     help="Connectivity scoring variant."),
        click.option("--select-all", is_flag=True,
                     help="Select every candidate patch node (no selection)."),
        click.option("--no-expansion", is_flag=True,
                     help="Skip branch expansion."),
        click.option("--top-k", type=int, default=1, show_default=True,
                     help="Number of top connectivity tiers to select."),
        click.option("--transport", type=click.Choice(["live", "cache", "replay"]),
                     default="live", show_default=True),
        click.option("--cache-dir", type=click.Path(), default=None,
                     help="Cache directory for cache mode."),
        click.option("--replay", type=click.Path(exists=True, file_okay=False),
                     default=None, help="Replay fixture directory (forces replay mode)."),
        click.option("--token-env", default="GITHUB_TOKEN", show_default=True,
                     help="Environment variable holding the GitHub token."),
        click.option("--store", "store_dir", type=click.Path(), default="reports",
                     show_default=True, help="Report store directory."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _exit_code(report: TraceReport) -> int:
    if report.network.source_errors:
        return EXIT_SOURCE_FAILURE
    if report.status == "patches-found":
        return EXIT_FOUND
    return EXIT_NOT_FOUND


def _print_report_summary(report: TraceReport) -> None:
    click.echo(f"{report.cve_id}: {report.status}")
    for patch in report.selected:
        flag = " [confidence]" if patch.confidence else ""
        click.echo(
            f"  selected {patch.node_id} connectivity={float(patch.connectivity)}{flag}"
        )
    for patch in report.expanded:
        branches = ", ".join(patch.branches)
        click.echo(f"  expanded {patch.commit.url} on {branches}")
    for source, message in sorted(report.network.source_errors.items()):
        click.echo(f"  source error [{source.value}]: {message}", err=True)


@click.group()
def main() -> None:
    """Trace security patch commits for CVEs across advisory sources."""


@main.command()
@click.argument("cve_id")
@_trace_options
def trace(cve_id: str, store_dir: str, **params) -> None:
    """Trace one CVE and persist its report."""
    try:
        cve_id = validate_cve_id(cve_id)
        config = _run_config(params)
        store = ReportStore(store_dir)
        store.save_run_config(config)
        report = run_trace(cve_id, config, store)
    except PatchTraceError as exc:
        raise click.ClickException(str(exc)) from exc
    _print_report_summary(report)
    sys.exit(_exit_code(report))


@main.command()
@click.argument("cve_file", type=click.Path(exists=True, dir_okay=False))
@_trace_options
def batch(cve_file: str, store_dir: str, **params) -> None:
    """Trace every CVE id listed in a file (one per line)."""
    try:
        config = _run_config(params)
        store = ReportStore(store_dir)
        store.save_run_config(config)
    except PatchTraceError as exc:
        raise click.ClickException(str(exc)) from exc
    worst = EXIT_FOUND
    for line in Path(cve_file).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            report = run_trace(validate_cve_id(line), config, store)
        except PatchTraceError as exc:
            click.echo(f"{line}: failed: {exc}", err=True)
            worst = max(worst, EXIT_SOURCE_FAILURE)
            continue
        _print_report_summary(report)
        worst = max(worst, _exit_code(report))
    sys.exit(worst)


@main.command()
@click.argument("cve_id")
@click.option("--store", "store_dir", type=click.Path(exists=True, file_okay=False),
              default="reports", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["dot", "structured"]),
              default="dot", show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write to a file instead of stdout.")
def export(cve_id: str, store_dir: str, fmt: str, out: str | None) -> None:
    """Export a persisted report's network as DOT or structured JSON."""
    try:
        report = ReportStore(store_dir).load(validate_cve_id(cve_id))
        text = export_graph(report, fmt)
    except PatchTraceError as exc:
        raise click.ClickException(str(exc)) from exc
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Ground-truth file.")
@click.option("--store", "store_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Store holding the traced reports.")
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Also write the table as JSON.")
def evaluate(truth: str, store_dir: str, json_out: str | None) -> None:
    """Score persisted reports against ground truth."""
    try:
        truths = load_ground_truth(truth)
        store = ReportStore(store_dir)
        rows = []
        for entry in truths:
            try:
                report = store.load(entry.cve_id)
                predicted = set(report.patch_ids())
            except PatchTraceError:
                predicted = set()
            rows.append(score_cve(predicted, entry))
        table = aggregate(rows, truths)
    except PatchTraceError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(table.to_text())
    if json_out:
        Path(json_out).write_text(
            json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


@main.command()
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the full experiment report as JSON.")
@_trace_options
def sweep(truth: str, out: str | None, store_dir: str, **params) -> None:
    """Run the ablation/sensitivity grid against a ground-truth dataset."""
    try:
        config = _run_config(params)
        truths = load_ground_truth(truth)
        experiment = run_experiment(truths, config, standard_variant_grid(config))
    except PatchTraceError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(experiment.to_text(), nl=False)
    if out:
        Path(out).write_text(
            json.dumps(experiment.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


@main.command()
@click.option("--store", "store_dir", type=click.Path(), default="reports",
              show_default=True)
@click.option("--bind", default="127.0.0.1:8330", show_default=True,
              help="host:port to listen on (port 0 picks a free port).")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Static directory with the review UI build.")
def serve(store_dir: str, bind: str, ui_dir: str | None) -> None:
    """Serve the report store and review API over HTTP."""
    from .server import serve as start_server

    host, _, port = bind.partition(":")
    try:
        server = start_server(store_dir, (host, int(port or 0)), ui_dir=ui_dir)
    except (OSError, ValueError, PatchTraceError) as exc:
        raise click.ClickException(str(exc)) from exc
    actual_host, actual_port = server.server_address[:2]
    click.echo(f"listening on http://{actual_host}:{actual_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown_service()


if __name__ == "__main__":
    main()
