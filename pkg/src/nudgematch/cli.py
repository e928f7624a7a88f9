"""Command-line entry points: serve the HTTP API, replay a log, run the
simulator, and export analytics (JSON aggregates, CSV curves/timelines)."""
import csv
import json
import sys

import click

from .analytics import (
    LogView,
    activity_timeline,
    cohort_curves,
    matched_vs_unmatched,
    table1_aggregates,
)
from .config import CourseConfig
from .core import Core
from .events import LogFileSink, read_log
from .simulator import AnalyticsLogConfig, SimConfig, generate_analytics_log, run_sim, table1_preset_log


def _load_flat(path) -> dict:
    """Flat key=value file; '#' starts a comment. Values stay strings."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.ClickException(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


@click.group()
def main():
    """Event-sourced 1:1 help matchmaking service and analytics."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of course settings")
@click.option("--log", "log_path", type=click.Path(), required=True,
              help="append-only event log (created or resumed)")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(config_path, log_path, host, port):
    """Start the HTTP service, resuming state from the log if it exists."""
    import os
    import uvicorn
    from .service import build_app

    if os.path.exists(log_path) and os.path.getsize(log_path) > 0:
        core = Core.replay(read_log(log_path))
        core.sink = LogFileSink(log_path)
        click.echo(f"resumed {core._seq} events from {log_path}", err=True)
    else:
        config = CourseConfig()
        if config_path:
            with open(config_path, "r", encoding="utf-8") as fh:
                config = CourseConfig.from_dict(json.load(fh))
        core = Core(config, sink=LogFileSink(log_path))
    uvicorn.run(build_app(core), host=host, port=port)


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
def replay(log_path):
    """Rebuild state from a log and print its summary and state hash."""
    core = Core.replay(read_log(log_path))
    by_state = {}
    for ticket in core.tickets.values():
        by_state[ticket.state.value] = by_state.get(ticket.state.value, 0) + 1
    click.echo(json.dumps({
        "events": core._seq,
        "tickets": by_state,
        "sessions": len(core.sessions),
        "state_hash": core.state_hash(),
    }, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="flat key=value simulation config")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write the generated event log here")
@click.option("--seed", type=int, default=None, help="override the config seed")
def simulate(config_path, out_path, seed):
    """Run one deterministic simulation and print the report as JSON."""
    cfg = SimConfig.from_flat(_load_flat(config_path)) if config_path else SimConfig()
    if seed is not None:
        cfg.seed = seed
    report, _ = run_sim(cfg, log_path=out_path)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.group()
def generate():
    """Synthetic log generators with known ground truth."""


@generate.command("cohort")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7)
@click.option("--helped-multiplier", type=float, default=0.5)
def generate_cohort(out_path, seed, helped_multiplier):
    cfg = AnalyticsLogConfig(seed=seed, helped_dropout_multiplier=helped_multiplier)
    generate_analytics_log(cfg, log_path=out_path)
    click.echo(f"wrote {out_path}")


@generate.command("table1")
@click.option("--out", "out_path", type=click.Path(), required=True)
def generate_table1(out_path):
    table1_preset_log(log_path=out_path)
    click.echo(f"wrote {out_path}")


@main.group()
def analyze():
    """Analytics over an event-log file."""


def _view(log_path) -> LogView:
    return LogView(read_log(log_path))


@analyze.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
def aggregates(log_path):
    """Deployment summary counts as JSON."""
    click.echo(json.dumps(table1_aggregates(_view(log_path)), indent=2))


@analyze.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default="-")
def curves(log_path, out_path):
    """Helped-vs-control progress and dropout curves as CSV."""
    result = cohort_curves(_view(log_path))
    fh = sys.stdout if out_path == "-" else open(out_path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["day_offset", "helped_progress", "control_progress",
                     "helped_dropout", "control_dropout",
                     "helped_dropout_se", "control_dropout_se"])
    for i, d in enumerate(result.offsets):
        writer.writerow([int(d),
                         f"{result.helped_progress[i]:.6f}", f"{result.control_progress[i]:.6f}",
                         f"{result.helped_dropout[i]:.6f}", f"{result.control_dropout[i]:.6f}",
                         f"{result.helped_dropout_se[i]:.6f}", f"{result.control_dropout_se[i]:.6f}"])
    if fh is not sys.stdout:
        fh.close()
        click.echo(f"wrote {out_path} ({result.n_helped} helped, "
                   f"{result.n_control} pooled controls, "
                   f"{result.skipped_sessions} sessions without controls)")


@analyze.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--teacher", required=True)
@click.option("--anchor", type=int, required=True, help="anchor timestamp (ms)")
@click.option("--out", "out_path", type=click.Path(), default="-")
def timeline(log_path, teacher, anchor, out_path):
    """Per-minute activity labels around an anchor, as CSV."""
    result = activity_timeline(_view(log_path), teacher, anchor)
    fh = sys.stdout if out_path == "-" else open(out_path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["minute_offset", "label"])
    for offset, label in zip(result.offsets, result.labels):
        writer.writerow([offset, label])
    if fh is not sys.stdout:
        fh.close()


@analyze.command("matched-vs-unmatched")
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default="-")
def matched_unmatched(log_path, out_path):
    """Activity-label proportions per minute for matched vs exhausted tickets."""
    result = matched_vs_unmatched(_view(log_path))
    fh = sys.stdout if out_path == "-" else open(out_path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["partition", "label"] + [str(m) for m in result.offsets])
    for name, matrix in (("matched", result.matched), ("unmatched", result.unmatched)):
        for i, label in enumerate(result.labels):
            writer.writerow([name, label] + [f"{v:.4f}" for v in matrix[i]])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
