"""Command line entry points.

`run`, `bench` and `report` execute in-process against the core package
(deterministic, no server needed); `serve` hosts the control API; the
`studies` group is a thin HTTP client for steering live studies. The API
token is read from SELFAI_API_TOKEN and never printed or logged.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from selfai import __version__, metrics
from selfai.manager.backends import SubprocessBackend, TabulatedBackend, load_table
from selfai.manager.events import EventLog, LogicalClock
from selfai.manager.runner import StudyRunner
from selfai.model import Direction, Study
from selfai.user_config import parse_config

TOKEN_ENV = "SELFAI_API_TOKEN"


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Autonomous hyperparameter search with cognitive solvers and optimal stopping."""


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="study config YAML")
@click.option("--table", "table_path", type=click.Path(path_type=Path), help="tabulated benchmark CSV")
@click.option("--solver", default="grid", show_default=True)
@click.option("--endpoint", default=None, help="chat-completions endpoint URL for LLM solvers")
@click.option("--model", default=None, help="model id for LLM solvers")
@click.option("--playbook", type=click.Path(path_type=Path), default=None, help="scripted-agent playbook")
@click.option("--seed", default=0, show_default=True)
@click.option("--slots", default=1, show_default=True, help="concurrent execution slots")
@click.option("--n-jobs", default=None, type=int, help="suggestions per round (default from config)")
@click.option("--max-trials", default=None, type=int, help="override the config budget")
@click.option("--supervised", is_flag=True, help="stop verdicts wait for human approval via API")
@click.option("--stop-threshold", default=0.7, show_default=True)
@click.option("--data", "data_dir", type=click.Path(path_type=Path), default=Path("selfai-data"), show_default=True)
@click.option("--id", "study_id", default=None, help="study id (default derived, deterministic)")
@click.option("--command", "command_template", default=None, help="subprocess command template with {dim} placeholders")
@click.option("--timeout", default=3600.0, show_default=True, help="subprocess timeout (s)")
@click.option("--direction", default=None, type=click.Choice(["maximize", "minimize"]), help="objective direction for subprocess runs")
@click.option("--latency", default=0.0, show_default=True, help="simulated seconds per tabulated trial")
def run(
    config_path: Path | None,
    table_path: Path | None,
    solver: str,
    endpoint: str | None,
    model: str | None,
    playbook: Path | None,
    seed: int,
    slots: int,
    n_jobs: int | None,
    max_trials: int | None,
    supervised: bool,
    stop_threshold: float,
    data_dir: Path,
    study_id: str | None,
    command_template: str | None,
    timeout: float,
    direction: str | None,
    latency: float,
) -> None:
    """Run one study to completion and print its final metrics row."""
    from selfai.bench import default_system_context, make_solver

    try:
        if config_path is None and table_path is None:
            raise click.ClickException("need --config and/or --table")

        config = None
        if config_path is not None:
            if not config_path.exists():
                raise click.ClickException(f"config file not found: {config_path}")
            config = parse_config(config_path.read_text())

        table = None
        if table_path is not None:
            if not table_path.exists():
                raise click.ClickException(f"table file not found: {table_path}")
            table = load_table(table_path)

        if config is not None and table is not None:
            if dict(config.space().dimensions) != dict(table.space.dimensions):
                raise click.ClickException(
                    "config search_space does not match the table's dimensions"
                )

        if table is not None:
            space = table.space
            study_direction = table.direction
            metric = table.metric
            backend = TabulatedBackend(table, latency=latency)
            task_name = table.name
        elif command_template is not None:
            if config is None:
                raise click.ClickException("subprocess runs need --config for the search space")
            space = config.space()
            study_direction = Direction(direction or "maximize")
            metric = "value"
            task_name = config.task or "subprocess-task"
            backend = SubprocessBackend(
                command_template=command_template,
                space=space,
                workdir=data_dir / "scratch",
                timeout=timeout,
            )
        else:
            raise click.ClickException("need --table (tabulated) or --command (subprocess)")

        budget = space.cardinality
        if config is not None:
            budget = min(config.max_trials, space.cardinality)
        if max_trials is not None:
            budget = min(max_trials, space.cardinality)

        system_context = (
            config.system_text()
            if config is not None
            else (default_system_context(table) if table is not None else "")
        )
        sid = study_id or f"{task_name}-{solver}-s{seed}"
        study = Study(
            id=sid,
            space=space,
            direction=study_direction,
            max_trials=budget,
            n_jobs=n_jobs if n_jobs is not None else 1,
            solver=solver,
            system_context=system_context,
            metric=metric,
            supervised=supervised,
        )

        study_dir = data_dir / sid
        if (study_dir / "events.log").exists():
            raise click.ClickException(
                f"study {sid} already exists under {data_dir}; pick another --id"
            )
        solver_obj = make_solver(
            solver,
            playbook=playbook,
            endpoint=endpoint,
            model=model,
            api_key=os.environ.get("SELFAI_MODEL_KEY"),
            stop_threshold=stop_threshold,
        )
        log = EventLog(study_dir / "events.log", clock=LogicalClock())
        if table is not None and table.source:
            (study_dir / "meta.json").write_text(
                json.dumps({"table": str(table.source), "seed": seed}, sort_keys=True) + "\n"
            )
        seeds = [dict(s) for s in (config.trials if config else [])]
        runner = StudyRunner(
            study,
            solver_obj,
            backend,
            log,
            slots=slots,
            rng_seed=seed,
            seed_suggestions=seeds or None,
        )
        final = runner.run()
        log.close()
    except click.ClickException:
        raise
    except Exception as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")

    click.echo(f"study={final.id} lifecycle={final.lifecycle.value} completed={final.completed_count}")
    if table is not None and final.completed_count:
        from selfai.bench import grid_baseline_trajectory, study_trajectory

        row = metrics.task_metrics(
            study_trajectory(final, table), grid_baseline_trajectory(table)
        )
        click.echo(_format_row(task_name, solver, row.as_row()))
    else:
        best = final.best_completed()
        if best is not None:
            click.echo(f"best_result={best.value} (config #{best.number})")


def _format_row(task: str, solver: str, row: dict) -> str:
    r = metrics.round_display
    return (
        f"task={task} solver={solver} "
        f"score={r(row['score']):.4f} aup_d={r(row['aup_d']):.4f} "
        f"best_time={r(row['best_time']):.4f} stop_time={r(row['stop_time']):.4f} "
        f"best_result={row['best_result']} hit={str(bool(row['hit'])).lower()}"
    )


@main.command()
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
def bench(suite_path: Path, out_path: Path | None) -> None:
    """Run a benchmark suite and write the machine-readable report."""
    from selfai.bench import load_suite, run_suite, write_report

    try:
        spec = load_suite(suite_path)
        document = run_suite(spec)
    except Exception as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    destination = out_path or spec.output or Path("selfai-report.json")
    write_report(document, destination)
    click.echo(f"report written to {destination}")
    _print_aggregate(document)
    if document["errors"]:
        click.echo(f"{len(document['errors'])} cell(s) failed; see report errors")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--ranks", is_flag=True, help="print the task x solver rank matrix")
def report(in_path: Path, ranks: bool) -> None:
    """Pretty-print a report document."""
    document = json.loads(Path(in_path).read_text())
    r = metrics.round_display
    click.echo(f"{'task':24s} {'solver':10s} {'score':>8s} {'aup_d':>8s} {'t_best':>8s} {'t_stop':>8s} {'best':>10s} {'hit':>5s} {'rank':>4s}")
    for row in document["rows"]:
        click.echo(
            f"{row['task'][:24]:24s} {row['solver']:10s} {r(row['score']):8.4f} "
            f"{r(row['aup_d']):8.4f} {r(row['best_time']):8.4f} {r(row['stop_time']):8.4f} "
            f"{row['best_result']:10.4g} {str(bool(row['hit'])).lower():>5s} "
            f"{row.get('rank') if row.get('rank') is not None else '-':>4}"
        )
    _print_aggregate(document)
    if ranks:
        _print_rank_matrix(document)


def _print_aggregate(document: dict) -> None:
    if not document.get("aggregate"):
        return
    r = metrics.round_display
    click.echo("\naggregate (means over tasks):")
    click.echo(f"{'solver':10s} {'score':>8s} {'aup_d':>8s} {'t_best':>8s} {'t_stop':>8s} {'best':>8s} {'hit':>6s} {'mrank':>6s} {'rank':>4s}")
    for row in document["aggregate"]:
        click.echo(
            f"{row['solver']:10s} {r(row['score']):8.4f} {r(row['aup_d']):8.4f} "
            f"{r(row['best_time']):8.4f} {r(row['stop_time']):8.4f} {r(row['best_result']):8.4f} "
            f"{r(row['hit']):6.4f} {row['mean_rank']:6.2f} {row['rank']:4d}"
        )


def _print_rank_matrix(document: dict) -> None:
    tasks = document["tasks"]
    solvers = document["solvers"]
    by_key = {(row["task"], row["solver"]): row.get("rank") for row in document["rows"]}
    click.echo("\nranks (rows=solvers, columns=tasks):")
    header = "solver".ljust(10) + " ".join(t[:10].rjust(10) for t in tasks)
    click.echo(header)
    for solver in solvers:
        cells = " ".join(str(by_key.get((t, solver), "-")).rjust(10) for t in tasks)
        click.echo(solver.ljust(10) + cells)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data", "data_dir", type=click.Path(path_type=Path), default=Path("selfai-data"), show_default=True)
def serve(port: int, host: str, data_dir: Path) -> None:
    """Host the study control API (token from SELFAI_API_TOKEN, if set)."""
    import uvicorn

    from selfai.service import create_app

    uvicorn.run(create_app(str(data_dir)), host=host, port=port, log_level="info")


@main.group()
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.pass_context
def studies(ctx: click.Context, url: str) -> None:
    """Thin HTTP client for a running control API."""
    ctx.obj = {"url": url.rstrip("/")}


def _client(ctx: click.Context):
    import httpx

    headers = {}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return httpx.Client(base_url=ctx.obj["url"], headers=headers, timeout=30.0)


def _emit(response) -> None:
    if response.status_code >= 400:
        click.echo(f"error {response.status_code}: {response.text}", err=True)
        sys.exit(1)
    click.echo(json.dumps(response.json(), indent=2, sort_keys=True))


@studies.command("list")
@click.pass_context
def studies_list(ctx: click.Context) -> None:
    with _client(ctx) as client:
        _emit(client.get("/studies"))


@studies.command("create")
@click.option("--table", required=True)
@click.option("--solver", default="grid", show_default=True)
@click.option("--id", "study_id", default=None)
@click.option("--seed", default=0)
@click.option("--n-jobs", default=1)
@click.option("--slots", default=1)
@click.option("--max-trials", default=None, type=int)
@click.option("--supervised", is_flag=True)
@click.option("--latency", default=0.0)
@click.option("--playbook", default=None)
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.pass_context
def studies_create(ctx: click.Context, **kwargs) -> None:
    body = {
        "table": kwargs["table"],
        "solver": kwargs["solver"],
        "seed": kwargs["seed"],
        "n_jobs": kwargs["n_jobs"],
        "slots": kwargs["slots"],
        "supervised": kwargs["supervised"],
        "latency": kwargs["latency"],
    }
    for key in ("study_id", "max_trials", "playbook", "endpoint", "model"):
        if kwargs.get(key) is not None:
            body["id" if key == "study_id" else key] = kwargs[key]
    with _client(ctx) as client:
        _emit(client.post("/studies", json=body))


@studies.command("show")
@click.argument("study_id")
@click.pass_context
def studies_show(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.get(f"/studies/{study_id}"))


@studies.command("trials")
@click.argument("study_id")
@click.pass_context
def studies_trials(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.get(f"/studies/{study_id}/trials"))


@studies.command("reasoning")
@click.argument("study_id")
@click.pass_context
def studies_reasoning(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.get(f"/studies/{study_id}/reasoning"))


@studies.command("metrics")
@click.argument("study_id")
@click.pass_context
def studies_metrics(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.get(f"/studies/{study_id}/metrics"))


@studies.command("pause")
@click.argument("study_id")
@click.pass_context
def studies_pause(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.post(f"/studies/{study_id}/pause"))


@studies.command("resume")
@click.argument("study_id")
@click.pass_context
def studies_resume(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.post(f"/studies/{study_id}/resume"))


@studies.command("stop")
@click.argument("study_id")
@click.pass_context
def studies_stop(ctx: click.Context, study_id: str) -> None:
    with _client(ctx) as client:
        _emit(client.post(f"/studies/{study_id}/stop"))


@studies.command("override")
@click.argument("study_id")
@click.option("--approve/--reject", required=True)
@click.pass_context
def studies_override(ctx: click.Context, study_id: str, approve: bool) -> None:
    with _client(ctx) as client:
        _emit(client.post(f"/studies/{study_id}/stop-override", json={"approve": approve}))


@studies.command("patch")
@click.argument("study_id")
@click.option("--max-trials", default=None, type=int)
@click.option("--n-jobs", default=None, type=int)
@click.pass_context
def studies_patch(ctx: click.Context, study_id: str, max_trials: int | None, n_jobs: int | None) -> None:
    body = {}
    if max_trials is not None:
        body["max_trials"] = max_trials
    if n_jobs is not None:
        body["n_jobs"] = n_jobs
    with _client(ctx) as client:
        _emit(client.patch(f"/studies/{study_id}/config", json=body))


@studies.command("watch")
@click.argument("study_id")
@click.option("--after", default=0, show_default=True)
@click.pass_context
def studies_watch(ctx: click.Context, study_id: str, after: int) -> None:
    """Stream the study's events (server-sent events) to stdout."""
    with _client(ctx) as client:
        with client.stream("GET", f"/studies/{study_id}/events", params={"after": after}, timeout=None) as response:
            if response.status_code >= 400:
                click.echo(f"error {response.status_code}", err=True)
                sys.exit(1)
            for line in response.iter_lines():
                if line.startswith("data: "):
                    click.echo(line[6:])
                elif line.startswith("event: end"):
                    return


if __name__ == "__main__":
    main()
