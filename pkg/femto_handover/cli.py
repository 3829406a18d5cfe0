"""CLI entrypoint for femto-handover - two-tier handover simulation and traffic analysis."""

import sys
from contextlib import contextmanager
from typing import List, Optional, Sequence

import click

from femto_handover import __version__
from femto_handover.analytics import TrafficParams, solve_fixed_point
from femto_handover.bench import (
    BENCH_PRESETS,
    DEFAULT_PRESET,
    DEFAULT_TRIALS,
    SUMMARY_HEADER,
    TRIAL_HEADER,
    bench_config,
    run_bench,
)
from femto_handover.config import ScenarioConfig, load_config, parse_override
from femto_handover.errors import ConfigurationError, FemtoHandoverError
from femto_handover.metrics import MetricsReport
from femto_handover.output import OutputFilter, configure_logging
from femto_handover.progress import ProgressTracker
from femto_handover.signaling import (
    Flow,
    Gate,
    HandoverContext,
    run_flow,
    signaling_cost,
    format_trace,
    trace_summary,
)
from femto_handover.simulator import run as run_simulation
from femto_handover.storage import format_csv, load_topology, save_topology, write_csv
from femto_handover.sweep import SOLUTION_COLUMNS, SweepSpec, header, run_sweep, sweep_values
from femto_handover.topology import AccessMode, build_topology


def scenario_options(func):
    """--config, --set, --verbose and --quiet shared by every scenario command."""
    func = click.option("--quiet", "-q", is_flag=True, help="Only results and errors")(func)
    func = click.option("--verbose", "-v", is_flag=True, help="Verbose output")(func)
    func = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config key, e.g. --set traffic.alpha=0.7 (repeatable)",
    )(func)
    func = click.option(
        "--config",
        "-c",
        "config_path",
        type=click.Path(dir_okay=False),
        help="Scenario TOML file (defaults apply when omitted)",
    )(func)
    return func


@contextmanager
def domain_errors(output: OutputFilter):
    """Report FemtoHandoverError on stderr and exit with status 1."""
    try:
        yield
    except ConfigurationError as e:
        for message in e.errors:
            output.error(message)
        sys.exit(1)
    except FemtoHandoverError as e:
        output.error(str(e))
        sys.exit(1)


def _scenario(
    config_path: Optional[str],
    overrides: Sequence[str],
    extra: Optional[dict] = None,
    preset: Optional[str] = None,
) -> ScenarioConfig:
    """File, then a bench preset, then --set flags, then command-specific flags."""
    config = load_config(config_path)
    if preset is not None:
        config = bench_config(config, preset)
    updates = dict(parse_override(item) for item in overrides)
    updates.update(extra or {})
    if updates:
        config = config.with_overrides(updates)
    return config


def _setup(verbose: bool, quiet: bool) -> OutputFilter:
    configure_logging(verbose)
    return OutputFilter(verbose=verbose, quiet=quiet)


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{text}'")


@click.group()
@click.version_option(version=__version__)
def cli():
    """Femtocell/macrocell handover simulator and traffic analytics.

    Builds neighbor cell lists, runs call admission control and handover
    signaling over a simulated two-tier network, and solves the matching
    teletraffic model for blocking, dropping and forced termination.
    """
    pass


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--verbose", "-v", is_flag=True, help="Verbose output")
def validate(config_path: str, verbose: bool):
    """Check a scenario file and list every violation.

    Examples:
        femto-handover validate scenario.toml
    """
    output = _setup(verbose, False)
    with domain_errors(output):
        config = load_config(config_path)
    output.success(f"{config_path} is valid")
    output.emit(f"macro channels: N_ch = {config.n_channels}, S_ch = {config.s_channels}")


@cli.command()
@scenario_options
@click.option("--n", "n_faps", type=int, help="Number of FAPs (overrides topology.n_faps)")
@click.option("--output", "-o", type=click.Path(dir_okay=False), help="Write the solution as a CSV row")
def analytic(config_path, overrides, verbose, quiet, n_faps, output):
    """Solve the handover traffic model at one operating point."""
    out = _setup(verbose, quiet)
    with domain_errors(out):
        extra = {"topology.n_faps": n_faps} if n_faps is not None else None
        config = _scenario(config_path, overrides, extra)
        traffic = config.traffic
        solution = solve_fixed_point(TrafficParams.from_config(config), traffic.tol, traffic.max_iter, traffic.damping)
    if not solution.converged:
        out.warning(f"fixed point did not converge after {solution.iterations} iterations")
    values = solution.as_dict()
    if output:
        write_csv(output, SOLUTION_COLUMNS, [values])
        out.success(f"Wrote {output}")
    out.emit("".join(f"{key} = {value}\n" for key, value in values.items()))


@cli.command()
@scenario_options
@click.option("--seed", type=int, default=0, show_default=True, help="Run seed")
@click.option("--horizon", type=float, help="Measured horizon in seconds (overrides sim.horizon_s)")
@click.option("--topology", "topology_path", type=click.Path(dir_okay=False), help="Replay a saved topology")
@click.option("--decision-log", type=click.Path(dir_okay=False), help="Write every admission decision as CSV")
@click.option("--output", "-o", type=click.Path(dir_okay=False), help="Write the report as a CSV row")
def simulate(config_path, overrides, verbose, quiet, seed, horizon, topology_path, decision_log, output):
    """Run one seeded discrete-event simulation."""
    out = _setup(verbose, quiet)
    extra = {}
    if horizon is not None:
        extra["sim.horizon_s"] = horizon
    if decision_log:
        extra["sim.decision_log"] = decision_log
    with domain_errors(out):
        config = _scenario(config_path, overrides, extra)
        topology = load_topology(topology_path) if topology_path else None
        out.info(f"Simulating {config.sim.horizon_s:g} s after {config.sim.warmup_s:g} s warm-up (seed {seed})")
        report: MetricsReport = run_simulation(config, seed, topology)
    if not report.conserved:
        out.warning("call conservation does not hold")
    if report.ledger_violations:
        out.warning(f"{report.ledger_violations} ledger check(s) failed")
    if output:
        row = report.as_row()
        write_csv(output, list(row), [row])
        out.success(f"Wrote {output}")
    out.emit(report.to_text())


@cli.command()
@scenario_options
@click.option("--param", required=True, help="Dotted config key or alias (n, alpha, K, load, density_ratio)")
@click.option("--from", "start", type=float, required=True, help="First value")
@click.option("--to", "stop", type=float, required=True, help="Last value")
@click.option("--points", type=int, default=11, show_default=True, help="Number of values")
@click.option("--seeds", type=int, default=0, show_default=True, help="Simulation seeds per point (0 = analytic only)")
@click.option("--seed-base", type=int, default=0, show_default=True, help="First seed")
@click.option("--horizon", type=float, help="Simulation horizon per run in seconds")
@click.option("--jobs", "-j", type=int, default=1, show_default=True, help="Worker processes")
@click.option("--output", "-o", type=click.Path(dir_okay=False), help="CSV file (stdout when omitted)")
def sweep(config_path, overrides, verbose, quiet, param, start, stop, points, seeds, seed_base, horizon, jobs, output):
    """Vary one parameter; paired analytic and simulated columns as CSV.

    Examples:
        femto-handover sweep --param n --from 0 --to 1000 --points 11
        femto-handover sweep --param n --from 0 --to 100 --points 5 --seeds 10 --jobs 4
    """
    out = _setup(verbose, quiet)
    if jobs < 1:
        raise click.BadParameter("must be at least 1", param_hint="--jobs")
    with domain_errors(out):
        config = _scenario(config_path, overrides)
        spec = SweepSpec(
            param=param,
            values=sweep_values(config, param, start, stop, points),
            seeds=tuple(range(seed_base, seed_base + seeds)),
            horizon_s=horizon,
        )
        with ProgressTracker(len(spec.values), f"Sweeping {param}", enabled=not quiet) as progress:
            rows = run_sweep(config, spec, jobs=jobs, progress=progress)
    columns = header(spec)
    if output:
        write_csv(output, columns, rows)
        out.success(f"Wrote {len(rows)} rows to {output}")
    else:
        out.emit(format_csv(columns, rows))


@cli.command(name="ncl-bench")
@scenario_options
@click.option("--densities", default="200,400,600,800,1000", show_default=True, help="Comma-separated FAP counts")
@click.option("--seeds", type=int, default=30, show_default=True, help="Topologies per density")
@click.option("--trials", type=int, default=DEFAULT_TRIALS, show_default=True, help="MS placements per topology")
@click.option(
    "--preset",
    type=click.Choice(list(BENCH_PRESETS)),
    default=DEFAULT_PRESET,
    show_default=True,
    help="Scenario overrides applied before --set; none keeps the scenario as loaded",
)
@click.option("--output", "-o", type=click.Path(dir_okay=False), help="Per-density summary CSV (stdout when omitted)")
@click.option("--trials-output", type=click.Path(dir_okay=False), help="Per-trial CSV")
def ncl_bench(config_path, overrides, verbose, quiet, densities, seeds, trials, preset, output, trials_output):
    """Monte-Carlo comparison of proposed and traditional neighbor cell lists."""
    out = _setup(verbose, quiet)
    counts = _int_list(densities)
    with domain_errors(out):
        config = _scenario(config_path, overrides, preset=preset)
        with ProgressTracker(len(counts) * seeds, "Neighbor list bench", enabled=not quiet) as progress:
            summaries, all_trials = run_bench(config, counts, range(seeds), trials, progress=progress)
    rows = [s.as_row() for s in summaries]
    if trials_output:
        write_csv(trials_output, TRIAL_HEADER, [t.as_row() for t in all_trials])
        out.success(f"Wrote {len(all_trials)} trials to {trials_output}")
    if output:
        write_csv(output, SUMMARY_HEADER, rows)
        out.success(f"Wrote {output}")
    else:
        out.emit(format_csv(SUMMARY_HEADER, rows))


@cli.command(name="signaling-trace")
@click.option(
    "--flow",
    type=click.Choice(["f2m", "m2f", "f2f", "all"], case_sensitive=False),
    default="all",
    show_default=True,
    help="Call flow to print",
)
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True)
@click.option(
    "--fail",
    "failing",
    type=click.Choice([g.value for g in Gate]),
    help="Let one gate fail to show the aborted trace",
)
@click.option("--verbose", "-v", is_flag=True, help="Verbose output")
@click.option("--quiet", "-q", is_flag=True, help="Only the trace")
def signaling_trace(flow, fmt, failing, verbose, quiet):
    """Print the step-by-step handover call flows.

    Examples:
        femto-handover signaling-trace --flow f2f
        femto-handover signaling-trace --flow m2f --fail auth
    """
    out = _setup(verbose, quiet)
    context = HandoverContext()
    if failing:
        gate = Gate(failing)
        context = HandoverContext(
            cac_ok=gate is not Gate.CAC,
            preauth_ok=gate is not Gate.PREAUTH,
            authorization_ok=gate is not Gate.AUTH,
            interference_ok=gate is not Gate.INTERFERENCE,
        )
    flows = list(Flow) if flow.lower() == "all" else [Flow(flow.upper())]
    for selected in flows:
        trace = run_flow(selected, context)
        cost = signaling_cost(trace)
        out.info(f"{trace_summary(trace)}, {cost['messages_total']} messages")
        out.emit(format_trace(trace, fmt))


@cli.command()
@scenario_options
@click.option("--seed", type=int, default=0, show_default=True, help="Placement seed")
@click.option("--output", "-o", type=click.Path(dir_okay=False), required=True, help="Topology JSON file")
def topology(config_path, overrides, verbose, quiet, seed, output):
    """Generate a topology and save it for replay with simulate --topology."""
    out = _setup(verbose, quiet)
    with domain_errors(out):
        config = _scenario(config_path, overrides)
        topo = build_topology(config, seed)
        save_topology(topo, output)
    closed = sum(fap.access_mode is AccessMode.CLOSED for fap in topo.faps)
    out.success(f"Wrote {output}")
    out.emit(
        f"faps = {len(topo.faps)}\n"
        f"closed_access = {closed}\n"
        f"walls = {len(topo.walls)}\n"
        f"frequency_warnings = {len(topo.frequency_warnings)}\n"
    )
    for warning in topo.frequency_warnings:
        out.warning(warning, verbose_only=True)


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI on argv and return the exit status (0 ok, 1 domain error, 2 usage error)."""
    try:
        result = cli.main(args=None if argv is None else list(argv), prog_name="femto-handover", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return result if isinstance(result, int) else 0


def cli_entrypoint():
    """CLI entrypoint for console script."""
    sys.exit(run_command())


if __name__ == "__main__":
    cli_entrypoint()
