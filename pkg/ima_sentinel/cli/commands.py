from datetime import timedelta
import json
import logging
import os

import click
import humanize

from .. import DEFAULT_LOG_LEVEL, LOG_LEVEL_ENV_VAR, LOG_PREFIX
from ..utils.auditing import audit_bag
from ..utils.configuring import ConfigError, SystemConfig, flatten_messages, load_config, load_scenario, with_scenario
from ..utils.injecting import FaultError
from ..utils.modeling import InfeasibleConfig, describe_model, expected_traffic_netlist
from ..utils.netlisting import run_differential_suite
from ..utils.orchestrating import Report, check_trace, emit_report, expected_model, run_scenario
from ..utils.simulating import describe_schedule, elaborate
from ..utils.tracing import TraceError, dump_frame_trace, load_frame_trace

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def configure_logging():
    """Diagnostics go to standard error, at the level named in the environment."""
    name = os.environ.get(LOG_LEVEL_ENV_VAR, DEFAULT_LOG_LEVEL).lower()
    logger = logging.getLogger("ima_sentinel")
    for handler in [h for h in logger.handlers if getattr(h, "name", None) == "ima-sentinel-stderr"]:
        logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.set_name("ima-sentinel-stderr")
    handler.setFormatter(logging.Formatter(f"{LOG_PREFIX} %(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(LOG_LEVELS.get(name, logging.WARNING))
    if name not in LOG_LEVELS:
        logger.warning(
            "%s=%s is not one of %s, using %s.", LOG_LEVEL_ENV_VAR, name, ", ".join(LOG_LEVELS), DEFAULT_LOG_LEVEL
        )


def fail_on_config(ctx: click.Context, error: Exception):
    messages = flatten_messages(error.messages) if isinstance(error, ConfigError) else [str(error)]
    click.echo(f"{LOG_PREFIX} Please correct the following errors:", err=True)
    for message in messages:
        click.echo(f"  - {message}", err=True)
    ctx.exit(EXIT_CONFIG)


def read_config(ctx: click.Context, config_file) -> SystemConfig:
    try:
        return load_config(config_file.read())
    except ConfigError as e:
        fail_on_config(ctx, e)


def write_report(report: Report, out):
    text = emit_report(report)
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write(text)
    click.echo(
        f"{LOG_PREFIX} {report.verdict}: {humanize.intcomma(report.frames_received)} frames checked, "
        f"{humanize.intcomma(len(report.anomalies))} anomalies.",
        err=True,
    )


@click.group()
@click.version_option(package_name="ima_sentinel")
def cli():
    """Simulate an IMA data path and monitor its traffic."""
    configure_logging()


@cli.command("simulate")
@click.option("--config", "config_file", type=click.File("r"), required=True, help="System configuration (JSON).")
@click.option(
    "--scenario",
    "scenario_file",
    type=click.File("r"),
    required=False,
    help="Fault scenario (JSON). Replaces the scenario of the configuration, if it has one.",
)
@click.option("--mafs", type=click.IntRange(min=0), required=False, help="Number of major frames to run.")
@click.option("--out", type=click.File("w"), required=False, help="Write the report here instead of to standard output.")
@click.option("--trace", "trace_file", type=click.File("w"), required=False, help="Write the frame events (JSONL) here.")
@click.option(
    "--pipelined/--sequential",
    default=False,
    help="Generate the events one major frame at a time on a producer thread, while the monitor checks them.",
)
@click.pass_context
def simulate(ctx, config_file, scenario_file, mafs, out, trace_file, pipelined):
    """
    Simulate the transmitter, inject the scenario's faults and monitor the
    resulting traffic. Exits 0 on PASS, 1 on FAIL and 2 on configuration errors.
    """
    config = read_config(ctx, config_file)
    try:
        scenario = load_scenario(scenario_file.read()) if scenario_file is not None else None
        config = with_scenario(config, scenario, mafs)
        report = run_scenario(config, pipelined=pipelined)
    except (ConfigError, InfeasibleConfig, FaultError) as e:
        fail_on_config(ctx, e)
    click.echo(
        f"{LOG_PREFIX} Simulated {humanize.precisedelta(timedelta(microseconds=config.run_mafs * config.major_frame.maf_duration), minimum_unit='milliseconds')}.",
        err=True,
    )
    if trace_file is not None:
        dump_frame_trace(report.events, trace_file)
    write_report(report, out)
    ctx.exit(EXIT_PASS if report.verdict == "PASS" else EXIT_FAIL)


@cli.command("check")
@click.option("--config", "config_file", type=click.File("r"), required=True, help="System configuration (JSON).")
@click.option("--trace", "trace_file", type=click.File("r"), required=True, help="Recorded frame events (JSONL).")
@click.option(
    "--mafs",
    type=click.IntRange(min=0),
    required=False,
    help="Number of major frames the trace covers. Defaults to up to the MAF of the last frame.",
)
@click.option("--out", type=click.File("w"), required=False, help="Write the report here instead of to standard output.")
@click.pass_context
def check(ctx, config_file, trace_file, mafs, out):
    """
    Monitor a recorded trace against a configuration.
    """
    config = read_config(ctx, config_file)
    try:
        events = load_frame_trace(trace_file)
        report = check_trace(config, events, mafs)
    except (TraceError, InfeasibleConfig) as e:
        fail_on_config(ctx, e)
    write_report(report, out)
    ctx.exit(EXIT_PASS if report.verdict == "PASS" else EXIT_FAIL)


@cli.command("schedule")
@click.option("--config", "config_file", type=click.File("r"), required=True, help="System configuration (JSON).")
@click.pass_context
def schedule(ctx, config_file):
    """
    Show the static process order of the expected-traffic netlist and the
    expected traffic per MAF.
    """
    config = read_config(ctx, config_file)
    try:
        netlist, _ = expected_traffic_netlist(config.major_frame, config.virtual_links)
        model = expected_model(config)
    except InfeasibleConfig as e:
        fail_on_config(ctx, e)
    description = {
        "schedule": describe_schedule(elaborate(netlist), netlist.clock_period),
        "model": describe_model(model),
    }
    click.echo(json.dumps(description, sort_keys=True, indent=2))


@cli.command("selftest")
@click.option("--cases", type=click.IntRange(min=0), default=100, help="Random acyclic netlists to compare. Defaults to 100.")
@click.option("--seed", type=click.IntRange(min=0), default=0, help="Seed of the first netlist. Defaults to 0.")
@click.option("--cycles", type=click.IntRange(min=0), default=1000, help="Cycles per netlist. Defaults to 1000.")
@click.option("--cyclic-cases", type=click.IntRange(min=0), default=20, help="Cyclic netlists to reject. Defaults to 20.")
@click.pass_context
def selftest(ctx, cases, seed, cycles, cyclic_cases):
    """
    Compare the static-scheduled kernel against the delta-cycle oracle.
    """
    result = run_differential_suite(cases=cases, seed=seed, cycles=cycles, cyclic_cases=cyclic_cases)
    click.echo(
        f"{LOG_PREFIX} {result.cases - len(result.mismatches)}/{result.cases} random netlists agree over "
        f"{humanize.intcomma(result.cycles)} cycles; {result.cycles_rejected}/{result.cyclic_cases} cyclic netlists "
        f"rejected, {result.oracle_diverged}/{result.cyclic_cases} diverge in the oracle."
    )
    if result.mismatches:
        click.echo(f"{LOG_PREFIX} Mismatching seeds: {', '.join(map(str, result.mismatches))}")
    ctx.exit(EXIT_PASS if result.passed else EXIT_FAIL)


@cli.command("audit-bag")
@click.option("--config", "config_file", type=click.File("r"), required=True, help="System configuration (JSON).")
@click.option("--trace", "trace_file", type=click.File("r"), required=True, help="Recorded frame events (JSONL).")
@click.pass_context
def audit(ctx, config_file, trace_file):
    """
    Check from the trace alone that every VL keeps its BAG between emissions.
    """
    config = read_config(ctx, config_file)
    result = audit_bag(trace_file, {vl.vl_id: vl.bag_us for vl in config.virtual_links})
    for vl_id, gap in sorted(result.min_gaps.items()):
        click.echo(f"{LOG_PREFIX} VL {vl_id}: shortest gap {humanize.intcomma(int(gap))} µs")
    if not result.passed:
        click.echo(result.violations.to_string(index=False))
    click.echo(
        f"{LOG_PREFIX} {humanize.intcomma(result.frames)} frames, {len(result.violations)} BAG violations."
    )
    ctx.exit(EXIT_PASS if result.passed else EXIT_FAIL)
