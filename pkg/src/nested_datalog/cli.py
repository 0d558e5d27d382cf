"""
Command Line
============

``nested-datalog`` subcommands:

* ``eval``      evaluate a (Nested, possibly modal) Datalog program
* ``algebra``   evaluate an algebra expression under one EXISTS profile
* ``translate`` print the Modal Datalog translation of an expression
* ``compare``   evaluate under several profiles and attribute disagreements
* ``oracle``    check a literal or an operator against the possible worlds

Exit codes: 0 on success, 1 on user error (diagnostic on stderr), 2 on an
internal invariant failure.
"""

import logging
import sys
from typing import Callable, Optional, Sequence

import click

from nested_datalog.errors import InvariantViolation, LabError
from nested_datalog.output import FORMATS, ResultWriter
from nested_datalog.profiles import ENGINE_PRESETS, PRESETS
from nested_datalog.session import Lab, LabConfig

logger = logging.getLogger(__name__)

PACKAGE_LOGGER = "nested_datalog"


def configure_logging(trace: bool) -> None:
    """Route package logs to stderr: DEBUG with ``--trace``, WARNING otherwise."""
    root = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(root.handlers):
        if getattr(handler, "_lab_handler", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._lab_handler = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if trace else logging.WARNING)


def common_options(func: Callable) -> Callable:
    func = click.option(
        "--output", "-o", type=click.Path(dir_okay=False), default=None,
        help="Write the result to a file instead of standard output.",
    )(func)
    func = click.option("--trace", is_flag=True, help="Log derivations and let placements to stderr.")(func)
    func = click.option(
        "--format", "output_format", type=click.Choice(FORMATS), default="table", show_default=True,
    )(func)
    return func


def _emit(config: LabConfig, output: Optional[str]) -> None:
    configure_logging(config.trace)
    result = Lab().run(config)
    if output:
        ResultWriter.write(result, output, config.output_format)
    else:
        click.echo(ResultWriter.render(result, config.output_format))


def _split_profiles(text: str) -> list:
    return [name.strip() for name in text.split(",") if name.strip()]


@click.group()
@click.version_option(package_name="nested-datalog-workbench")
def cli() -> None:
    """Nested and Modal Datalog workbench."""


@cli.command("eval")
@click.option("--program", "program_file", required=True, type=click.Path(), help="Program file.")
@click.option("--facts", "facts_file", default="", type=click.Path(), help="Facts file.")
@click.option("--goal", default=None, help="Goal atom, e.g. 'ans(X)'.")
@click.option("--modal", is_flag=True, help="Evaluate with modal matching.")
@click.option(
    "--strategy", default="top-down", show_default=True,
    help="top-down, bottom-up, syntactic, points=goal,0.1 or improper=N.",
)
@common_options
def eval_command(program_file, facts_file, goal, modal, strategy, output_format, trace, output):
    """Evaluate a Datalog program."""
    config = LabConfig(
        command="eval", program_file=program_file, facts_file=facts_file, goal=goal,
        modal=modal, strategy=strategy, output_format=output_format, trace=trace,
    )
    _emit(config, output)


@cli.command("algebra")
@click.option("--expr", required=True, help="Expression file, or inline text starting with '('.")
@click.option("--facts", "facts_file", required=True, type=click.Path())
@click.option(
    "--profile", default="spec-top-down", show_default=True, type=click.Choice(sorted(PRESETS)),
)
@common_options
def algebra_command(expr, facts_file, profile, output_format, trace, output):
    """Evaluate an algebra expression."""
    config = LabConfig(
        command="algebra", expr=expr, facts_file=facts_file, profile=profile,
        output_format=output_format, trace=trace,
    )
    _emit(config, output)


@cli.command("translate")
@click.option("--expr", required=True, help="Expression file, or inline text starting with '('.")
@click.option("--facts", "facts_file", default="", type=click.Path(), help="Schemas of the relations.")
@click.option("--let-rename", "let_rename", is_flag=True, help="Use the let-based rename rule.")
@common_options
def translate_command(expr, facts_file, let_rename, output_format, trace, output):
    """Print the Modal Datalog translation of an expression."""
    config = LabConfig(
        command="translate", expr=expr, facts_file=facts_file, let_rename=let_rename,
        output_format=output_format, trace=trace,
    )
    _emit(config, output)


@cli.command("compare")
@click.option("--expr", required=True, help="Expression file, or inline text starting with '('.")
@click.option("--facts", "facts_file", required=True, type=click.Path())
@click.option(
    "--profiles", default=",".join(ENGINE_PRESETS), show_default=True,
    help="Comma-separated preset names.",
)
@common_options
def compare_command(expr, facts_file, profiles, output_format, trace, output):
    """Compare the answers of several EXISTS profiles."""
    config = LabConfig(
        command="compare", expr=expr, facts_file=facts_file, profiles=_split_profiles(profiles),
        output_format=output_format, trace=trace,
    )
    _emit(config, output)


@cli.command("oracle")
@click.option("--check", type=click.Choice(["literal", "operator"]), default="literal", show_default=True)
@click.option("--literal", default=None, help="Ground literal, e.g. '!q(a)' or 'filter(a = null)'.")
@click.option("--expr", default="", help="Expression whose root operator is checked.")
@click.option("--facts", "facts_file", default="", type=click.Path())
@click.option("--fresh-constants", default=1, show_default=True, type=click.IntRange(min=1))
@common_options
def oracle_command(check, literal, expr, facts_file, fresh_constants, output_format, trace, output):
    """Check decisions against the possible-worlds oracle."""
    config = LabConfig(
        command="oracle", check=check, literal=literal, expr=expr, facts_file=facts_file,
        fresh_constants=fresh_constants, output_format=output_format, trace=trace,
    )
    _emit(config, output)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    try:
        code = cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (LabError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except InvariantViolation as exc:
        click.echo(f"internal error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure")
        click.echo(f"internal error: {exc}", err=True)
        return 2
    return code if isinstance(code, int) else 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
