import click

from diqrng import create_app
from diqrng.commands.base import DiqrngGroup
from diqrng.commands.experiment import certify, fit_noise, play, report
from diqrng.commands.randomness import extract, qrng, run_tests

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


@click.group(cls=DiqrngGroup)
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Override DIQRNG_LOG_LEVEL for this invocation.")
@click.pass_context
def cli(ctx, log_level):
    """Device-independent randomness from the CHSH game, on a simulated quantum device."""
    if ctx.obj is None:
        ctx.obj = create_app({"DIQRNG_LOG_LEVEL": log_level} if log_level else None)


# Register commands
for command in (play, certify, fit_noise, report, qrng, extract, run_tests):
    cli.add_command(command)
