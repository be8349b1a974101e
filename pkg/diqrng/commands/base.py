import functools
import logging
import sys

import click

from diqrng.errors import EXIT_INTERRUPTED, EXIT_OK, EXIT_USAGE, DiqrngError

logger = logging.getLogger(__name__)


class DiqrngGroup(click.Group):
    """Command group whose subcommands return their exit code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_INTERRUPTED
        else:
            code = rv if isinstance(rv, int) else EXIT_OK

        if standalone_mode:
            sys.exit(code)
        return code


def reports_errors(func):
    """Turn a DiqrngError into a message on stderr and its exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DiqrngError as e:
            logger.debug("%s failed", func.__name__, exc_info=True)
            click.echo(f"Error: {e}", err=True)
            return e.exit_code

    return wrapper
