import sys

from src.cli.cd_cli import EXIT_USAGE, app

# Newer typer releases vendor click; its exceptions don't subclass the standalone ones
try:
    from typer._click.exceptions import Abort, UsageError
except ImportError:
    from click.exceptions import Abort, UsageError


def run(argv: list[str] | None = None) -> None:
    """Root entrypoint; usage errors exit with 1 instead of click's 2."""
    try:
        code = app(args=argv, prog_name="hcgmnet", standalone_mode=False)
    except UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(code or 0)


if __name__ == "__main__":
    run()
