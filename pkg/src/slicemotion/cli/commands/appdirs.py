import click

from slicemotion.appdirs import APP_DIRS, LOG_PATH


@click.command()
def appdirs() -> None:
    """Show directories and important files used by this application."""

    def echo_path(name: str, value: object) -> None:
        name = click.style(format(name, "<17"), fg="yellow")
        value = click.style(str(value), fg="green")
        click.secho(f"{name} = {value}")

    echo_path("user_log_path", APP_DIRS.user_log_path)
    echo_path("log_file", LOG_PATH)
