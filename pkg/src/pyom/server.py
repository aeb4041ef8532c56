"""Entry point for the ledger service: ``pyom-server``."""

from __future__ import annotations

import click
import uvicorn

from .api import create_app
from .ledger import Ledger


@click.command()
@click.option("--listen", default="127.0.0.1:8750", envvar="PYOM_LISTEN", show_default=True,
              help="host:port to bind")
@click.option("--data-dir", default="./pyom-data", envvar="PYOM_DATA_DIR", show_default=True,
              type=click.Path(), help="directory for the event log and mint key")
@click.option("--currency", default="USD", envvar="PYOM_CURRENCY", show_default=True,
              help="the single currency this ledger serves")
def main(listen: str, data_dir: str, currency: str):
    host, _, port = listen.rpartition(":")
    app = create_app(Ledger(data_dir, currency=currency))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
