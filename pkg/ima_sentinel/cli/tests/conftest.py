import logging

import pytest
from click.testing import CliRunner

from ima_sentinel.conftest import BASELINE_PATH


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def baseline_path() -> str:
    return str(BASELINE_PATH)


@pytest.fixture(autouse=True)
def detach_cli_logging():
    """The CLI logs to the runner's stderr, which is closed once the command returns."""
    yield
    logger = logging.getLogger("ima_sentinel")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
