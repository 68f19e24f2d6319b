import logging

import pytest


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    # Repair paths log warnings by design; keep test output readable.
    caplog.set_level(logging.ERROR, logger="adeval")
    yield
