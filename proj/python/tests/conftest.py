import os
import shutil

import pytest


def pytest_addoption(parser):
    parser.addoption("--patlm-binary", default=os.environ.get("PATLM_BINARY") or shutil.which("patlm"))


@pytest.fixture
def patlm_binary(request):
    path = request.config.getoption("--patlm-binary")
    if not path:
        pytest.skip("patlm executable not available")
    return path
