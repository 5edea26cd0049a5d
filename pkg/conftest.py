import os

import pytest

from config import parse_config_text

ROOT = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def base_config_text():
    with open(os.path.join(ROOT, "configs", "reference.conf"), encoding="utf-8") as handle:
        return handle.read()


@pytest.fixture(scope="session")
def base_config(base_config_text):
    return parse_config_text(base_config_text)


@pytest.fixture(scope="session")
def base_params(base_config):
    return base_config.system_params()


@pytest.fixture
def write_config(tmp_path, base_config_text):
    """Write a config file into tmp_path; ``extra`` lines are appended to the reference config unless ``text`` is given."""

    def _write(extra="", text=None, name="run.conf"):
        path = tmp_path / name
        path.write_text((base_config_text if text is None else text) + extra, encoding="utf-8")
        return str(path)

    return _write
