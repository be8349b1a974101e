import pytest

from diqrng import create_app


@pytest.fixture
def app(tmp_path):
    return create_app({
        "DIQRNG_OUT_DIR": str(tmp_path / "out"),
        "DIQRNG_LOG_LEVEL": "WARNING",
    })


@pytest.fixture
def simulator(app):
    return app.simulator


@pytest.fixture
def game(app):
    return app.game


@pytest.fixture
def certifier(app):
    return app.certifier


@pytest.fixture
def randomness(app):
    return app.randomness


@pytest.fixture
def battery(app):
    return app.battery


@pytest.fixture
def harness(app):
    return app.harness


@pytest.fixture
def reports(app):
    return app.reports
