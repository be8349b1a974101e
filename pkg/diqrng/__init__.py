import logging
import os

from dotenv import load_dotenv

__version__ = "1.0.0"

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

DEFAULT_CONFIG = {
    "DIQRNG_OUT_DIR": "out",
    "DIQRNG_MAX_QUBITS": 12,
    "DIQRNG_Z_THRESHOLD": 5.0,
    "DIQRNG_SECURITY_MARGIN": 64,
    "DIQRNG_WORKERS": 1,
    "DIQRNG_LOG_LEVEL": "WARNING",
}


class App:
    """Configuration plus one instance of every service."""

    def __init__(self, config):
        from diqrng.services.simulator_service import SimulatorService
        from diqrng.services.game_service import GameService
        from diqrng.services.certify_service import CertifyService
        from diqrng.services.randomness_service import RandomnessService
        from diqrng.services.nist_service import StatisticalTestService
        from diqrng.services.harness_service import HarnessService
        from diqrng.services.report_service import ReportService

        self.config = config
        self.simulator = SimulatorService(max_qubits=config["DIQRNG_MAX_QUBITS"])
        self.game = GameService(self.simulator)
        self.certifier = CertifyService(threshold_z=config["DIQRNG_Z_THRESHOLD"])
        self.randomness = RandomnessService(self.simulator, security_margin=config["DIQRNG_SECURITY_MARGIN"])
        self.battery = StatisticalTestService()
        self.harness = HarnessService(self.game, self.certifier, self.simulator, workers=config["DIQRNG_WORKERS"])
        self.reports = ReportService()


def _coerce(key, value):
    default = DEFAULT_CONFIG[key]
    try:
        return type(default)(value)
    except (TypeError, ValueError):
        from diqrng.errors import ConfigError
        raise ConfigError(f"{key}={value!r} is not a valid {type(default).__name__}")


def create_app(overrides=None):
    # Configuration: defaults < environment (.env included) < overrides
    config = {}
    for key, default in DEFAULT_CONFIG.items():
        config[key] = _coerce(key, os.getenv(key, default))
    for key, value in (overrides or {}).items():
        config[key] = _coerce(key, value) if key in DEFAULT_CONFIG else value

    logging.basicConfig(level=str(config["DIQRNG_LOG_LEVEL"]).upper(), format=LOG_FORMAT)
    logging.getLogger("diqrng").setLevel(str(config["DIQRNG_LOG_LEVEL"]).upper())

    return App(config)
