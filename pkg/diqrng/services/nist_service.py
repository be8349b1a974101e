"""Frequency, block-frequency and runs tests from the SP 800-22 battery."""
import math

import numpy as np
from scipy.special import erfc, gammaincc

from diqrng.errors import DomainError, LengthError
from diqrng.models import BitStream, TestReport

ALPHA = 0.01
MIN_LENGTH = 100
DEFAULT_BLOCK_LEN = 128

TEST_NAMES = ("monobit", "block-frequency", "runs")


def _as_bits(bits):
    if isinstance(bits, BitStream):
        return bits.bits
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if np.any(arr > 1):
        raise DomainError("bit sequences hold only 0 and 1")
    return arr


def _report(name, statistic, p_value):
    p_value = min(max(float(p_value), 0.0), 1.0)
    return TestReport(name, float(statistic), p_value, p_value >= ALPHA)


class StatisticalTestService:
    def monobit_test(self, bits, enforce_length=True):
        """Frequency test: p = erfc(|S_n| / sqrt(2n))."""
        bits = _as_bits(bits)
        n = bits.size
        if n == 0 or (enforce_length and n < MIN_LENGTH):
            raise LengthError(f"monobit test needs at least {MIN_LENGTH} bits, got {n}")
        s_n = 2 * int(np.count_nonzero(bits)) - n
        s_obs = abs(s_n) / math.sqrt(n)
        return _report("monobit", s_obs, erfc(s_obs / math.sqrt(2)))

    def block_frequency_test(self, bits, block_len=DEFAULT_BLOCK_LEN, enforce_length=True):
        """Chi-square of the ones-proportion in each of N = n // M blocks."""
        bits = _as_bits(bits)
        n = bits.size
        if block_len < 1:
            raise DomainError(f"block length must be positive, got {block_len}")
        n_blocks = n // block_len
        if n_blocks == 0 or (enforce_length and n < 10 * block_len):
            raise LengthError(f"block frequency test needs at least {10 * block_len} bits, got {n}")
        blocks = bits[: n_blocks * block_len].reshape(n_blocks, block_len)
        proportions = blocks.mean(axis=1)
        chi_squared = 4.0 * block_len * float(np.sum((proportions - 0.5) ** 2))
        return _report("block-frequency", chi_squared, gammaincc(n_blocks / 2.0, chi_squared / 2.0))

    def runs_test(self, bits, enforce_length=True):
        """Runs test, gated on the frequency pre-test |pi - 1/2| < 2/sqrt(n)."""
        bits = _as_bits(bits)
        n = bits.size
        if n < 2 or (enforce_length and n < MIN_LENGTH):
            raise LengthError(f"runs test needs at least {MIN_LENGTH} bits, got {n}")
        pi = np.count_nonzero(bits) / n
        v_obs = int(np.count_nonzero(np.diff(bits))) + 1
        if abs(pi - 0.5) >= 2 / math.sqrt(n):
            return _report("runs", v_obs, 0.0)
        expected = 2 * n * pi * (1 - pi)
        p_value = erfc(abs(v_obs - expected) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))
        return _report("runs", v_obs, p_value)

    def run_battery(self, bits, tests=TEST_NAMES, block_len=DEFAULT_BLOCK_LEN):
        """Run the selected tests in the order given."""
        runners = {
            "monobit": lambda: self.monobit_test(bits),
            "block-frequency": lambda: self.block_frequency_test(bits, block_len),
            "runs": lambda: self.runs_test(bits),
        }
        unknown = [t for t in tests if t not in runners]
        if unknown:
            raise DomainError(f"unknown tests {unknown}; choose from {list(TEST_NAMES)}")
        return [runners[name]() for name in tests]
