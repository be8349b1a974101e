"""
Tests for the QRNG pipelines and extractors.

Tests:
    - Hadamard and parity-state QRNGs, including job splitting
    - Von Neumann debiasing
    - Toeplitz hashing: worked example, GF(2) oracle, linearity, budget
"""
import math

import numpy as np
import pytest

from diqrng.errors import CapacityError, DomainError, ExtractionBudgetError
from diqrng.models import BitStream
from diqrng.services.randomness_service import MAX_SHOTS_PER_JOB


def bits(text, tag="external"):
    return BitStream.from_text(text, tag)


def toeplitz_oracle(x, seed, m):
    n = x.size
    matrix = np.array([[seed[n - 1 + i - j] for j in range(n)] for i in range(m)], dtype=np.int64)
    return (matrix @ x.astype(np.int64)) % 2


# =============================================================================
# Hadamard QRNG
# =============================================================================

def test_hadamard_qrng_bit_count(randomness):
    streams = randomness.hadamard_qrng(5, 20000, seed=1)
    assert len(streams) == 5
    assert sum(len(s) for s in streams) == 100_000
    assert all(s.source_tag == "hadamard" for s in streams)


def test_hadamard_qrng_single_shot(randomness):
    (stream,) = randomness.hadamard_qrng(1, 1, seed=3)
    assert len(stream) == 1


def test_hadamard_qrng_passes_monobit(randomness, battery):
    (stream,) = randomness.hadamard_qrng(1, 100_000, seed=2)
    assert battery.monobit_test(stream).passed


def test_hadamard_qrng_capacity(randomness):
    with pytest.raises(CapacityError):
        randomness.hadamard_qrng(13, 10, seed=1)


def test_long_runs_are_split_into_jobs(randomness):
    record = randomness.hadamard_counts(2, MAX_SHOTS_PER_JOB + 5, seed=4)
    assert record.metadata["jobs"] == 2
    assert record.shots == len(record.memory) == MAX_SHOTS_PER_JOB + 5


def test_qrng_is_reproducible(randomness):
    assert randomness.hadamard_qrng(2, 500, seed=9) == randomness.hadamard_qrng(2, 500, seed=9)


# =============================================================================
# Parity QRNG
# =============================================================================

def test_parity_state_three_qubits(simulator, randomness):
    state = simulator.run_circuit(randomness.parity_state(3), 3)
    expected = np.zeros(8)
    expected[[0b000, 0b011, 0b101, 0b110]] = 0.5
    assert np.allclose(state.amplitudes, expected, atol=1e-12)


def test_parity_state_four_qubits(simulator, randomness):
    state = simulator.run_circuit(randomness.parity_state(4), 4)
    nonzero = np.flatnonzero(np.abs(state.amplitudes) > 1e-12)
    assert nonzero.size == 8
    assert np.allclose(np.abs(state.amplitudes[nonzero]), 1 / math.sqrt(8), atol=1e-12)
    assert all(bin(i).count("1") % 2 == 0 for i in nonzero)


def test_parity_state_needs_three_qubits(randomness):
    with pytest.raises(DomainError):
        randomness.parity_state(2)


@pytest.mark.parametrize("n", range(3, 9))
def test_parity_invariant(randomness, n):
    streams = randomness.parity_qrng(n, 1000, seed=n)
    grid = np.stack([s.bits for s in streams])
    assert np.all(np.bitwise_xor.reduce(grid, axis=0) == 0)


def test_parity_streams_are_unbiased_and_pairwise_independent(randomness, battery):
    streams = randomness.parity_qrng(3, 100_000, seed=12)
    for stream in streams:
        assert battery.monobit_test(stream).passed
    assert abs(np.corrcoef(streams[0].bits, streams[1].bits)[0, 1]) < 0.02


# =============================================================================
# Von Neumann
# =============================================================================

@pytest.mark.parametrize("text, expected", [("0110", "01"), ("0000", ""), ("10110", "1"), ("1", "")])
def test_von_neumann_examples(randomness, text, expected):
    assert randomness.von_neumann(bits(text)).to_text() == expected


def test_von_neumann_rejects_empty(randomness):
    with pytest.raises(DomainError):
        randomness.von_neumann(BitStream(np.zeros(0, dtype=np.uint8)))


def test_von_neumann_on_biased_source(randomness, battery):
    rng = np.random.default_rng(70)
    raw = BitStream((rng.random(1_000_000) < 0.7).astype(np.uint8))
    out = randomness.von_neumann(raw)
    expected = 500_000 * 0.42
    sigma = math.sqrt(500_000 * 0.42 * 0.58)
    assert abs(len(out) - expected) <= 3 * sigma
    assert battery.monobit_test(out).passed


def test_von_neumann_output_is_unbiased_across_biases(randomness, battery):
    rng = np.random.default_rng(2023)
    failures = 0
    for trial in range(100):
        p = 0.1 * (trial % 9 + 1)
        raw = BitStream((rng.random(20_000) < p).astype(np.uint8))
        out = randomness.von_neumann(raw)
        failures += not battery.monobit_test(out).passed
    assert failures <= 5


# =============================================================================
# Toeplitz
# =============================================================================

def test_toeplitz_worked_example(randomness):
    # T = [[1, 1, 0], [0, 1, 1], [0, 0, 1]]
    out = randomness.toeplitz_extract(bits("101"), bits("01100"), 3)
    assert out.to_text() == "111"


def test_toeplitz_empty_output(randomness):
    out = randomness.toeplitz_extract(bits("101"), bits("01"), 0)
    assert len(out) == 0


def test_toeplitz_identity(randomness):
    n = 9
    seed = np.zeros(2 * n - 1, dtype=np.uint8)
    seed[n - 1] = 1
    data = bits("110100111")
    assert randomness.toeplitz_extract(data, BitStream(seed), n) == data


def test_toeplitz_matches_gf2_oracle(randomness):
    rng = np.random.default_rng(50)
    for _ in range(50):
        n, m = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        m = min(m, n)
        x = rng.integers(0, 2, n, dtype=np.uint8)
        seed = rng.integers(0, 2, n + m - 1, dtype=np.uint8)
        out = randomness.toeplitz_extract(BitStream(x), BitStream(seed), m)
        assert np.array_equal(out.bits, toeplitz_oracle(x, seed, m))


def test_toeplitz_is_linear(randomness):
    rng = np.random.default_rng(51)
    n, m = 64, 24
    seed = BitStream(rng.integers(0, 2, n + m - 1, dtype=np.uint8))
    for _ in range(100):
        a = rng.integers(0, 2, n, dtype=np.uint8)
        b = rng.integers(0, 2, n, dtype=np.uint8)
        combined = randomness.toeplitz_extract(BitStream(a ^ b), seed, m).bits
        separate = randomness.toeplitz_extract(BitStream(a), seed, m).bits ^ \
            randomness.toeplitz_extract(BitStream(b), seed, m).bits
        assert np.array_equal(combined, separate)


def test_toeplitz_large_input_uses_same_product(randomness):
    rng = np.random.default_rng(52)
    n, m = 4000, 3000
    x = rng.integers(0, 2, n, dtype=np.uint8)
    seed = rng.integers(0, 2, n + m - 1, dtype=np.uint8)
    out = randomness.toeplitz_extract(BitStream(x), BitStream(seed), m).bits
    expected = [int(np.dot(seed[i:i + n][::-1].astype(np.int64), x)) % 2 for i in range(m)]
    assert np.array_equal(out, expected)


def test_toeplitz_wrong_seed_length(randomness):
    with pytest.raises(DomainError):
        randomness.toeplitz_extract(bits("101"), bits("0110"), 3)


def test_toeplitz_budget(randomness):
    rng = np.random.default_rng(53)
    x = BitStream(rng.integers(0, 2, 1000, dtype=np.uint8))
    assert randomness.extraction_budget(1000, 0.5) == 436
    seed = BitStream(rng.integers(0, 2, 1000 + 436 - 1, dtype=np.uint8))
    assert len(randomness.toeplitz_extract(x, seed, 436, min_entropy_rate=0.5)) == 436

    seed = BitStream(rng.integers(0, 2, 1000 + 437 - 1, dtype=np.uint8))
    with pytest.raises(ExtractionBudgetError):
        randomness.toeplitz_extract(x, seed, 437, min_entropy_rate=0.5)


def test_toeplitz_budget_margin_override(randomness):
    assert randomness.extraction_budget(1000, 0.5, security_margin=0) == 500
    assert randomness.extraction_budget(100, 0.1) == 0
