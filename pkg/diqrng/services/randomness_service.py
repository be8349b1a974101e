"""QRNG pipelines (Hadamard and parity-state) and randomness extractors."""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.signal import fftconvolve

from diqrng.errors import DomainError, ExtractionBudgetError
from diqrng.models import BitStream, CountsRecord, Gate
from diqrng.rng import STREAM_JOB, derive_seed

logger = logging.getLogger(__name__)

# per-circuit shot ceiling of the cloud devices; longer runs are split into jobs
MAX_SHOTS_PER_JOB = 20000

# above this many multiply-adds the Toeplitz product goes through the FFT
_DIRECT_CONVOLVE_LIMIT = 10_000_000


def streams_from_memory(memory, n_qubits, source_tag) -> list[BitStream]:
    """Split shot-ordered outcome strings into one stream per qubit."""
    joined = "".join(memory).encode("ascii")
    grid = (np.frombuffer(joined, dtype=np.uint8) - ord("0")).reshape(-1, n_qubits)
    return [BitStream(grid[:, q], source_tag) for q in range(n_qubits)]


class RandomnessService:
    def __init__(self, simulator, security_margin=64):
        self.simulator = simulator
        self.security_margin = security_margin

    # -- generators ----------------------------------------------------------

    def hadamard_circuit(self, n_qubits):
        return tuple(Gate.h(q) for q in range(n_qubits))

    def parity_state(self, n_qubits):
        """Gates preparing the uniform superposition of even-parity strings."""
        if n_qubits < 3:
            raise DomainError(f"the parity state needs at least 3 qubits, got {n_qubits}")
        last = n_qubits - 1
        gates = [Gate.h(q) for q in range(last)]
        gates += [Gate.cnot(q, last) for q in range(last)]
        return tuple(gates)

    def run_counts(self, gates, n_qubits, shots, seed) -> CountsRecord:
        """Sample a circuit in jobs of at most MAX_SHOTS_PER_JOB and concatenate."""
        if shots < 1:
            raise DomainError(f"shots must be positive, got {shots}")
        dist = self.simulator.probabilities(self.simulator.run_circuit(gates, n_qubits))
        memory = []
        jobs = math.ceil(shots / MAX_SHOTS_PER_JOB)
        for job in range(jobs):
            job_shots = min(MAX_SHOTS_PER_JOB, shots - job * MAX_SHOTS_PER_JOB)
            record = self.simulator.sample(dist, job_shots, derive_seed(seed, STREAM_JOB, job))
            memory.extend(record.memory)
        logger.info("sampled %d shots on %d qubits in %d job(s)", shots, n_qubits, jobs)

        counts = {}
        for outcome in memory:
            counts[outcome] = counts.get(outcome, 0) + 1
        return CountsRecord(
            shots=shots,
            counts=counts,
            memory=memory,
            metadata={"n_qubits": n_qubits, "seed": int(seed), "jobs": jobs},
        )

    def hadamard_counts(self, n_qubits, shots, seed) -> CountsRecord:
        record = self.run_counts(self.hadamard_circuit(n_qubits), n_qubits, shots, seed)
        return CountsRecord(record.shots, record.counts, record.memory, {**record.metadata, "mode": "hadamard"})

    def parity_counts(self, n_qubits, shots, seed) -> CountsRecord:
        record = self.run_counts(self.parity_state(n_qubits), n_qubits, shots, seed)
        return CountsRecord(record.shots, record.counts, record.memory, {**record.metadata, "mode": "parity"})

    def hadamard_qrng(self, n_qubits, shots, seed) -> list[BitStream]:
        """One stream of ``shots`` bits per qubit, in shot order."""
        record = self.hadamard_counts(n_qubits, shots, seed)
        return streams_from_memory(record.memory, n_qubits, "hadamard")

    def parity_qrng(self, n_qubits, shots, seed) -> list[BitStream]:
        record = self.parity_counts(n_qubits, shots, seed)
        return streams_from_memory(record.memory, n_qubits, "parity")

    # -- extractors ----------------------------------------------------------

    def von_neumann(self, stream: BitStream) -> BitStream:
        """01 -> 0, 10 -> 1, drop 00 and 11, over non-overlapping pairs."""
        if len(stream) == 0:
            raise DomainError("von Neumann extraction needs a non-empty stream")
        pairs = stream.bits[: len(stream) // 2 * 2].reshape(-1, 2)
        keep = pairs[:, 0] != pairs[:, 1]
        return BitStream(pairs[keep, 0], stream.source_tag)

    def extraction_budget(self, input_len, min_entropy_rate=None, security_margin=None):
        if min_entropy_rate is None:
            return input_len
        margin = self.security_margin if security_margin is None else security_margin
        return max(0, math.floor(input_len * min_entropy_rate - margin))

    def toeplitz_extract(self, stream: BitStream, seed_bits: BitStream, out_len,
                         min_entropy_rate=None, security_margin=None) -> BitStream:
        """Multiply the input by a seeded Toeplitz matrix over GF(2).

        With n input bits and m output bits the seed has n + m - 1 bits and
        T[i][j] = seed[n - 1 + i - j]: the first row is seed[n-1], ..., seed[0]
        and the first column is seed[n-1], ..., seed[n+m-2].
        """
        n = len(stream)
        if out_len < 0:
            raise DomainError(f"output length must be non-negative, got {out_len}")
        budget = self.extraction_budget(n, min_entropy_rate, security_margin)
        if out_len > budget:
            raise ExtractionBudgetError(f"{out_len} output bits exceed the extraction budget of {budget}")
        if len(seed_bits) != n + out_len - 1:
            raise DomainError(f"seed must hold {n + out_len - 1} bits, got {len(seed_bits)}")
        if out_len == 0:
            return BitStream(np.zeros(0, dtype=np.uint8), stream.source_tag)

        seed = seed_bits.bits.astype(np.int64)
        data = stream.bits.astype(np.int64)
        # (seed * data)[n - 1 + i] = sum_j seed[n - 1 + i - j] * data[j]
        if seed.size * n <= _DIRECT_CONVOLVE_LIMIT:
            full = np.convolve(seed, data)
        else:
            full = np.rint(fftconvolve(seed.astype(float), data.astype(float))).astype(np.int64)
        out = full[n - 1: n - 1 + out_len] % 2
        return BitStream(out.astype(np.uint8), stream.source_tag)
