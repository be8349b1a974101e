"""Pure statevector simulator for the handful of gates the protocols need.

Qubit 0 is the most significant bit of a basis index, so it is the leftmost
character of every outcome bitstring.
"""
from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from diqrng.errors import CapacityError, DomainError, QubitIndexError
from diqrng.models import CountsRecord, Gate, OutcomeDistribution, StateVector, format_outcome
from diqrng.rng import GENERATOR_NAME, make_rng

logger = logging.getLogger(__name__)


class SimulatorService:
    def __init__(self, max_qubits=12):
        self.max_qubits = max_qubits

    def new_state(self, n_qubits: int) -> StateVector:
        """|0...0> on ``n_qubits`` qubits."""
        if n_qubits < 1 or n_qubits > self.max_qubits:
            raise CapacityError(f"qubit count must lie in 1..{self.max_qubits}, got {n_qubits}")
        amplitudes = np.zeros(2 ** n_qubits, dtype=complex)
        amplitudes[0] = 1.0
        return StateVector(n_qubits, amplitudes)

    def apply_gate(self, state: StateVector, gate: Gate) -> StateVector:
        n = state.n_qubits
        targets = gate.targets
        if len(set(targets)) != len(targets):
            raise QubitIndexError(f"duplicate targets {targets}")
        if any(not 0 <= t < n for t in targets):
            raise QubitIndexError(f"targets {targets} out of range for {n} qubits")

        k = len(targets)
        tensor = state.amplitudes.reshape([2] * n)
        operator = gate.matrix().reshape([2] * (2 * k))
        # contract the operator's input axes with the target axes; outputs land first
        moved = np.tensordot(operator, tensor, axes=(list(range(k, 2 * k)), list(targets)))
        result = np.moveaxis(moved, list(range(k)), list(targets))
        return StateVector(n, result.reshape(-1))

    def run_circuit(self, gates: Iterable[Gate], n_qubits: int) -> StateVector:
        state = self.new_state(n_qubits)
        for gate in gates:
            state = self.apply_gate(state, gate)
        return state

    def probabilities(self, state: StateVector) -> OutcomeDistribution:
        probs = np.abs(state.amplitudes) ** 2
        return OutcomeDistribution(state.n_qubits, probs)

    def depolarize(self, dist: OutcomeDistribution, lam: float) -> OutcomeDistribution:
        """Mix the distribution toward uniform with weight ``lam``."""
        if not 0.0 <= lam <= 1.0:
            raise DomainError(f"depolarizing weight must lie in [0, 1], got {lam}")
        if lam == 0.0:
            return dist
        uniform = 1.0 / dist.probs.size
        return OutcomeDistribution(dist.n_qubits, (1.0 - lam) * dist.probs + lam * uniform)

    def sample_indices(self, dist: OutcomeDistribution, shots: int, rng_seed) -> np.ndarray:
        """Basis indices of ``shots`` independent draws, in shot order."""
        if shots < 1:
            raise DomainError(f"shots must be positive, got {shots}")
        cumulative = np.cumsum(dist.probs)
        cumulative /= cumulative[-1]
        draws = make_rng(rng_seed).random(shots)
        return np.searchsorted(cumulative, draws, side="right")

    def sample(self, dist: OutcomeDistribution, shots: int, rng_seed, memory=True) -> CountsRecord:
        indices = self.sample_indices(dist, shots, rng_seed)
        n = dist.n_qubits
        tallies = np.bincount(indices, minlength=2 ** n)
        labels = [format_outcome(i, n) for i in range(2 ** n)]
        counts = {labels[i]: int(c) for i, c in enumerate(tallies) if c}
        logger.debug("sampled %d shots with seed %s: %s", shots, rng_seed, counts)
        return CountsRecord(
            shots=shots,
            counts=counts,
            memory=tuple(labels[i] for i in indices) if memory else None,
            metadata={"n_qubits": n, "seed": int(rng_seed), "generator": GENERATOR_NAME},
        )
