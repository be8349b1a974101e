"""The CHSH game: referee, strategies, round execution and aggregation."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from diqrng.errors import DomainError, FreedomOfChoiceError
from diqrng.models import (
    ALL_SETTINGS,
    ClassicalStrategy,
    ExperimentResult,
    Gate,
    GameSetting,
    QuantumStrategy,
    RoundResult,
    check_bit,
)
from diqrng.rng import STREAM_ALICE_INPUT, STREAM_BOB_INPUT, STREAM_ROUND, derive_seed, make_rng

logger = logging.getLogger(__name__)


class SeededBitSource:
    """Referee bits from a seeded generator stream."""

    def __init__(self, seed):
        self.seed = seed
        self._rng = make_rng(seed)

    @property
    def identity(self):
        return ("seeded", self.seed)

    def take(self, count):
        return self._rng.integers(0, 2, size=count, dtype=np.uint8)


class HadamardBitSource:
    """Referee bits measured from a simulated one-qubit Hadamard QRNG."""

    def __init__(self, simulator, seed):
        self.seed = seed
        self._simulator = simulator
        self._dist = simulator.probabilities(simulator.run_circuit([Gate.h(0)], 1))
        self._calls = 0

    @property
    def identity(self):
        return ("hadamard", self.seed)

    def take(self, count):
        job_seed = derive_seed(self.seed, self._calls)
        self._calls += 1
        return self._simulator.sample_indices(self._dist, count, job_seed).astype(np.uint8)


class GameService:
    def __init__(self, simulator):
        self.simulator = simulator

    # -- referee -------------------------------------------------------------

    def referee_inputs(self, rounds, source_a, source_b, require_independent=True):
        """Draw ``rounds`` settings: x only from source_a, y only from source_b."""
        if rounds < 1:
            raise DomainError(f"rounds must be positive, got {rounds}")
        if require_independent and (source_a is source_b or source_a.identity == source_b.identity):
            raise FreedomOfChoiceError(
                f"referee inputs need two distinct sources, both are {source_a.identity}"
            )
        xs = source_a.take(rounds)
        ys = source_b.take(rounds)
        return [GameSetting(int(x), int(y)) for x, y in zip(xs, ys)]

    def default_sources(self, master_seed):
        return (
            SeededBitSource(derive_seed(master_seed, STREAM_ALICE_INPUT)),
            SeededBitSource(derive_seed(master_seed, STREAM_BOB_INPUT)),
        )

    # -- quantum strategy ----------------------------------------------------

    def compile_round(self, setting: GameSetting, strategy: QuantumStrategy):
        """Bell pair, then each party rotates by twice its planar basis angle."""
        gates = [Gate.h(0), Gate.cnot(0, 1)]
        alpha = 2 * strategy.angle_a(setting.x)
        beta = 2 * strategy.angle_b(setting.y)
        if alpha != 0.0:
            gates.append(Gate.ry(alpha, 0))
        if beta != 0.0:
            gates.append(Gate.ry(beta, 1))
        return tuple(gates)

    def win_condition(self, setting: GameSetting, a, b) -> bool:
        return (check_bit("a", a) ^ check_bit("b", b)) == setting.product

    def round_distribution(self, setting, strategy, lam=0.0):
        state = self.simulator.run_circuit(self.compile_round(setting, strategy), 2)
        return self.simulator.depolarize(self.simulator.probabilities(state), lam)

    def analytic_win_probability(self, setting, strategy, lam=0.0) -> float:
        dist = self.round_distribution(setting, strategy, lam)
        return float(sum(
            p for index, p in enumerate(dist.probs)
            if self.win_condition(setting, index >> 1, index & 1)
        ))

    def play_round(self, setting, strategy, shots, lam, rng_seed, round_index=0) -> RoundResult:
        dist = self.round_distribution(setting, strategy, lam)
        counts = self.simulator.sample(dist, shots, rng_seed)
        result = RoundResult.from_counts(setting, counts, round_index)
        logger.debug(
            "round %d (x=%d, y=%d): same=%d diff=%d win=%.4f",
            round_index, setting.x, setting.y, result.same_count, result.diff_count, result.win_fraction,
        )
        return result

    # -- classical strategies ------------------------------------------------

    def play_classical_round(self, setting: GameSetting, strategy: ClassicalStrategy) -> bool:
        a, b = strategy.respond(setting)
        return self.win_condition(setting, a, b)

    def classical_value(self, strategy: ClassicalStrategy) -> Fraction:
        """Exact win probability under uniformly random settings."""
        wins = sum(self.play_classical_round(s, strategy) for s in ALL_SETTINGS)
        return Fraction(wins, len(ALL_SETTINGS))

    def best_classical_value(self) -> Fraction:
        return max(self.classical_value(s) for s in ClassicalStrategy.all())

    # -- experiments ---------------------------------------------------------

    def round_seed(self, master_seed, round_index) -> int:
        return derive_seed(master_seed, STREAM_ROUND, round_index)

    def run_experiment(self, rounds, shots, strategy, lam, master_seed,
                       source_a=None, source_b=None, workers=1,
                       require_independent=True, round_seeds=None) -> ExperimentResult:
        """Play ``rounds`` independent rounds and summarise their win fractions."""
        if rounds < 1:
            raise DomainError(f"rounds must be positive, got {rounds}")
        if source_a is None or source_b is None:
            source_a, source_b = self.default_sources(master_seed)
        settings = self.referee_inputs(rounds, source_a, source_b, require_independent)
        if round_seeds is None:
            round_seeds = [self.round_seed(master_seed, i) for i in range(rounds)]

        logger.info("playing %d rounds x %d shots (lambda=%.5f, seed=%s)", rounds, shots, lam, master_seed)

        def play(index):
            return self.play_round(settings[index], strategy, shots, lam, round_seeds[index], index)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(play, range(rounds)))
        else:
            results = [play(i) for i in range(rounds)]
        return ExperimentResult.from_rounds(results)
