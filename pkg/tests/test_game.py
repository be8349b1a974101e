"""
Tests for the CHSH game.

Tests:
    - Referee inputs: reproducibility, balance, independence enforcement
    - Basis-to-gate compilation and the win condition
    - Quantum rounds against cos^2(pi/8), classical ceiling of 3/4
    - Experiment aggregation
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from diqrng.errors import DomainError, FreedomOfChoiceError, IntegrityError
from diqrng.models import (
    ALL_SETTINGS,
    IDEAL_WIN,
    ClassicalStrategy,
    CountsRecord,
    ExperimentResult,
    GameSetting,
    Gate,
    QuantumStrategy,
    RoundResult,
)
from diqrng.services.game_service import HadamardBitSource, SeededBitSource


# =============================================================================
# Referee
# =============================================================================

def test_referee_inputs_reproducible(game):
    first = game.referee_inputs(4, SeededBitSource(1), SeededBitSource(2))
    second = game.referee_inputs(4, SeededBitSource(1), SeededBitSource(2))
    assert len(first) == 4
    assert first == second


def test_referee_inputs_balanced_and_uncorrelated(game):
    settings = game.referee_inputs(10_000, SeededBitSource(17), SeededBitSource(18))
    x = np.array([s.x for s in settings])
    y = np.array([s.y for s in settings])
    assert x.mean() == pytest.approx(0.5, abs=0.02)
    assert y.mean() == pytest.approx(0.5, abs=0.02)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03


def test_referee_rejects_shared_seed(game):
    with pytest.raises(FreedomOfChoiceError):
        game.referee_inputs(4, SeededBitSource(5), SeededBitSource(5))


def test_referee_rejects_same_object(game):
    source = SeededBitSource(5)
    with pytest.raises(FreedomOfChoiceError):
        game.referee_inputs(4, source, source)


def test_referee_compares_source_identity(game, simulator):
    with pytest.raises(FreedomOfChoiceError):
        game.referee_inputs(4, HadamardBitSource(simulator, 9), HadamardBitSource(simulator, 9))
    # same seed, different kinds of generator
    assert len(game.referee_inputs(4, SeededBitSource(9), HadamardBitSource(simulator, 9))) == 4


def test_shared_source_allowed_when_not_required(game):
    source = SeededBitSource(5)
    assert len(game.referee_inputs(4, source, source, require_independent=False)) == 4


def test_hadamard_source_is_reproducible(simulator):
    a = HadamardBitSource(simulator, 8).take(256)
    b = HadamardBitSource(simulator, 8).take(256)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0, 1}


# =============================================================================
# Compilation and win condition
# =============================================================================

def _rotations(gates):
    return {g.targets[0]: g.theta for g in gates if g.kind.value == "Ry"}


def test_compile_prepares_bell_pair_first(game):
    gates = game.compile_round(GameSetting(0, 0), QuantumStrategy())
    assert gates[:2] == (Gate.h(0), Gate.cnot(0, 1))


@pytest.mark.parametrize("setting, expected", [
    (GameSetting(1, 0), {0: math.pi / 2, 1: math.pi / 4}),
    (GameSetting(0, 0), {1: math.pi / 4}),
    (GameSetting(1, 1), {0: math.pi / 2, 1: -math.pi / 4}),
    (GameSetting(0, 1), {1: -math.pi / 4}),
])
def test_compile_rotations(game, setting, expected):
    rotations = _rotations(game.compile_round(setting, QuantumStrategy()))
    assert rotations.keys() == expected.keys()
    for qubit, theta in expected.items():
        assert rotations[qubit] == pytest.approx(theta)


@pytest.mark.parametrize("setting, a, b, won", [
    (GameSetting(0, 0), 0, 0, True),
    (GameSetting(1, 1), 0, 1, True),
    (GameSetting(1, 1), 1, 1, False),
    (GameSetting(0, 1), 1, 0, False),
])
def test_win_condition(game, setting, a, b, won):
    assert game.win_condition(setting, a, b) is won


def test_setting_rejects_non_bits():
    with pytest.raises(DomainError):
        GameSetting(2, 0)


# =============================================================================
# Quantum strategy
# =============================================================================

@pytest.mark.parametrize("setting", ALL_SETTINGS)
def test_ideal_analytic_win_probability(game, setting):
    assert game.analytic_win_probability(setting, QuantumStrategy()) == pytest.approx(IDEAL_WIN, abs=1e-12)


def test_anti_correlated_setting(game):
    dist = game.round_distribution(GameSetting(1, 1), QuantumStrategy())
    p_diff = dist.probability("01") + dist.probability("10")
    assert p_diff == pytest.approx(1 - math.cos(3 * math.pi / 8) ** 2, abs=1e-9)
    assert p_diff == pytest.approx(0.853553, abs=1e-6)


def test_rotation_invariance(game):
    rng = np.random.default_rng(42)
    for offset in rng.uniform(-math.pi, math.pi, size=20):
        rotated = QuantumStrategy(global_offset=float(offset))
        for setting in ALL_SETTINGS:
            assert game.analytic_win_probability(setting, rotated) == pytest.approx(
                game.analytic_win_probability(setting, QuantumStrategy()), abs=1e-9)


def test_win_probability_decreases_with_noise(game):
    lams = np.linspace(0, 1, 21)
    values = [game.analytic_win_probability(GameSetting(0, 1), QuantumStrategy(), lam) for lam in lams]
    assert values[0] == pytest.approx(IDEAL_WIN)
    assert values[-1] == pytest.approx(0.5)
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("setting", ALL_SETTINGS)
def test_play_round_ideal(game, setting):
    result = game.play_round(setting, QuantumStrategy(), 100_000, 0.0, rng_seed=31)
    assert result.win_fraction == pytest.approx(IDEAL_WIN, abs=0.004)
    assert result.same_count + result.diff_count == result.shots


def test_play_round_fully_depolarized(game):
    result = game.play_round(GameSetting(1, 0), QuantumStrategy(), 100_000, 1.0, rng_seed=32)
    assert result.win_fraction == pytest.approx(0.5, abs=0.006)


def test_round_bookkeeping_is_exact(game):
    result = game.play_round(GameSetting(1, 1), QuantumStrategy(), 1000, 0.1, rng_seed=4)
    assert result.win_fraction == result.diff_count / result.shots
    assert RoundResult.from_counts(result.setting, result.counts).win_fraction == result.win_fraction


def test_round_result_rejects_bad_tallies():
    with pytest.raises(IntegrityError):
        RoundResult(GameSetting(0, 0), 10, 6, 3, 0.6)
    with pytest.raises(IntegrityError):
        RoundResult(GameSetting(0, 0), 10, 6, 4, 0.4)


# =============================================================================
# Classical strategies
# =============================================================================

def test_sixteen_classical_strategies():
    assert len(set(ClassicalStrategy.all())) == 16


def test_play_classical_round(game):
    always_zero = ClassicalStrategy((0, 0, 0, 0))
    assert game.play_classical_round(GameSetting(0, 0), always_zero)
    assert not game.play_classical_round(GameSetting(1, 1), always_zero)


def test_classical_ceiling_is_three_quarters(game):
    assert game.best_classical_value() == Fraction(3, 4)


def test_mixed_classical_strategies_stay_below_ceiling(game):
    values = np.array([float(game.classical_value(s)) for s in ClassicalStrategy.all()])
    rng = np.random.default_rng(7)
    for _ in range(1000):
        weights = rng.dirichlet(np.ones(16))
        assert float(weights @ values) <= 0.75 + 1e-12


# =============================================================================
# Experiments
# =============================================================================

def test_ideal_experiment(game):
    result = game.run_experiment(100, 1000, QuantumStrategy(), 0.0, master_seed=7)
    assert result.p_avg == pytest.approx(0.8536, abs=0.005)
    assert result.sigma == pytest.approx(0.011, abs=0.004)
    assert result.p_min <= result.p_avg <= result.p_max


def test_noisy_experiment_matches_device_average(game, harness):
    lam = harness.fit_lambda(0.79622)
    result = game.run_experiment(100, 1000, QuantumStrategy(), lam, master_seed=3)
    assert result.p_avg == pytest.approx(0.79622, abs=0.01)


def test_single_round_experiment(game):
    result = game.run_experiment(1, 200, QuantumStrategy(), 0.0, master_seed=1)
    assert result.p_min == result.p_avg == result.p_max
    assert result.sigma == 0.0


def test_experiment_independent_of_worker_count(game):
    serial = game.run_experiment(12, 300, QuantumStrategy(), 0.05, master_seed=9)
    threaded = game.run_experiment(12, 300, QuantumStrategy(), 0.05, master_seed=9, workers=4)
    assert [r.to_row() for r in serial.rounds] == [r.to_row() for r in threaded.rounds]


def test_experiment_rejects_zero_rounds(game):
    with pytest.raises(DomainError):
        game.run_experiment(0, 100, QuantumStrategy(), 0.0, master_seed=1)


def test_per_setting_breakdown():
    rounds = [
        RoundResult.from_counts(GameSetting(0, 0), CountsRecord(4, {"00": 3, "01": 1}), 0),
        RoundResult.from_counts(GameSetting(1, 1), CountsRecord(4, {"01": 2, "11": 2}), 1),
    ]
    table = ExperimentResult.from_rounds(rounds).per_setting()
    assert table["00"] == {"rounds": 1, "shots": 4, "win_fraction": 0.75}
    assert table["11"] == {"rounds": 1, "shots": 4, "win_fraction": 0.5}
    assert table["01"]["win_fraction"] is None
