from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Mapping

import numpy as np

from diqrng.errors import ConfigError, DomainError, FormatError, IntegrityError

FORMAT_VERSION = 1
AMPLITUDE_TOLERANCE = 1e-12

CLASSICAL_BOUND = 0.75
IDEAL_WIN = math.cos(math.pi / 8) ** 2
TSIRELSON = 2 * math.sqrt(2)


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def format_outcome(index: int, n_qubits: int) -> str:
    """Bitstring for a basis index; qubit 0 is the leftmost character."""
    return format(index, f"0{n_qubits}b")


def check_bit(name: str, value: Any) -> int:
    if value not in (0, 1) or isinstance(value, float):
        raise DomainError(f"{name} must be a bit, got {value!r}")
    return int(value)


# ---------------------------------------------------------------------------
# Simulator types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes, complex)
        if amps.shape != (2 ** self.n_qubits,):
            raise DomainError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.size}"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > AMPLITUDE_TOLERANCE:
            raise DomainError(f"state is not normalized (norm {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.n_qubits == other.n_qubits and np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None


class GateKind(str, Enum):
    H = "H"
    X = "X"
    CNOT = "CNOT"
    RY = "Ry"


_SQRT2_INV = 1 / math.sqrt(2)
_FIXED_MATRICES = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    # basis order |control target>
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != self.arity:
            raise DomainError(f"{self.kind.value} acts on {self.arity} qubit(s), got targets {self.targets}")

    @classmethod
    def h(cls, qubit: int) -> Gate:
        return cls(GateKind.H, (qubit,))

    @classmethod
    def x(cls, qubit: int) -> Gate:
        return cls(GateKind.X, (qubit,))

    @classmethod
    def cnot(cls, control: int, target: int) -> Gate:
        return cls(GateKind.CNOT, (control, target))

    @classmethod
    def ry(cls, theta: float, qubit: int) -> Gate:
        return cls(GateKind.RY, (qubit,), float(theta))

    @property
    def arity(self) -> int:
        return 2 if self.kind is GateKind.CNOT else 1

    def matrix(self) -> np.ndarray:
        if self.kind is GateKind.RY:
            c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        return _FIXED_MATRICES[self.kind]


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    n_qubits: int
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs, float)
        if probs.shape != (2 ** self.n_qubits,):
            raise DomainError(f"expected {2 ** self.n_qubits} probabilities, got {probs.size}")
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > AMPLITUDE_TOLERANCE:
            raise DomainError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

    def probability(self, bitstring: str) -> float:
        return float(self.probs[int(bitstring, 2)])

    def as_dict(self) -> dict[str, float]:
        return {format_outcome(i, self.n_qubits): float(p) for i, p in enumerate(self.probs)}

    def __eq__(self, other):
        if not isinstance(other, OutcomeDistribution):
            return NotImplemented
        return self.n_qubits == other.n_qubits and np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True)
class CountsRecord:
    """Execution result: outcome counts plus optional per-shot memory."""

    shots: int
    counts: Mapping[str, int]
    memory: tuple[str, ...] | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(sorted(self.counts.items())))
        if self.memory is not None:
            object.__setattr__(self, "memory", tuple(self.memory))
        object.__setattr__(self, "metadata", dict(self.metadata))
        self.validate()

    def validate(self):
        if not isinstance(self.shots, int) or self.shots < 1:
            raise FormatError(f"shots must be a positive integer, got {self.shots!r}")
        widths = {len(key) for key in self.counts}
        if len(widths) > 1 or any(set(key) - {"0", "1"} or not key for key in self.counts):
            raise FormatError("count keys must be bitstrings of one common length")
        if any(not isinstance(v, int) or v < 0 for v in self.counts.values()):
            raise FormatError("count values must be non-negative integers")
        total = sum(self.counts.values())
        if total != self.shots:
            raise IntegrityError(f"counts sum to {total} but shots is {self.shots}")
        if self.memory is not None:
            if len(self.memory) != self.shots:
                raise IntegrityError(f"memory holds {len(self.memory)} outcomes for {self.shots} shots")
            tally: dict[str, int] = {}
            for outcome in self.memory:
                tally[outcome] = tally.get(outcome, 0) + 1
            if tally != {k: v for k, v in self.counts.items() if v}:
                raise IntegrityError("memory does not reproduce counts")

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.counts)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "shots": self.shots,
            "counts": dict(self.counts),
            "memory": list(self.memory) if self.memory is not None else None,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Any) -> CountsRecord:
        if not isinstance(data, dict):
            raise FormatError("counts record must be a JSON object")
        missing = {"shots", "counts"} - data.keys()
        if missing:
            raise FormatError(f"counts record is missing {sorted(missing)}")
        if not isinstance(data["counts"], dict) or not data["counts"]:
            raise FormatError("counts must be a non-empty object")
        memory = data.get("memory")
        if memory is not None and not isinstance(memory, list):
            raise FormatError("memory must be a list of bitstrings or null")
        metadata = data.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise FormatError("metadata must be an object")
        return cls(shots=data["shots"], counts=data["counts"], memory=memory, metadata=metadata)


# ---------------------------------------------------------------------------
# Game types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GameSetting:
    x: int
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", check_bit("x", self.x))
        object.__setattr__(self, "y", check_bit("y", self.y))

    @property
    def product(self) -> int:
        return self.x & self.y


ALL_SETTINGS = tuple(GameSetting(x, y) for x, y in product((0, 1), repeat=2))


@dataclass(frozen=True)
class QuantumStrategy:
    """Planar measurement angles; the offset rotates all four bases together."""

    alice_angles: tuple[float, float] = (0.0, math.pi / 4)
    bob_angles: tuple[float, float] = (math.pi / 8, -math.pi / 8)
    global_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alice_angles", tuple(float(a) for a in self.alice_angles))
        object.__setattr__(self, "bob_angles", tuple(float(b) for b in self.bob_angles))
        if len(self.alice_angles) != 2 or len(self.bob_angles) != 2:
            raise DomainError("each party needs exactly two basis angles")

    def angle_a(self, x: int) -> float:
        return self.alice_angles[x] + self.global_offset

    def angle_b(self, y: int) -> float:
        return self.bob_angles[y] + self.global_offset

    def to_dict(self) -> dict[str, Any]:
        return {
            "alice_angles": list(self.alice_angles),
            "bob_angles": list(self.bob_angles),
            "global_offset": self.global_offset,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> QuantumStrategy:
        default = cls()
        return cls(
            alice_angles=tuple(data.get("alice_angles", default.alice_angles)),
            bob_angles=tuple(data.get("bob_angles", default.bob_angles)),
            global_offset=float(data.get("global_offset", 0.0)),
        )


@dataclass(frozen=True)
class ClassicalStrategy:
    """Deterministic responses (a(0), a(1), b(0), b(1))."""

    table: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.table) != 4:
            raise DomainError("a classical strategy table has four entries")
        object.__setattr__(self, "table", tuple(check_bit("table entry", v) for v in self.table))

    @classmethod
    def all(cls) -> tuple[ClassicalStrategy, ...]:
        return tuple(cls(table) for table in product((0, 1), repeat=4))

    def respond(self, setting: GameSetting) -> tuple[int, int]:
        return self.table[setting.x], self.table[2 + setting.y]


@dataclass(frozen=True)
class RoundResult:
    setting: GameSetting
    shots: int
    same_count: int
    diff_count: int
    win_fraction: float
    counts: CountsRecord | None = None
    round_index: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise IntegrityError(f"round {self.round_index}: a round needs at least one shot")
        if self.same_count + self.diff_count != self.shots:
            raise IntegrityError(
                f"round {self.round_index}: same {self.same_count} + diff {self.diff_count} != shots {self.shots}"
            )
        if self.win_fraction != self.expected_win_fraction():
            raise IntegrityError(f"round {self.round_index}: win fraction does not match the tallies")

    def expected_win_fraction(self) -> float:
        winning = self.diff_count if self.setting.product else self.same_count
        return winning / self.shots

    @property
    def wins(self) -> int:
        return self.diff_count if self.setting.product else self.same_count

    @classmethod
    def from_counts(cls, setting: GameSetting, counts: CountsRecord, round_index: int = 0) -> RoundResult:
        same = counts.counts.get("00", 0) + counts.counts.get("11", 0)
        diff = counts.shots - same
        # 'same_prob' is the win fraction when x.y = 0, 'dif_prob' otherwise
        win = (diff if setting.product else same) / counts.shots
        return cls(setting, counts.shots, same, diff, win, counts, round_index)

    def to_row(self) -> dict[str, Any]:
        return {
            "round_index": self.round_index,
            "x": self.setting.x,
            "y": self.setting.y,
            "same_count": self.same_count,
            "diff_count": self.diff_count,
            "win_fraction": self.win_fraction,
        }


@dataclass(frozen=True)
class ExperimentResult:
    rounds: tuple[RoundResult, ...]
    p_min: float
    p_avg: float
    p_max: float
    sigma: float

    @classmethod
    def from_rounds(cls, rounds) -> ExperimentResult:
        ordered = tuple(sorted(rounds, key=lambda r: r.round_index))
        if not ordered:
            return cls((), 0.0, 0.0, 0.0, 0.0)
        fractions = np.array([r.win_fraction for r in ordered])
        # population standard deviation over round win fractions
        p_avg = float(fractions.mean())
        p_min, p_max = float(fractions.min()), float(fractions.max())
        p_avg = min(max(p_avg, p_min), p_max)
        return cls(ordered, p_min, p_avg, p_max, float(fractions.std(ddof=0)))

    @property
    def win_fractions(self) -> np.ndarray:
        return np.array([r.win_fraction for r in self.rounds], dtype=float)

    @property
    def total_shots(self) -> int:
        return sum(r.shots for r in self.rounds)

    @property
    def total_wins(self) -> int:
        return sum(r.wins for r in self.rounds)

    def pooled_win(self) -> float:
        total = self.total_shots
        return self.total_wins / total if total else 0.0

    def per_setting(self) -> dict[str, dict[str, Any]]:
        """Pooled win fraction for each (x, y) input pair."""
        table = {}
        for setting in ALL_SETTINGS:
            rows = [r for r in self.rounds if r.setting == setting]
            shots = sum(r.shots for r in rows)
            wins = sum(r.wins for r in rows)
            table[f"{setting.x}{setting.y}"] = {
                "rounds": len(rows),
                "shots": shots,
                "win_fraction": wins / shots if shots else None,
            }
        return table


# ---------------------------------------------------------------------------
# Certification types
# ---------------------------------------------------------------------------

class Verdict(str, Enum):
    CERTIFIED = "CERTIFIED"
    NOT_VIOLATED = "NOT_VIOLATED"
    INSUFFICIENT_DATA = "INSUFFICIENT_DATA"


@dataclass(frozen=True)
class Certificate:
    p_win: float
    n_total_shots: int
    s_value: float
    z_score: float
    min_entropy_rate: float
    verdict: Verdict
    threshold_z: float = 5.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "p_win": self.p_win,
            "n": self.n_total_shots,
            "s": self.s_value,
            "z": self.z_score,
            "min_entropy_rate": self.min_entropy_rate,
            "verdict": self.verdict.value,
            "threshold_z": self.threshold_z,
            "format_version": FORMAT_VERSION,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Certificate:
        try:
            return cls(
                p_win=float(data["p_win"]),
                n_total_shots=int(data["n"]),
                s_value=float(data["s"]),
                z_score=float(data["z"]),
                min_entropy_rate=float(data["min_entropy_rate"]),
                verdict=Verdict(data["verdict"]),
                threshold_z=float(data["threshold_z"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid certificate: {e}") from e


# ---------------------------------------------------------------------------
# Randomness types
# ---------------------------------------------------------------------------

SOURCE_TAGS = ("hadamard", "parity", "chsh", "external")


@dataclass(frozen=True, eq=False)
class BitStream:
    bits: np.ndarray
    source_tag: str = "external"

    def __post_init__(self):
        bits = _frozen(self.bits, np.uint8).reshape(-1)
        if np.any(bits > 1):
            raise FormatError("bit streams hold only 0 and 1")
        if self.source_tag not in SOURCE_TAGS:
            raise DomainError(f"unknown source tag {self.source_tag!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_text(cls, text: str, source_tag: str = "external") -> BitStream:
        cleaned = "".join(text.split())
        if set(cleaned) - {"0", "1"}:
            raise FormatError("text bit streams may contain only '0', '1' and whitespace")
        return cls(np.frombuffer(cleaned.encode("ascii"), dtype=np.uint8) - ord("0"), source_tag)

    def to_text(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.source_tag == other.source_tag and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # keep pytest from collecting this class

    test_name: str
    statistic: float
    p_value: float
    passed: bool

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")
        if self.passed != (self.p_value >= 0.01):
            raise DomainError("pass flag must agree with p >= 0.01")

    def to_dict(self) -> dict[str, Any]:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# Harness types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoopholeConfig:
    independent_inputs: bool = True
    fresh_state_per_round: bool = True
    detection_efficiency: float = 1.0
    report_all_events: bool = True

    def __post_init__(self):
        if not 0.0 < self.detection_efficiency <= 1.0:
            raise ConfigError(f"detection efficiency must lie in (0, 1], got {self.detection_efficiency}")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    avg_win_target: float
    fitted_lambda: float
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "avg_win_target": self.avg_win_target,
            "fitted_lambda": self.fitted_lambda,
            "metadata": dict(self.metadata),
        }


INPUT_MODES = ("seeded", "hadamard", "replay")
PARTIES = ("alice", "bob")


@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int = 100
    shots: int = 1000
    lam: float | None = 0.0
    master_seed: int = 0
    strategy: QuantumStrategy = field(default_factory=QuantumStrategy)
    input_mode: str = "seeded"
    seed_a: int | None = None
    seed_b: int | None = None
    replay_files: tuple[str, ...] = ()
    profile: str | None = None
    workers: int = 1
    party: str = "alice"

    def __post_init__(self):
        object.__setattr__(self, "replay_files", tuple(str(p) for p in self.replay_files))
        if self.rounds < 1 or self.shots < 1:
            raise ConfigError("rounds and shots must be positive")
        if self.lam is not None and not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.lam is None and self.profile is None:
            raise ConfigError("either lambda or a device profile is required")
        if self.master_seed < 0:
            raise ConfigError("master seed must be non-negative")
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"input mode must be one of {INPUT_MODES}")
        if self.party not in PARTIES:
            raise ConfigError(f"party must be one of {PARTIES}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        """Build from the experiment JSON layout (see README)."""
        if not isinstance(data, Mapping):
            raise FormatError("experiment config must be a JSON object")
        inputs = data.get("inputs") or {}
        strategy = data.get("strategy") or {}
        for key, value in (("inputs", inputs), ("strategy", strategy)):
            if not isinstance(value, Mapping):
                raise FormatError(f"experiment config: '{key}' must be a JSON object")
        try:
            return cls(
                rounds=int(data.get("rounds", 100)),
                shots=int(data.get("shots", 1000)),
                lam=None if data.get("lambda") is None and data.get("profile") else float(data.get("lambda", 0.0)),
                master_seed=int(data.get("master_seed", 0)),
                strategy=QuantumStrategy.from_dict(strategy),
                input_mode=inputs.get("mode", "seeded"),
                seed_a=inputs.get("seed_a"),
                seed_b=inputs.get("seed_b"),
                replay_files=tuple(inputs.get("files", ())),
                profile=data.get("profile"),
                workers=int(data.get("workers", 1)),
                party=data.get("party", "alice"),
            )
        except (TypeError, ValueError) as e:
            raise FormatError(f"invalid experiment config: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        return {
            "rounds": self.rounds,
            "shots": self.shots,
            "lambda": self.lam,
            "master_seed": self.master_seed,
            "strategy": self.strategy.to_dict(),
            "inputs": {
                "mode": self.input_mode,
                "seed_a": self.seed_a,
                "seed_b": self.seed_b,
                "files": list(self.replay_files),
            },
            "profile": self.profile,
            "workers": self.workers,
            "party": self.party,
        }
