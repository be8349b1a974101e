"""Certified experiment orchestration with explicit loophole controls."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from diqrng.errors import ConfigError, FormatError, SourceDepletedError, UnfittableError
from diqrng.models import (
    IDEAL_WIN,
    BitStream,
    Certificate,
    CountsRecord,
    DeviceProfile,
    ExperimentConfig,
    ExperimentResult,
    LoopholeConfig,
    RoundResult,
)
from diqrng.rng import STREAM_ALICE_INPUT, STREAM_BOB_INPUT, STREAM_DETECTION, STREAM_SHARED, derive_seed, make_rng
from diqrng.serialization import read_json
from diqrng.services.game_service import HadamardBitSource, SeededBitSource

logger = logging.getLogger(__name__)

PROFILES_PATH = Path(__file__).resolve().parent.parent / "data" / "devices.json"


class ReplayBitSource:
    """Bits replayed from recorded CountsRecord files, shot-major, never recycled."""

    def __init__(self, records, paths):
        self.paths = tuple(paths)
        self.seed = "|".join(self.paths)
        joined = "".join("".join(record.memory) for record in records).encode("ascii")
        self._bits = np.frombuffer(joined, dtype=np.uint8) - ord("0")
        self._position = 0

    @property
    def identity(self):
        return ("replay", self.seed)

    @property
    def remaining(self):
        return self._bits.size - self._position

    def take(self, count):
        if count > self.remaining:
            raise SourceDepletedError(
                f"replay source {self.seed} has {self.remaining} bits left, {count} requested"
            )
        chunk = self._bits[self._position:self._position + count]
        self._position += count
        return chunk


@dataclass
class CertifiedRun:
    experiment: ExperimentResult
    certificate: Certificate
    stream: BitStream
    raw_experiment: ExperimentResult
    lam: float
    loopholes: LoopholeConfig
    detected_shots: int
    total_shots: int
    post_selected_win: float
    all_event_win: float
    notes: dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.experiment, self.certificate, self.stream))


class HarnessService:
    def __init__(self, game, certifier, simulator, workers=1, profiles_path=None):
        self.game = game
        self.certifier = certifier
        self.simulator = simulator
        self.workers = workers
        self.profiles_path = Path(profiles_path) if profiles_path else PROFILES_PATH

    # -- noise model ---------------------------------------------------------

    def fit_lambda(self, avg_win_target):
        """Invert (1 - lam) * cos^2(pi/8) + lam / 2 = target for lam."""
        if not 0.5 <= avg_win_target <= IDEAL_WIN:
            raise UnfittableError(
                f"target {avg_win_target} is outside [0.5, {IDEAL_WIN:.6f}] reachable by depolarizing noise"
            )
        lam = (IDEAL_WIN - avg_win_target) / (IDEAL_WIN - 0.5)
        return min(max(lam, 0.0), 1.0)

    def load_profiles(self):
        rows = read_json(self.profiles_path)
        if not isinstance(rows, dict) or not isinstance(rows.get("devices"), list):
            raise FormatError(f"{self.profiles_path} must hold a 'devices' array")
        profiles = {}
        for row in rows["devices"]:
            try:
                name, target = row["name"], float(row["avg_win_target"])
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"bad device row {row!r}") from e
            metadata = {k: v for k, v in row.items() if k not in ("name", "avg_win_target")}
            profiles[name] = DeviceProfile(name, target, self.fit_lambda(target), metadata)
        return profiles

    def profile(self, name):
        profiles = self.load_profiles()
        if name not in profiles:
            raise ConfigError(f"unknown device profile {name!r}; known: {sorted(profiles)}")
        return profiles[name]

    def resolve_lambda(self, config: ExperimentConfig):
        if config.profile is None:
            return config.lam
        fitted = self.profile(config.profile).fitted_lambda
        if config.lam is not None and config.lam != fitted:
            raise ConfigError("give either a lambda or a device profile, not both")
        return fitted

    # -- replay --------------------------------------------------------------

    def replay_backend(self, files):
        """Source replaying the per-shot memory of recorded CountsRecord files."""
        if not files:
            raise ConfigError("replay needs at least one counts file")
        records, paths = [], []
        for path in files:
            record = CountsRecord.from_dict(read_json(path))
            if record.memory is None:
                raise FormatError(f"{path} has no per-shot memory; replay needs shot order")
            records.append(record)
            paths.append(str(Path(path).resolve()))
        return ReplayBitSource(records, paths)

    # -- configuration -------------------------------------------------------

    def build_sources(self, config: ExperimentConfig, loopholes: LoopholeConfig):
        """Referee sources for x and y, and whether they must be independent."""
        seed_a = config.seed_a if config.seed_a is not None else derive_seed(config.master_seed, STREAM_ALICE_INPUT)
        seed_b = config.seed_b if config.seed_b is not None else derive_seed(config.master_seed, STREAM_BOB_INPUT)

        if config.input_mode == "replay":
            files = config.replay_files
            if loopholes.independent_inputs:
                if len(files) != 2:
                    raise ConfigError("independent replayed inputs need exactly two counts files")
                return self.replay_backend(files[:1]), self.replay_backend(files[1:]), True
            shared = self.replay_backend(files)
            return shared, shared, False

        if config.input_mode == "hadamard":
            make = partial(HadamardBitSource, self.simulator)
        else:
            make = SeededBitSource

        if loopholes.independent_inputs:
            return make(seed_a), make(seed_b), True
        shared = make(seed_a)
        return shared, shared, False

    def round_seeds(self, config: ExperimentConfig, loopholes: LoopholeConfig, workers):
        if loopholes.fresh_state_per_round:
            return [self.game.round_seed(config.master_seed, i) for i in range(config.rounds)]
        if workers > 1:
            raise ConfigError("rounds sharing one generator stream cannot run in parallel")
        stream = make_rng(derive_seed(config.master_seed, STREAM_SHARED))
        return [int(stream.integers(0, 2 ** 63)) for _ in range(config.rounds)]

    def loophole_notes(self, config: ExperimentConfig, loopholes: LoopholeConfig):
        notes = {}
        if loopholes.independent_inputs:
            notes["freedom_of_choice"] = f"closed: x and y drawn from two independent {config.input_mode} sources"
        else:
            notes["freedom_of_choice"] = f"open: x and y drawn from one shared {config.input_mode} source"
        eta = loopholes.detection_efficiency
        if loopholes.report_all_events:
            notes["fair_sampling"] = f"closed: certified on all events at detection efficiency {eta:g}"
        else:
            notes["fair_sampling"] = f"open: certified on post-selected coincidences at detection efficiency {eta:g}"
        if loopholes.fresh_state_per_round:
            notes["memory"] = "partially closed: every round starts from fresh state, but one device plays all rounds"
        else:
            notes["memory"] = "open: rounds draw from one shared generator stream"
        notes["locality"] = "open: both parties are qubits of the same device, never space-like separated"
        return notes

    # -- execution -----------------------------------------------------------

    def _post_select(self, result: RoundResult, config, loopholes):
        """Keep the shots where both parties registered a detection."""
        memory = result.counts.memory
        eta = loopholes.detection_efficiency
        if eta >= 1.0:
            return result
        rng = make_rng(derive_seed(config.master_seed, STREAM_DETECTION, result.round_index))
        alice = rng.random(result.shots) < eta
        bob = rng.random(result.shots) < eta
        kept = [outcome for outcome, hit in zip(memory, alice & bob) if hit]
        if not kept:
            logger.debug("round %d recorded no coincident detections", result.round_index)
            return None
        counts = {}
        for outcome in kept:
            counts[outcome] = counts.get(outcome, 0) + 1
        record = CountsRecord(len(kept), counts, kept, {**result.counts.metadata, "emitted": result.shots})
        return RoundResult.from_counts(result.setting, record, result.round_index)

    def _play(self, config, loopholes, workers):
        lam = self.resolve_lambda(config)
        source_a, source_b, independent = self.build_sources(config, loopholes)
        if not independent:
            logger.warning("referee inputs share one source; the freedom-of-choice loophole stays open")
        seeds = self.round_seeds(config, loopholes, workers)
        if not loopholes.fresh_state_per_round:
            logger.warning("rounds share one generator stream; the memory loophole stays open")
        raw = self.game.run_experiment(
            config.rounds, config.shots, config.strategy, lam, config.master_seed,
            source_a=source_a, source_b=source_b, workers=workers,
            require_independent=independent, round_seeds=seeds,
        )
        return lam, raw

    def run_certified_experiment(self, config: ExperimentConfig, loopholes: LoopholeConfig = None) -> CertifiedRun:
        loopholes = loopholes or LoopholeConfig()
        workers = config.workers if config.workers > 1 else self.workers
        lam, raw = self._play(config, loopholes, workers)

        # rounds without a coincidence leave `selected` but still count in `total`
        kept = (self._post_select(r, config, loopholes) for r in raw.rounds)
        selected = ExperimentResult.from_rounds(r for r in kept if r is not None)
        wins, detected, total = selected.total_wins, selected.total_shots, raw.total_shots
        post_selected_win = wins / detected if detected else 0.0

        if loopholes.report_all_events:
            certificate = self.certifier.certify_counts(wins, total)
        else:
            logger.warning("certifying post-selected coincidences only; the fair-sampling loophole stays open")
            certificate = self.certifier.certify_counts(wins, detected)

        position = 0 if config.party == "alice" else 1
        bits = np.fromiter(
            (int(outcome[position]) for r in selected.rounds for outcome in r.counts.memory),
            dtype=np.uint8, count=detected,
        )

        logger.info(
            "experiment done: p_avg=%.5f post-selected=%.5f all-events=%.5f verdict=%s",
            selected.p_avg, post_selected_win, wins / total, certificate.verdict.value,
        )
        return CertifiedRun(
            experiment=selected,
            certificate=certificate,
            stream=BitStream(bits, "chsh"),
            raw_experiment=raw,
            lam=lam,
            loopholes=loopholes,
            detected_shots=detected,
            total_shots=total,
            post_selected_win=post_selected_win,
            all_event_win=wins / total,
            notes=self.loophole_notes(config, loopholes),
        )

    def replay_round(self, config: ExperimentConfig, loopholes: LoopholeConfig, index) -> RoundResult | None:
        """Recompute one round in isolation from the master seed alone.

        Returns None when post-selection leaves the round without a coincidence.
        """
        loopholes = loopholes or LoopholeConfig()
        if not loopholes.fresh_state_per_round:
            raise ConfigError("rounds sharing a generator stream cannot be replayed in isolation")
        if not 0 <= index < config.rounds:
            raise ConfigError(f"round index {index} outside 0..{config.rounds - 1}")
        lam = self.resolve_lambda(config)
        source_a, source_b, independent = self.build_sources(config, loopholes)
        settings = self.game.referee_inputs(config.rounds, source_a, source_b, independent)
        result = self.game.play_round(
            settings[index], config.strategy, config.shots, lam,
            self.game.round_seed(config.master_seed, index), index,
        )
        return self._post_select(result, config, loopholes)

    def summary(self, run: CertifiedRun, device=None) -> dict[str, Any]:
        return {
            "device": device,
            "lambda": run.lam,
            "detection_efficiency": run.loopholes.detection_efficiency,
            "detected_shots": run.detected_shots,
            "total_shots": run.total_shots,
            "post_selected_win": run.post_selected_win,
            "all_event_win": run.all_event_win,
            "loopholes": run.notes,
        }
