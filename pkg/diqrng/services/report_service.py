import math
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde, norm

from diqrng.errors import DomainError, FormatError, IntegrityError, ReportIOError
from diqrng.models import FORMAT_VERSION, ExperimentResult, GameSetting, RoundResult
from diqrng.serialization import atomic_write, write_json

HIST_BIN_WIDTH = 0.01
DENSITY_POINTS = 200
ROUND_COLUMNS = ["round_index", "x", "y", "same_count", "diff_count", "win_fraction"]


class ReportService:
    def write_csv(self, df, path, versioned=True):
        """Write a DataFrame with fixed float formatting and newline style"""
        body = df.to_csv(index=False, float_format="%.6g", lineterminator="\n")
        header = f"# format_version: {FORMAT_VERSION}\n" if versioned else ""
        return atomic_write(path, header + body)

    def rounds_frame(self, experiment):
        return pd.DataFrame([r.to_row() for r in experiment.rounds], columns=ROUND_COLUMNS)

    def write_rounds_csv(self, experiment, path):
        return self.write_csv(self.rounds_frame(experiment), path, versioned=False)

    def read_rounds_csv(self, path):
        """Rebuild an ExperimentResult (without per-shot counts) from a round CSV"""
        try:
            df = pd.read_csv(path, comment="#")
        except OSError as e:
            raise ReportIOError(f"cannot read {path}: {e}") from e
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise FormatError(f"{path} is not a round CSV: {e}") from e

        missing = set(ROUND_COLUMNS) - set(df.columns)
        if missing:
            raise FormatError(f"{path} is missing columns {sorted(missing)}")

        rounds = []
        for row in df.itertuples(index=False):
            try:
                index = int(row.round_index)
                setting = GameSetting(int(row.x), int(row.y))
                same, diff = int(row.same_count), int(row.diff_count)
                if same < 0 or diff < 0:
                    raise ValueError("counts must be non-negative")
                shots = same + diff
                win = (diff if setting.product else same) / shots
                recorded = float(row.win_fraction)
            except (TypeError, ValueError, ZeroDivisionError) as e:
                raise FormatError(f"{path}: bad round {row.round_index}: {e}") from e
            if not math.isclose(win, recorded, abs_tol=1e-5):
                raise IntegrityError(f"{path}: round {index} win fraction disagrees with its counts")
            rounds.append(RoundResult(setting, shots, same, diff, win, None, index))
        return ExperimentResult.from_rounds(rounds)

    def running_average(self, experiment):
        """Average win probability versus number of rounds played"""
        fractions = experiment.win_fractions
        return pd.DataFrame({
            "rounds": np.arange(1, fractions.size + 1),
            "win_fraction": fractions,
            "running_avg": np.cumsum(fractions) / np.arange(1, fractions.size + 1),
        })

    def histogram(self, experiment, bin_width=HIST_BIN_WIDTH):
        """Number of rounds per win-probability bin, occupied range only"""
        bins = np.floor(experiment.win_fractions / bin_width + 1e-9).astype(int)
        first, last = int(bins.min()), int(bins.max())
        edges = np.arange(first, last + 1)
        counts = np.array([np.count_nonzero(bins == b) for b in edges])
        return pd.DataFrame({
            "bin_start": np.round(edges * bin_width, 6),
            "bin_end": np.round((edges + 1) * bin_width, 6),
            "count": counts,
        })

    def density(self, experiment, points=DENSITY_POINTS):
        """Gaussian kernel density of round win fractions"""
        values = experiment.win_fractions
        grid = np.linspace(values.min() - 0.05, values.max() + 0.05, points)
        if values.size < 2 or np.ptp(values) == 0:
            # a single distinct value has no spread to estimate a bandwidth from
            pdf = norm.pdf(grid, loc=values.mean(), scale=HIST_BIN_WIDTH)
        else:
            try:
                pdf = gaussian_kde(values)(grid)
            except np.linalg.LinAlgError:
                pdf = norm.pdf(grid, loc=values.mean(), scale=HIST_BIN_WIDTH)
        return pd.DataFrame({"p_win": grid, "density": pdf})

    def summary_row(self, experiment, device=None):
        """Table-style summary: min / average / max / sigma of round win fractions"""
        shots = {r.shots for r in experiment.rounds}
        return {
            "format_version": FORMAT_VERSION,
            "device": device,
            "rounds": len(experiment.rounds),
            "shots": shots.pop() if len(shots) == 1 else None,
            "total_shots": experiment.total_shots,
            "p_min": experiment.p_min,
            "p_avg": experiment.p_avg,
            "p_max": experiment.p_max,
            "sigma": experiment.sigma,
            "pooled_win": experiment.pooled_win(),
            "per_setting": experiment.per_setting(),
        }

    def emit_reports(self, experiment, out_dir, device=None, extra=None):
        """Write running_avg.csv, hist.csv, density.csv and summary.json"""
        if not experiment.rounds:
            raise DomainError("cannot report on an experiment without rounds")
        out_dir = Path(out_dir)
        summary = self.summary_row(experiment, device)
        summary.update(extra or {})
        return {
            "running_avg": self.write_csv(self.running_average(experiment), out_dir / "running_avg.csv"),
            "hist": self.write_csv(self.histogram(experiment), out_dir / "hist.csv"),
            "density": self.write_csv(self.density(experiment), out_dir / "density.csv"),
            "summary": write_json(out_dir / "summary.json", summary, report=True),
        }
