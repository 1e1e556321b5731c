"""Synthetic click data: one multinomial draw per efficiency.

Reproduces the finite statistics of a counting experiment where each
filter setting gets its own run of ``n_mu`` trials. Substreams are
seeded per efficiency index so extending the grid never reshuffles
earlier data (numpy PCG64 throughout).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .detection import ClickProbabilities, EfficiencyGrid, click_patterns

__all__ = ["ClickRecord", "sample_clicks", "frequencies", "record_from_probabilities"]

RNG_ALGORITHM = "numpy-PCG64"


@dataclass(frozen=True)
class ClickRecord:
    """Click-pattern counts per efficiency.

    ``counts`` has shape (K, 2^M) with columns ordered as
    :func:`clicktomo.detection.click_patterns`; ``runs`` holds the
    number of trials per efficiency.
    """

    grid: EfficiencyGrid
    modes: int
    counts: np.ndarray
    runs: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        runs = np.asarray(self.runs, dtype=np.int64)
        expected = (len(self.grid), 2**self.modes)
        if counts.shape != expected:
            raise ValueError(f"counts shape {counts.shape}, expected {expected}")
        if runs.shape != (len(self.grid),):
            raise ValueError("runs must have one entry per efficiency")
        if np.any(counts < 0) or np.any(runs < 0):
            raise ValueError("counts and runs must be nonnegative")
        if np.any(counts.sum(axis=1) != runs):
            raise ValueError("per-efficiency counts must sum to the run total")
        counts.flags.writeable = False
        runs.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "runs", runs)

    @property
    def patterns(self) -> list[str]:
        return click_patterns(self.modes)

    def frequency_table(self) -> np.ndarray:
        """(K, 2^M) empirical pattern frequencies."""
        if np.any(self.runs == 0):
            raise ValueError("every efficiency needs at least one run")
        return self.counts / self.runs[:, None]

    # --- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "rng": RNG_ALGORITHM,
            "modes": self.modes,
            "etas": [repr(float(e)) for e in self.grid.etas],
            "patterns": self.patterns,
            "runs": self.runs.tolist(),
            "counts": self.counts.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "ClickRecord":
        grid = EfficiencyGrid(np.array([float(e) for e in doc["etas"]]))
        return ClickRecord(
            grid=grid,
            modes=doc["modes"],
            counts=np.array(doc["counts"], dtype=np.int64),
            runs=np.array(doc["runs"], dtype=np.int64),
        )

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_json(path) -> "ClickRecord":
        with open(path, encoding="utf-8") as fh:
            return ClickRecord.from_json_dict(json.load(fh))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eta", "pattern", "count", "runs"])
            for nu, eta in enumerate(self.grid.etas):
                for j, pattern in enumerate(self.patterns):
                    writer.writerow(
                        [repr(float(eta)), pattern, int(self.counts[nu, j]),
                         int(self.runs[nu])]
                    )

    @staticmethod
    def from_csv(path) -> "ClickRecord":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rows.append(row)
        if not rows:
            raise ValueError("empty click-record CSV")
        modes = len(rows[0]["pattern"])
        patterns = click_patterns(modes)
        etas = sorted({float(r["eta"]) for r in rows})
        index = {repr(e): i for i, e in enumerate(etas)}
        counts = np.zeros((len(etas), len(patterns)), dtype=np.int64)
        runs = np.zeros(len(etas), dtype=np.int64)
        for r in rows:
            nu = index[repr(float(r["eta"]))]
            counts[nu, patterns.index(r["pattern"])] = int(r["count"])
            runs[nu] = int(r["runs"])
        return ClickRecord(
            grid=EfficiencyGrid(np.array(etas)), modes=modes,
            counts=counts, runs=runs,
        )


def sample_clicks(
    probs: ClickProbabilities, runs_per_eta: int, seed: int
) -> ClickRecord:
    """One multinomial per efficiency, substream-seeded by (seed, index)."""
    if runs_per_eta < 1:
        raise ValueError("runs_per_eta must be >= 1")
    _validate_probabilities(probs)
    k = len(probs.grid)
    counts = np.empty((k, probs.table.shape[1]), dtype=np.int64)
    for nu in range(k):
        rng = np.random.default_rng([seed, nu])
        counts[nu] = rng.multinomial(runs_per_eta, probs.table[nu])
    return ClickRecord(
        grid=probs.grid,
        modes=probs.modes,
        counts=counts,
        runs=np.full(k, runs_per_eta, dtype=np.int64),
    )


def _validate_probabilities(probs: ClickProbabilities) -> None:
    if np.any(probs.table < 0):
        raise ValueError("negative pattern probability")
    if np.any(np.abs(probs.table.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("pattern probabilities must sum to 1 per efficiency")


def frequencies(record: ClickRecord) -> np.ndarray:
    """Measured frequency vector in pattern-block layout over efficiencies,
    the all-click pattern omitted (same row order as the detection matrix)."""
    table = record.frequency_table()
    return table[:, :-1].T.reshape(-1)


def record_from_probabilities(
    probs: ClickProbabilities, runs_per_eta: int
) -> ClickRecord:
    """Idealized record with counts = round(runs * p): the infinite-statistics
    limit up to integer rounding, useful as a noise-free stand-in."""
    k = len(probs.grid)
    counts = np.rint(probs.table * runs_per_eta).astype(np.int64)
    # absorb rounding drift into the largest pattern so rows still sum to runs
    for nu in range(k):
        drift = runs_per_eta - counts[nu].sum()
        counts[nu, np.argmax(counts[nu])] += drift
    return ClickRecord(
        grid=probs.grid,
        modes=probs.modes,
        counts=counts,
        runs=np.full(k, runs_per_eta, dtype=np.int64),
    )
