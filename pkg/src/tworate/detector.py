"""Score functions, threshold detectors, and false-positive calibration.

Two score kinds are supported: a built-in keyed hash (so the pipeline
runs self-contained) and an external table loaded from a score file
produced by any outside model. A threshold tau induces the detection
region {x : s(x) >= tau}; the boundary s(x) = tau counts as detected.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .distribution import FiniteDistribution, State, StateSet
from .errors import CoverageError, ParseError


def _hash_key(key: bytes) -> bytes:
    # blake2b keys are capped at 64 bytes
    return hashlib.sha256(key).digest() if len(key) > 64 else key


def hash_score(key: bytes, x: State) -> float:
    """Deterministic keyed hash of the payload mapped to [0,1) (53-bit)."""
    h = hashlib.blake2b(x.payload, key=_hash_key(key), digest_size=8).digest()
    return (int.from_bytes(h, "big") >> 11) * 2.0**-53


@dataclass(frozen=True)
class KeyedHashScore:
    """Total score function s(x) = hash_score(key, x)."""

    key: bytes
    kind = "keyed_hash"

    def score(self, x: State) -> float:
        return hash_score(self.key, x)

    def scores(self, dist: FiniteDistribution) -> np.ndarray:
        return np.array([self.score(s) for s in dist.states])


@dataclass(frozen=True)
class TableScore:
    """Score function backed by an explicit id -> score map."""

    table: dict
    kind = "external_table"

    def score(self, x: State) -> float:
        try:
            return self.table[x.id]
        except KeyError:
            raise CoverageError(f"no score for state id {x.id}") from None

    def scores(self, dist: FiniteDistribution) -> np.ndarray:
        missing = [s.id for s in dist.states if s.id not in self.table]
        if missing:
            raise CoverageError(
                f"score table misses {len(missing)} state(s): {missing[:10]}"
            )
        return np.array([self.table[s.id] for s in dist.states])


def load_scores(source, support: FiniteDistribution) -> TableScore:
    """Ingest a `state_id,score` or `payload_sha256,score` file.

    The table must cover the full support; missing states raise a
    CoverageError naming them, duplicates raise a conflict error.
    """
    if isinstance(source, (str, Path)):
        stream = open(source, "r", encoding="utf-8", newline="")
        close = True
    elif isinstance(source, bytes):
        stream = io.StringIO(source.decode("utf-8"))
        close = False
    else:
        stream = source
        close = False
    by_hash = {s.payload_sha256(): s.id for s in support.states}
    table: dict[int, float] = {}
    try:
        reader = csv.reader(stream)
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(
                    f"line {reader.line_num}: expected 2 columns, got {len(row)}"
                )
            key, raw = row[0].strip(), row[1].strip()
            if key in ("state_id", "payload_sha256"):  # optional header
                continue
            if len(key) == 64 and not key.isdigit():
                if key not in by_hash:
                    raise CoverageError(
                        f"line {reader.line_num}: unknown payload hash {key}"
                    )
                sid = by_hash[key]
            else:
                try:
                    sid = int(key)
                except ValueError:
                    raise ParseError(
                        f"line {reader.line_num}: bad state id {key!r}"
                    ) from None
            try:
                val = float(raw)
            except ValueError:
                raise ParseError(f"line {reader.line_num}: bad score {raw!r}") from None
            if sid in table:
                raise CoverageError(f"duplicate score for state id {sid}")
            table[sid] = val
    finally:
        if close:
            stream.close()
    missing = [s.id for s in support.states if s.id not in table]
    if missing:
        raise CoverageError(
            f"score file misses {len(missing)} state(s): {missing[:10]}"
        )
    return TableScore(table)


@dataclass(frozen=True)
class ThresholdDetector:
    """D(x) = 1{s(x) >= tau}."""

    score: object
    tau: float

    def detect(self, x: State) -> int:
        return 1 if self.score.score(x) >= self.tau else 0

    def region(self, support: FiniteDistribution) -> StateSet:
        scores = self.score.scores(support)
        ids = [s.id for s, v in zip(support.states, scores) if v >= self.tau]
        return StateSet(support.support_key, ids)


@dataclass(frozen=True)
class CalibrationRecord:
    tau: float
    achieved_alpha: float


def calibrate(
    F: FiniteDistribution, score: object, taus: Sequence[float]
) -> list[CalibrationRecord]:
    """Achieved false-positive rate alpha(tau) = F({s >= tau}) per threshold.

    Alpha is the exact finite F-sum over the induced region, so it agrees
    bit-for-bit with mass_of(F, region).
    """
    records = []
    for tau in sorted(taus):
        det = ThresholdDetector(score, tau)
        records.append(CalibrationRecord(tau, F.mass_of(det.region(F))))
    return records


def score_quantiles(
    F: FiniteDistribution, score: object, qs: Sequence[float]
) -> list[float]:
    """F-weighted score quantiles, used for default threshold grids."""
    values = score.scores(F)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(F.mass[order])
    out = []
    for q in qs:
        pos = int(np.searchsorted(cum, q, side="left"))
        pos = min(pos, len(values) - 1)
        out.append(float(values[order[pos]]))
    return out
