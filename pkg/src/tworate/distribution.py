"""Finite discrete distributions over canonicalized dataset rows.

A support is an ordered collection of states with contiguous ids; a
FiniteDistribution stores strictly positive mass on a subset of one
support. Distributions derived from the same base (optimal tilts,
empirical frequencies, exact best-of-m laws) share the base's support
key, which is what makes exact cross-distribution sums well defined.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, ParseError

CELL_SEPARATOR = b"\x1f"

MASS_TOL = 1e-12


@dataclass(frozen=True)
class State:
    """One point of a finite support: a stable id plus canonical row bytes."""

    id: int
    payload: bytes

    def payload_sha256(self) -> str:
        return hashlib.sha256(self.payload).hexdigest()

    def cells(self) -> list[str]:
        return [c.decode("utf-8") for c in self.payload.split(CELL_SEPARATOR)]


class StateSet:
    """Subset of one support's ids (e.g. a detection region)."""

    __slots__ = ("support_key", "ids")

    def __init__(self, support_key: object, ids: Iterable[int]):
        self.support_key = support_key
        self.ids = frozenset(int(i) for i in ids)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, state_id: int) -> bool:
        return state_id in self.ids

    def __repr__(self) -> str:
        return f"StateSet({sorted(self.ids)!r})"


def canonical_payload(cells: Sequence[str]) -> bytes:
    """Deterministic row identity: strip each cell, join with a fixed separator."""
    return CELL_SEPARATOR.join(c.strip().encode("utf-8") for c in cells)


class FiniteDistribution:
    """Probability mass function with strict support.

    Invariants enforced at construction: all masses strictly positive,
    unique ids, total mass 1 within 1e-12.
    """

    __slots__ = ("states", "mass", "support_key", "_index", "_log_mass", "_cum")

    def __init__(
        self,
        states: Sequence[State],
        mass: Sequence[float] | np.ndarray,
        support_key: object | None = None,
    ):
        states = tuple(states)
        mass = np.asarray(mass, dtype=np.float64)
        if len(states) == 0:
            raise ValueError("distribution needs at least one state")
        if mass.shape != (len(states),):
            raise ValueError("mass vector length must match number of states")
        if np.any(mass <= 0.0) or not np.all(np.isfinite(mass)):
            raise ValueError("all stored masses must be strictly positive and finite")
        total = math.fsum(mass.tolist())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} deviates from 1 beyond {MASS_TOL}")
        ids = [s.id for s in states]
        if len(set(ids)) != len(ids):
            raise ValueError("support states must have unique ids")
        self.states = states
        self.mass = mass
        self.support_key = support_key if support_key is not None else object()
        self._index: dict[int, int] | None = None
        self._log_mass: np.ndarray | None = None
        self._cum: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.states]

    @property
    def index(self) -> dict[int, int]:
        if self._index is None:
            self._index = {s.id: pos for pos, s in enumerate(self.states)}
        return self._index

    @property
    def log_mass(self) -> np.ndarray:
        if self._log_mass is None:
            self._log_mass = np.log(self.mass)
        return self._log_mass

    @property
    def cumulative(self) -> np.ndarray:
        if self._cum is None:
            cum = np.cumsum(self.mass)
            cum[-1] = 1.0
            self._cum = cum
        return self._cum

    # -- sets ---------------------------------------------------------------

    def subset(self, ids: Iterable[int]) -> StateSet:
        ids = frozenset(int(i) for i in ids)
        unknown = ids - set(self.index)
        if unknown:
            raise CoverageError(
                f"ids not in this support: {sorted(unknown)[:10]}"
            )
        return StateSet(self.support_key, ids)

    def full_set(self) -> StateSet:
        return StateSet(self.support_key, self.index)

    def empty_set(self) -> StateSet:
        return StateSet(self.support_key, ())

    def mass_of(self, sset: StateSet) -> float:
        """Exact probability of a state set (compensated summation)."""
        if sset.support_key is not self.support_key:
            raise CoverageError("state set belongs to a different support")
        idx = self.index
        return math.fsum(self.mass[idx[i]] for i in sset.ids if i in idx)

    # -- sampling -----------------------------------------------------------

    def sample_positions(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws as positions into `states` (inverse CDF)."""
        u = rng.random(n)
        return np.searchsorted(self.cumulative, u, side="right")

    def sample(self, rng: np.random.Generator) -> State:
        return self.states[int(self.sample_positions(1, rng)[0])]

    def sample_states(self, n: int, rng: np.random.Generator) -> list[State]:
        return [self.states[int(p)] for p in self.sample_positions(n, rng)]

    # -- derived distributions ---------------------------------------------

    def empirical_from_counts(self, counts: np.ndarray) -> "FiniteDistribution":
        """Plug-in distribution from draw counts aligned with this support."""
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != self.mass.shape:
            raise ValueError("counts must align with this distribution's states")
        n = counts.sum()
        if n <= 0:
            raise ValueError("need at least one count")
        keep = counts > 0
        states = [s for s, k in zip(self.states, keep) if k]
        return FiniteDistribution(states, counts[keep] / n, self.support_key)

    # -- export -------------------------------------------------------------

    def to_json_obj(self) -> list[dict]:
        return [
            {"id": s.id, "payload_hash": s.payload_sha256(), "mass": float(m)}
            for s, m in zip(self.states, self.mass)
        ]

    def dump_json(self, fp) -> None:
        json.dump(self.to_json_obj(), fp, indent=2)
        fp.write("\n")


def ingest_csv(
    source,
    has_header: bool = False,
    dedupe: bool = False,
    delimiter: str = ",",
) -> FiniteDistribution:
    """Read delimited text into an empirical distribution (mass 1/N per row).

    With dedupe on, identical canonical rows aggregate to multiplicity/N;
    with dedupe off every row becomes its own state. Ragged rows raise a
    ParseError naming the offending line.
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
    try:
        reader = csv.reader(stream, delimiter=delimiter)
        payloads: list[bytes] = []
        width: int | None = None
        skip_header = has_header
        for row in reader:
            if skip_header:
                width = len(row)
                skip_header = False
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ParseError(
                    f"line {reader.line_num}: expected {width} columns, got {len(row)}"
                )
            payloads.append(canonical_payload(row))
        if not payloads:
            raise ParseError("empty input: no data rows")
    finally:
        if close:
            stream.close()

    n = len(payloads)
    if dedupe:
        counts: dict[bytes, int] = {}
        for p in payloads:
            counts[p] = counts.get(p, 0) + 1
        states = [State(i, p) for i, p in enumerate(counts)]
        mass = np.array([counts[s.payload] / n for s in states])
    else:
        states = [State(i, p) for i, p in enumerate(payloads)]
        mass = np.full(n, 1.0 / n)
    return FiniteDistribution(states, mass)


def total_variation(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """TV distance between two distributions on the same support key."""
    if p.support_key is not q.support_key:
        raise CoverageError("distributions live on different supports")
    ids = set(p.index) | set(q.index)
    pi, qi = p.index, q.index
    return 0.5 * math.fsum(
        abs(
            (p.mass[pi[i]] if i in pi else 0.0)
            - (q.mass[qi[i]] if i in qi else 0.0)
        )
        for i in ids
    )
