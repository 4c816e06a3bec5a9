"""State indexing, feasible actions, transition structure and admission
reward for the slotted arrival/departure decision process.

A state pairs the per-type arrival counts seen this slot with the per-type
counts of services still active. Both vectors are packed into 1-based
ordinals by mixed-radix strides, type 0 varying fastest.
"""

from __future__ import annotations

import itertools
import math
from functools import reduce
from typing import Iterator, Sequence

import numpy as np

from .model import Catalog

DEFAULT_STATE_CAP = 2_000_000

DEPARTURE_MODES = ("binomial", "literal")


class StateSpace:
    """Index arithmetic over arrival and active-count vectors."""

    def __init__(self, catalog: Catalog, cap: int = DEFAULT_STATE_CAP) -> None:
        if not catalog:
            raise ValueError("catalog must not be empty")
        self.sigma_max = tuple(int(t.sigma_max) for t in catalog)
        self.lambda_max = tuple(int(t.lambda_max) for t in catalog)
        self.active_sizes = tuple(m + 1 for m in self.sigma_max)
        self.arrival_sizes = tuple(m + 1 for m in self.lambda_max)
        self.active_strides = _strides(self.active_sizes)
        self.arrival_strides = _strides(self.arrival_sizes)
        self.num_active = math.prod(self.active_sizes)
        self.num_arrival = math.prod(self.arrival_sizes)
        self.size = self.num_active * self.num_arrival
        if self.size > cap:
            raise ValueError(
                f"state space has {self.size} states, above the cap of {cap}"
            )

    @classmethod
    def from_bounds(
        cls, sigma_max: Sequence[int], lambda_max: Sequence[int]
    ) -> "StateSpace":
        """Rebuild an index space from stored bounds, e.g. a policy artifact."""
        space = cls.__new__(cls)
        space.sigma_max = tuple(int(m) for m in sigma_max)
        space.lambda_max = tuple(int(m) for m in lambda_max)
        space.active_sizes = tuple(m + 1 for m in space.sigma_max)
        space.arrival_sizes = tuple(m + 1 for m in space.lambda_max)
        space.active_strides = _strides(space.active_sizes)
        space.arrival_strides = _strides(space.arrival_sizes)
        space.num_active = math.prod(space.active_sizes)
        space.num_arrival = math.prod(space.arrival_sizes)
        space.size = space.num_active * space.num_arrival
        return space

    @property
    def num_types(self) -> int:
        return len(self.sigma_max)

    def active_index(self, sigma: Sequence[int]) -> int:
        """1-based ordinal of an active-count vector."""
        self._check(sigma, self.sigma_max, "active count")
        return 1 + sum(s * d for s, d in zip(sigma, self.active_strides))

    def arrival_index(self, lam: Sequence[int]) -> int:
        """1-based ordinal of an arrival vector."""
        self._check(lam, self.lambda_max, "arrival count")
        return 1 + sum(a * d for a, d in zip(lam, self.arrival_strides))

    def active_vector(self, index: int) -> tuple[int, ...]:
        if not 1 <= index <= self.num_active:
            raise IndexError(f"active index {index} out of range")
        return _unpack(index - 1, self.active_sizes)

    def arrival_vector(self, index: int) -> tuple[int, ...]:
        if not 1 <= index <= self.num_arrival:
            raise IndexError(f"arrival index {index} out of range")
        return _unpack(index - 1, self.arrival_sizes)

    def state_id(self, lam: Sequence[int], sigma: Sequence[int]) -> int:
        """0-based flat state index, arrival ordinal major."""
        return (self.arrival_index(lam) - 1) * self.num_active + (
            self.active_index(sigma) - 1
        )

    def state_of(self, sid: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        if not 0 <= sid < self.size:
            raise IndexError(f"state id {sid} out of range")
        i, j = divmod(sid, self.num_active)
        return self.arrival_vector(i + 1), self.active_vector(j + 1)

    def iter_states(self) -> Iterator[tuple[int, tuple[int, ...], tuple[int, ...]]]:
        for sid in range(self.size):
            lam, sigma = self.state_of(sid)
            yield sid, lam, sigma

    def feasible_actions(self, lam: Sequence[int], sigma: Sequence[int]) -> list[tuple[int, ...]]:
        """All admission vectors bounded by arrivals and remaining capacity
        of the active-count register; the zero action comes first."""
        self._check(lam, self.lambda_max, "arrival count")
        self._check(sigma, self.sigma_max, "active count")
        ranges = [
            range(min(a, m - s) + 1)
            for a, s, m in zip(lam, sigma, self.sigma_max)
        ]
        return list(itertools.product(*ranges))

    @staticmethod
    def _check(vec: Sequence[int], bounds: tuple[int, ...], label: str) -> None:
        if len(vec) != len(bounds):
            raise ValueError(f"{label} vector has wrong length")
        for x, m in zip(vec, bounds):
            if not 0 <= x <= m:
                raise ValueError(f"{label} {tuple(vec)} out of bounds {bounds}")


def _strides(sizes: tuple[int, ...]) -> tuple[int, ...]:
    strides = []
    acc = 1
    for n in sizes:
        strides.append(acc)
        acc *= n
    return tuple(strides)


def _unpack(flat: int, sizes: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for n in sizes:
        flat, rem = divmod(flat, n)
        out.append(rem)
    return tuple(out)


def build_state_space(catalog: Catalog, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    return StateSpace(catalog, cap)


def departure_prob(
    source: Sequence[int],
    survivors: Sequence[int],
    catalog: Catalog,
    mode: str = "binomial",
) -> float:
    """Probability that ``source`` active services thin down to ``survivors``.

    Each active service departs independently with its type's probability.
    The default mode uses the full binomial law; the "literal" mode keeps
    only the bare geometric factor d^(departures) without combinatorial
    normalization, retained for auditing older results, and its rows do not
    sum to one.
    """
    if mode not in DEPARTURE_MODES:
        raise ValueError(f"unknown departure mode {mode!r}")
    if len(source) != len(catalog) or len(survivors) != len(catalog):
        raise ValueError("vector lengths must match the catalog")
    p = 1.0
    for j, k, stype in zip(source, survivors, catalog):
        if k > j or k < 0 or j < 0:
            return 0.0
        d = stype.departure_prob
        if mode == "binomial":
            p *= math.comb(j, k) * d ** (j - k) * (1.0 - d) ** k
        else:
            p *= d ** (j - k)
    return p


def arrival_prob(lam: Sequence[int], catalog: Catalog) -> float:
    """Joint probability of a per-type arrival vector (types independent)."""
    if len(lam) != len(catalog):
        raise ValueError("vector length must match the catalog")
    p = 1.0
    for a, stype in zip(lam, catalog):
        if not 0 <= a <= stype.lambda_max:
            return 0.0
        p *= stype.arrival_pmf[a]
    return p


class TransitionModel:
    """Factored transition kernel over the state space.

    Rows over destination active vectors are materialized lazily per source
    vector and cached; arrival probabilities separate out as a fixed vector
    over arrival ordinals.
    """

    def __init__(self, space: StateSpace, catalog: Catalog, mode: str = "binomial") -> None:
        if mode not in DEPARTURE_MODES:
            raise ValueError(f"unknown departure mode {mode!r}")
        self.space = space
        self.catalog = catalog
        self.mode = mode
        pmfs = [np.asarray(t.arrival_pmf, dtype=float) for t in catalog]
        self.arrival_probs = reduce(np.kron, reversed(pmfs))
        self.arrival_probs.setflags(write=False)
        self._rows: dict[tuple[int, ...], np.ndarray] = {}

    def departure_row(self, source: Sequence[int]) -> np.ndarray:
        """Distribution over destination active ordinals given the post-
        admission active counts ``source``."""
        key = tuple(int(x) for x in source)
        row = self._rows.get(key)
        if row is None:
            per_type = []
            for j, stype, size in zip(key, self.catalog, self.space.active_sizes):
                if not 0 <= j < size:
                    raise ValueError(f"source count {j} out of range")
                d = stype.departure_prob
                vec = np.zeros(size)
                for k in range(j + 1):
                    if self.mode == "binomial":
                        vec[k] = math.comb(j, k) * d ** (j - k) * (1.0 - d) ** k
                    else:
                        vec[k] = d ** (j - k)
                per_type.append(vec)
            row = reduce(np.kron, reversed(per_type))
            row.setflags(write=False)
            self._rows[key] = row
        return row

    def transition_prob(
        self,
        state: tuple[Sequence[int], Sequence[int]],
        realized_action: Sequence[int],
        next_state: tuple[Sequence[int], Sequence[int]],
    ) -> float:
        """P(next | state, realized admissions): independent arrivals times
        the departure law applied to sigma + realized_action."""
        _, sigma = state
        lam_next, sigma_next = next_state
        source = tuple(s + a for s, a in zip(sigma, realized_action))
        for j, m in zip(source, self.space.sigma_max):
            if j > m:
                raise ValueError("realized action overflows the active-count register")
        row = self.departure_row(source)
        return float(
            arrival_prob(lam_next, self.catalog)
            * row[self.space.active_index(sigma_next) - 1]
        )


def action_reward(action: Sequence[int], outcome, catalog: Catalog) -> float:
    """Net slot reward of an admission attempt.

    Zero when the batch placement failed. Otherwise every placed service
    pays its placement cost and earns its type's reward only if it meets
    the reliability target.
    """
    if not outcome.valid:
        return 0.0
    total = 0.0
    for svc in outcome.services:
        stype = catalog[svc.type_index]
        total -= svc.cost
        if svc.failure_prob <= stype.failure_cap:
            total += stype.admission_reward
    return total
