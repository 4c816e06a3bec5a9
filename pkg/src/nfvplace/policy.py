"""Value-iteration solver that couples the trellis placement search with
learned per-state estimates of idle server resources.

The solver never sees the ground-truth ledger: every admission attempt is
scored against an estimate of how much capacity is idle when the system
holds a given mix of active services. Estimates start optimistic only for
the empty system and are refined with an exponentially decaying step from
the outcomes of simulated placements.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mdp import StateSpace, TransitionModel, action_reward
from .model import Catalog, Infrastructure
from .trellis import TrellisPlacement, TrellisResult

DEFAULT_GAMMA = 0.9
DEFAULT_NUM_ARRANGEMENTS = 10
DEFAULT_ALPHA_INIT = 1.0
DEFAULT_ESTIMATE_DISCOUNT = 0.5
DEFAULT_MAX_ITERATIONS = 500

POLICY_FORMAT = "nfvplace-policy"
POLICY_VERSION = 1


class ResourceEstimator:
    """Per-active-state estimates of idle server resources.

    Estimates are indexed by the active-count ordinal. The empty system is
    pinned to full capacity; every other state starts at zero and is pulled
    toward observed (source minus consumed) snapshots with a step that
    halves on every update by default.
    """

    def __init__(
        self,
        space: StateSpace,
        infra: Infrastructure,
        alpha_init: float = DEFAULT_ALPHA_INIT,
        discount: float = DEFAULT_ESTIMATE_DISCOUNT,
    ) -> None:
        if not 0.0 < alpha_init <= 1.0:
            raise ValueError("alpha_init must lie in (0, 1]")
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.space = space
        self.capacity = infra.capacity.astype(float)
        self.estimates = np.zeros(
            (space.num_active, infra.num_servers, infra.num_resources)
        )
        idle_id = space.active_index((0,) * space.num_types) - 1
        self.estimates[idle_id] = self.capacity
        self.alpha = np.full(space.num_active, float(alpha_init))
        self.discount = float(discount)

    def snapshot(self, eta: int) -> np.ndarray:
        """Copy of the estimate for active ordinal ``eta`` (1-based)."""
        return self.estimates[eta - 1].copy()

    def update(self, eta_next: int, source: np.ndarray, usage: np.ndarray) -> None:
        """Blend an observed outcome into the destination state's estimate.

        ``source`` is the idle snapshot the placement consumed from and
        ``usage`` what the reliable admissions actually took, so their
        difference is a fresh sample of idle stock at the destination.
        """
        idx = eta_next - 1
        a = self.alpha[idx]
        sample = source - usage
        blended = a * sample + (1.0 - a) * self.estimates[idx]
        # convex combination; clipping only trims float drift at the edges
        np.clip(blended, 0.0, self.capacity, out=blended)
        self.estimates[idx] = blended
        self.alpha[idx] *= self.discount


def update_resource_estimate(
    estimator: ResourceEstimator, eta_next: int, source: np.ndarray, usage: np.ndarray
) -> None:
    estimator.update(eta_next, source, usage)


def realized_action(
    action: Sequence[int], outcome: TrellisResult, catalog: Catalog
) -> tuple[int, ...]:
    """Per-type counts of placed services that met their reliability target."""
    counts = [0] * len(catalog)
    if outcome.valid:
        for svc in outcome.services:
            if svc.failure_prob <= catalog[svc.type_index].failure_cap:
                counts[svc.type_index] += 1
    for c, a in zip(counts, action):
        if c > a:
            raise RuntimeError("outcome admits more services than requested")
    return tuple(counts)


def reliable_usage(outcome: TrellisResult, catalog: Catalog, shape: tuple[int, int]) -> np.ndarray:
    """Total server resources consumed by the reliable admissions."""
    usage = np.zeros(shape)
    if outcome.valid:
        for svc in outcome.services:
            if svc.failure_prob <= catalog[svc.type_index].failure_cap:
                usage += svc.usage
    return usage


def generate_arrangements(
    action: Sequence[int], count: int, rng: np.random.Generator
) -> list[tuple[int, ...]]:
    """Draw ``count`` random service orders for an admission vector and
    deduplicate them, preserving draw order."""
    stv = np.repeat(np.arange(len(action)), action)
    if stv.size == 0:
        return [()]
    pool: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for _ in range(count):
        perm = tuple(int(x) for x in rng.permutation(stv))
        if perm not in seen:
            seen.add(perm)
            pool.append(perm)
    return pool


@dataclass
class _ArrangementLedger:
    queue: deque
    first: tuple[int, ...]
    best_reward: float = 0.0
    best: tuple[int, ...] | None = None

    def next_arrangement(self) -> tuple[int, ...]:
        if self.queue:
            return self.queue.popleft()
        return self.best if self.best is not None else self.first

    def record(self, reward: float, arrangement: tuple[int, ...]) -> None:
        if self.best_reward <= reward:
            self.best_reward = reward
            self.best = arrangement


@dataclass
class Policy:
    """Solved admission policy plus everything needed to audit the run."""

    sigma_max: tuple[int, ...]
    lambda_max: tuple[int, ...]
    actions: list[tuple[int, ...]]
    arrangements: list[tuple[int, ...]]
    values: np.ndarray
    gamma: float
    epsilon: float
    seed: int
    num_arrangements: int
    departure_mode: str
    iterations: int
    converged: bool
    mean_value_trace: list[float]
    sup_diff_trace: list[float]
    fingerprint: str | None = None
    _space: StateSpace = field(default=None, repr=False, compare=False)

    def _resolve_space(self) -> StateSpace:
        if self._space is None:
            raise RuntimeError("policy has no index space attached")
        return self._space

    def lookup(self, lam: Sequence[int], sigma: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Admission vector and service order for one observed state."""
        sid = self._resolve_space().state_id(lam, sigma)
        return self.actions[sid], self.arrangements[sid]

    def value(self, lam: Sequence[int], sigma: Sequence[int]) -> float:
        return float(self.values[self._resolve_space().state_id(lam, sigma)])

    def save(self, path) -> None:
        payload = {
            "format": POLICY_FORMAT,
            "version": POLICY_VERSION,
            "fingerprint": self.fingerprint,
            "sigma_max": list(self.sigma_max),
            "lambda_max": list(self.lambda_max),
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "num_arrangements": self.num_arrangements,
            "departure_mode": self.departure_mode,
            "iterations": self.iterations,
            "converged": self.converged,
            "mean_value_trace": self.mean_value_trace,
            "sup_diff_trace": self.sup_diff_trace,
            "actions": [list(a) for a in self.actions],
            "arrangements": [list(r) for r in self.arrangements],
            "values": [float(v) for v in self.values],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Policy":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != POLICY_FORMAT:
            raise ValueError("not a policy artifact")
        if payload.get("version") != POLICY_VERSION:
            raise ValueError(f"unsupported policy version {payload.get('version')}")
        policy = cls(
            sigma_max=tuple(payload["sigma_max"]),
            lambda_max=tuple(payload["lambda_max"]),
            actions=[tuple(a) for a in payload["actions"]],
            arrangements=[tuple(r) for r in payload["arrangements"]],
            values=np.asarray(payload["values"], dtype=float),
            gamma=float(payload["gamma"]),
            epsilon=float(payload["epsilon"]),
            seed=int(payload["seed"]),
            num_arrangements=int(payload["num_arrangements"]),
            departure_mode=str(payload["departure_mode"]),
            iterations=int(payload["iterations"]),
            converged=bool(payload["converged"]),
            mean_value_trace=[float(v) for v in payload["mean_value_trace"]],
            sup_diff_trace=[float(v) for v in payload["sup_diff_trace"]],
            fingerprint=payload.get("fingerprint"),
        )
        policy.attach_bounds()
        return policy

    def attach_bounds(self) -> None:
        """Rebuild the index space from the stored bounds."""
        self._space = StateSpace.from_bounds(self.sigma_max, self.lambda_max)


def catalog_fingerprint(infra_section: dict, types_section: list) -> str:
    """Stable hash binding a policy to the setup it was solved for."""
    blob = json.dumps(
        {"infrastructure": infra_section, "service_types": types_section},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def value_iteration(
    space: StateSpace,
    model: TransitionModel,
    catalog: Catalog,
    infra: Infrastructure,
    *,
    gamma: float = DEFAULT_GAMMA,
    epsilon: float | None = None,
    num_arrangements: int = DEFAULT_NUM_ARRANGEMENTS,
    seed: int = 0,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    alpha_init: float = DEFAULT_ALPHA_INIT,
    estimate_discount: float = DEFAULT_ESTIMATE_DISCOUNT,
    fingerprint: str | None = None,
) -> Policy:
    """Solve the admission problem by synchronous value iteration.

    Each sweep scores every feasible admission vector of every state by
    running the trellis search against the current idle-resource estimate,
    converting the outcome into a reward and realized admissions, and
    backing up the previous sweep's values through the factored transition
    kernel. Arrangement candidates are drawn from a per-(state, action)
    pool; once a pool is spent, the incumbent best order is reused, which
    keeps later sweeps stationary. Stops when the sup-norm change of the
    value table falls below ``epsilon`` (at least two sweeps run).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if epsilon is None:
        epsilon = 1e-3 * max(t.admission_reward for t in catalog)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if num_arrangements < 1:
        raise ValueError("num_arrangements must be at least 1")
    if max_iterations < 2:
        raise ValueError("max_iterations must allow at least two sweeps")

    rng = np.random.default_rng(seed)
    estimator = ResourceEstimator(space, infra, alpha_init, estimate_discount)
    usage_shape = (infra.num_servers, infra.num_resources)

    arrival_vecs = [space.arrival_vector(i + 1) for i in range(space.num_arrival)]
    active_vecs = [space.active_vector(j + 1) for j in range(space.num_active)]
    actions_by_state: list[list[tuple[int, ...]] | None] = [None] * space.size
    pools: dict[tuple[int, tuple[int, ...]], _ArrangementLedger] = {}

    values = np.zeros(space.size)
    best_actions: list[tuple[int, ...]] = [(0,) * space.num_types] * space.size
    best_arrangements: list[tuple[int, ...]] = [()] * space.size
    mean_trace: list[float] = []
    diff_trace: list[float] = []
    converged = False
    iterations = 0

    for sweep in range(1, max_iterations + 1):
        prev_matrix = values.reshape(space.num_arrival, space.num_active)
        expected_prev = model.arrival_probs @ prev_matrix  # over destination actives
        new_values = np.empty_like(values)

        for i, lam in enumerate(arrival_vecs):
            base_sid = i * space.num_active
            for j, sigma in enumerate(active_vecs):
                sid = base_sid + j
                actions = actions_by_state[sid]
                if actions is None:
                    actions = space.feasible_actions(lam, sigma)
                    actions_by_state[sid] = actions
                eta = space.active_index(sigma)
                omega = estimator.snapshot(eta)

                best_q = -np.inf
                best_action = actions[0]
                best_rho: tuple[int, ...] = ()
                for action in actions:
                    ledger = pools.get((sid, action))
                    if ledger is None:
                        drawn = generate_arrangements(action, num_arrangements, rng)
                        ledger = _ArrangementLedger(deque(drawn), drawn[0])
                        pools[(sid, action)] = ledger
                    rho = ledger.next_arrangement()

                    outcome = TrellisPlacement(action, rho, omega, catalog, infra).run()
                    if outcome.valid:
                        reward = action_reward(action, outcome, catalog)
                        admitted = realized_action(action, outcome, catalog)
                        used = reliable_usage(outcome, catalog, usage_shape)
                        eta_next = space.active_index(
                            tuple(s + a for s, a in zip(sigma, admitted))
                        )
                        estimator.update(eta_next, omega, used)
                        ledger.record(reward, rho)
                    else:
                        reward = 0.0
                        admitted = (0,) * space.num_types
                    source = tuple(s + a for s, a in zip(sigma, admitted))
                    q = reward + gamma * float(
                        model.departure_row(source) @ expected_prev
                    )
                    if q > best_q:
                        best_q = q
                        best_action = action
                        incumbent = pools[(sid, action)]
                        best_rho = (
                            incumbent.best if incumbent.best is not None else incumbent.first
                        )
                new_values[sid] = best_q
                best_actions[sid] = best_action
                best_arrangements[sid] = best_rho

        diff = float(np.max(np.abs(new_values - values)))
        values = new_values
        iterations = sweep
        mean_trace.append(float(np.mean(values)))
        diff_trace.append(diff)
        if sweep >= 2 and diff < epsilon:
            converged = True
            break

    policy = Policy(
        sigma_max=space.sigma_max,
        lambda_max=space.lambda_max,
        actions=best_actions,
        arrangements=best_arrangements,
        values=values,
        gamma=gamma,
        epsilon=float(epsilon),
        seed=seed,
        num_arrangements=num_arrangements,
        departure_mode=model.mode,
        iterations=iterations,
        converged=converged,
        mean_value_trace=mean_trace,
        sup_diff_trace=diff_trace,
        fingerprint=fingerprint,
    )
    policy._space = space
    return policy
