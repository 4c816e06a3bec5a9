"""Core domain model: provider infrastructure, service chain catalog,
placement plans, and their closed-form cost and reliability arithmetic.

Servers are addressed by a flat index that runs provider by provider;
placement plans reference those flat indices. Numeric tables are numpy
arrays treated as read-only after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

COST_TOL = 1e-9
PROB_TOL = 1e-12
DEFAULT_PENALTY = 1.0e6


class LedgerError(RuntimeError):
    """A ledger operation would leave idle resources out of bounds."""


@dataclass(frozen=True)
class InP:
    """One infrastructure provider; all its servers share one failure probability."""

    failure_prob: float
    servers: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "servers", tuple(tuple(int(c) for c in row) for row in self.servers)
        )
        if not 0.0 <= self.failure_prob < 1.0:
            raise ValueError(f"failure_prob must be in [0, 1), got {self.failure_prob}")
        if not self.servers:
            raise ValueError("a provider must own at least one server")
        if len({len(row) for row in self.servers}) != 1:
            raise ValueError("every server must list the same resource types")
        if any(c < 0 for row in self.servers for c in row):
            raise ValueError("server capacities must be non-negative")


class Infrastructure:
    """Read-only aggregate of all providers.

    Carries flat-indexed capacity and link tables plus the per-resource unit
    cost of each provider, which grows exponentially as the provider's
    failure probability drops below the highest acceptable level ``v_base``.
    """

    def __init__(
        self,
        inps: Sequence[InP],
        alpha: Sequence[float],
        beta: float,
        v_base: float,
        deployment_cost,
        link_cost=None,
        link_bandwidth=None,
    ) -> None:
        self.inps = tuple(inps)
        if not self.inps:
            raise ValueError("need at least one provider")
        self.alpha = np.asarray(alpha, dtype=float)
        if self.alpha.ndim != 1 or self.alpha.size == 0:
            raise ValueError("alpha must be a non-empty vector")
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise ValueError("resource weights must lie in [0, 1]")
        self.beta = float(beta)
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.v_base = float(v_base)
        if not 0.0 < self.v_base < 1.0:
            raise ValueError("v_base must lie in (0, 1)")

        self.num_inps = len(self.inps)
        self.num_resources = int(self.alpha.size)
        self.v = np.array([p.failure_prob for p in self.inps], dtype=float)
        if np.any(self.v > self.v_base):
            raise ValueError("provider failure probability exceeds the acceptable baseline")

        for p in self.inps:
            if len(p.servers[0]) != self.num_resources:
                raise ValueError("server capacity width does not match alpha")
        self.servers_per_inp = tuple(len(p.servers) for p in self.inps)
        self.num_servers = sum(self.servers_per_inp)
        self.server_inp = np.array(
            [i for i, p in enumerate(self.inps) for _ in p.servers], dtype=np.int64
        )
        self.capacity = np.array(
            [row for p in self.inps for row in p.servers], dtype=np.int64
        )
        # cheap providers are the failure-prone ones: cost rises as v_i falls
        self.unit_cost = self.alpha[None, :] * np.exp(self.beta * (self.v_base - self.v))[:, None]

        dep = np.asarray(deployment_cost, dtype=float)
        if dep.ndim != 2 or dep.shape[0] != self.num_inps:
            raise ValueError("deployment_cost must be a (providers x vnf types) table")
        if np.any(dep < 0):
            raise ValueError("deployment costs must be non-negative")
        self.deployment_cost = dep
        self.num_vnf_types = int(dep.shape[1])

        s = self.num_servers
        if link_cost is None:
            link_cost = np.zeros((s, s))
        lc = np.asarray(link_cost, dtype=float)
        if lc.shape != (s, s):
            raise ValueError("link_cost must be a square servers x servers table")
        if not np.allclose(lc, lc.T, atol=COST_TOL):
            raise ValueError("link_cost must be symmetric")
        if np.any(np.abs(np.diag(lc)) > 0):
            raise ValueError("link cost from a server to itself must be zero")
        if np.any(lc < 0):
            raise ValueError("link costs must be non-negative")
        self.link_cost = lc

        if link_bandwidth is None:
            link_bandwidth = np.full((s, s), np.inf)
        lb = np.asarray(link_bandwidth, dtype=float)
        if lb.shape != (s, s):
            raise ValueError("link_bandwidth must be a square servers x servers table")
        if not np.array_equal(lb, lb.T):
            raise ValueError("link_bandwidth must be symmetric")
        if np.any(lb < 0):
            raise ValueError("link bandwidth must be non-negative")
        self.link_bandwidth = lb

        for arr in (self.v, self.unit_cost, self.capacity, self.server_inp,
                    self.deployment_cost, self.link_cost, self.link_bandwidth,
                    self.alpha):
            arr.setflags(write=False)

    def server_id(self, inp: int, server: int) -> int:
        """Flat index of the given provider-local server."""
        if not 0 <= inp < self.num_inps:
            raise IndexError(f"provider {inp} out of range")
        if not 0 <= server < self.servers_per_inp[inp]:
            raise IndexError(f"server {server} out of range for provider {inp}")
        return sum(self.servers_per_inp[:inp]) + server

    def server_location(self, sid: int) -> tuple[int, int]:
        """Inverse of :meth:`server_id`."""
        if not 0 <= sid < self.num_servers:
            raise IndexError(f"server {sid} out of range")
        inp = int(self.server_inp[sid])
        return inp, sid - sum(self.servers_per_inp[:inp])

    def server_failure(self, sid: int) -> float:
        """Failure probability of the provider owning the given server."""
        if not 0 <= sid < self.num_servers:
            raise IndexError(f"server {sid} out of range")
        return float(self.v[self.server_inp[sid]])


def server_unit_cost(infra: Infrastructure, inp: int, resource: int) -> float:
    """Per-unit price of one resource on one provider's servers."""
    if not 0 <= inp < infra.num_inps:
        raise IndexError(f"provider {inp} out of range")
    if not 0 <= resource < infra.num_resources:
        raise IndexError(f"resource {resource} out of range")
    return float(infra.alpha[resource] * math.exp(infra.beta * (infra.v_base - infra.v[inp])))


@dataclass(frozen=True)
class VnfSpec:
    """One function in a chain: its type id and per-resource demand."""

    vnf_type: int
    demands: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "demands", tuple(int(d) for d in self.demands))
        if self.vnf_type < 0:
            raise ValueError("vnf_type must be non-negative")
        if not self.demands or any(d < 0 for d in self.demands):
            raise ValueError("demands must be non-negative and non-empty")


@dataclass(frozen=True)
class ServiceType:
    """A service class: its chain, reliability target, traffic and arrival law."""

    failure_cap: float
    departure_prob: float
    bandwidth: float
    vnfs: tuple[VnfSpec, ...]
    arrival_pmf: tuple[float, ...]
    admission_reward: float
    sigma_max: int
    penalty: float = DEFAULT_PENALTY
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "vnfs", tuple(self.vnfs))
        object.__setattr__(self, "arrival_pmf", tuple(float(p) for p in self.arrival_pmf))
        if not 0.0 < self.failure_cap < 1.0:
            raise ValueError("failure_cap must lie in (0, 1)")
        if not 0.0 < self.departure_prob <= 1.0:
            raise ValueError("departure_prob must lie in (0, 1]")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")
        if not self.vnfs:
            raise ValueError("a service needs at least one VNF")
        if len({len(v.demands) for v in self.vnfs}) != 1:
            raise ValueError("all VNFs of a service must share the resource width")
        if not self.arrival_pmf or any(p < 0 for p in self.arrival_pmf):
            raise ValueError("arrival_pmf entries must be non-negative")
        if abs(sum(self.arrival_pmf) - 1.0) > PROB_TOL:
            raise ValueError("arrival_pmf must sum to one")
        if self.admission_reward < 0:
            raise ValueError("admission_reward must be non-negative")
        if self.sigma_max < 0:
            raise ValueError("sigma_max must be non-negative")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")

    @property
    def num_vnfs(self) -> int:
        return len(self.vnfs)

    @property
    def lambda_max(self) -> int:
        return len(self.arrival_pmf) - 1


Catalog = Sequence[ServiceType]


@dataclass(frozen=True)
class VnfPlacement:
    """Servers hosting one VNF: a main and an optional distinct backup."""

    main: int
    backup: int | None = None


@dataclass(frozen=True)
class ServicePlacement:
    type_index: int
    vnfs: tuple[VnfPlacement, ...]


@dataclass(frozen=True)
class PlacementPlan:
    services: tuple[ServicePlacement, ...]


@dataclass(frozen=True)
class CostBreakdown:
    """Placement cost split into its three charged components."""

    server: float
    forwarding: float
    deployment: float

    @property
    def total(self) -> float:
        return self.server + self.forwarding + self.deployment

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.server + other.server,
            self.forwarding + other.forwarding,
            self.deployment + other.deployment,
        )


def service_cost(placement: ServicePlacement, infra: Infrastructure, catalog: Catalog) -> CostBreakdown:
    """Cost of one placed service.

    Charges every assigned server (main and backup) for the VNF's demands
    and its deployment, and charges the chain bandwidth on every link
    between servers hosting consecutive VNFs. A missing backup contributes
    nothing; co-located servers route internally at zero cost.
    """
    stype = catalog[placement.type_index]
    if len(placement.vnfs) != stype.num_vnfs:
        raise ValueError("placement does not cover the service chain")
    server = 0.0
    deploy = 0.0
    forward = 0.0
    prev: VnfPlacement | None = None
    for spec, vp in zip(stype.vnfs, placement.vnfs):
        demands = np.asarray(spec.demands, dtype=float)
        for sid in (vp.main, vp.backup):
            if sid is None:
                continue
            inp = int(infra.server_inp[sid])
            server += float(demands @ infra.unit_cost[inp])
            deploy += float(infra.deployment_cost[inp, spec.vnf_type])
        if prev is not None:
            for a in (prev.main, prev.backup):
                for b in (vp.main, vp.backup):
                    if a is None or b is None:
                        continue
                    forward += stype.bandwidth * float(infra.link_cost[a, b])
        prev = vp
    return CostBreakdown(server, forward, deploy)


def placement_cost(plan: PlacementPlan, infra: Infrastructure, catalog: Catalog) -> CostBreakdown:
    """Total cost of a plan; sums per-service costs."""
    total = CostBreakdown(0.0, 0.0, 0.0)
    for placement in plan.services:
        total = total + service_cost(placement, infra, catalog)
    return total


def service_failure_probability(vnfs: Sequence[VnfPlacement], infra: Infrastructure) -> float:
    """Probability that at least one VNF loses all its servers.

    A VNF fails only when its main and (if present) backup fail together;
    VNF failures are treated as independent across the chain.
    """
    up = 1.0
    for vp in vnfs:
        f = infra.server_failure(vp.main)
        if vp.backup is not None:
            if vp.backup == vp.main:
                raise ValueError("backup server must differ from the main server")
            f *= infra.server_failure(vp.backup)
        up *= 1.0 - f
    return 1.0 - up


def service_usage(placement: ServicePlacement, infra: Infrastructure, catalog: Catalog) -> np.ndarray:
    """Per-server resource demand of one placed service, mains plus backups."""
    stype = catalog[placement.type_index]
    usage = np.zeros((infra.num_servers, infra.num_resources), dtype=np.int64)
    for spec, vp in zip(stype.vnfs, placement.vnfs):
        demands = np.asarray(spec.demands, dtype=np.int64)
        usage[vp.main] += demands
        if vp.backup is not None:
            usage[vp.backup] += demands
    return usage


def plan_usage(plan: PlacementPlan, infra: Infrastructure, catalog: Catalog) -> np.ndarray:
    usage = np.zeros((infra.num_servers, infra.num_resources), dtype=np.int64)
    for placement in plan.services:
        usage += service_usage(placement, infra, catalog)
    return usage


def induced_link_usage(plan: PlacementPlan, infra: Infrastructure, catalog: Catalog) -> dict[tuple[int, int], float]:
    """Bandwidth required on each inter-server link, keyed by sorted pair.

    Every pair of servers hosting consecutive VNFs carries the chain's
    bandwidth; traffic between co-located VNFs stays inside the server.
    """
    usage: dict[tuple[int, int], float] = {}
    for placement in plan.services:
        stype = catalog[placement.type_index]
        prev: VnfPlacement | None = None
        for vp in placement.vnfs:
            if prev is not None:
                for a in (prev.main, prev.backup):
                    for b in (vp.main, vp.backup):
                        if a is None or b is None or a == b:
                            continue
                        key = (min(a, b), max(a, b))
                        usage[key] = usage.get(key, 0.0) + stype.bandwidth
            prev = vp
    return usage


class ResourceLedger:
    """Mutable idle-resource account for servers and links.

    Written by a single owner; concurrent readers must hold a copy.
    """

    def __init__(self, server_capacity, link_capacity, server_idle=None, link_idle=None) -> None:
        self.server_capacity = np.array(server_capacity, dtype=np.int64)
        self.link_capacity = np.array(link_capacity, dtype=float)
        self.server_idle = (
            self.server_capacity.copy() if server_idle is None
            else np.array(server_idle, dtype=np.int64)
        )
        self.link_idle = (
            self.link_capacity.copy() if link_idle is None
            else np.array(link_idle, dtype=float)
        )
        if self.server_idle.shape != self.server_capacity.shape:
            raise LedgerError("server idle table shape does not match capacity")
        if np.any(self.server_idle < 0) or np.any(self.server_idle > self.server_capacity):
            raise LedgerError("server idle resources out of [0, capacity]")
        if np.any(self.link_idle < 0) or np.any(self.link_idle > self.link_capacity):
            raise LedgerError("link idle bandwidth out of [0, capacity]")

    @classmethod
    def full(cls, infra: Infrastructure) -> "ResourceLedger":
        return cls(infra.capacity, infra.link_bandwidth)

    def copy(self) -> "ResourceLedger":
        return ResourceLedger(
            self.server_capacity, self.link_capacity, self.server_idle, self.link_idle
        )

    def allocate(self, usage: np.ndarray) -> None:
        """Consume server resources; rejects requests exceeding idle stock."""
        if np.any(usage < 0):
            raise LedgerError("usage must be non-negative")
        if np.any(usage > self.server_idle):
            raise LedgerError("allocation exceeds idle resources")
        self.server_idle -= np.asarray(usage, dtype=np.int64)

    def release(self, usage: np.ndarray) -> None:
        """Return server resources; rejects releases exceeding capacity."""
        if np.any(usage < 0):
            raise LedgerError("usage must be non-negative")
        freed = self.server_idle + np.asarray(usage, dtype=np.int64)
        if np.any(freed > self.server_capacity):
            raise LedgerError("release exceeds capacity")
        self.server_idle = freed


@dataclass(frozen=True)
class Violation:
    """One violated placement constraint."""

    constraint: str
    service: int | None
    detail: str


def validate_plan(
    plan: PlacementPlan,
    ledger: ResourceLedger,
    infra: Infrastructure,
    catalog: Catalog,
) -> list[Violation]:
    """Check a plan against the ledger and report every violated constraint.

    Covered: distinct main/backup pairing, server capacity, link bandwidth,
    routing coverage of consecutive VNF pairs, and per-service reliability
    targets. An empty report means the plan is admissible.
    """
    violations: list[Violation] = []
    for si, placement in enumerate(plan.services):
        stype = catalog[placement.type_index]
        if len(placement.vnfs) != stype.num_vnfs:
            violations.append(Violation("chain-coverage", si, "placement does not cover every VNF"))
            continue
        for u, vp in enumerate(placement.vnfs):
            if vp.backup is not None and vp.backup == vp.main:
                violations.append(
                    Violation("distinct-servers", si, f"vnf {u} backs up onto its own main server")
                )

    def pair_ok(p: ServicePlacement) -> bool:
        return len(p.vnfs) == len(catalog[p.type_index].vnfs) and all(
            vp.backup is None or vp.backup != vp.main for vp in p.vnfs
        )

    checkable = PlacementPlan(tuple(p for p in plan.services if pair_ok(p)))

    usage = plan_usage(checkable, infra, catalog)
    over = usage > ledger.server_idle
    for sid, j in zip(*np.nonzero(over)):
        violations.append(
            Violation(
                "server-capacity",
                None,
                f"server {int(sid)} resource {int(j)}: demand {int(usage[sid, j])} "
                f"exceeds idle {int(ledger.server_idle[sid, j])}",
            )
        )

    links = induced_link_usage(checkable, infra, catalog)
    for (a, b), need in sorted(links.items()):
        if need > ledger.link_idle[a, b] + COST_TOL:
            violations.append(
                Violation(
                    "link-bandwidth",
                    None,
                    f"link ({a}, {b}): demand {need} exceeds idle {float(ledger.link_idle[a, b])}",
                )
            )

    # Routing coverage: every consecutive-VNF server pair must appear in the
    # induced link usage. Usage is derived from the plan itself, so recompute
    # and cross-check rather than trusting the caller.
    for si, placement in enumerate(checkable.services):
        stype = catalog[placement.type_index]
        prev: VnfPlacement | None = None
        for vp in placement.vnfs:
            if prev is not None:
                for a in (prev.main, prev.backup):
                    for b in (vp.main, vp.backup):
                        if a is None or b is None or a == b:
                            continue
                        if (min(a, b), max(a, b)) not in links:
                            violations.append(
                                Violation("routing", si, f"pair ({a}, {b}) has no routed link")
                            )
            prev = vp

    for si, placement in enumerate(plan.services):
        if not pair_ok(placement):
            continue
        stype = catalog[placement.type_index]
        e = service_failure_probability(placement.vnfs, infra)
        if e > stype.failure_cap:
            violations.append(
                Violation(
                    "reliability",
                    si,
                    f"failure probability {e:.6g} exceeds cap {stype.failure_cap:.6g}",
                )
            )
    return violations
