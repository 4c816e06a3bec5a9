"""Reference solvers built by exhaustive enumeration.

These are deliberately naive: they search every feasible assignment with
branch and bound, so they only handle small instances, but their answers
do not depend on any of the pipeline's algorithmic machinery.  The test
suite uses them as ground truth; the command line exposes them for spot
checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .model import (
    PROB_TOL,
    Catalog,
    Infrastructure,
    PlacementPlan,
    ServicePlacement,
    VnfPlacement,
    placement_cost,
)

OBJECTIVES = ("penalized", "reliable")
DEFAULT_NODE_CAP = 2_000_000


class OracleError(Exception):
    """The instance is too large for exhaustive search."""


@dataclass(frozen=True)
class OracleResult:
    valid: bool
    objective: float
    plan: PlacementPlan | None
    failure_probs: tuple[float, ...]
    nodes: int


def failure_by_enumeration(placement: ServicePlacement, infra: Infrastructure) -> float:
    """Service failure probability by summing over every up/down pattern
    of the servers the placement touches.  Exponential in the number of
    distinct servers; keep those below about a dozen."""
    servers = sorted(
        {vp.main for vp in placement.vnfs}
        | {vp.backup for vp in placement.vnfs if vp.backup is not None}
    )
    if len(servers) > 20:
        raise OracleError(f"{len(servers)} distinct servers is too many to enumerate")
    fail_prob = 0.0
    for pattern in product((False, True), repeat=len(servers)):
        up = dict(zip(servers, pattern))
        weight = 1.0
        for srv, is_up in up.items():
            v = infra.server_failure(srv)
            weight *= (1.0 - v) if is_up else v
        works = True
        for vp in placement.vnfs:
            alive = up[vp.main] or (vp.backup is not None and up[vp.backup])
            if not alive:
                works = False
                break
        if not works:
            fail_prob += weight
    return fail_prob


def _per_vnf_options(infra: Infrastructure):
    """All (main, backup) pairs; backup None allowed.  Feasibility against
    the live remaining array is checked at expansion time, not here."""
    servers = range(infra.num_servers)
    out = []
    for m in servers:
        out.append((m, None))
        for b in servers:
            if b != m:
                out.append((m, b))
    return out


def best_placement(
    type_indices: Sequence[int],
    catalog: Catalog,
    infra: Infrastructure,
    snapshot: np.ndarray,
    *,
    objective: str = "penalized",
    node_cap: int = DEFAULT_NODE_CAP,
) -> OracleResult:
    """Exhaustive minimizer over every capacity-feasible placement of the
    given batch.

    objective "penalized": minimize total cost plus, per service, the
    type's penalty weight times the failure excess over its cap.  Every
    feasible placement competes, reliable or not.

    objective "reliable": minimize total cost over placements where every
    service meets its failure cap; reports invalid when none exists.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    snapshot = np.asarray(snapshot)
    if snapshot.shape != (infra.num_servers, infra.num_resources):
        raise ValueError("snapshot shape does not match the infrastructure")

    demands = []
    caps = []
    penalties = []
    bandwidths = []
    for t in type_indices:
        stype = catalog[t]
        demands.append([np.asarray(v.demands) for v in stype.vnfs])
        caps.append(stype.failure_cap)
        penalties.append(stype.penalty)
        bandwidths.append(stype.bandwidth)

    v_of = [infra.server_failure(s) for s in range(infra.num_servers)]
    link = infra.link_cost

    def assign_cost(svc: int, u: int, m: int, b, prev) -> float:
        stype = catalog[type_indices[svc]]
        vspec = stype.vnfs[u]
        d = demands[svc][u]
        m_inp = int(infra.server_inp[m])
        cost = float(d @ infra.unit_cost[m_inp]) + infra.deployment_cost[
            m_inp, vspec.vnf_type
        ]
        if b is not None:
            b_inp = int(infra.server_inp[b])
            cost += float(d @ infra.unit_cost[b_inp]) + infra.deployment_cost[
                b_inp, vspec.vnf_type
            ]
        if prev is not None:
            pm, pb = prev
            ends = [m] + ([b] if b is not None else [])
            starts = [pm] + ([pb] if pb is not None else [])
            for a_ in starts:
                for c_ in ends:
                    cost += bandwidths[svc] * link[a_, c_]
        return cost

    best = {
        "objective": np.inf,
        "assign": None,
        "failures": None,
        "nodes": 0,
    }
    remaining = snapshot.copy()

    def closing_penalty(svc: int, tau: float) -> float:
        excess = max(0.0, (1.0 - tau) - caps[svc])
        return penalties[svc] * excess

    def search(svc: int, u: int, acc: float, tau: float, prev, chosen: list):
        if best["nodes"] > node_cap:
            raise OracleError(f"search exceeded {node_cap} nodes")
        if svc == len(type_indices):
            failures = tuple(1.0 - t for t in chosen_taus)
            if acc < best["objective"]:
                best["objective"] = acc
                best["assign"] = [list(s) for s in chosen]
                best["failures"] = failures
            return
        stype = catalog[type_indices[svc]]
        if u == stype.num_vnfs:
            add = 0.0
            e = 1.0 - tau
            if objective == "penalized":
                add = closing_penalty(svc, tau)
            elif e > caps[svc] + PROB_TOL:
                return
            chosen_taus.append(tau)
            chosen.append(tuple(per_service))
            per_service.clear()
            search(svc + 1, 0, acc + add, 1.0, None, chosen)
            per_service.extend(chosen.pop())
            chosen_taus.pop()
            return

        d = demands[svc][u]
        options = []
        for m, b in _per_vnf_options(infra):
            if np.any(remaining[m] < d):
                continue
            if b is not None and np.any(remaining[b] < d):
                continue
            step = assign_cost(svc, u, m, b, prev)
            options.append((step, m, b))
        options.sort(key=lambda o: (o[0], o[1], -1 if o[2] is None else o[2]))

        for step, m, b in options:
            best["nodes"] += 1
            if b is None:
                f_u = v_of[m]
            else:
                f_u = v_of[m] * v_of[b]
            tau2 = tau * (1.0 - f_u)
            bound = acc + step
            if objective == "penalized":
                bound += closing_penalty(svc, tau2)
            else:
                if (1.0 - tau2) > caps[svc] + PROB_TOL:
                    continue
            if bound >= best["objective"]:
                continue
            remaining[m] -= d
            if b is not None:
                remaining[b] -= d
            per_service.append((m, b))
            search(svc, u + 1, acc + step, tau2, (m, b), chosen)
            per_service.pop()
            remaining[m] += d
            if b is not None:
                remaining[b] += d

    per_service: list = []
    chosen_taus: list = []
    search(0, 0, 0.0, 1.0, None, [])

    if best["assign"] is None:
        return OracleResult(False, np.inf, None, (), best["nodes"])

    services = []
    for svc, pairs in enumerate(best["assign"]):
        vnfs = tuple(VnfPlacement(main=m, backup=b) for m, b in pairs)
        services.append(ServicePlacement(type_index=type_indices[svc], vnfs=vnfs))
    plan = PlacementPlan(tuple(services))
    return OracleResult(
        True, best["objective"], plan, tuple(best["failures"]), best["nodes"]
    )


def penalized_objective(
    plan: PlacementPlan, catalog: Catalog, infra: Infrastructure
) -> float:
    """Cost plus failure-excess penalties of a concrete plan, the same
    objective best_placement minimizes."""
    from .model import service_cost, service_failure_probability

    total = 0.0
    for svc in plan.services:
        stype = catalog[svc.type_index]
        total += service_cost(svc, infra, catalog).total
        e = service_failure_probability(svc.vnfs, infra)
        total += stype.penalty * max(0.0, e - stype.failure_cap)
    return total
