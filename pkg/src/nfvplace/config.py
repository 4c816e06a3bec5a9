"""JSON experiment configuration: validation with field-path errors,
defaults, fingerprinting, and construction of the infrastructure and
service catalog objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mdp import DEFAULT_STATE_CAP, DEPARTURE_MODES
from .model import DEFAULT_PENALTY, InP, Infrastructure, ServiceType, VnfSpec
from .policy import (
    DEFAULT_ALPHA_INIT,
    DEFAULT_ESTIMATE_DISCOUNT,
    DEFAULT_GAMMA,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_NUM_ARRANGEMENTS,
    catalog_fingerprint,
)


class ConfigError(Exception):
    """A configuration file failed to parse or validate."""


@dataclass(frozen=True)
class MdpParams:
    gamma: float = DEFAULT_GAMMA
    epsilon: float | None = None
    num_arrangements: int = DEFAULT_NUM_ARRANGEMENTS
    alpha_init: float = DEFAULT_ALPHA_INIT
    estimate_discount: float = DEFAULT_ESTIMATE_DISCOUNT
    departure_mode: str = "binomial"
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    state_space_cap: int = DEFAULT_STATE_CAP
    seed: int = 0


@dataclass(frozen=True)
class SimParams:
    slots: int = 1000
    seed: int = 0


@dataclass
class ExperimentConfig:
    infrastructure: Infrastructure
    service_types: tuple[ServiceType, ...]
    mdp: MdpParams
    sim: SimParams
    fingerprint: str
    source: dict


def _need(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}: missing required field")
    return data[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
    return value


def _expand_link_table(spec, inps: list[InP], path: str, default_missing: float | None) -> np.ndarray:
    """Accepts an explicit matrix or the compact intra/inter form."""
    total = sum(len(p.servers) for p in inps)
    owner = [i for i, p in enumerate(inps) for _ in p.servers]
    if spec is None:
        if default_missing is None:
            raise ConfigError(f"{path}: missing required field")
        spec = {"default": default_missing}
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected an object")
    if "matrix" in spec:
        mat = np.asarray(spec["matrix"], dtype=float)
        if mat.shape != (total, total):
            raise ConfigError(f"{path}.matrix: expected a {total}x{total} table")
        return mat
    if "intra_inp" in spec or "inter_inp" in spec:
        intra = _number(_need(spec, "intra_inp", path), f"{path}.intra_inp")
        inter = _number(_need(spec, "inter_inp", path), f"{path}.inter_inp")
        mat = np.empty((total, total))
        for a in range(total):
            for b in range(total):
                if a == b:
                    mat[a, b] = 0.0
                elif owner[a] == owner[b]:
                    mat[a, b] = intra
                else:
                    mat[a, b] = inter
        return mat
    if "default" in spec:
        value = _number(spec["default"], f"{path}.default")
        mat = np.full((total, total), value)
        np.fill_diagonal(mat, 0.0)
        return mat
    raise ConfigError(f"{path}: expected one of matrix, intra_inp/inter_inp, default")


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a configuration dict and build the model objects."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")

    infra_spec = _need(data, "infrastructure", "")
    if not isinstance(infra_spec, dict):
        raise ConfigError("infrastructure: expected an object")
    inp_specs = _need(infra_spec, "inps", "infrastructure")
    if not isinstance(inp_specs, list) or not inp_specs:
        raise ConfigError("infrastructure.inps: expected a non-empty list")
    inps = []
    for i, p in enumerate(inp_specs):
        path = f"infrastructure.inps[{i}]"
        if not isinstance(p, dict):
            raise ConfigError(f"{path}: expected an object")
        try:
            inps.append(
                InP(
                    failure_prob=_number(_need(p, "failure_prob", path), f"{path}.failure_prob"),
                    servers=tuple(tuple(s) for s in _need(p, "servers", path)),
                )
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    alpha = _need(infra_spec, "alpha", "infrastructure")
    beta = _number(_need(infra_spec, "beta", "infrastructure"), "infrastructure.beta")
    v_base = _number(_need(infra_spec, "v_base", "infrastructure"), "infrastructure.v_base")
    dep_spec = _need(infra_spec, "deployment_cost", "infrastructure")
    link_cost = _expand_link_table(
        infra_spec.get("link_cost"), inps, "infrastructure.link_cost", 0.0
    )
    link_bw = _expand_link_table(
        infra_spec.get("link_bandwidth"), inps, "infrastructure.link_bandwidth", np.inf
    )
    try:
        infra = Infrastructure(
            inps,
            alpha=alpha,
            beta=beta,
            v_base=v_base,
            deployment_cost=dep_spec,
            link_cost=link_cost,
            link_bandwidth=link_bw,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"infrastructure: {exc}") from exc

    type_specs = _need(data, "service_types", "")
    if not isinstance(type_specs, list) or not type_specs:
        raise ConfigError("service_types: expected a non-empty list")
    types = []
    for i, t in enumerate(type_specs):
        path = f"service_types[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(f"{path}: expected an object")
        vnf_specs = _need(t, "vnfs", path)
        if not isinstance(vnf_specs, list) or not vnf_specs:
            raise ConfigError(f"{path}.vnfs: expected a non-empty list")
        try:
            vnfs = tuple(
                VnfSpec(vnf_type=_integer(_need(v, "vnf_type", f"{path}.vnfs[{k}]"), f"{path}.vnfs[{k}].vnf_type"),
                        demands=tuple(v["demands"]))
                for k, v in enumerate(vnf_specs)
            )
            stype = ServiceType(
                failure_cap=_number(_need(t, "failure_cap", path), f"{path}.failure_cap"),
                departure_prob=_number(_need(t, "departure_prob", path), f"{path}.departure_prob"),
                bandwidth=_number(_need(t, "bandwidth", path), f"{path}.bandwidth"),
                vnfs=vnfs,
                arrival_pmf=tuple(_need(t, "arrival_pmf", path)),
                admission_reward=_number(_need(t, "admission_reward", path), f"{path}.admission_reward"),
                sigma_max=_integer(_need(t, "sigma_max", path), f"{path}.sigma_max"),
                penalty=_number(t.get("penalty", DEFAULT_PENALTY), f"{path}.penalty"),
                name=str(t.get("name", f"type{i}")),
            )
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for k, v in enumerate(stype.vnfs):
            if v.vnf_type >= infra.num_vnf_types:
                raise ConfigError(
                    f"{path}.vnfs[{k}].vnf_type: {v.vnf_type} not covered by deployment_cost"
                )
            if len(v.demands) != infra.num_resources:
                raise ConfigError(
                    f"{path}.vnfs[{k}].demands: width {len(v.demands)} does not match alpha"
                )
        types.append(stype)

    mdp_spec = data.get("mdp", {})
    if not isinstance(mdp_spec, dict):
        raise ConfigError("mdp: expected an object")
    known = {
        "gamma", "epsilon", "num_arrangements", "alpha_init", "estimate_discount",
        "departure_mode", "max_iterations", "state_space_cap", "seed",
    }
    for key in mdp_spec:
        if key not in known:
            raise ConfigError(f"mdp.{key}: unknown field")
    mdp = MdpParams(
        gamma=_number(mdp_spec.get("gamma", DEFAULT_GAMMA), "mdp.gamma"),
        epsilon=(
            None if mdp_spec.get("epsilon") is None
            else _number(mdp_spec["epsilon"], "mdp.epsilon")
        ),
        num_arrangements=_integer(
            mdp_spec.get("num_arrangements", DEFAULT_NUM_ARRANGEMENTS), "mdp.num_arrangements"
        ),
        alpha_init=_number(mdp_spec.get("alpha_init", DEFAULT_ALPHA_INIT), "mdp.alpha_init"),
        estimate_discount=_number(
            mdp_spec.get("estimate_discount", DEFAULT_ESTIMATE_DISCOUNT), "mdp.estimate_discount"
        ),
        departure_mode=str(mdp_spec.get("departure_mode", "binomial")),
        max_iterations=_integer(
            mdp_spec.get("max_iterations", DEFAULT_MAX_ITERATIONS), "mdp.max_iterations"
        ),
        state_space_cap=_integer(
            mdp_spec.get("state_space_cap", DEFAULT_STATE_CAP), "mdp.state_space_cap"
        ),
        seed=_integer(mdp_spec.get("seed", 0), "mdp.seed"),
    )
    if mdp.departure_mode not in DEPARTURE_MODES:
        raise ConfigError(
            f"mdp.departure_mode: {mdp.departure_mode!r} not one of {DEPARTURE_MODES}"
        )
    if not 0.0 < mdp.gamma < 1.0:
        raise ConfigError("mdp.gamma: must lie in (0, 1)")

    sim_spec = data.get("sim", {})
    if not isinstance(sim_spec, dict):
        raise ConfigError("sim: expected an object")
    sim = SimParams(
        slots=_integer(sim_spec.get("slots", 1000), "sim.slots"),
        seed=_integer(sim_spec.get("seed", 0), "sim.seed"),
    )
    if sim.slots < 1:
        raise ConfigError("sim.slots: must be positive")

    size = 1
    for t in types:
        size *= (t.sigma_max + 1) * (t.lambda_max + 1)
    if size > mdp.state_space_cap:
        raise ConfigError(
            f"mdp.state_space_cap: the catalog spans {size} states, "
            f"above the configured cap of {mdp.state_space_cap}"
        )

    cfg = ExperimentConfig(
        infrastructure=infra,
        service_types=tuple(types),
        mdp=mdp,
        sim=sim,
        fingerprint="",
        source={},
    )
    cfg.source = serialize_config(cfg)
    cfg.fingerprint = catalog_fingerprint(
        cfg.source["infrastructure"], cfg.source["service_types"]
    )
    return cfg


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Canonical dict form; feeding it back to parse_config reproduces the
    same configuration."""
    infra = cfg.infrastructure
    return {
        "infrastructure": {
            "inps": [
                {"failure_prob": p.failure_prob, "servers": [list(s) for s in p.servers]}
                for p in infra.inps
            ],
            "alpha": [float(a) for a in infra.alpha],
            "beta": infra.beta,
            "v_base": infra.v_base,
            "deployment_cost": [[float(c) for c in row] for row in infra.deployment_cost],
            "link_cost": {"matrix": [[float(c) for c in row] for row in infra.link_cost]},
            "link_bandwidth": {
                "matrix": [[float(c) for c in row] for row in infra.link_bandwidth]
            },
        },
        "service_types": [
            {
                "name": t.name,
                "failure_cap": t.failure_cap,
                "departure_prob": t.departure_prob,
                "bandwidth": t.bandwidth,
                "vnfs": [
                    {"vnf_type": v.vnf_type, "demands": list(v.demands)} for v in t.vnfs
                ],
                "arrival_pmf": list(t.arrival_pmf),
                "admission_reward": t.admission_reward,
                "sigma_max": t.sigma_max,
                "penalty": t.penalty,
            }
            for t in cfg.service_types
        ],
        "mdp": {
            "gamma": cfg.mdp.gamma,
            "epsilon": cfg.mdp.epsilon,
            "num_arrangements": cfg.mdp.num_arrangements,
            "alpha_init": cfg.mdp.alpha_init,
            "estimate_discount": cfg.mdp.estimate_discount,
            "departure_mode": cfg.mdp.departure_mode,
            "max_iterations": cfg.mdp.max_iterations,
            "state_space_cap": cfg.mdp.state_space_cap,
            "seed": cfg.mdp.seed,
        },
        "sim": {"slots": cfg.sim.slots, "seed": cfg.sim.seed},
    }


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(data)
