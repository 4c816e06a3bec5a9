"""Slotted arrivals/departures loop and its metric accounting."""

from types import SimpleNamespace

import numpy as np
import pytest

import nfvplace as nv


def always_two_type(demand=5, d=1.0, cap=0.5):
    """A type that arrives exactly twice per slot and departs immediately."""
    return nv.ServiceType(
        failure_cap=cap,
        departure_prob=d,
        bandwidth=1.0,
        vnfs=(nv.VnfSpec(0, (demand,)),),
        arrival_pmf=(0.0, 0.0, 1.0),
        admission_reward=10.0,
        sigma_max=5,
        name="pair",
    )


class TestSampling:
    def test_arrivals_respect_support(self, reduced, rng):
        _, catalog = reduced
        for _ in range(200):
            lam = nv.sample_arrivals(rng, catalog)
            assert all(0 <= a < len(t.arrival_pmf) for a, t in zip(lam, catalog))

    def test_arrivals_deterministic_under_seed(self, reduced):
        _, catalog = reduced
        a = [nv.sample_arrivals(np.random.default_rng(9), catalog) for _ in range(5)]
        b = [nv.sample_arrivals(np.random.default_rng(9), catalog) for _ in range(5)]
        assert a == b

    def test_departures_certain_and_impossible(self):
        sure = (nv.ServiceType(0.5, 1.0, 1.0, (nv.VnfSpec(0, (1,)),), (0.5, 0.5), 1.0, 2, name="a"),)
        never = (nv.ServiceType(0.5, 1e-12, 1.0, (nv.VnfSpec(0, (1,)),), (0.5, 0.5), 1.0, 2, name="b"),)
        actives = [SimpleNamespace(type_index=0) for _ in range(4)]
        rng = np.random.default_rng(0)
        assert nv.sample_departures(rng, actives, sure) == [0, 1, 2, 3]
        assert nv.sample_departures(rng, actives, never) == []
        assert nv.sample_departures(rng, [], sure) == []


class TestBatchSemantics:
    def test_trellis_rejects_whole_slot_when_batch_infeasible(self):
        # capacity for one service, two arrive every slot: the joint batch
        # never fits, so the batch strategy admits nothing at all
        infra = nv.Infrastructure(
            [nv.InP(0.1, ((5,),))],
            alpha=[1.0],
            beta=1.0,
            v_base=0.1,
            deployment_cost=[[0.0]],
        )
        catalog = (always_two_type(),)
        report = nv.run_experiment(infra, catalog, "trellis", 50, 1)
        assert report.admission_ratio == 0.0

    def test_heuristics_admit_per_service(self):
        infra = nv.Infrastructure(
            [nv.InP(0.1, ((5,),))],
            alpha=[1.0],
            beta=1.0,
            v_base=0.1,
            deployment_cost=[[0.0]],
        )
        catalog = (always_two_type(),)
        report = nv.run_experiment(infra, catalog, "min_resource", 50, 1)
        # one of the two arrivals fits each slot; certain departure frees it
        assert report.admission_ratio == pytest.approx(0.5)

    def test_reliability_filter_blocks_unreachable_targets(self):
        infra = nv.Infrastructure(
            [nv.InP(0.3, ((50,), (50,)))],
            alpha=[1.0],
            beta=1.0,
            v_base=0.3,
            deployment_cost=[[0.0]],
        )
        catalog = (always_two_type(cap=0.01),)
        for strategy in ("trellis", "min_resource", "cera"):
            report = nv.run_experiment(infra, catalog, strategy, 30, 1)
            assert report.admission_ratio == 0.0

    def test_static_strategies_ignore_active_count_register(self):
        # sigma_max=1 would cap a policy run at one concurrent service, but
        # static placement has no such register and keeps admitting
        infra = nv.Infrastructure(
            [nv.InP(0.1, ((100,),))],
            alpha=[1.0],
            beta=1.0,
            v_base=0.1,
            deployment_cost=[[0.0]],
        )
        svc = nv.ServiceType(0.5, 0.01, 1.0, (nv.VnfSpec(0, (1,)),), (0.0, 1.0), 10.0, 1, name="s")
        report = nv.run_experiment(infra, (svc,), "trellis", 20, 3)
        assert int(report.admissions.sum()) > 5


class TestDeterminism:
    def test_same_seed_same_report(self, reduced):
        infra, catalog = reduced
        a = nv.run_experiment(infra, catalog, "trellis", 300, 17)
        b = nv.run_experiment(infra, catalog, "trellis", 300, 17)
        assert a.summary() == b.summary()
        assert np.array_equal(a.arrivals, b.arrivals)
        assert np.array_equal(a.placement_cost, b.placement_cost)

    def test_different_seeds_differ(self, reduced):
        infra, catalog = reduced
        a = nv.run_experiment(infra, catalog, "trellis", 300, 17)
        b = nv.run_experiment(infra, catalog, "trellis", 300, 18)
        assert not np.array_equal(a.arrivals, b.arrivals)


class TestConservationAndErrors:
    def test_long_run_keeps_books_balanced(self, reduced):
        # run_slot raises if idle + held capacity ever drifts from total
        infra, catalog = reduced
        for strategy in ("trellis", "min_resource", "redundant_vnf"):
            report = nv.run_experiment(infra, catalog, strategy, 200, 5)
            assert report.slots == 200

    def test_mdp_strategy_requires_policy(self, reduced):
        infra, catalog = reduced
        with pytest.raises((nv.SimulationError, ValueError)):
            nv.Simulation(infra, catalog, "mdp", policy=None, seed=0)

    def test_unknown_strategy_rejected(self, reduced):
        infra, catalog = reduced
        with pytest.raises((nv.SimulationError, ValueError)):
            nv.Simulation(infra, catalog, "oracle", seed=0)


class TestPolicyDriven:
    def test_policy_run_respects_active_register(self, reduced):
        infra, catalog = reduced
        space = nv.build_state_space(catalog)
        model = nv.TransitionModel(space, catalog)
        policy = nv.value_iteration(space, model, catalog, infra, seed=42)
        sim = nv.Simulation(infra, catalog, "mdp", policy=policy, seed=2)
        for _ in range(200):
            sim.run_slot()
            counts = [0] * len(catalog)
            for svc in sim.actives:
                counts[svc.type_index] += 1
            assert all(c <= m for c, m in zip(counts, space.sigma_max))


class TestMetricsReport:
    def _report(self):
        arrivals = np.array([[2, 1], [1, 0], [0, 2]])
        admissions = np.array([[1, 1], [1, 0], [0, 1]])
        cost = np.array([30.0, 10.0, 20.0])
        backups = np.array([2, 1, 1])
        vnfs = np.array([4, 1, 3])
        return nv.MetricsReport(2, (1, 3), arrivals, admissions, cost, backups, vnfs)

    def test_admission_ratio(self):
        assert self._report().admission_ratio == pytest.approx(4 / 6)

    def test_mean_placement_cost(self):
        assert self._report().mean_placement_cost == pytest.approx(60.0 / 4)

    def test_backups_per_vnf(self):
        assert self._report().backups_per_vnf == pytest.approx(4 / 8)

    def test_mean_admitted_chain_length(self):
        # two 1-VNF and two 3-VNF admissions
        assert self._report().mean_admitted_chain_length == pytest.approx(2.0)

    def test_by_length_grouping(self):
        by_len = self._report().admission_ratio_by_length()
        assert by_len[1] == pytest.approx(2 / 3)
        assert by_len[3] == pytest.approx(2 / 3)

    def test_cumulative_series_monotone_denominator(self, reduced):
        infra, catalog = reduced
        report = nv.run_experiment(infra, catalog, "min_resource", 100, 9)
        series = report.cumulative_ratio_series()
        assert len(series) == 100
        assert np.all((series >= 0) & (series <= 1))

    def test_csv_and_json_round_trip(self, reduced, tmp_path):
        import json

        infra, catalog = reduced
        report = nv.run_experiment(infra, catalog, "min_resource", 50, 9)
        csv_path = tmp_path / "run.csv"
        json_path = tmp_path / "run.json"
        report.to_csv(csv_path)
        report.to_json(json_path)
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 51
        payload = json.loads(json_path.read_text())
        assert payload["slots"] == 50
        assert payload["admission_ratio"] == pytest.approx(report.admission_ratio)
