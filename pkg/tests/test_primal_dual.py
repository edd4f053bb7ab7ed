import logging

import numpy as np
import pytest

from cacheroute.frankwolfe import FWConfig, frank_wolfe_variant
from cacheroute.model import DemandModel, NetworkInstance, Request, validate_strategy
from cacheroute.objective import build_context, cache_gain
from cacheroute.primal_dual import (PDConfig, dual_step, dual_step_size, initial_point, momentum_weight,
                                    primal_step, run_primal_dual)

import oracles
from conftest import diamond_instance, line_instance


class TestSchedules:
    def test_momentum(self):
        assert momentum_weight(0) == 1.0
        assert momentum_weight(2) == 0.5
        assert momentum_weight(5, momentum=False) == 1.0

    def test_dual_step_size(self):
        assert dual_step_size(0, 3.0) == 3.0
        assert dual_step_size(4, 3.0) == 1.5

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PDConfig(max_iterations=0)
        with pytest.raises(ValueError):
            PDConfig(dual_scale=-1.0)
        with pytest.raises(ValueError):
            PDConfig(inf_tol=0.0)


class TestSteps:
    def setup_method(self):
        self.ctx = build_context(*diamond_instance(cache=(1, 1, 1, 0)))

    def test_first_step_ignores_start(self):
        y_fw = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        out = primal_step(self.ctx, np.full(6, 0.3), np.zeros(8), 0, y_fw=y_fw)
        np.testing.assert_array_equal(out, y_fw)

    def test_half_step_at_t2(self):
        y_fw = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        y2 = np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(primal_step(self.ctx, y2, np.zeros(8), 2, y_fw=y_fw), 0.5 * y_fw + 0.5 * y2)

    def test_without_momentum(self):
        y_fw = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        out = primal_step(self.ctx, np.zeros(6), np.zeros(8), 7, PDConfig(momentum=False), y_fw=y_fw)
        np.testing.assert_array_equal(out, y_fw)

    def test_dual_projection_and_arithmetic(self):
        ctx = build_context(*line_instance(rate=0.4, capacity=0.7))   # overflow -0.3
        e = ctx.instance.edge_index[(1, 0)]
        assert dual_step(ctx, np.zeros(ctx.dim), np.zeros(2), 1, 1.0)[e] == 0.0
        ctx = build_context(*line_instance(rate=0.4, capacity=0.0))   # overflow 0.4
        psi = np.zeros(2)
        psi[e] = 1.0
        # beta_4 = c / sqrt(4) = 0.5
        assert dual_step(ctx, np.zeros(ctx.dim), psi, 4, 1.0)[e] == pytest.approx(1.2)

    def test_primal_step_stays_in_strategy_set(self, rng):
        for _ in range(10):
            inst, dem = oracles.random_instance(rng)
            ctx = build_context(inst, dem)
            y = initial_point(ctx)
            for t in range(5):
                y = primal_step(ctx, y, rng.random(inst.n_edges), t, PDConfig(fw=FWConfig(iterations=10)))
                assert validate_strategy(inst, dem, y, "D").ok


class TestRun:
    def test_slack_capacities_reduce_to_one_fw_solve(self, rng):
        for _ in range(5):
            inst, dem = oracles.random_instance(rng)
            inst = inst.with_capacities(np.full(inst.n_edges, 1e9))
            ctx = build_context(inst, dem)
            psis = []
            rep = run_primal_dual(inst, dem, PDConfig(max_iterations=20, stop_on_convergence=False),
                                  callback=lambda t, y, psi: psis.append(psi.copy()))
            assert all(np.all(p == 0) for p in psis)
            assert rep.inf == 0.0
            assert rep.gain == cache_gain(ctx, frank_wolfe_variant(ctx, None).y)

    def test_huge_capacities_near_optimal(self):
        edges = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)]
        inst = NetworkInstance(4, edges, [4, 2, 1, 6, 3, 5, 2, 8], [1e6] * 8, 2, [{3}, {3}], [0, 1, 1, 0])
        dem = DemandModel((Request(0, 0, 0.9), Request(1, 0, 0.5)),
                          (((0, 1, 3), (0, 2, 3)), ((0, 1, 3), (0, 2, 3))))
        rep = run_primal_dual(inst, dem)
        opt, _ = oracles.grid_opt(build_context(inst, dem), np.zeros(8))
        assert rep.converged and rep.inf == 0.0
        assert rep.gain >= (1 - 1 / np.e) * opt

    def test_invariants_along_the_run(self, rng):
        for _ in range(5):
            inst, dem = oracles.random_instance(rng, capacity_scale=0.3)
            seen = []

            def check(t, y, psi):
                assert np.all(psi >= 0)
                assert validate_strategy(inst, dem, y, "D").ok
                seen.append(t)

            rep = run_primal_dual(inst, dem, PDConfig(max_iterations=60), callback=check)
            assert rep.iterations == len(rep.records) <= 60
            assert seen and np.all(rep.psi >= 0)
            assert validate_strategy(inst, dem, rep.strategy, "D").ok

    def test_deterministic(self, rng):
        inst, dem = oracles.random_instance(rng, n_nodes=7, capacity_scale=0.3)
        a = run_primal_dual(inst, dem, PDConfig(max_iterations=50))
        b = run_primal_dual(inst, dem, PDConfig(max_iterations=50))
        assert [r.__dict__ for r in a.records] == [r.__dict__ for r in b.records]
        assert a.strategy.vector.tobytes() == b.strategy.vector.tobytes()

    def test_convergence_rule(self, rng):
        inst, dem = oracles.random_instance(rng, n_nodes=6, capacity_scale=0.5)
        rep = run_primal_dual(inst, dem, PDConfig(max_iterations=300))
        if rep.converged:
            last, prev = rep.records[-1], rep.records[-2]
            assert last.inf <= 1e-3 and abs(last.gain - prev.gain) < 1e-3

    def test_fixed_scale_is_respected(self, rng):
        inst, dem = oracles.random_instance(rng, capacity_scale=0.2)
        rep = run_primal_dual(inst, dem, PDConfig(max_iterations=10, dual_scale=0.5))
        assert rep.notes == {"dual_scale": 0.5, "restarts": 0}

    def test_restart_is_logged(self, caplog):
        # a huge fixed-by-adaptation scale on a very tight instance drives L negative
        inst, dem = diamond_instance(capacity=0.01, rate=1.0, weights=[1.0] * 8)
        with caplog.at_level(logging.INFO, logger="cacheroute.primal_dual"):
            rep = run_primal_dual(inst, dem, PDConfig(max_iterations=50))
        assert "initialized" in caplog.text
        if rep.notes["restarts"]:
            assert "halving" in caplog.text
        assert rep.records[-1].lagrangian >= 0 or rep.notes["restarts"] == PDConfig().max_restarts
