"""Tests for the Picard solver."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from fracimp import HistoryIncomplete, HypothesisViolated, NonConvergence
from fracimp.fracops import SampledFunction
from fracimp.hypotheses import compute_nu
from fracimp.operators import ControlMap, Generator
from fracimp.solver import (
    SolverConfig,
    SolverPlan,
    g_apply,
    history_term,
    mesh_convergence,
    solve,
    verify_initial_condition,
)
from fracimp.system import (
    ImpulseMap,
    ImpulseSpec,
    Nonlinearity,
    Partition,
    StateSpace,
    SystemSpec,
    Trajectory,
    pc_norm,
)

from oracles import ml_negative

ETA = 2 / 3
SPACE = StateSpace(1)


def scalar_spec(partition=None, h=None, impulse=None, lam=-1.0, eta=ETA, z0=1.0):
    partition = Partition.single(1.0) if partition is None else partition
    h = Nonlinearity.zero(SPACE, eta=eta) if h is None else h
    impulse = ImpulseMap("zero") if impulse is None else impulse
    maps = (impulse,) * partition.m
    return SystemSpec(eta, 2.0, partition, Generator.dense([[lam]]), ControlMap.identity(1),
                      h, ImpulseSpec(maps, SPACE), [z0])


@pytest.fixture(scope="module")
def impulsive():
    part = Partition((0.0, 0.5), (0.1, 1.0))
    h = Nonlinearity("sine", {"gain": 0.1, "beta": 1.0}, eta=ETA, span=0.5, space=SPACE)
    return scalar_spec(part, h, ImpulseMap("linear", {"coeff": 0.1, "rate": 1.0}))


@pytest.fixture(scope="module")
def impulsive_solution(impulsive):
    cfg = SolverConfig(64)
    z, report = solve(impulsive, cfg=cfg)
    return cfg, z, report


def perturbed(z: Trajectory, rng: np.random.Generator, size: float) -> Trajectory:
    """``z`` plus a random weighted perturbation on every record."""
    def bump(f: SampledFunction | None) -> SampledFunction | None:
        if f is None:
            return None
        noise = size * rng.standard_normal(f.values.shape)
        if f.weight_exponent:
            noise = noise * (f.nodes - f.origin)[:, None] ** (-f.weight_exponent)
        return SampledFunction(f.origin, f.nodes, f.values + noise, f.weight_exponent,
                               f.origin_limit)
    return Trajectory(z.eta, z.partition, tuple(bump(f) for f in z.flows),
                      tuple(bump(f) for f in z.windows))


# {{{ configuration


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.mesh_per_interval == 128
        assert cfg.grading_for(0.5) == 2.0

    @pytest.mark.parametrize("kwargs, match", [
        ({"mesh_per_interval": 4}, "mesh_per_interval"),
        ({"grading": 0.5}, "grading"),
        ({"max_picard_iters": 0}, "max_picard_iters"),
        ({"fp_tolerance": 0.0}, "fp_tolerance"),
        ({"history_points": 1}, "history_points"),
    ])
    def test_rejects(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            SolverConfig(**kwargs)


# }}}


# {{{ linear benchmark


@pytest.fixture(scope="module")
def solution():
    return solve(scalar_spec(), cfg=SolverConfig(256))


class TestScalarBenchmark:
    def test_matches_mittag_leffler(self, solution):
        z, _ = solution
        t = np.linspace(0.05, 1.0, 20)
        exact = np.array([s ** (ETA - 1) * ml_negative(ETA, ETA, s**ETA) for s in t])
        np.testing.assert_allclose(z.flows[0](t)[:, 0], exact, rtol=2e-4)

    def test_linear_problem_converges_in_one_sweep(self, solution):
        _, report = solution
        assert report.converged
        assert report.iterations == 1

    def test_weighted_limit(self, solution):
        z, _ = solution
        np.testing.assert_allclose(z.flows[0].origin_limit, [1.0 / special.gamma(ETA)])

    def test_initial_condition(self, solution):
        z, _ = solution
        assert verify_initial_condition(scalar_spec(), z) <= 1e-3

    def test_zero_generator_closed_form(self):
        # with A = 0 and h = 0 the solution is t^{eta-1} z0 / Gamma(eta)
        z, _ = solve(scalar_spec(lam=0.0, z0=2.0), cfg=SolverConfig(32))
        f = z.flows[0]
        np.testing.assert_allclose(f.values[:, 0], 2.0 * f.nodes ** (ETA - 1) / special.gamma(ETA),
                                   rtol=1e-12)

    def test_probe_error_order(self):
        t = np.linspace(0.05, 1.0, 20)
        exact = np.array([s ** (ETA - 1) * ml_negative(ETA, ETA, s**ETA) for s in t])
        meshes = [32, 64, 128]
        errs = [np.max(np.abs(solve(scalar_spec(), cfg=SolverConfig(n))[0].flows[0](t)[:, 0]
                              / exact - 1.0)) for n in meshes]
        order = -np.polyfit(np.log(meshes), np.log(errs), 1)[0]
        assert order >= ETA - 0.1

    def test_nodal_values_exact(self):
        order, c, errs = mesh_convergence(scalar_spec(), None, [16, 32, 64])
        assert order == np.inf
        assert c == 0.0

    def test_linear_forcing_matches_shifted_generator(self):
        # h(z) = 0.2 z turns A = -1 into A = -0.8
        h = Nonlinearity("linear", {"gain": 0.2}, eta=ETA, space=SPACE)
        z, _ = solve(scalar_spec(h=h), cfg=SolverConfig(128))
        np.testing.assert_allclose(z.terminal(), [ml_negative(ETA, ETA, 0.8)], rtol=1e-5)

    def test_mesh_order(self):
        h = Nonlinearity("linear", {"gain": 0.2}, eta=ETA, space=SPACE)
        order, c, errs = mesh_convergence(scalar_spec(h=h), None, [16, 32, 64, 256])
        assert order >= min(ETA, 1.0 - ETA)
        assert np.all(np.diff(errs) < 0)
        assert c > 0


# }}}


# {{{ impulses and history


class TestImpulsiveSolve:
    def test_converges(self, impulsive, impulsive_solution):
        _, z, report = impulsive_solution
        assert report.converged
        assert z.complete
        assert report.contraction_estimate <= compute_nu(impulsive) + 0.05

    def test_restart_datum(self, impulsive, impulsive_solution):
        _, z, _ = impulsive_solution
        left = z.left_limit(1)
        restart = 0.1 * np.exp(-0.4) * left
        np.testing.assert_allclose(z.flows[1].origin_limit, restart / special.gamma(ETA),
                                   rtol=1e-9)

    def test_window_is_impulse(self, impulsive_solution):
        _, z, _ = impulsive_solution
        w = z.windows[0]
        expected = 0.1 * np.exp(-(w.nodes - 0.1))[:, None] * z.left_limit(1)[None, :]
        np.testing.assert_allclose(w.values, expected, rtol=1e-12)

    def test_fixed_point(self, impulsive, impulsive_solution):
        cfg, z, _ = impulsive_solution
        gz = g_apply(impulsive, None, z, cfg)
        assert pc_norm(gz.combine(z)) <= 1e-9

    def test_unique_from_any_start(self, impulsive, impulsive_solution):
        cfg, z, _ = impulsive_solution
        start = perturbed(z, np.random.default_rng(5), 3.0)
        y, _ = solve(impulsive, cfg=cfg, initial=start)
        assert pc_norm(y.combine(z)) <= 1e-8 * max(1.0, pc_norm(z))

    def test_initial_condition(self, impulsive, impulsive_solution):
        _, z, _ = impulsive_solution
        assert verify_initial_condition(impulsive, z) <= 1e-3

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), size=st.floats(1e-3, 10.0))
    def test_contraction(self, impulsive, impulsive_solution, seed, size):
        cfg, z, _ = impulsive_solution
        rng = np.random.default_rng(seed)
        a = perturbed(z, rng, size)
        b = perturbed(z, rng, size)
        ga = g_apply(impulsive, None, a, cfg)
        gb = g_apply(impulsive, None, b, cfg)
        nu = compute_nu(impulsive)
        assert pc_norm(ga.combine(gb)) <= (nu + 0.05) * pc_norm(a.combine(b))


class TestHistoryTerm:
    @pytest.fixture
    def setup(self):
        part = Partition((0.0, 0.5), (0.2, 1.0))
        spec = scalar_spec(part, impulse=ImpulseMap("affine", {"coeff": 0.0, "offset": 1.0}))
        x = 0.2 * (np.arange(1, 257) / 256) ** 2
        one = SampledFunction(0.0, x, np.ones((x.size, 1)), 1.0 - ETA, origin_limit=[0.0])
        z = Trajectory(ETA, part, (one, None), (None,))
        return spec, z

    def test_first_flow_is_empty(self, setup):
        spec, z = setup
        np.testing.assert_array_equal(history_term(spec, z, 0, [0.1]), [[0.0]])

    def test_unit_history_closed_form(self, setup):
        spec, z = setup
        t = np.array([0.55, 0.7, 1.0])
        expected = ((t - 0.5) ** (-ETA) - t ** (-ETA)) / special.gamma(1.0 - ETA)
        np.testing.assert_allclose(history_term(spec, z, 1, t)[:, 0], expected, rtol=1e-5)

    def test_times_checked(self, setup):
        spec, z = setup
        with pytest.raises(ValueError, match="history times"):
            history_term(spec, z, 1, [0.3])

    def test_needs_history(self, setup):
        spec, z = setup
        empty = Trajectory(ETA, z.partition, (None, None), (None,))
        with pytest.raises(HistoryIncomplete):
            history_term(spec, empty, 1, [0.7])


# }}}


# {{{ guards


class TestGuards:
    @pytest.fixture
    def strong(self):
        h = Nonlinearity("linear", {"gain": 3.0}, eta=ETA, space=SPACE)
        return scalar_spec(h=h)

    def test_refuses_large_nu(self, strong):
        assert compute_nu(strong) >= 1.0
        with pytest.raises(HypothesisViolated, match="nu"):
            solve(strong, cfg=SolverConfig(32))

    def test_force_runs(self, strong):
        # the linear problem is still well posed, only the guard fails
        z, report = solve(strong, cfg=SolverConfig(32, max_picard_iters=100), force=True)
        assert report.converged

    def test_budget_exhausted(self, impulsive):
        with pytest.raises(NonConvergence) as info:
            solve(impulsive, cfg=SolverConfig(32, max_picard_iters=2))
        z, report = info.value.payload
        assert report.iterations == 2
        assert not report.converged
        assert z.complete

    def test_g_needs_complete_iterate(self, impulsive):
        cfg = SolverConfig(32)
        z, _ = solve(impulsive, cfg=cfg)
        partial = Trajectory(ETA, z.partition, (z.flows[0], None), z.windows)
        with pytest.raises(HistoryIncomplete):
            g_apply(impulsive, None, partial, cfg)

    def test_plan_reuse(self, impulsive):
        cfg = SolverConfig(32)
        plan = SolverPlan.build(impulsive, cfg)
        a, _ = solve(impulsive, cfg=cfg, plan=plan)
        b, _ = solve(impulsive, cfg=cfg)
        np.testing.assert_array_equal(a.terminal(), b.terminal())


# }}}

# vim: foldmethod=marker
