"""Tests for the problem data model and trajectories."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fracimp import DimensionMismatch, EmptyInterval, IndexOutOfRange, TimeOutsideWindow
from fracimp.fracops import SampledFunction
from fracimp.operators import ControlMap, Generator
from fracimp.system import (
    ImpulseMap,
    ImpulseSpec,
    Nonlinearity,
    Partition,
    StateSpace,
    SystemSpec,
    Trajectory,
    impulse_apply,
    lq_norm,
    pc_norm,
    segment_norms,
)

ETA = 2 / 3
# keeps products clear of subnormal underflow
MODERATE = st.floats(-10.0, 10.0).filter(lambda a: a == 0 or abs(a) > 1e-50)


@pytest.fixture(scope="module")
def two_interval():
    return Partition((0.0, 0.6), (0.3, 1.0))


@pytest.fixture(scope="module")
def scalar_spec(two_interval):
    space = StateSpace(1)
    imp = ImpulseSpec((ImpulseMap("linear", {"coeff": 0.5, "rate": 1.0}),), space)
    h = Nonlinearity.zero(space, eta=ETA)
    return SystemSpec(ETA, 2.0, two_interval, Generator.dense([[-1.0]]),
                      ControlMap.identity(1), h, imp, [1.0])


def power_trajectory(part: Partition, eta: float, v, n: int = 32,
                     window_scale: float = 1.0) -> Trajectory:
    """Samples of :math:`(t - p_r)^{\\eta-1}v` on every flow and of a multiple
    of ``v`` on every window."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    flows = []
    for r in range(part.m + 1):
        lo, hi = part.flow(r)
        x = lo + (hi - lo) * (np.arange(1, n + 1) / n) ** 2
        x[-1] = hi
        flows.append(SampledFunction(lo, x, (x - lo)[:, None] ** (eta - 1.0) * v[None, :],
                                     1.0 - eta, v))
    windows = []
    for r in range(1, part.m + 1):
        lo, hi = part.window(r)
        x = np.linspace(lo, hi, 9)[1:]
        windows.append(SampledFunction(lo, x, np.repeat(window_scale * v[None, :], x.size, axis=0)))
    return Trajectory(eta, part, tuple(flows), tuple(windows))


# {{{ partition and state space


class TestPartition:
    def test_accessors(self, two_interval):
        assert two_interval.m == 1
        assert two_interval.a == 1.0
        assert two_interval.tau == pytest.approx(0.4)
        assert two_interval.flow(1) == (0.6, 1.0)
        assert two_interval.window(1) == (0.3, 0.6)
        assert two_interval.segment_length(0) == pytest.approx(0.6)

    def test_single(self):
        part = Partition.single(2.0)
        assert (part.m, part.a, part.tau) == (0, 2.0, 2.0)

    @pytest.mark.parametrize("p, t", [((0.0, 0.5), (0.6, 1.0)), ((0.0, 0.3), (0.3, 1.0)),
                                       ((0.0,), (0.0,))])
    def test_rejects_non_strict(self, p, t):
        with pytest.raises(ValueError, match="strictly increasing"):
            Partition(p, t)

    def test_starts_at_zero(self):
        with pytest.raises(ValueError, match="start at 0"):
            Partition((0.1,), (1.0,))

    def test_index_ranges(self, two_interval):
        with pytest.raises(IndexOutOfRange):
            two_interval.flow(2)
        with pytest.raises(IndexOutOfRange):
            two_interval.window(0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 10.0), min_size=4, max_size=8, unique=True),
           st.randoms(use_true_random=False))
    def test_shuffled_times_rejected(self, times, rnd):
        ordered = sorted(times)
        merged = ordered[: len(ordered) // 2 * 2]
        shuffled = list(merged)
        rnd.shuffle(shuffled)
        seq = [0.0] + shuffled
        if len(seq) % 2:
            seq = seq[:-1]
        assume(seq != sorted(seq))
        p, t = tuple(seq[0::2]), tuple(seq[1::2])
        with pytest.raises(ValueError, match="strictly increasing"):
            Partition(p, t)


class TestStateSpace:
    def test_plain(self):
        space = StateSpace(3)
        np.testing.assert_array_equal(space.one, np.ones(3))
        np.testing.assert_array_equal(space.pointwise(np.sin, np.zeros(3)), np.zeros(3))

    def test_spectral_constant(self):
        space = StateSpace.of(Generator.heat(8))
        # coefficients of 1 are 2 sqrt(2/pi)/l for odd l
        l = np.arange(1, 9)
        expected = np.where(l % 2 == 1, 2.0 * np.sqrt(2.0 / np.pi) / l, 0.0)
        np.testing.assert_allclose(space.one, expected, atol=1e-6)

    def test_basis_size(self):
        from fracimp.operators import SpectralBasis
        with pytest.raises(DimensionMismatch):
            StateSpace(3, SpectralBasis.sine(4))


# }}}


# {{{ nonlinearities and impulses


class TestNonlinearity:
    def test_zero(self):
        h = Nonlinearity.zero(StateSpace(2), eta=ETA)
        assert h.is_zero
        np.testing.assert_array_equal(h([0.1, 0.2], np.ones((2, 2))), np.zeros((2, 2)))
        assert (h.kappa, h.kappa_tilde) == (0.0, 0.0)

    def test_identity(self):
        h = Nonlinearity("linear", {"gain": 1.0}, eta=ETA, space=StateSpace(1))
        z = np.array([[0.3], [-2.0]])
        np.testing.assert_array_equal(h([0.1, 0.5], z), z)
        assert h.kappa == 1.0
        assert h.kappa_tilde == np.inf

    def test_example2_constant_state(self):
        delta, beta, c = 0.01, 1.0, 0.7
        h = Nonlinearity("example2", {"delta": delta, "beta": beta}, eta=ETA, space=StateSpace(1))
        sigma = np.array([0.05, 0.4, 1.0])
        out = h(sigma, np.full((3, 1), c))[:, 0]
        np.testing.assert_allclose(out, 1.0 + sigma**2 + delta * sigma**beta * (c + np.sin(c)),
                                   rtol=1e-15)

    def test_example2_constants(self):
        h = Nonlinearity("example2", {"delta": -0.03, "beta": 1.0}, eta=ETA, span=1.0,
                         space=StateSpace(1))
        assert h.kappa == pytest.approx(0.06)
        assert h.kappa_tilde == pytest.approx(0.06)
        assert h.d == pytest.approx(0.06)

    def test_span_scaling(self):
        h = Nonlinearity("sine", {"gain": 1.0, "beta": 1.0}, eta=0.5, span=0.25,
                         space=StateSpace(1))
        assert h.kappa == pytest.approx(0.25)
        assert h.kappa_tilde == pytest.approx(0.5)

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="unknown parameters"):
            Nonlinearity("sine", {"gian": 1.0}, eta=ETA)

    def test_offset_growth(self):
        h = Nonlinearity("affine", {"gain": 0.0, "offset": 2.0}, eta=ETA, space=StateSpace(4))
        np.testing.assert_allclose(h.varsigma([0.3]), [4.0])

    @pytest.mark.parametrize("gain", [6.1e-161, 1e-200, 1e-300])
    def test_tiny_gain_certifies(self, gain):
        # squared probe differences underflow unless norms are rescaled
        h = Nonlinearity("linear", {"gain": gain}, eta=0.5, span=0.9, space=StateSpace(3))
        assert h.kappa == pytest.approx(gain)

    def test_dimension_check(self):
        h = Nonlinearity("sine", {"gain": 1.0, "beta": 1.0}, eta=ETA, space=StateSpace(2))
        with pytest.raises(DimensionMismatch):
            h([0.1], np.ones((1, 3)))

    @settings(max_examples=40, deadline=None)
    @given(gain=st.floats(-2.0, 2.0), beta=st.floats(0.4, 2.0),
           sigma=st.floats(1e-4, 1.0),
           z=st.lists(st.floats(-50, 50), min_size=2, max_size=2),
           y=st.lists(st.floats(-50, 50), min_size=2, max_size=2))
    def test_lipschitz_certificate(self, gain, beta, sigma, z, y):
        h = Nonlinearity("example2", {"delta": gain, "beta": beta}, eta=ETA,
                         space=StateSpace(2))
        dz = np.linalg.norm(np.subtract(z, y))
        dh = np.linalg.norm(h([sigma], [z]) - h([sigma], [y]))
        # the offset 1 + sigma^2 rounds at the level of machine epsilon
        assert dh <= h.kappa * dz * (1 + 1e-12) + 1e-14
        if np.isfinite(h.kappa_tilde):
            assert dh <= h.kappa_tilde * sigma ** (1 - ETA) * dz * (1 + 1e-12) + 1e-14


class TestImpulses:
    def test_zero_map(self, two_interval):
        space = StateSpace(2)
        imp = ImpulseSpec((ImpulseMap("zero"),), space)
        spec = SystemSpec(ETA, 2.0, two_interval, Generator.dense(-np.eye(2)),
                          ControlMap.identity(2), Nonlinearity.zero(space, eta=ETA), imp, [1, 1])
        np.testing.assert_array_equal(impulse_apply(spec, 1, 0.5, np.array([3.0, 4.0])), [0, 0])

    def test_linear_map(self, scalar_spec):
        out = impulse_apply(scalar_spec, 1, 0.3 + 1e-12, np.array([2.0]))
        np.testing.assert_allclose(out, [1.0], rtol=1e-10)

    def test_window_checks(self, scalar_spec):
        with pytest.raises(TimeOutsideWindow):
            impulse_apply(scalar_spec, 1, 0.3, np.array([1.0]))
        with pytest.raises(TimeOutsideWindow):
            impulse_apply(scalar_spec, 1, 0.7, np.array([1.0]))
        with pytest.raises(IndexOutOfRange):
            impulse_apply(scalar_spec, 2, 0.5, np.array([1.0]))

    def test_default_constants(self):
        f = ImpulseMap("sine", {"coeff": -0.4, "rate": 2.0})
        assert (f.b, f.c) == (0.4, 0.4)
        g = ImpulseMap("affine", {"coeff": 0.2, "offset": 1.0})
        assert g.c == np.inf

    def test_declared_constant_certified(self):
        with pytest.raises(ValueError, match="Lipschitz"):
            ImpulseSpec((ImpulseMap("linear", {"coeff": 0.8}, b=0.5, c=1.0),), StateSpace(1))

    @pytest.mark.parametrize("coeff", [6.1e-161, 1e-200, 1e-300])
    def test_tiny_coefficient_certifies(self, coeff):
        imp = ImpulseSpec((ImpulseMap("linear", {"coeff": coeff}),), StateSpace(3))
        assert imp.b[0] == pytest.approx(coeff)

    @settings(max_examples=40, deadline=None)
    @given(coeff=st.floats(-1.0, 1.0), t=st.floats(0.3, 0.6, exclude_min=True),
           z=st.lists(st.floats(-10, 10), min_size=1, max_size=1),
           y=st.lists(st.floats(-10, 10), min_size=1, max_size=1))
    def test_lipschitz_bound(self, two_interval, coeff, t, z, y):
        space = StateSpace(1)
        imp = ImpulseSpec((ImpulseMap("sine", {"coeff": coeff, "rate": 1.0}),), space)
        spec = SystemSpec(ETA, 2.0, two_interval, Generator.dense([[-1.0]]),
                          ControlMap.identity(1), Nonlinearity.zero(space, eta=ETA), imp, [1.0])
        diff = impulse_apply(spec, 1, t, np.array(z)) - impulse_apply(spec, 1, t, np.array(y))
        assert np.linalg.norm(diff) <= imp.b[0] * abs(z[0] - y[0]) * (1 + 1e-12) + 1e-300


# }}}


# {{{ system spec


class TestSystemSpec:
    def test_restart(self, scalar_spec):
        np.testing.assert_array_equal(scalar_spec.restart_value(0, None), [1.0])
        np.testing.assert_allclose(scalar_spec.restart_value(1, np.array([2.0])),
                                   [np.exp(-0.3)], rtol=1e-14)

    def test_attaches_window(self, scalar_spec):
        assert scalar_spec.A.tau == pytest.approx(0.4)
        assert scalar_spec.M == 1.0

    def test_inadmissible_q_is_soft(self, two_interval):
        space = StateSpace(1)
        spec = SystemSpec(0.5, 4.0, two_interval, Generator.dense([[-1.0]]),
                          ControlMap.identity(1), Nonlinearity.zero(space, eta=0.5),
                          ImpulseSpec((ImpulseMap("zero"),), space), [1.0])
        assert not spec.q_admissible

    def test_impulse_count(self, two_interval):
        space = StateSpace(1)
        with pytest.raises(ValueError, match="impulse maps"):
            SystemSpec(ETA, 2.0, two_interval, Generator.dense([[-1.0]]),
                       ControlMap.identity(1), Nonlinearity.zero(space, eta=ETA),
                       ImpulseSpec((), space), [1.0])

    def test_initial_dimension(self):
        space = StateSpace(1)
        with pytest.raises(DimensionMismatch):
            SystemSpec(ETA, 2.0, Partition.single(1.0), Generator.dense([[-1.0]]),
                       ControlMap.identity(1), Nonlinearity.zero(space, eta=ETA),
                       ImpulseSpec((), space), [1.0, 2.0])

    def test_varsigma_norm(self):
        space = StateSpace(1)
        h = Nonlinearity("affine", {"gain": 0.0, "offset": 3.0}, eta=ETA, space=space)
        spec = SystemSpec(ETA, 2.0, Partition.single(1.0), Generator.dense([[-1.0]]),
                          ControlMap.identity(1), h, ImpulseSpec((), space), [1.0])
        assert spec.varsigma_lq() == pytest.approx(3.0)


# }}}


# {{{ trajectories and norms


class TestTrajectory:
    def test_zero_norm(self, two_interval):
        z = power_trajectory(two_interval, ETA, [0.0])
        assert pc_norm(z) == 0.0

    def test_weight_cancels_singularity(self):
        z = power_trajectory(Partition.single(1.0), 0.5, [3.0, 4.0])
        assert pc_norm(z) == pytest.approx(5.0, rel=1e-14)

    def test_windows_weighted_from_segment_start(self, two_interval):
        z = power_trajectory(two_interval, ETA, [1.0], window_scale=10.0)
        norms = segment_norms(z)
        assert norms[0] == pytest.approx(10.0 * 0.6 ** (1 - ETA), rel=1e-14)
        assert norms[1] == pytest.approx(1.0, rel=1e-14)

    def test_incomplete(self, two_interval):
        z = power_trajectory(two_interval, ETA, [1.0])
        partial = Trajectory(ETA, two_interval, (z.flows[0], None), z.windows)
        assert not partial.complete
        with pytest.raises(EmptyInterval):
            pc_norm(partial)

    def test_left_limit_and_terminal(self, two_interval):
        z = power_trajectory(two_interval, ETA, [2.0])
        np.testing.assert_allclose(z.left_limit(1), [2.0 * 0.3 ** (ETA - 1)])
        np.testing.assert_allclose(z.terminal(), [2.0 * 0.4 ** (ETA - 1)])

    def test_rows_sorted(self, two_interval):
        z = power_trajectory(two_interval, ETA, [1.0])
        rows = list(z.rows())
        times = [r[0] for r in rows]
        assert times == sorted(times)
        assert {r[2] for r in rows} == {"flow", "impulse"}
        assert [r[1] for r in rows if r[2] == "impulse"] == [1] * 8

    def test_record_must_cover_flow(self, two_interval):
        f = SampledFunction(0.0, [0.1, 0.2], [[1.0], [1.0]])
        with pytest.raises(ValueError, match="does not sample"):
            Trajectory(ETA, two_interval, (f, None), (None,))

    @settings(max_examples=40, deadline=None)
    @given(alpha=MODERATE, v=MODERATE, w=MODERATE)
    def test_norm_is_a_norm(self, alpha, v, w):
        part = Partition((0.0, 0.6), (0.3, 1.0))
        z = power_trajectory(part, ETA, [v])
        rng_vals = power_trajectory(part, ETA, [w])
        y = rng_vals.combine(z.scaled(0.0), 1.0, 0.0)
        scaled = pc_norm(z.scaled(alpha))
        assert scaled == pytest.approx(abs(alpha) * pc_norm(z), rel=1e-12, abs=1e-300)
        assert pc_norm(z.combine(y, 1.0, 1.0)) <= pc_norm(z) + pc_norm(y) + 1e-12


class TestLqNorm:
    def test_constant(self):
        x = np.linspace(0.1, 2.0, 20)
        assert lq_norm(np.full((20, 2), [3.0, 4.0]), x, 2.0, 0.0) == pytest.approx(5.0 * 2.0**0.5)

    def test_linear(self):
        x = np.linspace(0.0, 1.0, 65)[1:]
        # exact for piecewise-linear data with q = 2 after four-point Gauss
        assert lq_norm(x[:, None], x, 2.0, 0.0) == pytest.approx((1 / 3) ** 0.5, rel=1e-4)


# }}}

# vim: foldmethod=marker
