"""Tests for the hypothesis constants and report."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from fracimp import HypothesisViolated
from fracimp.cli import config_path, load_config
from fracimp.hypotheses import (
    check_all,
    compute_aleph,
    compute_lemma3_constants,
    compute_mainass,
    compute_mu,
    compute_nu,
    compute_varrho,
    control_lq_norm,
)
from fracimp.fracops import SampledFunction, mittag_leffler
from fracimp.operators import ControlMap, Generator
from fracimp.solver import SolverConfig, solve
from fracimp.system import (
    ImpulseMap,
    ImpulseSpec,
    Nonlinearity,
    Partition,
    StateSpace,
    SystemSpec,
    pc_norm,
)

SPACE = StateSpace(1)


def make_spec(eta=0.5, q=2.5, p=(0.0, 0.5), t=(0.4, 1.0), kappa=0.1, b=0.2,
              h_kind="linear", lam=-1.0, control=None):
    part = Partition(p, t)
    span = max(part.segment_length(r) for r in range(part.m + 1))
    if h_kind == "linear":
        h = Nonlinearity("linear", {"gain": kappa}, eta=eta, span=span, space=SPACE)
    else:
        h = Nonlinearity("sine", {"gain": kappa, "beta": 1.0}, eta=eta, span=span, space=SPACE)
    imp = ImpulseSpec(tuple(ImpulseMap("linear", {"coeff": b}) for _ in range(part.m)), SPACE)
    ctrl = ControlMap.identity(1) if control is None else control
    return SystemSpec(eta, q, part, Generator.dense([[lam]]), ctrl, h, imp, [1.0])


def nu_by_hand_one_impulse(eta, kappa, b, p1, t1, t2):
    """Four-part contraction constant for ``m = 1`` and ``M = 1``, with the
    impulse-history sum empty."""
    g = special.gamma
    first = b / (g(eta) * t1 ** (1 - eta))
    nonlinear = kappa * g(eta) / g(2 * eta) * (t2 - p1) ** eta
    history = (t1 / (p1 - t1)) ** eta / (g(1 + eta) * g(1 - eta))
    carry = b * (t2 - p1) ** (1 - eta) / t1 ** (1 - eta)
    flow0 = kappa * g(eta) / g(2 * eta) * t1**eta
    return max(flow0, first + nonlinear + history + carry)


# {{{ nu and mu


class TestNu:
    def test_semigroup_bound(self):
        assert make_spec().M == 1.0

    def test_matches_hand_formula(self):
        spec = make_spec()
        assert compute_nu(spec) == pytest.approx(
            nu_by_hand_one_impulse(0.5, 0.1, 0.2, 0.5, 0.4, 1.0), rel=1e-12)

    def test_hand_value(self):
        # the history term 4/pi dominates this partition
        expected = (0.2 / (math.sqrt(math.pi) * math.sqrt(0.4)) + 0.1 * math.sqrt(math.pi * 0.5)
                    + 4.0 / math.pi + 0.2 * math.sqrt(0.5 / 0.4))
        assert compute_nu(make_spec()) == pytest.approx(expected, rel=1e-12)

    def test_single_interval(self):
        spec = make_spec(p=(0.0,), t=(2.0,), kappa=0.3)
        expected = 0.3 * special.gamma(0.5) / special.gamma(1.0) * 2.0**0.5
        assert compute_nu(spec) == pytest.approx(expected, rel=1e-14)

    def test_degenerate_zero(self):
        assert compute_nu(make_spec(p=(0.0,), t=(1.0,), kappa=0.0)) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(k1=st.floats(0.0, 2.0), dk=st.floats(1e-3, 2.0), b=st.floats(0.0, 1.0),
           eta=st.floats(0.3, 0.9))
    def test_increasing_in_kappa(self, k1, dk, b, eta):
        # a short window keeps the nonlinearity term in the maximum
        lo = make_spec(eta=eta, t=(0.1, 1.0), p=(0.0, 0.8), kappa=k1, b=b)
        hi = make_spec(eta=eta, t=(0.1, 1.0), p=(0.0, 0.8), kappa=k1 + dk, b=b)
        assert compute_nu(hi) > compute_nu(lo)

    @settings(max_examples=40, deadline=None)
    @given(b=st.floats(0.0, 0.5), kappa=st.floats(0.0, 1.0),
           cut=st.lists(st.floats(0.05, 0.95), min_size=2, max_size=4, unique=True))
    def test_doubling_b_never_decreases(self, b, kappa, cut):
        times = sorted(cut)
        times = times[: len(times) // 2 * 2]
        p = (0.0,) + tuple(times[1::2])
        t = tuple(times[0::2]) + (1.0,)
        lo = make_spec(p=p, t=t, kappa=kappa, b=b)
        hi = make_spec(p=p, t=t, kappa=kappa, b=2 * b)
        assert compute_nu(hi) >= compute_nu(lo)


class TestMu:
    def test_no_impulses(self):
        assert compute_mu(make_spec(p=(0.0,), t=(1.0,))) == 0.0

    def test_is_impulse_part_of_nu(self):
        spec = make_spec()
        nonlinear = 0.1 * special.gamma(0.5) * 0.5**0.5
        assert compute_mu(spec) == pytest.approx(compute_nu(spec) - nonlinear, rel=1e-12)

    def test_history_survives_zero_b(self):
        # the history sum carries no impulse constant
        assert compute_mu(make_spec(b=0.0)) == pytest.approx(4.0 / math.pi, rel=1e-12)


# }}}


# {{{ perturbation constants


class TestPerturbationConstants:
    def test_varrho_closed_form(self):
        spec = make_spec(eta=0.5, q=3.0, p=(0.0,), t=(1.0,))
        expected = 4.0 ** (2.0 / 3.0) / math.sqrt(math.pi)
        assert compute_varrho(spec) == pytest.approx(expected, rel=1e-14)

    def test_varrho_needs_q(self):
        with pytest.raises(HypothesisViolated, match="q > 1/eta"):
            compute_varrho(make_spec(eta=0.5, q=1.5))

    def test_lambda_bounds_solution(self):
        spec = make_spec(eta=2 / 3, q=2.0, kappa=0.05, b=0.1, h_kind="sine",
                         p=(0.0, 0.5), t=(0.1, 1.0))
        cfg = SolverConfig(64)
        z, _ = solve(spec, cfg=cfg)
        lam, varrho, mu = compute_lemma3_constants(spec, trajectory=z, cfg=cfg)
        gron = float(mittag_leffler(2 / 3, spec.M * spec.h.kappa_tilde * spec.partition.tau))
        assert pc_norm(z) <= 1.05 * lam * gron
        assert varrho == compute_varrho(spec)
        assert mu == compute_mu(spec)

    def test_control_norm(self):
        spec = make_spec(eta=2 / 3, q=2.0, p=(0.0,), t=(1.0,))
        x = np.linspace(0.0, 1.0, 65)
        u = SampledFunction(0.0, x[1:], np.full((64, 1), 3.0))
        assert control_lq_norm(spec, u, SolverConfig(32)) == pytest.approx(3.0, rel=1e-12)
        assert control_lq_norm(spec, None) == 0.0


# }}}


# {{{ controllability


class TestAleph:
    def test_identity(self):
        assert compute_aleph(make_spec()) == (1.0, 0.0)

    def test_rank_deficient_has_defect(self):
        loaded = load_config(config_path("counterexample-rankdef.cfg"))
        aleph, defect = compute_aleph(loaded.spec)
        assert np.isfinite(aleph)
        assert defect > 0.1

    def test_mainass_infinite_without_tilde_kappa(self):
        assert compute_mainass(make_spec(kappa=0.1), 1.0) == math.inf

    def test_mainass_scales_with_aleph(self):
        spec = make_spec(eta=2 / 3, q=2.0, kappa=0.01, b=0.1, h_kind="sine",
                         p=(0.0, 0.5), t=(0.1, 1.0))
        assert compute_mainass(spec, 2.0) == pytest.approx(2.0 * compute_mainass(spec, 1.0))


# }}}


# {{{ reports


class TestCheckAll:
    def test_example2_passes(self):
        report = check_all(load_config(config_path("example2.cfg")).spec)
        assert report.all_pass, report.failures()
        assert report.mainass_value < 1.0
        assert report.aleph == 1.0
        assert report.checks["H8"]["synthesis_defect"] == 0.0

    def test_bad_q(self):
        report = check_all(load_config(config_path("example2-bad-q.cfg")).spec)
        # q = 4 lies above 1/(1 - eta) = 2 at eta = 1/2
        assert set(report.failures()) == {"H0", "H8"}
        assert report.checks["H0"]["value"] == 4.0

    def test_document_keys(self):
        doc = check_all(make_spec(eta=2 / 3, q=2.0, kappa=0.01, h_kind="sine",
                                  p=(0.0, 0.5), t=(0.1, 1.0))).to_document()
        expected = {f"H{i}" for i in range(9)} | {"nu", "mu", "lambda", "varrho", "mainass",
                                                  "aleph"}
        assert set(doc) == expected
        assert set(doc["H4"]) == {"pass", "value", "threshold"}

    def test_large_nu_reported(self):
        report = check_all(make_spec(kappa=5.0))
        assert not report.checks["H4"]["pass"]
        assert math.isnan(report.lambda_cap)


# }}}

# vim: foldmethod=marker
