"""Constants and checks of the existence and controllability hypotheses.

Index conventions follow :class:`fracimp.system.Partition`:
:math:`p_0..p_m` and :math:`t_1..t_{m+1}`, with flow lengths
:math:`T_r = t_{r+1} - p_r` and :math:`\\tau = \\max_r T_r`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from fracimp.errors import HypothesisViolated
from fracimp.fracops import SampledFunction, mittag_leffler
from fracimp.operators import ControlKind
from fracimp.solver import SolverConfig, SolverPlan, solve
from fracimp.system import SystemSpec, Trajectory, lq_norm, segment_norms

__all__ = [
    "HypothesisReport",
    "check_all",
    "compute_aleph",
    "compute_lemma3_constants",
    "compute_mainass",
    "compute_mu",
    "compute_nu",
    "compute_varrho",
    "control_lq_norm",
]

#: mesh used by :func:`check_all` for the quantities that need a solve
_CHECK_CONFIG = SolverConfig(mesh_per_interval=64)


# {{{ helpers


class _Times:
    """Partition accessors with one-based impulse indices."""

    def __init__(self, spec: SystemSpec) -> None:
        self.part = spec.partition
        self.m = self.part.m

    def p(self, r: int) -> float:
        return self.part.p[r]

    def t(self, r: int) -> float:
        return self.part.t[r - 1]

    def flow(self, r: int) -> float:
        return self.t(r + 1) - self.p(r)


def _history_sum(spec: SystemSpec, x: _Times, r: int) -> float:
    """:math:`\\sum_{k<r}((t_{k+1}-p_k)/(p_r-t_{k+1}))^\\eta`."""
    eta = spec.eta.eta
    return sum(((x.t(k + 1) - x.p(k)) / (x.p(r) - x.t(k + 1))) ** eta for k in range(r))


def _impulse_history_sum(spec: SystemSpec, x: _Times, r: int, const) -> float:
    """:math:`\\sum_{k \\le r-2} \\text{const}_{k+1}T_r /
    ((t_{k+1}-p_k)^{1-\\eta}(p_r-p_{k+1})^\\eta)`."""
    eta = spec.eta.eta
    return sum(const[k] * x.flow(r) / ((x.t(k + 1) - x.p(k)) ** (1.0 - eta)
                                       * (x.p(r) - x.p(k + 1)) ** eta)
               for k in range(r - 1))


def _mu_terms(spec: SystemSpec) -> list[float]:
    """Impulse and history part of :math:`\\nu` for ``r = 1..m``."""
    eta = spec.eta.eta
    M = spec.M
    b = spec.impulses.b
    x = _Times(spec)
    out = []
    for r in range(1, x.m + 1):
        gap = (x.t(r) - x.p(r - 1)) ** (1.0 - eta)
        val = M * b[r - 1] / (special.gamma(eta) * gap)
        val += M / (special.gamma(1.0 + eta) * special.gamma(1.0 - eta)) * (
            _history_sum(spec, x, r) + _impulse_history_sum(spec, x, r, b))
        val += M * b[r - 1] * x.flow(r) ** (1.0 - eta) / gap
        out.append(float(val))
    return out


def _gronwall(spec: SystemSpec, rate: float) -> float:
    """:math:`E_\\eta(M \\cdot \\text{rate} \\cdot \\tau)`."""
    if not np.isfinite(rate):
        return math.inf
    return float(mittag_leffler(spec.eta.eta, spec.M * rate * spec.partition.tau))


def _holder_factor(spec: SystemSpec) -> float:
    """:math:`((q-1)/(q\\eta-1))^{(q-1)/q}`."""
    q = spec.q
    eta = spec.eta.eta
    if not q * eta > 1.0:
        raise HypothesisViolated(f"need q > 1/eta = {1.0 / eta:.6g}: got q = {q}")
    return ((q - 1.0) / (q * eta - 1.0)) ** ((q - 1.0) / q)


# }}}


# {{{ constants


def compute_nu(spec: SystemSpec) -> float:
    """Contraction constant :math:`\\nu`.

    For ``r = 1..m`` it is the four-part sum of the impulse, nonlinearity
    and history contributions; flow 0 contributes its nonlinearity term
    :math:`M\\kappa\\Gamma(\\eta)t_1^\\eta/\\Gamma(2\\eta)` alone, which is
    all that remains when ``m = 0``.
    """
    eta = spec.eta.eta
    x = _Times(spec)
    kappa_term = [spec.M * spec.h.kappa * special.gamma(eta) / special.gamma(2.0 * eta)
                  * x.flow(r) ** eta for r in range(x.m + 1)]
    mu = _mu_terms(spec)
    return float(max([kappa_term[0]] + [k + m for k, m in zip(kappa_term[1:], mu)]))


def compute_mu(spec: SystemSpec) -> float:
    """:math:`\\mu`, the impulse and history part of :math:`\\nu`
    (zero when ``m = 0``)."""
    return float(max(_mu_terms(spec), default=0.0))


def compute_varrho(spec: SystemSpec) -> float:
    """:math:`\\varrho = M\\Gamma(\\eta)^{-1}((q-1)/(q\\eta-1))^{(q-1)/q}\\tau^{1-1/q}`.

    :raises HypothesisViolated: if :math:`q \\le 1/\\eta`.
    """
    return float(spec.M / special.gamma(spec.eta.eta) * _holder_factor(spec)
                 * spec.partition.tau ** (1.0 - 1.0 / spec.q))


def control_lq_norm(spec: SystemSpec, u: SampledFunction | None,
                    cfg: SolverConfig | None = None) -> float:
    """:math:`\\|Bu\\|_{L^q}` over the flow intervals, from samples on the
    solver mesh."""
    if u is None:
        return 0.0
    plan = SolverPlan.build(spec, cfg or _CHECK_CONFIG)
    total = 0.0
    for r, x in enumerate(plan.meshes):
        bu = spec.B.apply(u(x[1:], order=2))
        total += lq_norm(bu, x[1:], spec.q, x[0]) ** spec.q
    return total ** (1.0 / spec.q)


def compute_lemma3_constants(spec: SystemSpec, u: SampledFunction | None = None,
                             trajectory: Trajectory | None = None,
                             cfg: SolverConfig | None = None) -> tuple[float, float, float]:
    """Return :math:`(\\Lambda, \\varrho, \\mu)`.

    :math:`\\Lambda` involves the segment norms :math:`\\|z\\|_k` of the
    solution; they are taken from ``trajectory`` or from a solve with
    control ``u``. Flow 0 uses :math:`\\|z_0\\|` in place of the impulse
    term, and the impulse terms carry the bound
    :math:`\\|z(t_k^-)\\| \\le \\|z\\|_{k-1}/(t_k - p_{k-1})^{1-\\eta}`.

    :raises HypothesisViolated: if :math:`q \\le 1/\\eta`.
    """
    varrho = compute_varrho(spec)
    mu = compute_mu(spec)
    if trajectory is None:
        trajectory, _ = solve(spec, u, cfg or _CHECK_CONFIG, force=True)
    seg = segment_norms(trajectory)
    eta = spec.eta.eta
    M = spec.M
    q = spec.q
    c = spec.impulses.c
    x = _Times(spec)
    forcing = control_lq_norm(spec, u, cfg) + spec.varsigma_lq()
    holder = _holder_factor(spec)
    best = 0.0
    for r in range(x.m + 1):
        if r == 0:
            first = float(np.linalg.norm(spec.z0))
            tail = 0.0
        else:
            left = seg[r - 1] / (x.t(r) - x.p(r - 1)) ** (1.0 - eta)
            first = c[r - 1] * left
            tail = c[r - 1] * special.gamma(eta) * x.flow(r) ** (1.0 - eta) * left
        hist = sum(((x.t(k + 1) - x.p(k)) / (x.p(r) - x.t(k + 1))) ** eta * seg[k]
                   for k in range(r))
        hist += sum(c[k] * seg[k] / (x.t(k + 1) - x.p(k)) ** (1.0 - eta)
                    * x.flow(r) / (x.p(r) - x.p(k + 1)) ** eta for k in range(r - 1))
        val = first + holder * x.flow(r) ** (1.0 - 1.0 / q) * forcing
        val += hist / (eta * special.gamma(1.0 - eta)) + tail
        best = max(best, M / special.gamma(eta) * val)
    return float(best), varrho, mu


def compute_aleph(spec: SystemSpec, cfg: SolverConfig | None = None) -> tuple[float, float]:
    """Estimate :math:`\\aleph` and the terminal defect of the control
    synthesis.

    For :math:`B = I` the choice :math:`u = \\vartheta` gives
    :math:`\\aleph = 1` with no defect. Otherwise :math:`u` is the
    minimum-norm least-squares solution of
    :math:`\\mathbb{F}Bu = \\mathbb{F}\\vartheta` on the discretized flow,
    :math:`\\aleph` is the weighted :math:`L^2` operator norm of
    :math:`\\vartheta \\mapsto Bu` and the defect is
    :math:`\\max\\|\\mathbb{F}\\vartheta - \\mathbb{F}Bu\\|` over unit
    :math:`\\vartheta`. Both are maximized over the flows.
    """
    if spec.B.kind is ControlKind.IDENTITY:
        return 1.0, 0.0
    from fracimp.control import TerminalMap

    plan = SolverPlan.build(spec, cfg or _CHECK_CONFIG)
    aleph = 0.0
    defect = 0.0
    for r in range(spec.partition.m + 1):
        tm = TerminalMap(spec, plan, r)
        gain, err = tm.synthesis_norms()
        aleph = max(aleph, gain)
        defect = max(defect, err)
    return aleph, defect


def compute_mainass(spec: SystemSpec, aleph: float) -> float:
    """Largest left-hand side of the controllability condition over the
    flows. Flow 0 has no history, so only its nonlinearity term remains.
    Returns ``inf`` when :math:`\\mu E_\\eta(M\\tilde\\kappa\\tau) \\ge 1`."""
    eta = spec.eta.eta
    q = spec.q
    x = _Times(spec)
    b = spec.impulses.b
    kt = spec.h.kappa_tilde
    gron = _gronwall(spec, kt)
    mu = compute_mu(spec)
    if not np.isfinite(gron) or mu * gron >= 1.0:
        return math.inf
    factor = compute_varrho(spec) * gron / (1.0 - mu * gron)
    best = 0.0
    for r in range(x.m + 1):
        T = x.flow(r)
        bracket = kt * T ** (1.0 / q)
        for k in range(r):
            bracket += ((x.t(k + 1) - x.p(k)) ** eta * T ** (1.0 / q)
                        / (x.p(r) - x.t(k + 1)) ** (1.0 + eta)) / special.gamma(1.0 - eta)
            bracket += (b[k] * (x.t(r + 1) - x.p(k + 1)) ** (1.0 / q - eta)
                        / ((x.t(k + 1) - x.p(k)) ** (1.0 - eta) * abs(1.0 - eta * q) ** (1.0 / q))
                        ) / special.gamma(1.0 - eta)
        best = max(best, aleph * bracket * factor)
    return float(best)


# }}}


# {{{ report


@dataclass(frozen=True)
class HypothesisReport:
    """Values of the constants and the outcome of every hypothesis.

    ``checks`` maps ``"H0"``..``"H8"`` to dictionaries with keys ``pass``,
    ``value`` and ``threshold``.
    """

    nu: float
    mu: float
    lambda_cap: float
    varrho: float
    mainass_value: float
    aleph: float
    checks: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c["pass"]]

    def to_document(self) -> dict:
        """Plain key-value form used by the command line."""
        doc = {k: dict(v) for k, v in self.checks.items()}
        doc.update(nu=self.nu, mu=self.mu, **{"lambda": self.lambda_cap},
                   varrho=self.varrho, mainass=self.mainass_value, aleph=self.aleph)
        return doc


def _check(ok: bool, value, threshold: str) -> dict:
    return {"pass": bool(ok), "value": value, "threshold": threshold}


def check_all(spec: SystemSpec, u: SampledFunction | None = None,
              cfg: SolverConfig | None = None) -> HypothesisReport:
    """Evaluate every constant and hypothesis; never raises on a failed
    hypothesis. :math:`\\Lambda` needs a solve and is ``nan`` when
    :math:`\\nu \\ge 1` or the solve fails."""
    cfg = cfg or _CHECK_CONFIG
    eta = spec.eta.eta
    q = spec.q
    h = spec.h
    b = spec.impulses.b
    c = spec.impulses.c
    nu = compute_nu(spec)
    mu = compute_mu(spec)
    try:
        varrho = compute_varrho(spec)
    except HypothesisViolated:
        varrho = math.nan
    aleph, defect = compute_aleph(spec, cfg)
    gron = _gronwall(spec, h.kappa_tilde)
    h7 = mu * gron if np.isfinite(gron) else math.inf
    mainass = compute_mainass(spec, aleph) if np.isfinite(varrho) else math.nan
    lam = math.nan
    if nu < 1.0 and np.isfinite(varrho):
        try:
            lam, _, _ = compute_lemma3_constants(spec, u, cfg=cfg)
        except Exception:  # noqa: BLE001 - diagnostic only
            lam = math.nan
    lo, hi = 1.0 / eta, 1.0 / (1.0 - eta)
    checks = {
        "H0": _check(lo < q < hi, q, f"{lo:.17g} < q < {hi:.17g}"),
        "H1": _check(np.isfinite(h.kappa), h.kappa, "kappa finite"),
        "H2": _check(np.isfinite(h.d) and np.isfinite(spec.varsigma_lq()), h.d,
                     "d and ||varsigma||_q finite"),
        "H3": _check(all(0.0 <= v <= 1.0 for v in b), max(b, default=0.0), "b_r <= 1"),
        "H4": _check(nu < 1.0, nu, "nu < 1"),
        "H5": _check(np.isfinite(h.kappa_tilde), h.kappa_tilde, "kappa_tilde finite"),
        "H6": _check(all(0.0 <= v <= 1.0 for v in c), max(c, default=0.0), "c_r <= 1"),
        "H7": _check(h7 < 1.0, h7, "mu E(M kappa_tilde tau) < 1"),
        "H8": _check(bool(mainass < 1.0), mainass, "mainass < 1"),
    }
    # an inexact synthesis (rank-deficient B) is reported, not gated
    checks["H8"]["synthesis_defect"] = defect
    return HypothesisReport(nu, mu, lam, varrho, mainass, aleph, checks)


# }}}

# vim: foldmethod=marker
