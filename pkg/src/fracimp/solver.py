"""Mild solutions by Picard iteration.

On a flow interval :math:`(p_r, t_{r+1}]` the mild solution satisfies

.. math::

    z(t) = (t - p_r)^{\\eta-1}T_\\eta(t - p_r)\\psi_r(p_r, z(t_r^-))
        + \\int_{p_r}^t (t - s)^{\\eta-1}T_\\eta(t - s)
          [Bu(s) + h(s, z(s)) + \\varphi_r(s)]\\,ds,

and on an impulse window :math:`z(t) = \\psi_r(t, z(t_r^-))`. The history
term

.. math::

    \\varphi_r(t) = \\frac{\\eta}{\\Gamma(1-\\eta)}\\sum_{k<r}\\Big(
        \\int_{p_k}^{t_{k+1}}\\frac{z(s)}{(t-s)^{1+\\eta}}ds
        + \\int_{t_{k+1}}^{p_{k+1}}\\frac{\\psi_{k+1}(s, z(t_{k+1}^-))}{(t-s)^{1+\\eta}}ds\\Big)

collects all earlier segments. Its last window contributes the singular
part :math:`S(t) = \\psi_r(p_r)(t-p_r)^{-\\eta}/\\Gamma(1-\\eta)`, which is
convolved in closed form; the remainder is smooth enough for product
integration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from fracimp.errors import (
    DimensionMismatch,
    HistoryIncomplete,
    HypothesisViolated,
    NonConvergence,
)
from fracimp.fracops import QuadratureRule, SampledFunction, rl_integral
from fracimp.operators import KernelWeights, kernel_weights
from fracimp.system import SystemSpec, Trajectory, pc_norm

__all__ = [
    "SolveReport",
    "SolverConfig",
    "SolverPlan",
    "g_apply",
    "history_term",
    "mesh_convergence",
    "solve",
    "solve_flow",
    "verify_initial_condition",
]

logger = logging.getLogger(__name__)


# {{{ configuration


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration parameters.

    ``grading`` is the exponent :math:`g` of the flow meshes
    :math:`p_r + (t_{r+1} - p_r)(j/N)^g`; ``None`` selects :math:`1/\\eta`.
    Impulse windows are stored at ``window_points`` uniform nodes and
    sampled at ``history_points`` cells inside history integrals.
    """

    mesh_per_interval: int = 128
    grading: float | None = None
    max_picard_iters: int = 100
    fp_tolerance: float = 1.0e-10
    quad: QuadratureRule = field(default_factory=QuadratureRule)
    window_points: int = 16
    history_points: int = 64

    def __post_init__(self) -> None:
        if int(self.mesh_per_interval) != self.mesh_per_interval or self.mesh_per_interval < 8:
            raise ValueError(f"mesh_per_interval must be an integer >= 8: got {self.mesh_per_interval}")
        if self.grading is not None and not self.grading >= 1.0:
            raise ValueError(f"grading must be >= 1: got {self.grading}")
        if int(self.max_picard_iters) != self.max_picard_iters or self.max_picard_iters < 1:
            raise ValueError(f"max_picard_iters must be a positive integer: got {self.max_picard_iters}")
        if not self.fp_tolerance > 0.0:
            raise ValueError(f"fp_tolerance must be positive: got {self.fp_tolerance}")
        if self.window_points < 1 or self.history_points < 2:
            raise ValueError("window_points must be >= 1 and history_points >= 2")

    def grading_for(self, eta: float) -> float:
        return 1.0 / eta if self.grading is None else float(self.grading)


@dataclass(frozen=True)
class SolveReport:
    """Convergence record of one Picard run.

    ``contraction_estimate`` is the largest ratio of successive residuals
    above the rounding floor (``nan`` if fewer than two such residuals).
    """

    iterations: int
    residual_history: tuple[float, ...]
    contraction_estimate: float
    converged: bool


# }}}


# {{{ history weights


def _flow_history_weights(eta: float, p: float, nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Weights :math:`W` with :math:`\\int_p^{x_N} z(\\sigma)(s-\\sigma)^{-1-\\eta}d\\sigma
    \\approx W G`, where :math:`G_j = (x_j - p)^{1-\\eta}z(x_j)` is linearly
    interpolated, :math:`G_0` is the weighted limit at ``p`` and ``nodes``
    are :math:`x_1..x_N`. Requires ``s > x_N``."""
    u = np.concatenate([[0.0], nodes - p])
    dd = (s - p)[:, None]
    with np.errstate(divide="ignore"):
        j0 = u[None, :] ** eta * (dd - u[None, :]) ** (-eta) / (eta * dd)
    j1 = dd * j0 - special.gamma(eta) * special.gamma(1.0 - eta) * special.betainc(
        eta, 1.0 - eta, u[None, :] / dd)
    dj0 = np.diff(j0, axis=1)
    dj1 = np.diff(j1, axis=1)
    h = np.diff(u)[None, :]
    left = (u[None, 1:] * dj0 - dj1) / h
    right = (dj1 - u[None, :-1] * dj0) / h
    w = np.zeros((s.size, u.size))
    w[:, :-1] += left
    w[:, 1:] += right
    return w


def _window_history_weights(eta: float, grid: np.ndarray, s: np.ndarray
                            ) -> np.ndarray:
    """Hat-function weights of :math:`\\int f(\\sigma)(s-\\sigma)^{-1-\\eta}d\\sigma`
    over ``grid``, for ``s`` beyond its right end."""
    a = grid[None, :-1]
    b = grid[None, 1:]
    ss = s[:, None]
    i0 = ((ss - b) ** (-eta) - (ss - a) ** (-eta)) / eta
    m_right = ((ss - a) ** (1.0 - eta) - (ss - b) ** (1.0 - eta)) / (1.0 - eta) - (ss - b) * i0
    h = b - a
    m_left = h * i0 - m_right
    w = np.zeros((s.size, grid.size))
    w[:, :-1] += m_right / h
    w[:, 1:] += m_left / h
    return w


@dataclass(frozen=True, eq=False)
class _HistoryWeights:
    """Weights of :math:`\\varphi_r - S` at a set of targets ``s``.

    ``flows[k]`` acts on the weighted values of flow ``k``;
    ``windows[k - 1]`` acts on :math:`\\psi_k(\\sigma) - \\psi_k(p_k)` over the
    window grid and ``constants[k - 1]`` on :math:`\\psi_k(p_k)`. All
    include the factor :math:`\\eta/\\Gamma(1-\\eta)`.
    """

    flows: tuple[np.ndarray, ...]
    windows: tuple[np.ndarray, ...]
    constants: tuple[np.ndarray, ...]
    singular: np.ndarray


def _history_weights(spec: SystemSpec, r: int, s: np.ndarray,
                     flow_nodes: list[np.ndarray], window_grids: list[np.ndarray]
                     ) -> _HistoryWeights:
    eta = spec.eta.eta
    part = spec.partition
    pref = eta * special.rgamma(1.0 - eta)
    flows = tuple(pref * _flow_history_weights(eta, part.p[k], flow_nodes[k], s)
                  for k in range(r))
    windows = []
    constants = []
    for k in range(1, r + 1):
        lo, hi = part.window(k)
        windows.append(pref * _window_history_weights(eta, window_grids[k - 1], s))
        c = -((s - lo) ** (-eta))
        if k < r:
            c = c + (s - hi) ** (-eta)
        constants.append(pref * c / eta)
    singular = (s - part.p[r]) ** (-eta) * special.rgamma(1.0 - eta) if r >= 1 else np.zeros_like(s)
    return _HistoryWeights(flows, tuple(windows), tuple(constants), singular)


# }}}


# {{{ plan


def _flow_mesh(lo: float, hi: float, n: int, grading: float) -> np.ndarray:
    x = lo + (hi - lo) * (np.arange(n + 1) / n) ** grading
    x[-1] = hi
    return x


@dataclass(frozen=True, eq=False)
class SolverPlan:
    """Meshes and weights shared by all sweeps on one system."""

    spec: SystemSpec
    cfg: SolverConfig
    meshes: tuple[np.ndarray, ...]
    kernels: tuple[KernelWeights, ...]
    window_nodes: tuple[np.ndarray, ...]
    window_grids: tuple[np.ndarray, ...]
    history: tuple[_HistoryWeights | None, ...]
    singular_exponent: float
    _terminal: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, spec: SystemSpec, cfg: SolverConfig) -> SolverPlan:
        eta = spec.eta.eta
        part = spec.partition
        g = cfg.grading_for(eta)
        n = cfg.mesh_per_interval
        lam = spec.A.modes[0]
        meshes = tuple(_flow_mesh(*part.flow(r), n, g) for r in range(part.m + 1))
        kernels = tuple(kernel_weights(eta, lam, x) for x in meshes)
        window_nodes = []
        window_grids = []
        for k in range(1, part.m + 1):
            lo, hi = part.window(k)
            wn = lo + (hi - lo) * np.arange(1, cfg.window_points + 1) / cfg.window_points
            wn[-1] = hi
            wg = lo + (hi - lo) * np.arange(cfg.history_points + 1) / cfg.history_points
            wg[-1] = hi
            window_nodes.append(wn)
            window_grids.append(wg)
        flow_nodes = [x[1:] for x in meshes]
        history = tuple(
            None if r == 0 else _history_weights(spec, r, meshes[r][1:], flow_nodes, window_grids)
            for r in range(part.m + 1))
        # nonlinearities without a vanishing time factor inherit the
        # (t - p_r)^{eta - 1} singularity of the state
        singular = 1.0 - eta if np.isinf(spec.h.kappa_tilde) else 0.0
        return cls(spec, cfg, meshes, kernels, tuple(window_nodes), tuple(window_grids),
                   history, singular)

    def terminal_blocks(self, r: int) -> np.ndarray:
        """Discrete terminal operator of flow ``r``: blocks :math:`C_j`
        (shape (N, n, n)) with :math:`\\mathbb{F}v \\approx \\sum_j C_j v(s_j)`,
        using the same product rule as the solver."""
        cached = self._terminal.get(r)
        if cached is not None:
            return cached
        kw = self.kernels[r]
        n = kw.nodes.size - 1
        last = kernel_weights(kw.eta, kw.lam, kw.nodes, np.array([n]))
        eye = np.eye(n)
        coef = np.stack([
            last.apply(np.repeat(eye[:, j:j + 1], kw.lam.size, axis=1), self.singular_exponent)[0]
            for j in range(n)])
        _, v, vinv = self.spec.A.modes
        if v is None:
            blocks = np.stack([np.diag(c.real) for c in coef])
        else:
            blocks = np.einsum("ab,jb,bc->jac", v, coef, vinv).real
        blocks.setflags(write=False)
        self._terminal[r] = blocks
        return blocks

    def node_weights(self, r: int) -> np.ndarray:
        """Trapezoidal weights of the flow nodes :math:`s_1..s_N`."""
        x = self.meshes[r]
        w = np.zeros(x.size - 1)
        h = np.diff(x)
        w += 0.5 * h
        w[:-1] += 0.5 * h[1:]
        w[0] += 0.5 * h[0]
        return w

    def restart_coefficients(self, r: int) -> np.ndarray:
        """Coefficients multiplying the modal restart datum at every node:
        the homogeneous term plus the convolution of :math:`S`."""
        kw = self.kernels[r]
        out = kw.homogeneous
        if r >= 1:
            eta = self.spec.eta.eta
            out = out + kw.power(1.0 - eta) * special.rgamma(1.0 - eta)
        return out


# }}}


# {{{ sweeps


def _control_values(spec: SystemSpec, u: SampledFunction | None, s: np.ndarray) -> np.ndarray:
    if u is None:
        return np.zeros((s.size, spec.dim))
    if u.dim != spec.B.control_dim:
        raise DimensionMismatch(f"control has dimension {u.dim}, expected {spec.B.control_dim}")
    return spec.B.apply(u(s, order=2))


def _window_record(spec: SystemSpec, plan: SolverPlan, r: int, left: np.ndarray) -> SampledFunction:
    lo = spec.partition.window(r)[0]
    nodes = plan.window_nodes[r - 1]
    return SampledFunction(lo, nodes, spec.impulse_values(r, nodes, left))


def _history_remainder(spec: SystemSpec, plan: SolverPlan, r: int, hist: Trajectory
                       ) -> np.ndarray:
    """:math:`\\varphi_r - S` at the nodes of flow ``r`` from the records of
    ``hist``."""
    hw = plan.history[r]
    n = plan.meshes[r].size - 1
    out = np.zeros((n, spec.dim))
    if hw is None:
        return out
    for k in range(r):
        f = hist.flows[k]
        if f is None:
            raise HistoryIncomplete(f"flow {k} is needed by the history of flow {r}")
        out += hw.flows[k] @ _weighted_with_limit(f)
    for k in range(1, r + 1):
        left = hist.left_limit(k)
        psi = spec.impulse_values(k, plan.window_grids[k - 1], left)
        end = psi[-1]
        out += hw.windows[k - 1] @ (psi - end[None, :]) + hw.constants[k - 1][:, None] * end[None, :]
    return out


def _weighted_with_limit(f: SampledFunction) -> np.ndarray:
    limit = f.origin_limit if f.origin_limit is not None else f.weighted_values()[0]
    return np.vstack([limit[None, :], f.weighted_values()])


def _flow_record(spec: SystemSpec, plan: SolverPlan, r: int, u: SampledFunction | None,
                 hist: Trajectory, current: SampledFunction | None, restart: np.ndarray
                 ) -> SampledFunction:
    """One application of the flow branch of :math:`G` on flow ``r``.

    ``hist`` supplies the records of earlier segments, ``current`` the
    iterate on this flow (``None`` for the homogeneous term only) and
    ``restart`` the datum :math:`\\psi_r(p_r, \\cdot)`.
    """
    a = spec.A
    x = plan.meshes[r]
    s = x[1:]
    p = x[0]
    eta = spec.eta.eta
    y = plan.restart_coefficients(r) * a.to_modal(restart)[None, :]
    if current is not None:
        forcing = _control_values(spec, u, s) + _history_remainder(spec, plan, r, hist)
        if not spec.h.is_zero:
            forcing = forcing + spec.h(s - p, current.values)
        if np.any(forcing):
            y = y + plan.kernels[r].apply(a.to_modal(forcing), plan.singular_exponent)
    z = a.from_modal(y)
    return SampledFunction(p, s, z, 1.0 - eta, restart * special.rgamma(eta))


def _initial_iterate(spec: SystemSpec, plan: SolverPlan) -> Trajectory:
    part = spec.partition
    flows: list[SampledFunction | None] = [None] * (part.m + 1)
    windows: list[SampledFunction | None] = [None] * part.m
    left = None
    for r in range(part.m + 1):
        if r >= 1:
            windows[r - 1] = _window_record(spec, plan, r, left)
        restart = spec.restart_value(r, left)
        empty = Trajectory(spec.eta, part, tuple(flows), tuple(windows))
        flows[r] = _flow_record(spec, plan, r, None, empty, None, restart)
        left = flows[r].values[-1]
    return Trajectory(spec.eta, part, tuple(flows), tuple(windows))


def _sweep(spec: SystemSpec, plan: SolverPlan, u: SampledFunction | None, z: Trajectory
           ) -> Trajectory:
    part = spec.partition
    flows = []
    windows = []
    for r in range(part.m + 1):
        if r >= 1:
            # impulse windows read the updated left limit
            windows.append(_window_record(spec, plan, r, flows[r - 1].values[-1]))
            restart = spec.restart_value(r, z.left_limit(r))
        else:
            restart = spec.z0
        flows.append(_flow_record(spec, plan, r, u, z, z.flows[r], restart))
    return Trajectory(spec.eta, part, tuple(flows), tuple(windows))


def g_apply(spec: SystemSpec, u: SampledFunction | None, z: Trajectory,
            cfg: SolverConfig | None = None, plan: SolverPlan | None = None) -> Trajectory:
    """Apply the fixed-point operator :math:`G` to ``z``.

    Flow branches evaluate the mild-solution formula with ``z`` on the
    right-hand side and :math:`\\psi_0 = z_0`; impulse windows apply
    :math:`\\psi_r` to the updated left limit :math:`(Gz)(t_r^-)`. ``z``
    must live on the mesh of ``cfg``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    plan = SolverPlan.build(spec, cfg) if plan is None else plan
    if not z.complete:
        raise HistoryIncomplete("G needs a trajectory on every segment")
    return _sweep(spec, plan, u, z)


# }}}


# {{{ solve


def _rounding_floor(z: Trajectory) -> float:
    return 1.0e3 * np.finfo(float).eps * max(1.0, pc_norm(z))


def _contraction(residuals: list[float], floor: float) -> float:
    ratios = [b / a for a, b in zip(residuals, residuals[1:]) if a > floor and b > floor]
    return max(ratios) if ratios else float("nan")


def solve(spec: SystemSpec, u: SampledFunction | None = None, cfg: SolverConfig | None = None,
          *, force: bool = False, initial: Trajectory | None = None,
          plan: SolverPlan | None = None) -> tuple[Trajectory, SolveReport]:
    """Solve by Picard iteration of :math:`G`, starting from the
    homogeneous terms (or ``initial``).

    :arg u: control sampled on :math:`[0, a]`; ``None`` is the zero control.
    :arg force: iterate even when :math:`\\nu \\ge 1`.
    :raises HypothesisViolated: if :math:`\\nu \\ge 1` and not ``force``.
    :raises NonConvergence: after ``cfg.max_picard_iters`` sweeps; the
        payload is ``(trajectory, report)``.
    """
    from fracimp.hypotheses import compute_nu

    cfg = SolverConfig() if cfg is None else cfg
    nu = compute_nu(spec)
    if nu >= 1.0:
        if not force:
            raise HypothesisViolated(f"contraction constant nu = {nu:.6g} >= 1")
        logger.warning("iterating with nu = %.6g >= 1", nu)

    plan = SolverPlan.build(spec, cfg) if plan is None else plan
    z = _initial_iterate(spec, plan) if initial is None else initial
    residuals: list[float] = []
    converged = False
    for k in range(1, cfg.max_picard_iters + 1):
        zn = _sweep(spec, plan, u, z)
        res = pc_norm(zn.combine(z))
        residuals.append(res)
        logger.debug("picard sweep %d: residual %.3e", k, res)
        z = zn
        if res <= cfg.fp_tolerance:
            converged = True
            break

    report = SolveReport(len(residuals), tuple(residuals),
                         _contraction(residuals, _rounding_floor(z)), converged)
    if not converged:
        ratio = report.contraction_estimate
        raise NonConvergence(
            f"Picard iteration did not reach {cfg.fp_tolerance:.3g} in "
            f"{cfg.max_picard_iters} sweeps (last residual {residuals[-1]:.3e})",
            last_error=residuals[-1], ratio=ratio, payload=(z, report))
    logger.info("solve converged in %d sweeps", report.iterations)
    return z, report


def solve_flow(spec: SystemSpec, plan: SolverPlan, r: int, u: SampledFunction | None,
               history: Trajectory, *, warm: SampledFunction | None = None
               ) -> tuple[Trajectory, SolveReport]:
    """Solve on flow ``r`` only, with every earlier segment frozen to the
    records of ``history``.

    Returns ``history`` with window ``r`` and flow ``r`` filled in; later
    records are cleared.
    """
    part = spec.partition
    cfg = plan.cfg
    flows = list(history.flows)
    windows = list(history.windows)
    for k in range(r):
        if flows[k] is None:
            raise HistoryIncomplete(f"flow {k} must be solved before flow {r}")
    if r >= 1:
        left = history.left_limit(r)
        windows[r - 1] = _window_record(spec, plan, r, left)
        restart = spec.restart_value(r, left)
    else:
        restart = spec.z0
    for k in range(r + 1, part.m + 1):
        flows[k] = None
    for k in range(r + 1, part.m + 1):
        windows[k - 1] = None
    hist = Trajectory(spec.eta, part, tuple(flows), tuple(windows))

    current = warm if warm is not None else _flow_record(spec, plan, r, u, hist, None, restart)
    w = 1.0 - spec.eta.eta
    residuals: list[float] = []
    converged = False
    for _ in range(cfg.max_picard_iters):
        new = _flow_record(spec, plan, r, u, hist, current, restart)
        diff = (new.nodes - new.origin)[:, None] ** w * (new.values - current.values)
        res = float(np.max(np.linalg.norm(diff, axis=1)))
        residuals.append(res)
        current = new
        if res <= cfg.fp_tolerance:
            converged = True
            break
    floor = 1.0e3 * np.finfo(float).eps * max(
        1.0, float(np.max(np.linalg.norm(current.weighted_values(), axis=1))))
    report = SolveReport(len(residuals), tuple(residuals), _contraction(residuals, floor), converged)
    flows[r] = current
    out = Trajectory(spec.eta, part, tuple(flows), tuple(windows))
    if not converged:
        raise NonConvergence(f"flow {r} did not converge in {cfg.max_picard_iters} sweeps",
                             last_error=residuals[-1], ratio=report.contraction_estimate,
                             payload=(out, report))
    return out, report


def extend_to_end(spec: SystemSpec, plan: SolverPlan, r: int, u: SampledFunction | None,
                  history: Trajectory) -> Trajectory:
    """Solve flows ``r, r+1, ..., m`` in order on top of ``history``."""
    z = history
    for k in range(r, spec.partition.m + 1):
        z, _ = solve_flow(spec, plan, k, u, z)
    return z


# }}}


# {{{ diagnostics


def history_term(spec: SystemSpec, z: Trajectory, r: int, t) -> np.ndarray:
    """History term :math:`\\varphi_r(t)` at times ``t`` in
    :math:`(p_r, t_{r+1}]`, from the records of ``z`` on earlier segments.

    Returns an array of shape (len(t), dim); :math:`\\varphi_0 = 0`.

    :raises HistoryIncomplete: if an earlier flow record is missing.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    part = spec.partition
    lo, hi = part.flow(r)
    if np.any(t <= lo) or np.any(t > hi):
        raise ValueError(f"history times must lie in ({lo}, {hi}]")
    if r == 0:
        return np.zeros((t.size, spec.dim))
    for k in range(r):
        if z.flows[k] is None:
            raise HistoryIncomplete(f"flow {k} is needed by the history of flow {r}")
    n_hist = 64
    grids = []
    for k in range(1, r + 1):
        wlo, whi = part.window(k)
        g = wlo + (whi - wlo) * np.arange(n_hist + 1) / n_hist
        g[-1] = whi
        grids.append(g)
    flow_nodes = [z.flows[k].nodes for k in range(r)]
    hw = _history_weights(spec, r, t, flow_nodes, grids)
    out = np.zeros((t.size, spec.dim))
    for k in range(r):
        out += hw.flows[k] @ _weighted_with_limit(z.flows[k])
    for k in range(1, r + 1):
        psi = spec.impulse_values(k, grids[k - 1], z.left_limit(k))
        end = psi[-1]
        out += hw.windows[k - 1] @ (psi - end[None, :]) + hw.constants[k - 1][:, None] * end[None, :]
        if k == r:
            out += hw.singular[:, None] * end[None, :]
    return out


def verify_initial_condition(spec: SystemSpec, z: Trajectory, points: int = 8) -> float:
    """Defect :math:`\\|{}_0I^{1-\\eta}_t z(0^+) - z_0\\|`.

    The fractional integral is evaluated at the first ``points`` nodes of
    the first flow and extrapolated to :math:`0^+` by a least-squares fit
    in powers of :math:`t^\\eta`.
    """
    f = z.flows[0]
    if f is None:
        raise HistoryIncomplete("the first flow has not been computed")
    eta = spec.eta.eta
    nodes = f.nodes[1:points + 1]
    vals = np.array([rl_integral(1.0 - eta, f, t) for t in nodes])
    basis = np.stack([np.ones_like(nodes), nodes**eta, nodes ** (2.0 * eta)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
    return float(np.linalg.norm(coef[0] - spec.z0))


def mesh_convergence(spec: SystemSpec, u: SampledFunction | None, meshes,
                     cfg: SolverConfig | None = None, *, force: bool = False
                     ) -> tuple[float, float, np.ndarray]:
    """Empirical order of :math:`z(a)` under mesh refinement.

    Solves on each mesh size of the increasing sequence ``meshes`` and
    compares with the finest. Returns ``(order, C, errors)`` from a
    least-squares fit of :math:`\\log e_N = \\log C - p\\log N` over all
    but the finest mesh, or ``(inf, 0, errors)`` when every error is at
    rounding level.
    """
    cfg = SolverConfig() if cfg is None else cfg
    meshes = [int(n) for n in meshes]
    if len(meshes) < 3 or any(b <= a for a, b in zip(meshes, meshes[1:])):
        raise ValueError("need at least three increasing mesh sizes")
    ends = []
    for n in meshes:
        c = SolverConfig(n, cfg.grading, cfg.max_picard_iters, cfg.fp_tolerance, cfg.quad,
                         cfg.window_points, cfg.history_points)
        z, _ = solve(spec, u, c, force=force)
        ends.append(z.terminal())
    ref = ends[-1]
    errs = np.array([np.linalg.norm(e - ref) for e in ends[:-1]])
    if np.all(errs <= 1.0e3 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(ref)))):
        # the discretization reproduces z(a) to rounding on every mesh
        return math.inf, 0.0, errs
    x = np.log(np.array(meshes[:-1], dtype=float))
    slope, intercept = np.polyfit(x, np.log(errs), 1)
    return float(-slope), float(np.exp(intercept)), errs


# }}}

# vim: foldmethod=marker
