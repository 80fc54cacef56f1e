"""Approximate controllability by iterative control correction.

On flow :math:`r` the terminal value of the mild solution splits as

.. math::

    z(t_{r+1}) = \\Theta_r + \\mathbb{F}\\Omega_h(z) + \\mathbb{F}\\Omega_{\\varphi_r}(z)
        + \\mathbb{F}Bu,
    \\qquad \\mathbb{F}f = \\int_{p_r}^{t_{r+1}}(t_{r+1}-s)^{\\eta-1}T_\\eta(t_{r+1}-s)f(s)\\,ds,

with :math:`\\Theta_r` the homogeneous term of the restart datum. A density
:math:`\\zeta` with :math:`\\mathbb{F}\\zeta = \\wp_r - \\Theta_r` starts
the iteration

.. math::

    \\mathbb{F}Bu_1 = \\mathbb{F}\\zeta - \\mathbb{F}\\Omega(z_0), \\qquad
    \\mathbb{F}B\\omega_n = \\mathbb{F}\\Omega(z_n) - \\mathbb{F}\\Omega(z_{n-1}), \\qquad
    u_{n+1} = u_n - \\omega_n,

where :math:`\\Omega = \\Omega_h + \\Omega_{\\varphi_r}` and :math:`z_n` solves
the system with control :math:`u_n` (:math:`z_0` is uncontrolled). The
terminal error :math:`e_n = \\|\\wp_r - z_n(t_{r+1})\\|` then equals
:math:`\\|\\mathbb{F}\\Omega(z_n) - \\mathbb{F}\\Omega(z_{n-1})\\|` whenever the
synthesis is exact. Every :math:`\\mathbb{F}` is the discrete terminal
operator of the solver, and :math:`\\mathbb{F}\\Omega(z_n)` is read off the
solved terminal value, so the two sides stay consistent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fracimp.errors import (
    DimensionMismatch,
    HypothesisViolated,
    IndexOutOfRange,
    NonConvergence,
    SingularTerminalOperator,
)
from fracimp.fracops import SampledFunction
from fracimp.operators import ControlMap
from fracimp.solver import SolverConfig, SolverPlan, history_term, solve_flow
from fracimp.system import SystemSpec, Trajectory, lq_norm

__all__ = [
    "ControlRun",
    "IntervalRun",
    "SteeringProblem",
    "TerminalMap",
    "nemytskii_h",
    "nemytskii_phi",
    "steer",
    "steer_interval",
    "steering_violations",
    "zeta_init",
]

logger = logging.getLogger(__name__)

#: singular values below this fraction of the largest are dropped
_RCOND = 1.0e-12
#: relative change of the terminal error regarded as stagnation
_STAGNATION = 1.0e-12
_STAGNATION_COUNT = 3


# {{{ terminal operator


@dataclass(frozen=True, eq=False)
class TerminalMap:
    """Discrete terminal operator of flow ``r`` and its minimum-norm
    right inverse through a control map.

    Densities are sampled at the flow nodes :math:`s_1..s_N`. Controls are
    measured in the discrete :math:`L^2` norm with the trapezoidal node
    weights of the plan, so :meth:`preimage` returns the smallest control
    whose image under :math:`\\mathbb{F}B` matches a terminal vector in
    the least-squares sense. ``control`` overrides the control map of the
    system.
    """

    spec: SystemSpec
    plan: SolverPlan
    r: int
    control: ControlMap | None = None

    blocks: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    rank: int = field(init=False)
    condition: float = field(init=False)
    _matrix: np.ndarray = field(init=False, repr=False)
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        m = self.spec.partition.m
        if not 0 <= self.r <= m:
            raise IndexOutOfRange(f"flow index {self.r} outside 0..{m}")
        control = self.spec.B if self.control is None else self.control
        if control.state_dim != self.spec.dim:
            raise DimensionMismatch("control map does not act on the state space")
        object.__setattr__(self, "control", control)
        blocks = self.plan.terminal_blocks(self.r)
        w = self.plan.node_weights(self.r)
        nn, n, _ = blocks.shape
        k = control.control_dim
        bmat = control.as_matrix()
        mat = np.einsum("jab,bc->ajc", blocks, bmat).reshape(n, nn * k)
        ds = np.repeat(np.sqrt(w), k)
        u_, s, vt = np.linalg.svd(mat / ds[None, :], full_matrices=False)
        keep = s > _RCOND * s[0] if s.size and s[0] > 0.0 else np.zeros(s.size, dtype=bool)
        pinv = (vt[keep].T / s[keep][None, :]) @ u_[:, keep].T
        pinv = pinv / ds[:, None]
        rank = int(np.count_nonzero(keep))
        cond = float(s[0] / s[-1]) if rank == n else math.inf
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rank", rank)
        object.__setattr__(self, "condition", cond)
        object.__setattr__(self, "_matrix", mat)
        object.__setattr__(self, "_pinv", pinv)

    @property
    def nodes(self) -> np.ndarray:
        return self.plan.meshes[self.r][1:]

    @property
    def origin(self) -> float:
        return float(self.plan.meshes[self.r][0])

    def apply(self, values) -> np.ndarray:
        """:math:`\\mathbb{F}v` for state-valued ``values`` of shape (N, n)."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.blocks.shape[:2]:
            raise DimensionMismatch(f"expected densities of shape {self.blocks.shape[:2]}, "
                                    f"got {values.shape}")
        return np.einsum("jab,jb->a", self.blocks, values)

    def apply_control(self, values) -> np.ndarray:
        """:math:`\\mathbb{F}Bu` for controls of shape (N, k)."""
        values = np.asarray(values, dtype=float)
        return self._matrix @ values.ravel()

    def preimage(self, target) -> np.ndarray:
        """Minimum-norm least-squares control with
        :math:`\\mathbb{F}Bu \\approx` ``target``; shape (N, k)."""
        target = np.asarray(target, dtype=float).ravel()
        if target.size != self.spec.dim:
            raise DimensionMismatch(f"target has dimension {target.size}, state is {self.spec.dim}")
        return (self._pinv @ target).reshape(-1, self.control.control_dim)

    def synthesis_norms(self) -> tuple[float, float]:
        """Gain and defect of :math:`\\vartheta \\mapsto Bu` with
        :math:`u` the preimage of :math:`\\mathbb{F}\\vartheta`.

        The gain is the weighted :math:`L^2` operator norm; the defect is
        the largest :math:`\\|\\mathbb{F}\\vartheta - \\mathbb{F}Bu\\|` over
        unit :math:`\\vartheta`. An exact synthesis has zero defect.
        """
        nn, n, _ = self.blocks.shape
        k = self.control.control_dim
        full = self.blocks.transpose(1, 0, 2).reshape(n, nn * n)
        pre = (self._pinv @ full).reshape(nn, k, nn * n)
        bu = np.einsum("ab,jbx->jax", self.control.as_matrix(), pre).reshape(nn * n, nn * n)
        wn = np.repeat(np.sqrt(self.weights), n)
        gain = float(np.linalg.norm(wn[:, None] * bu / wn[None, :], 2))
        miss = (full - self._matrix @ (self._pinv @ full)) / wn[None, :]
        return gain, float(np.linalg.norm(miss, 2))


# }}}


# {{{ Nemytskii images


def nemytskii_h(spec: SystemSpec, z: Trajectory, r: int) -> SampledFunction:
    """:math:`s \\mapsto h(s, z(s))` at the nodes of flow ``r``."""
    if not 0 <= r <= spec.partition.m:
        raise IndexOutOfRange(f"flow index {r} outside 0..{spec.partition.m}")
    f = z.flows[r]
    if f is None:
        raise ValueError(f"flow {r} has not been computed")
    return SampledFunction(f.origin, f.nodes, spec.h(f.nodes - f.origin, f.values))


def nemytskii_phi(spec: SystemSpec, z: Trajectory, r: int) -> SampledFunction:
    """History term :math:`\\varphi_r` at the nodes of flow ``r``.

    The values carry the :math:`(s - p_r)^{-\\eta}` singularity of the
    last impulse window, recorded as the weight exponent.

    :raises HistoryIncomplete: if an earlier flow is missing.
    """
    if not 0 <= r <= spec.partition.m:
        raise IndexOutOfRange(f"flow index {r} outside 0..{spec.partition.m}")
    f = z.flows[r]
    if f is None:
        raise ValueError(f"flow {r} has not been computed")
    values = history_term(spec, z, r, f.nodes)
    return SampledFunction(f.origin, f.nodes, values, spec.eta.eta if r >= 1 else 0.0)


# }}}


# {{{ initial density


def zeta_init(spec: SystemSpec, r: int, target, plan: SolverPlan | None = None,
              tol: float | None = None) -> SampledFunction:
    """Density :math:`\\zeta` on flow ``r`` with
    :math:`\\mathbb{F}\\zeta \\approx` ``target``.

    The constant density solving :math:`(\\mathbb{F}1)c = \\wp^*` is
    corrected by the minimum-norm least-squares density of the residual.

    :arg target: the adjusted target :math:`\\wp^*`.
    :arg tol: residual bound, default :math:`10^{-6}\\|\\wp^*\\|`.
    :raises SingularTerminalOperator: if the discrete operator is rank
        deficient or the residual exceeds ``tol``.
    """
    plan = SolverPlan.build(spec, SolverConfig()) if plan is None else plan
    target = np.asarray(target, dtype=float).ravel()
    if target.size != spec.dim:
        raise DimensionMismatch(f"target has dimension {target.size}, state is {spec.dim}")
    tm = TerminalMap(spec, plan, r, ControlMap.identity(spec.dim))
    if tm.rank < spec.dim:
        raise SingularTerminalOperator(
            f"terminal operator of flow {r} has rank {tm.rank} < {spec.dim}")
    size = float(np.linalg.norm(target))
    tol = 1.0e-6 * size if tol is None else float(tol)
    nn = tm.nodes.size
    if size == 0.0:
        return SampledFunction(tm.origin, tm.nodes, np.zeros((nn, spec.dim)))
    total = tm.blocks.sum(axis=0)
    const, *_ = np.linalg.lstsq(total, target, rcond=None)
    zeta = np.repeat(const[None, :], nn, axis=0)
    zeta = zeta + tm.preimage(target - tm.apply(zeta))
    miss = float(np.linalg.norm(tm.apply(zeta) - target))
    if not miss <= tol:
        raise SingularTerminalOperator(
            f"density residual {miss:.3e} exceeds {tol:.3e} on flow {r}")
    return SampledFunction(tm.origin, tm.nodes, zeta)


# }}}


# {{{ problems and records


@dataclass(frozen=True, eq=False)
class SteeringProblem:
    """Steer :math:`z(a)` into the ``epsilon`` ball around ``target``.

    ``waypoints[r]`` (for :math:`r < m`) fixes the terminal target of flow
    ``r``; ``None`` entries use the terminal value of the uncontrolled
    continuation. ``force`` runs the iteration even when the steering
    hypotheses fail.
    """

    spec: SystemSpec
    target: np.ndarray
    epsilon: float
    max_outer_iters: int = 50
    waypoints: tuple | None = None
    cfg: SolverConfig = field(default_factory=SolverConfig)
    force: bool = False

    def __post_init__(self) -> None:
        target = np.array(self.target, dtype=float).ravel()
        if target.size != self.spec.dim:
            raise DimensionMismatch(f"target has dimension {target.size}, state is {self.spec.dim}")
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive: got {self.epsilon}")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 1:
            raise ValueError(f"max_outer_iters must be a positive integer: got {self.max_outer_iters}")
        m = self.spec.partition.m
        if self.waypoints is not None:
            pts = tuple(None if w is None else np.array(w, dtype=float).ravel()
                        for w in self.waypoints)
            if len(pts) != m:
                raise ValueError(f"need {m} waypoints, got {len(pts)}")
            if any(w is not None and w.size != self.spec.dim for w in pts):
                raise DimensionMismatch("waypoint dimension does not match the state")
            object.__setattr__(self, "waypoints", pts)

    def budget(self, r: int) -> float:
        """Terminal tolerance :math:`\\varepsilon/2^{m-r+1}` of flow ``r``."""
        return self.epsilon / 2.0 ** (self.spec.partition.m - r + 1)

    def target_for(self, r: int, uncontrolled: np.ndarray) -> np.ndarray:
        if r == self.spec.partition.m:
            return self.target
        if self.waypoints is not None and self.waypoints[r] is not None:
            return self.waypoints[r]
        return np.asarray(uncontrolled, dtype=float)


@dataclass(frozen=True, eq=False)
class IntervalRun:
    """Iterates of one flow.

    ``controls[n]`` is :math:`u_n` (``controls[0]`` is the zero control),
    ``errors[n]`` the terminal error of :math:`z_n` and ``corrections[n-1]``
    the correction :math:`\\omega_n`. ``trajectory`` holds the accepted
    (or last) state with every later segment cleared.
    """

    r: int
    target: np.ndarray
    budget: float
    errors: tuple[float, ...]
    controls: tuple[SampledFunction, ...]
    corrections: tuple[SampledFunction, ...]
    converged: bool
    trajectory: Trajectory

    @property
    def iterations(self) -> int:
        return len(self.errors) - 1

    @property
    def ratios(self) -> tuple[float, ...]:
        """:math:`e_n/e_{n-1}` for :math:`n \\ge 1` (``nan`` if
        :math:`e_{n-1} = 0`)."""
        e = self.errors
        return tuple(b / a if a > 0.0 else math.nan for a, b in zip(e, e[1:]))

    @property
    def control(self) -> SampledFunction:
        return self.controls[-1]


@dataclass(frozen=True, eq=False)
class ControlRun:
    """Convergence record of a steering run, one :class:`IntervalRun` per
    flow in order."""

    intervals: tuple[IntervalRun, ...]

    @property
    def converged(self) -> tuple[bool, ...]:
        return tuple(run.converged for run in self.intervals)

    def rows(self):
        """Yield ``(r, n, e_n, ratio)`` for every iterate; the ratio of
        :math:`n = 0` is ``nan``."""
        for run in self.intervals:
            ratios = (math.nan,) + run.ratios
            for n, (e, rho) in enumerate(zip(run.errors, ratios)):
                yield run.r, n, e, rho

    def decay_ratio(self) -> float:
        """Largest :math:`e_n/e_{n-1}` over all flows, ignoring steps that
        start below the rounding floor."""
        best = math.nan
        for run in self.intervals:
            floor = 1.0e3 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(run.target)))
            for e_prev, rho in zip(run.errors, run.ratios):
                if e_prev > floor and not math.isnan(rho):
                    best = rho if math.isnan(best) else max(best, rho)
        return best

    def cauchy_ratios(self, spec: SystemSpec) -> tuple[float, ...]:
        """Ratios :math:`\\|B(u_{n+1}-u_n)\\|_{L^q}/\\|B(u_n-u_{n-1})\\|_{L^q}`
        over all flows."""
        out = []
        for run in self.intervals:
            steps = [lq_norm(spec.B.apply(w.values), w.nodes, spec.q, w.origin)
                     for w in run.corrections]
            out.extend(b / a for a, b in zip(steps, steps[1:]) if a > 0.0)
        return tuple(out)


# }}}


# {{{ steering


def steering_violations(spec: SystemSpec, cfg: SolverConfig | None = None) -> list[str]:
    """Names of the steering hypotheses that fail: H5 (finite
    :math:`\\tilde\\kappa`), H6 (:math:`c_r \\le 1`), H7 and the
    controllability inequality (reported as H8). Exactness of the
    synthesis is not required here; its failure surfaces as stagnation."""
    from fracimp.hypotheses import _gronwall, compute_aleph, compute_mainass, compute_mu

    bad = []
    kt = spec.h.kappa_tilde
    if not np.isfinite(kt):
        bad.append("H5")
    if any(not 0.0 <= c <= 1.0 for c in spec.impulses.c):
        bad.append("H6")
    gron = _gronwall(spec, kt)
    if not (np.isfinite(gron) and compute_mu(spec) * gron < 1.0):
        bad.append("H7")
    try:
        aleph, _ = compute_aleph(spec, cfg)
        mainass = compute_mainass(spec, aleph)
    except HypothesisViolated:
        mainass = math.inf
    if not mainass < 1.0:
        bad.append("H8")
    return bad


def _empty_trajectory(spec: SystemSpec) -> Trajectory:
    m = spec.partition.m
    return Trajectory(spec.eta, spec.partition, (None,) * (m + 1), (None,) * m)


def steer_interval(problem: SteeringProblem, r: int, z_incoming: Trajectory | None = None,
                   plan: SolverPlan | None = None) -> tuple[SampledFunction, IntervalRun]:
    """Run the correction iteration on flow ``r``.

    ``z_incoming`` supplies the accepted trajectory on every earlier
    segment and is not modified. Stops when :math:`e_n` is within the
    budget of the flow.

    :raises NonConvergence: when the error stagnates (relative change
        below :math:`10^{-12}` three times in a row) or after
        ``max_outer_iters`` corrections; ``ratio`` is the last
        :math:`e_n/e_{n-1}` and the payload the :class:`IntervalRun`.
    """
    spec = problem.spec
    plan = SolverPlan.build(spec, problem.cfg) if plan is None else plan
    z_incoming = _empty_trajectory(spec) if z_incoming is None else z_incoming
    if not 0 <= r <= spec.partition.m:
        raise IndexOutOfRange(f"flow index {r} outside 0..{spec.partition.m}")
    a = spec.A
    tm = TerminalMap(spec, plan, r)
    nodes, origin = tm.nodes, tm.origin
    k = spec.B.control_dim

    def as_control(values: np.ndarray) -> SampledFunction:
        return SampledFunction(origin, nodes, values)

    def f_omega(end: np.ndarray, u: np.ndarray) -> np.ndarray:
        # terminal contribution of the nonlinearity and the history
        return end - theta - tm.apply_control(u)

    z, _ = solve_flow(spec, plan, r, None, z_incoming)
    end = z.flows[r].values[-1]
    restart = spec.restart_value(r, z.left_limit(r) if r >= 1 else None)
    theta = a.from_modal(plan.kernels[r].homogeneous[-1] * a.to_modal(restart))
    target = problem.target_for(r, end)
    budget = problem.budget(r)

    u = np.zeros((nodes.size, k))
    errors = [float(np.linalg.norm(target - end))]
    controls = [as_control(u)]
    corrections: list[SampledFunction] = []
    logger.info("flow %d: uncontrolled terminal error %.3e, budget %.3e", r, errors[0], budget)

    fo_prev = f_omega(end, u)
    zeta = zeta_init(spec, r, target - theta, plan)
    step = u - tm.preimage(tm.apply(zeta.values) - fo_prev)
    stalled = 0
    converged = False
    for n in range(1, problem.max_outer_iters + 1):
        corrections.append(as_control(step))
        u = u - step
        controls.append(as_control(u))
        z, _ = solve_flow(spec, plan, r, controls[-1], z_incoming, warm=z.flows[r])
        end = z.flows[r].values[-1]
        e = float(np.linalg.norm(target - end))
        prev = errors[-1]
        errors.append(e)
        logger.info("flow %d iterate %d: terminal error %.3e", r, n, e)
        if e <= budget:
            converged = True
            break
        stalled = stalled + 1 if abs(e - prev) <= _STAGNATION * prev else 0
        if stalled >= _STAGNATION_COUNT:
            break
        fo = f_omega(end, u)
        step = tm.preimage(fo - fo_prev)
        fo_prev = fo

    run = IntervalRun(r, target, budget, tuple(errors), tuple(controls), tuple(corrections),
                      converged, z)
    if not converged:
        ratio = run.ratios[-1]
        why = "stagnated" if stalled >= _STAGNATION_COUNT else (
            f"did not converge in {problem.max_outer_iters} corrections")
        raise NonConvergence(
            f"steering on flow {r} {why}: error {errors[-1]:.3e} > {budget:.3e}, "
            f"ratio {ratio:.6g}", last_error=errors[-1], ratio=ratio, payload=run)
    return controls[-1], run


def steer(problem: SteeringProblem) -> tuple[SampledFunction, ControlRun, Trajectory]:
    """Steer flow by flow and return the concatenated control on the flow
    nodes, the run record and the final trajectory.

    Impulse windows carry no control. Earlier flows are frozen once
    accepted.

    :raises HypothesisViolated: if a steering hypothesis fails and the
        problem is not forced.
    :raises NonConvergence: from the first flow that fails; the payload is
        the :class:`ControlRun` so far.
    """
    spec = problem.spec
    bad = steering_violations(spec, problem.cfg)
    if bad:
        if not problem.force:
            raise HypothesisViolated(f"steering hypotheses fail: {', '.join(bad)}")
        logger.warning("steering with failing hypotheses: %s", ", ".join(bad))
    plan = SolverPlan.build(spec, problem.cfg)
    z = _empty_trajectory(spec)
    runs: list[IntervalRun] = []
    for r in range(spec.partition.m + 1):
        try:
            _, run = steer_interval(problem, r, z, plan)
        except NonConvergence as exc:
            raise NonConvergence(str(exc), last_error=exc.last_error, ratio=exc.ratio,
                                 payload=ControlRun(tuple(runs) + (exc.payload,))) from exc
        runs.append(run)
        z = run.trajectory
    u = SampledFunction(0.0, np.concatenate([run.control.nodes for run in runs]),
                        np.vstack([run.control.values for run in runs]))
    return u, ControlRun(tuple(runs)), z


# }}}

# vim: foldmethod=marker
