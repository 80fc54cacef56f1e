"""Problem data: partition, impulses, nonlinearity and trajectories.

The system is

.. math::

    {}_0D^\\eta_t z = Az + Bu + h(t, z) \\quad t \\in (p_r, t_{r+1}],
    \\qquad z(t) = \\psi_r(t, z(t_r^-)) \\quad t \\in (t_r, p_r],

with the integral initial conditions
:math:`{}_0I^{1-\\eta}_t z(0) = z_0` and
:math:`{}_{p_r}I^{1-\\eta}_t z(p_r) = \\psi_r(p_r, z(t_r^-))`.

Nonlinearities and impulse maps are drawn from small catalogs of
expression records, so that every problem can be written to and read back
from a configuration file. States of spectral generators are coefficient
vectors; pointwise maps act on the grid of the spectral basis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fracimp.errors import (
    DimensionMismatch,
    EmptyInterval,
    IndexOutOfRange,
    TimeOutsideWindow,
)
from fracimp.fracops import FractionalOrder, SampledFunction, _as_eta
from fracimp.operators import ControlMap, Generator, SpectralBasis

__all__ = [
    "ImpulseKind",
    "ImpulseMap",
    "ImpulseSpec",
    "Nonlinearity",
    "NonlinearityKind",
    "Partition",
    "StateSpace",
    "SystemSpec",
    "Trajectory",
    "impulse_apply",
    "lq_norm",
    "pc_norm",
]

#: number of random probes used to certify declared constants
_PROBES = 1000
#: relative slack allowed when certifying declared constants
_PROBE_SLACK = 1.0e-9
#: seed of the certification probes, so construction is deterministic
_PROBE_SEED = 20240611


def _row_norms(x: np.ndarray) -> np.ndarray:
    """Euclidean norms along the last axis, rescaled so tiny entries do not
    underflow when squared."""
    x = np.asarray(x, dtype=float)
    top = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(top > 0.0, top, 1.0)
    return top[..., 0] * np.linalg.norm(x / safe, axis=-1)


# {{{ partition


@dataclass(frozen=True)
class Partition:
    """Times :math:`0 = p_0 < t_1 < p_1 < \\dots < p_m < t_{m+1} = a`.

    ``p`` holds :math:`p_0, \\dots, p_m` and ``t`` holds
    :math:`t_1, \\dots, t_{m+1}`; flow intervals are
    :math:`(p_r, t_{r+1}]` and impulse windows :math:`(t_r, p_r]`.
    """

    p: tuple[float, ...]
    t: tuple[float, ...]

    def __post_init__(self) -> None:
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        t = tuple(float(v) for v in np.atleast_1d(self.t))
        if len(t) != len(p) or len(p) == 0:
            raise ValueError(
                f"need as many flow starts as flow ends: got {len(p)} and {len(t)}")
        if p[0] != 0.0:
            raise ValueError(f"the partition must start at 0: got {p[0]}")
        merged = [v for pair in zip(p, t) for v in pair]
        if not all(np.isfinite(merged)) or np.any(np.diff(merged) <= 0.0):
            raise ValueError(f"partition times must be strictly increasing: got {merged}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", t)

    @classmethod
    def single(cls, a: float) -> Partition:
        return cls((0.0,), (float(a),))

    @property
    def m(self) -> int:
        """Number of impulse windows."""
        return len(self.p) - 1

    @property
    def a(self) -> float:
        return self.t[-1]

    @property
    def tau(self) -> float:
        """Longest flow interval :math:`\\max_r (t_{r+1} - p_r)`."""
        return max(self.flow_length(r) for r in range(self.m + 1))

    def flow(self, r: int) -> tuple[float, float]:
        """Flow interval :math:`(p_r, t_{r+1}]`, for ``r = 0..m``."""
        if not 0 <= r <= self.m:
            raise IndexOutOfRange(f"flow index must lie in 0..{self.m}: got {r}")
        return self.p[r], self.t[r]

    def window(self, r: int) -> tuple[float, float]:
        """Impulse window :math:`(t_r, p_r]`, for ``r = 1..m``."""
        if not 1 <= r <= self.m:
            raise IndexOutOfRange(f"impulse index must lie in 1..{self.m}: got {r}")
        return self.t[r - 1], self.p[r]

    def flow_length(self, r: int) -> float:
        lo, hi = self.flow(r)
        return hi - lo

    def segment_length(self, r: int) -> float:
        """Length of :math:`(p_r, p_{r+1}]` with :math:`p_{m+1} = a`."""
        end = self.p[r + 1] if r < self.m else self.a
        return end - self.p[r]


# }}}


# {{{ state space


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Coordinates of the state: plain vectors, or coefficients in a spectral
    basis whose grid is used for pointwise maps."""

    dim: int
    basis: SpectralBasis | None = None

    def __post_init__(self) -> None:
        if int(self.dim) < 1:
            raise ValueError(f"state dimension must be positive: got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.basis is not None and self.basis.modes != self.dim:
            raise DimensionMismatch("basis size differs from the state dimension")

    @classmethod
    def of(cls, a: Generator) -> StateSpace:
        return cls(a.dim, a.basis)

    def pointwise(self, f: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
        """Apply a scalar map pointwise; ``z`` stores states along its last
        axis."""
        if self.basis is None:
            return f(z)
        return self.basis.from_grid(f(self.basis.to_grid(z)))

    @property
    def one(self) -> np.ndarray:
        """The state representing the constant function 1."""
        if self.basis is None:
            return np.ones(self.dim)
        return self.basis.from_grid(np.ones(self.basis.x.size))


# }}}


# {{{ nonlinearity


class NonlinearityKind(enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"
    AFFINE = "affine"
    SINE = "sine"
    EXAMPLE2 = "example2"


#: the map g(z) of each kind and its Lipschitz constant
_NONLINEAR_PARTS: dict[NonlinearityKind, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    NonlinearityKind.ZERO: (np.zeros_like, 0.0),
    NonlinearityKind.LINEAR: (lambda z: z, 1.0),
    NonlinearityKind.AFFINE: (lambda z: z, 1.0),
    NonlinearityKind.SINE: (np.sin, 1.0),
    NonlinearityKind.EXAMPLE2: (lambda z: z + np.sin(z), 2.0),
}

_NONLINEAR_PARAMS: dict[NonlinearityKind, frozenset[str]] = {
    NonlinearityKind.ZERO: frozenset(),
    NonlinearityKind.LINEAR: frozenset({"gain", "beta"}),
    NonlinearityKind.AFFINE: frozenset({"gain", "beta", "offset"}),
    NonlinearityKind.SINE: frozenset({"gain", "beta"}),
    NonlinearityKind.EXAMPLE2: frozenset({"delta", "beta"}),
}


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Catalog nonlinearity
    :math:`h(t, z) = o(\\sigma) + g_0\\sigma^\\beta g(z)` with
    :math:`\\sigma = t - p_r` the time since the start of the current
    segment.

    ============  ====================  ==========================
    kind          :math:`g(z)`          :math:`o(\\sigma)`
    ============  ====================  ==========================
    ``zero``      0                     0
    ``linear``    :math:`z`             0
    ``affine``    :math:`z`             ``offset``
    ``sine``      :math:`\\sin z`        0
    ``example2``  :math:`z + \\sin z`    :math:`1 + \\sigma^2`
    ============  ====================  ==========================

    For ``example2`` the gain is ``delta``. Offsets are constant functions
    of space. The constants of the Lipschitz and growth conditions are
    computed for segments of length at most ``span``:

    * :math:`\\kappa = |g_0| L_g \\ell^\\beta`,
    * :math:`\\tilde\\kappa = d = |g_0| L_g \\ell^{\\beta+\\eta-1}` when
      :math:`\\beta \\ge 1 - \\eta` and infinite otherwise,
    * :math:`\\varsigma(\\sigma) = |o(\\sigma)|\\,\\|1\\|`,

    and certified by random probes at construction.
    """

    kind: NonlinearityKind
    params: dict = field(default_factory=dict)
    eta: float = 0.5
    span: float = 1.0
    space: StateSpace = field(default_factory=lambda: StateSpace(1))

    kappa: float = field(init=False)
    kappa_tilde: float = field(init=False)
    d: float = field(init=False)

    def __post_init__(self) -> None:
        kind = NonlinearityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = {str(k): float(v) for k, v in dict(self.params).items()}
        unknown = set(params) - _NONLINEAR_PARAMS[kind]
        if unknown:
            raise ValueError(f"unknown parameters for nonlinearity {kind.value!r}: {sorted(unknown)}")
        object.__setattr__(self, "params", params)
        eta = FractionalOrder(_as_eta(self.eta)).eta
        object.__setattr__(self, "eta", eta)
        if not self.span > 0.0:
            raise ValueError(f"span must be positive: got {self.span}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative: got {self.beta}")

        _, lip = _NONLINEAR_PARTS[kind]
        g = abs(self.gain) * lip
        ell = float(self.span)
        kappa = g * ell**self.beta
        if g == 0.0:
            weighted = 0.0
        elif self.beta >= 1.0 - eta:
            weighted = g * ell ** (self.beta + eta - 1.0)
        else:
            weighted = math.inf
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "kappa_tilde", weighted)
        object.__setattr__(self, "d", weighted)
        self._certify()

    @classmethod
    def zero(cls, space: StateSpace, **kwargs) -> Nonlinearity:
        return cls(NonlinearityKind.ZERO, {}, space=space, **kwargs)

    @property
    def gain(self) -> float:
        if self.kind is NonlinearityKind.EXAMPLE2:
            return self.params.get("delta", 0.0)
        if self.kind is NonlinearityKind.ZERO:
            return 0.0
        return self.params.get("gain", 0.0)

    @property
    def beta(self) -> float:
        return self.params.get("beta", 0.0)

    @property
    def is_zero(self) -> bool:
        return self.gain == 0.0 and not np.any(self.offset(np.array([0.5])))

    def offset(self, sigma: np.ndarray) -> np.ndarray:
        """Scalar offset :math:`o(\\sigma)`."""
        sigma = np.asarray(sigma, dtype=float)
        if self.kind is NonlinearityKind.AFFINE:
            return np.full_like(sigma, self.params.get("offset", 0.0))
        if self.kind is NonlinearityKind.EXAMPLE2:
            return 1.0 + sigma**2
        return np.zeros_like(sigma)

    def __call__(self, sigma, z) -> np.ndarray:
        """Evaluate :math:`h` at times ``sigma`` after the segment start;
        ``z`` has shape (len(sigma), dim)."""
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape != (sigma.size, self.space.dim):
            raise DimensionMismatch(
                f"expected states of shape {(sigma.size, self.space.dim)}, got {z.shape}")
        return self.offset(sigma)[:, None] * self.space.one[None, :] + self._state_part(sigma, z)

    def _state_part(self, sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
        # the offset cancels in differences, so certification skips it
        if self.gain == 0.0:
            return np.zeros_like(z)
        g, _ = _NONLINEAR_PARTS[self.kind]
        return (self.gain * sigma**self.beta)[:, None] * self.space.pointwise(g, z)

    def varsigma(self, sigma) -> np.ndarray:
        """Growth function :math:`\\varsigma(\\sigma) = \\|o(\\sigma)\\,1\\|`."""
        return np.abs(self.offset(sigma)) * float(np.linalg.norm(self.space.one))

    def _certify(self) -> None:
        rng = np.random.default_rng(_PROBE_SEED)
        n = self.space.dim
        sigma = self.span * rng.uniform(1.0e-6, 1.0, _PROBES)
        scale = 10.0 ** rng.uniform(-3.0, 2.0, (_PROBES, 1))
        z = scale * rng.standard_normal((_PROBES, n))
        y = z + 10.0 ** rng.uniform(-4.0, 1.0, (_PROBES, 1)) * rng.standard_normal((_PROBES, n))
        hz = self._state_part(sigma, z)
        hy = self._state_part(sigma, y)
        dh = _row_norms(hz - hy)
        dz = _row_norms(z - y)
        slack = 1.0 + _PROBE_SLACK
        tiny = 1.0e-300
        if np.any(dh > slack * self.kappa * dz + tiny):
            raise ValueError("nonlinearity violates its Lipschitz constant kappa")
        w = sigma ** (1.0 - self.eta)
        if np.isfinite(self.kappa_tilde):
            if np.any(dh > slack * self.kappa_tilde * w * dz + tiny):
                raise ValueError("nonlinearity violates its weighted Lipschitz constant")
            bound = self.varsigma(sigma) + self.d * w * np.linalg.norm(z, axis=1)
            if np.any(np.linalg.norm(hz, axis=1) > slack * bound + 1.0e-12):
                raise ValueError("nonlinearity violates its growth bound")


# }}}


# {{{ impulses


class ImpulseKind(enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"
    AFFINE = "affine"
    SINE = "sine"


_IMPULSE_PARAMS: dict[ImpulseKind, frozenset[str]] = {
    ImpulseKind.ZERO: frozenset(),
    ImpulseKind.LINEAR: frozenset({"coeff", "rate"}),
    ImpulseKind.AFFINE: frozenset({"coeff", "rate", "offset"}),
    ImpulseKind.SINE: frozenset({"coeff", "rate"}),
}


@dataclass(frozen=True, eq=False)
class ImpulseMap:
    """Catalog impulse
    :math:`\\psi(t, z) = o + c\\,e^{-\\rho(t - t_r)}g(z)` on
    :math:`[t_r, p_r]`, where :math:`g(z) = z` (``linear``, ``affine``) or
    :math:`\\sin z` (``sine``) and :math:`o` is a constant function
    (``affine`` only).

    ``b`` and ``c`` are the constants of the Lipschitz and growth bounds.
    They default to the tightest catalog values and are certified by
    random probes when declared.
    """

    kind: ImpulseKind
    params: dict = field(default_factory=dict)
    b: float | None = None
    c: float | None = None

    def __post_init__(self) -> None:
        kind = ImpulseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = {str(k): float(v) for k, v in dict(self.params).items()}
        unknown = set(params) - _IMPULSE_PARAMS[kind]
        if unknown:
            raise ValueError(f"unknown parameters for impulse {kind.value!r}: {sorted(unknown)}")
        if params.get("rate", 0.0) < 0.0:
            raise ValueError("impulse decay rate must be nonnegative")
        object.__setattr__(self, "params", params)
        lip = abs(self.coeff)
        growth = math.inf if self.offset != 0.0 else lip
        for name, natural in (("b", lip), ("c", growth)):
            value = getattr(self, name)
            if value is None:
                object.__setattr__(self, name, natural)
            elif not float(value) >= 0.0:
                raise ValueError(f"impulse constant {name} must be nonnegative: got {value}")
            else:
                object.__setattr__(self, name, float(value))

    @property
    def coeff(self) -> float:
        return 0.0 if self.kind is ImpulseKind.ZERO else self.params.get("coeff", 0.0)

    @property
    def offset(self) -> float:
        return self.params.get("offset", 0.0)

    def __call__(self, elapsed, z, space: StateSpace) -> np.ndarray:
        """Evaluate at times ``elapsed`` after :math:`t_r` for one state
        ``z``; returns shape (len(elapsed), dim)."""
        elapsed = np.atleast_1d(np.asarray(elapsed, dtype=float))
        z = np.asarray(z, dtype=float)
        out = np.zeros((elapsed.size, space.dim)) + self.offset * space.one
        if self.coeff != 0.0:
            g = space.pointwise(np.sin, z) if self.kind is ImpulseKind.SINE else z
            decay = self.coeff * np.exp(-self.params.get("rate", 0.0) * elapsed)
            out = out + decay[:, None] * g[None, :]
        return out


@dataclass(frozen=True, eq=False)
class ImpulseSpec:
    """Impulse maps :math:`\\psi_1, \\dots, \\psi_m`, certified on the state
    space they act on."""

    maps: tuple[ImpulseMap, ...]
    space: StateSpace

    def __post_init__(self) -> None:
        maps = tuple(self.maps)
        if not all(isinstance(f, ImpulseMap) for f in maps):
            raise TypeError("impulse maps must be ImpulseMap records")
        object.__setattr__(self, "maps", maps)
        self._certify()

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def b(self) -> tuple[float, ...]:
        return tuple(f.b for f in self.maps)

    @property
    def c(self) -> tuple[float, ...]:
        return tuple(f.c for f in self.maps)

    def __getitem__(self, r: int) -> ImpulseMap:
        if not 1 <= r <= self.m:
            raise IndexOutOfRange(f"impulse index must lie in 1..{self.m}: got {r}")
        return self.maps[r - 1]

    def _certify(self) -> None:
        rng = np.random.default_rng(_PROBE_SEED + 1)
        n = self.space.dim
        slack = 1.0 + _PROBE_SLACK
        for r, f in enumerate(self.maps, start=1):
            if f.coeff == 0.0 and f.offset == 0.0:
                continue
            elapsed = rng.uniform(0.0, 1.0, _PROBES)
            scale = 10.0 ** rng.uniform(-3.0, 2.0, _PROBES)
            worst_b = 0.0
            worst_c = 0.0
            for k in range(_PROBES):
                z = scale[k] * rng.standard_normal(n)
                y = z + scale[k] * rng.standard_normal(n)
                pz = f(elapsed[k:k + 1], z, self.space)[0]
                py = f(elapsed[k:k + 1], y, self.space)[0]
                worst_b = max(worst_b, _row_norms(pz - py) / _row_norms(z - y))
                worst_c = max(worst_c, _row_norms(pz) / _row_norms(z))
            if worst_b > slack * f.b:
                raise ValueError(
                    f"impulse {r} violates its Lipschitz constant: b={f.b} < {worst_b}")
            if worst_c > slack * f.c:
                raise ValueError(
                    f"impulse {r} violates its growth constant: c={f.c} < {worst_c}")


def impulse_apply(spec: ImpulseSpec | SystemSpec, r: int, t: float, z_at_tr) -> np.ndarray:
    """Impulse branch :math:`\\psi_r(t, z(t_r^-))` for :math:`t \\in (t_r, p_r]`.

    :raises IndexOutOfRange: if ``r`` is not in ``1..m``.
    :raises TimeOutsideWindow: if ``t`` is outside the window.
    """
    if not isinstance(spec, SystemSpec):
        raise TypeError("impulse_apply needs the SystemSpec that owns the impulses")
    lo, hi = spec.partition.window(r)
    t = float(t)
    if not lo < t <= hi:
        raise TimeOutsideWindow(f"t={t} is outside the impulse window ({lo}, {hi}]")
    return spec.impulse_values(r, np.array([t]), z_at_tr)[0]


# }}}


# {{{ system


def lq_norm(values: np.ndarray, nodes: np.ndarray, q: float, origin: float) -> float:
    """:math:`L^q` norm on :math:`(\\text{origin}, \\text{nodes}[-1]]` of the
    piecewise-linear interpolant of ``values`` (shape (N, n)); the first
    cell is extended by a constant. Each cell uses four Gauss points."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    x = np.concatenate([[origin], np.asarray(nodes, dtype=float)])
    v = np.vstack([values[:1], values])
    gx, gw = np.polynomial.legendre.leggauss(4)
    frac = 0.5 * (gx + 1.0)
    h = np.diff(x)
    inner = (v[:-1, None, :] * (1.0 - frac)[None, :, None]
             + v[1:, None, :] * frac[None, :, None])
    norms = np.linalg.norm(inner, axis=2) ** q
    return float((0.5 * h[:, None] * gw[None, :] * norms).sum() ** (1.0 / q))


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Complete description of one impulsive fractional system.

    ``q`` is the integrability exponent of the controls. The condition
    :math:`1/\\eta < q < 1/(1-\\eta)` is not enforced here; it is reported
    by :func:`fracimp.hypotheses.check_all`. The generator is attached to
    the partition, so its semigroup bound covers :math:`[0, a]`.
    """

    eta: FractionalOrder
    q: float
    partition: Partition
    A: Generator
    B: ControlMap
    h: Nonlinearity
    impulses: ImpulseSpec
    z0: np.ndarray

    def __post_init__(self) -> None:
        eta = FractionalOrder(_as_eta(self.eta))
        object.__setattr__(self, "eta", eta)
        q = float(self.q)
        if not q > 1.0 or not np.isfinite(q):
            raise ValueError(f"integrability exponent q must exceed 1: got {self.q}")
        object.__setattr__(self, "q", q)
        part = self.partition
        a = self.A
        if a.horizon != part.a or a.tau != part.tau:
            a = a.with_window(part.a, part.tau)
            object.__setattr__(self, "A", a)
        n = a.dim
        if self.B.state_dim != n:
            raise DimensionMismatch(f"control map acts on dimension {self.B.state_dim}, state is {n}")
        if self.h.space.dim != n or self.impulses.space.dim != n:
            raise DimensionMismatch("nonlinearity or impulses act on another state space")
        if abs(self.h.eta - eta.eta) > 0.0:
            raise ValueError("nonlinearity constants were computed for another order")
        longest = max(part.segment_length(r) for r in range(part.m + 1))
        if self.h.span < longest * (1.0 - 1.0e-12):
            raise ValueError(
                f"nonlinearity constants cover segments up to {self.h.span}, need {longest}")
        if self.impulses.m != part.m:
            raise ValueError(f"need {part.m} impulse maps, got {self.impulses.m}")
        z0 = np.array(self.z0, dtype=float).ravel()
        if z0.size != n:
            raise DimensionMismatch(f"initial datum has dimension {z0.size}, state is {n}")
        z0.setflags(write=False)
        object.__setattr__(self, "z0", z0)

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def space(self) -> StateSpace:
        return self.h.space

    @property
    def M(self) -> float:
        return float(self.A.M)

    @property
    def q_admissible(self) -> bool:
        e = self.eta.eta
        return 1.0 / e < self.q < 1.0 / (1.0 - e)

    def impulse_values(self, r: int, t: np.ndarray, z_at_tr) -> np.ndarray:
        """:math:`\\psi_r(t, z)` at times ``t`` of the closed window
        :math:`[t_r, p_r]`."""
        lo, hi = self.partition.window(r)
        z = np.asarray(z_at_tr, dtype=float)
        if z.shape != (self.dim,):
            raise DimensionMismatch(f"state has shape {z.shape}, expected ({self.dim},)")
        return self.impulses[r](np.asarray(t, dtype=float) - lo, z, self.space)

    def restart_value(self, r: int, z_at_tr) -> np.ndarray:
        """Datum :math:`\\psi_r(p_r, z(t_r^-))` of flow ``r``, with
        :math:`\\psi_0 = z_0`."""
        if r == 0:
            return self.z0
        return self.impulse_values(r, np.array([self.partition.p[r]]), z_at_tr)[0]

    def varsigma_lq(self) -> float:
        """:math:`\\|\\varsigma\\|_{L^q(0, a)}` by Gauss-Legendre quadrature on
        each segment."""
        gx, gw = np.polynomial.legendre.leggauss(32)
        total = 0.0
        for r in range(self.partition.m + 1):
            ell = self.partition.segment_length(r)
            sigma = 0.5 * ell * (gx + 1.0)
            total += 0.5 * ell * float(gw @ self.h.varsigma(sigma) ** self.q)
        return total ** (1.0 / self.q)


# }}}


# {{{ trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise samples of a :math:`PC_{1-\\eta}` function.

    ``flows[r]`` samples :math:`(p_r, t_{r+1}]` with weight exponent
    :math:`1-\\eta` and last node exactly at :math:`t_{r+1}`;
    ``windows[r - 1]`` samples :math:`(t_r, p_r]`. Entries may be ``None``
    for intervals not yet computed.
    """

    eta: float
    partition: Partition
    flows: tuple[SampledFunction | None, ...]
    windows: tuple[SampledFunction | None, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta", FractionalOrder(_as_eta(self.eta)).eta)
        flows = tuple(self.flows)
        windows = tuple(self.windows)
        m = self.partition.m
        if len(flows) != m + 1 or len(windows) != m:
            raise ValueError(f"need {m + 1} flow and {m} window records")
        for r, f in enumerate(flows):
            if f is None:
                continue
            lo, hi = self.partition.flow(r)
            if f.origin != lo or abs(f.nodes[-1] - hi) > 1.0e-12 * max(1.0, hi):
                raise ValueError(f"flow record {r} does not sample ({lo}, {hi}]")
        for r, f in enumerate(windows, start=1):
            if f is None:
                continue
            lo, hi = self.partition.window(r)
            if f.nodes[0] <= lo or abs(f.nodes[-1] - hi) > 1.0e-12 * max(1.0, hi):
                raise ValueError(f"window record {r} does not sample ({lo}, {hi}]")
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "windows", windows)

    @property
    def dim(self) -> int:
        for f in self.flows + self.windows:
            if f is not None:
                return f.dim
        raise EmptyInterval("trajectory holds no samples")

    @property
    def complete(self) -> bool:
        return all(f is not None for f in self.flows + self.windows)

    def left_limit(self, r: int) -> np.ndarray:
        """:math:`z(t_r^-)`, the value at the last node of flow ``r - 1``."""
        f = self.flows[r - 1]
        if f is None:
            raise EmptyInterval(f"flow {r - 1} has not been computed")
        return f.values[-1]

    def terminal(self) -> np.ndarray:
        """:math:`z(a)`."""
        return self.left_limit(self.partition.m + 1)

    def combine(self, other: Trajectory, alpha: float = 1.0, beta: float = -1.0) -> Trajectory:
        """Nodewise :math:`\\alpha\\,\\text{self} + \\beta\\,\\text{other}`
        on a common mesh."""
        def mix(f: SampledFunction | None, g: SampledFunction | None):
            if f is None or g is None:
                raise EmptyInterval("cannot combine incomplete trajectories")
            if f.nodes.shape != g.nodes.shape or np.any(f.nodes != g.nodes):
                raise DimensionMismatch("trajectories live on different meshes")
            limit = None
            if f.origin_limit is not None and g.origin_limit is not None:
                limit = alpha * f.origin_limit + beta * g.origin_limit
            return SampledFunction(f.origin, f.nodes, alpha * f.values + beta * g.values,
                                   f.weight_exponent, limit)

        return Trajectory(self.eta, self.partition,
                          tuple(mix(f, g) for f, g in zip(self.flows, other.flows)),
                          tuple(mix(f, g) for f, g in zip(self.windows, other.windows)))

    def scaled(self, factor: float) -> Trajectory:
        return Trajectory(self.eta, self.partition,
                          tuple(None if f is None else f.scaled(factor) for f in self.flows),
                          tuple(None if f is None else f.scaled(factor) for f in self.windows))

    def rows(self):
        """Yield ``(t, interval_index, branch, z, weighted_norm)`` in time
        order; windows carry the index of their impulse."""
        w = 1.0 - self.eta
        part = self.partition
        for r in range(part.m + 1):
            f = self.flows[r]
            if f is None:
                raise EmptyInterval(f"flow {r} has not been computed")
            norms = (f.nodes - part.p[r]) ** w * np.linalg.norm(f.values, axis=1)
            for t, z, nz in zip(f.nodes, f.values, norms):
                yield float(t), r, "flow", z, float(nz)
            if r < part.m:
                g = self.windows[r]
                if g is None:
                    raise EmptyInterval(f"window {r + 1} has not been computed")
                norms = (g.nodes - part.p[r]) ** w * np.linalg.norm(g.values, axis=1)
                for t, z, nz in zip(g.nodes, g.values, norms):
                    yield float(t), r + 1, "impulse", z, float(nz)


#: number of interior probes per cell in the refined zone next to each p_r
_PROBE_REFINEMENT = 4
#: number of cells next to each p_r that are probed
_PROBE_CELLS = 4


def segment_norms(z: Trajectory) -> np.ndarray:
    """Discrete :math:`\\|z\\|_r = \\sup_{(p_r, p_{r+1}]}(t - p_r)^{1-\\eta}\\|z(t)\\|`
    for every segment ``r``.

    The supremum runs over the sample nodes, the weighted limit at
    :math:`p_r`, and a refined probe mesh on the first cells of each flow.

    :raises EmptyInterval: if any record is missing.
    """
    w = 1.0 - z.eta
    part = z.partition
    out = np.zeros(part.m + 1)
    for r in range(part.m + 1):
        f = z.flows[r]
        if f is None:
            raise EmptyInterval(f"flow {r} has not been computed")
        best = float(np.max(np.linalg.norm(f.weighted_values(), axis=1)))
        if f.origin_limit is not None:
            best = max(best, float(np.linalg.norm(f.origin_limit)))
        x = np.concatenate([[f.origin], f.nodes[:_PROBE_CELLS]])
        frac = np.arange(1, _PROBE_REFINEMENT) / _PROBE_REFINEMENT
        probes = (x[:-1, None] + np.diff(x)[:, None] * frac[None, :]).ravel()
        probes = probes[probes > f.origin]
        if probes.size and f.nodes.size >= 2:
            vals = f(probes)
            weighted = (probes - f.origin)[:, None] ** w * vals
            best = max(best, float(np.max(np.linalg.norm(weighted, axis=1))))
        if r < part.m:
            g = z.windows[r]
            if g is None:
                raise EmptyInterval(f"window {r + 1} has not been computed")
            weighted = (g.nodes - part.p[r])[:, None] ** w * g.values
            best = max(best, float(np.max(np.linalg.norm(weighted, axis=1))))
        out[r] = best
    return out


def pc_norm(z: Trajectory) -> float:
    """:math:`\\|z\\|_{[0,a]} = \\max_r \\|z\\|_r`."""
    return float(np.max(segment_norms(z)))


# }}}

# vim: foldmethod=marker
