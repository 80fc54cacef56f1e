"""Generators, semigroups and fractional solution operators.

A generator :math:`A` is either a dense matrix or a self-adjoint operator
given by its spectrum. In the spectral case states are stored as the
vector of coefficients in the eigenbasis, so the semigroup acts
diagonally and Euclidean norms equal the norms in the underlying Hilbert
space.

The solution operator is
:math:`T_\\eta(t) = \\eta\\int_0^\\infty \\theta\\xi_\\eta(\\theta)T(t^\\eta\\theta)d\\theta`,
which for an eigenvalue :math:`\\lambda` reduces to
:math:`E_{\\eta,\\eta}(\\lambda t^\\eta)`. Both routes are available so that
each can check the other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, linalg, special

from fracimp.errors import (
    DimensionMismatch,
    QuadratureFailure,
    RouteUnavailable,
)
from fracimp.fracops import (
    FractionalOrder,
    SampledFunction,
    _as_eta,
    improper_integral,
    mittag_leffler2,
    wright_density,
)

__all__ = [
    "ControlKind",
    "ControlMap",
    "FracRoute",
    "Generator",
    "GeneratorKind",
    "KernelWeights",
    "SpectralBasis",
    "frac_operator_apply",
    "kernel_weights",
    "semigroup_apply",
    "terminal_operator",
]

#: number of sample times used to certify the semigroup bound
_BOUND_SAMPLES = 65
#: eigenvector matrices worse conditioned than this are rejected
_MAX_EIGVEC_CONDITION = 1.0e8


# {{{ spectral basis


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Grid representation of an orthonormal eigenbasis.

    ``functions[l]`` holds the values of the basis function
    :math:`\\alpha_l` on the grid ``x`` and ``weights`` are composite
    Simpson weights, so that inner products are ``(f * g) @ weights``.
    """

    x: np.ndarray
    weights: np.ndarray
    functions: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        w = np.array(self.weights, dtype=float)
        f = np.atleast_2d(np.array(self.functions, dtype=float))
        if w.shape != x.shape or f.shape[1] != x.size:
            raise DimensionMismatch("basis functions, weights and grid disagree")
        for a in (x, w, f):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "functions", f)

    @classmethod
    def sine(cls, modes: int, points: int = 257, length: float = np.pi) -> SpectralBasis:
        """Dirichlet sine basis :math:`\\sqrt{2/\\ell}\\sin(l\\pi x/\\ell)` on
        :math:`[0, \\ell]`."""
        if points % 2 == 0 or points < 3:
            raise ValueError("composite Simpson needs an odd number of grid points")
        x = np.linspace(0.0, length, points)
        h = x[1] - x[0]
        w = np.full(points, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
        l = np.arange(1, modes + 1)
        f = np.sqrt(2.0 / length) * np.sin(np.outer(l, x) * np.pi / length)
        return cls(x, w, f)

    @property
    def modes(self) -> int:
        return self.functions.shape[0]

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid values of :math:`\\sum_l c_l\\alpha_l`; the last axis of
        ``coeffs`` indexes the modes."""
        return np.asarray(coeffs) @ self.functions

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        """Coefficients :math:`\\langle v, \\alpha_l\\rangle` of grid values."""
        return (np.asarray(values) * self.weights) @ self.functions.T


# }}}


# {{{ generator


class GeneratorKind(enum.Enum):
    DENSE = "dense-matrix"
    SPECTRAL = "spectral"


@dataclass(frozen=True, eq=False)
class Generator:
    """Generator :math:`A` of a :math:`C_0`-semigroup on a finite
    dimensional (or spectrally truncated) state space.

    :arg matrix: the dense matrix, for ``kind="dense-matrix"``.
    :arg eigenvalues: the eigenvalues :math:`\\lambda_l`, for
        ``kind="spectral"``; states are coefficient vectors.
    :arg M: semigroup bound :math:`\\sup_{[0, a]}\\|T(t)\\|`. Computed on
        :data:`_BOUND_SAMPLES` sample times when omitted, and checked
        against them when given.
    :arg tau: largest flow-interval length of the partition in use.
    :arg horizon: the final time :math:`a` used for the bound.
    :arg basis: optional grid representation of the eigenbasis, used by
        pointwise nonlinearities.
    """

    kind: GeneratorKind
    matrix: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    M: float | None = None
    tau: float | None = None
    horizon: float = 1.0
    basis: SpectralBasis | None = None

    def __post_init__(self) -> None:
        kind = GeneratorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is GeneratorKind.DENSE:
            if self.matrix is None:
                raise ValueError("a dense generator needs a matrix")
            a = np.atleast_2d(np.array(self.matrix, dtype=float))
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise DimensionMismatch(f"generator matrix must be square: got {a.shape}")
            a.setflags(write=False)
            object.__setattr__(self, "matrix", a)
            object.__setattr__(self, "eigenvalues", None)
        else:
            if self.eigenvalues is None:
                raise ValueError("a spectral generator needs eigenvalues")
            lam = np.atleast_1d(np.array(self.eigenvalues, dtype=float))
            if lam.ndim != 1 or lam.size == 0:
                raise DimensionMismatch("eigenvalues must be a non-empty sequence")
            lam.setflags(write=False)
            object.__setattr__(self, "eigenvalues", lam)
            object.__setattr__(self, "matrix", None)
            if self.basis is not None and self.basis.modes != lam.size:
                raise DimensionMismatch("basis and eigenvalues have different sizes")

        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive: got {self.horizon}")
        if self.tau is not None and not self.tau > 0.0:
            raise ValueError(f"tau must be positive: got {self.tau}")

        sampled = self.sampled_bound()
        if self.M is None:
            object.__setattr__(self, "M", max(1.0, sampled))
        else:
            m = float(self.M)
            if m < 1.0 or m < sampled * (1.0 - 1.0e-12):
                raise ValueError(
                    f"declared bound M={m} is below max(1, sup ||T(t)||) = {max(1.0, sampled)}")
            object.__setattr__(self, "M", m)

    @classmethod
    def dense(cls, matrix, **kwargs) -> Generator:
        return cls(GeneratorKind.DENSE, matrix=matrix, **kwargs)

    @classmethod
    def spectral(cls, eigenvalues, **kwargs) -> Generator:
        return cls(GeneratorKind.SPECTRAL, eigenvalues=eigenvalues, **kwargs)

    @classmethod
    def heat(cls, modes: int = 64, points: int = 257, **kwargs) -> Generator:
        """Dirichlet Laplacian on :math:`[0, \\pi]` with :math:`\\lambda_l = -l^2`."""
        lam = -np.arange(1, modes + 1, dtype=float) ** 2
        return cls.spectral(lam, basis=SpectralBasis.sine(modes, points), **kwargs)

    def with_window(self, horizon: float, tau: float) -> Generator:
        """Copy attached to a partition with final time ``horizon``."""
        return replace(self, horizon=float(horizon), tau=float(tau),
                       M=None if self._auto_bound else self.M)

    @property
    def _auto_bound(self) -> bool:
        return self.M == max(1.0, self.sampled_bound())

    @property
    def dim(self) -> int:
        if self.kind is GeneratorKind.DENSE:
            return self.matrix.shape[0]
        return self.eigenvalues.size

    def sampled_bound(self) -> float:
        """Largest :math:`\\|T(t)\\|_2` over equispaced samples of
        :math:`[0, a]`."""
        t = np.linspace(0.0, self.horizon, _BOUND_SAMPLES)
        if self.kind is GeneratorKind.SPECTRAL:
            return float(np.exp(np.max(self.eigenvalues) * t).max())
        mats = linalg.expm(t[:, None, None] * self.matrix[None, :, :])
        return float(max(np.linalg.norm(m, 2) for m in mats))

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        """Eigen-decomposition ``(lam, V, Vinv)``; ``V`` is ``None`` when the
        state is already stored in modal coordinates."""
        if self.kind is GeneratorKind.SPECTRAL:
            return self.eigenvalues, None, None
        a = self.matrix
        if np.allclose(a, a.T, rtol=0.0, atol=1.0e-14 * max(1.0, np.abs(a).max())):
            lam, v = np.linalg.eigh(0.5 * (a + a.T))
            return lam, v, v.T
        lam, v = np.linalg.eig(a)
        if np.linalg.cond(v) > _MAX_EIGVEC_CONDITION:
            raise RouteUnavailable("generator matrix is too close to non-diagonalizable")
        return lam, v, np.linalg.inv(v)

    def to_modal(self, z: np.ndarray) -> np.ndarray:
        """Modal coordinates of states stored along the last axis."""
        _, _, vinv = self.modes
        return z if vinv is None else np.asarray(z) @ vinv.T

    def from_modal(self, y: np.ndarray) -> np.ndarray:
        _, v, _ = self.modes
        if v is None:
            return y
        out = np.asarray(y) @ v.T
        return out.real if np.iscomplexobj(out) else out


# }}}


# {{{ control map


class ControlKind(enum.Enum):
    IDENTITY = "identity"
    DENSE = "dense-matrix"


@dataclass(frozen=True, eq=False)
class ControlMap:
    """Bounded control operator :math:`B: U \\to Z`.

    The identity map needs ``state_dim``; a dense map takes its shape from
    ``matrix`` (state dimension by control dimension).
    """

    kind: ControlKind
    matrix: np.ndarray | None = None
    state_dim: int | None = None
    bound: float = field(init=False)

    def __post_init__(self) -> None:
        kind = ControlKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ControlKind.IDENTITY:
            if self.state_dim is None or int(self.state_dim) < 1:
                raise ValueError("the identity control map needs a positive state_dim")
            object.__setattr__(self, "state_dim", int(self.state_dim))
            object.__setattr__(self, "matrix", None)
            object.__setattr__(self, "bound", 1.0)
        else:
            if self.matrix is None:
                raise ValueError("a dense control map needs a matrix")
            b = np.atleast_2d(np.array(self.matrix, dtype=float))
            if b.ndim != 2:
                raise DimensionMismatch("control matrix must be two-dimensional")
            if self.state_dim is not None and int(self.state_dim) != b.shape[0]:
                raise DimensionMismatch(
                    f"control matrix has {b.shape[0]} rows for state dimension {self.state_dim}")
            b.setflags(write=False)
            object.__setattr__(self, "matrix", b)
            object.__setattr__(self, "state_dim", b.shape[0])
            object.__setattr__(self, "bound", float(np.linalg.norm(b, 2)))

    @classmethod
    def identity(cls, dim: int) -> ControlMap:
        return cls(ControlKind.IDENTITY, state_dim=dim)

    @classmethod
    def dense(cls, matrix) -> ControlMap:
        return cls(ControlKind.DENSE, matrix=matrix)

    @property
    def control_dim(self) -> int:
        if self.kind is ControlKind.IDENTITY:
            return self.state_dim
        return self.matrix.shape[1]

    def as_matrix(self) -> np.ndarray:
        if self.kind is ControlKind.IDENTITY:
            return np.eye(self.state_dim)
        return self.matrix

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply :math:`B` to controls stored along the last axis."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.control_dim:
            raise DimensionMismatch(
                f"control has dimension {u.shape[-1]}, expected {self.control_dim}")
        if self.kind is ControlKind.IDENTITY:
            return u
        return u @ self.matrix.T


# }}}


# {{{ semigroup and solution operator


def _check_state(a: Generator, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != a.dim:
        raise DimensionMismatch(f"state has shape {z.shape}, generator dimension is {a.dim}")
    return z


def semigroup_apply(a: Generator, t: float, z) -> np.ndarray:
    """Semigroup action :math:`T(t)z`.

    Spectral generators act diagonally on coefficients; dense ones use the
    scaling-and-squaring matrix exponential.
    """
    z = _check_state(a, z)
    t = float(t)
    if t < 0.0:
        raise ValueError(f"semigroup time must be nonnegative: got {t}")
    if t == 0.0:
        return z.copy()
    if a.kind is GeneratorKind.SPECTRAL:
        return np.exp(a.eigenvalues * t) * z
    return linalg.expm(t * a.matrix) @ z


class FracRoute(enum.Enum):
    WRIGHT_INTEGRAL = "wright-integral"
    SPECTRAL_ML = "spectral-ml"


def frac_operator_apply(a: Generator, eta: FractionalOrder | float, t: float, z,
                        route: FracRoute | str | None = None) -> np.ndarray:
    """Fractional solution operator :math:`T_\\eta(t)z`.

    ``route="spectral-ml"`` (the default for spectral generators) uses
    :math:`E_{\\eta,\\eta}(\\lambda_l t^\\eta)` per mode. ``"wright-integral"``
    (the default for dense ones) integrates the semigroup against
    :math:`\\eta\\theta\\xi_\\eta(\\theta)` on the half line.

    :raises RouteUnavailable: for the spectral route on a dense generator.
    """
    e = FractionalOrder(_as_eta(eta)).eta
    z = _check_state(a, z)
    t = float(t)
    if not t > 0.0:
        raise ValueError(f"solution operator time must be positive: got {t}")
    if route is None:
        route = (FracRoute.SPECTRAL_ML if a.kind is GeneratorKind.SPECTRAL
                 else FracRoute.WRIGHT_INTEGRAL)
    route = FracRoute(route)

    if route is FracRoute.SPECTRAL_ML:
        if a.kind is not GeneratorKind.SPECTRAL:
            raise RouteUnavailable("the spectral Mittag-Leffler route needs a spectral generator")
        return mittag_leffler2(e, e, a.eigenvalues * t**e) * z

    scale = t**e

    def integrand(theta: np.ndarray) -> np.ndarray:
        dens = e * theta * wright_density(e, theta)
        live = dens > 0.0
        out = np.zeros((theta.size, z.size))
        if a.kind is GeneratorKind.SPECTRAL:
            with np.errstate(over="ignore"):
                expo = np.exp(np.outer(scale * theta[live], a.eigenvalues))
            out[live] = dens[live, None] * expo * z[None, :]
        else:
            mats = linalg.expm(scale * theta[live, None, None] * a.matrix[None, :, :])
            out[live] = dens[live, None] * (mats @ z)
        return out

    value = improper_integral(integrand)
    if not np.all(np.isfinite(value)):
        raise QuadratureFailure("the Wright integral of the semigroup diverged")
    return value


# }}}


# {{{ product integration against the solution-operator kernel

#: cells at least this many widths away from the target use Gauss-Legendre
_FAR_CELL_RATIO = 8.0
_FAR_CELL_POINTS = 4


def _kernel(eta: float, lam: np.ndarray, w: np.ndarray) -> np.ndarray:
    """:math:`K(w) = w^{\\eta-1}E_{\\eta,\\eta}(\\lambda w^\\eta)`, shape
    ``w.shape + lam.shape``."""
    we = w[..., None] ** eta
    return we / w[..., None] * mittag_leffler2(eta, eta, lam * we)


def _power_convolution(eta: float, lam: np.ndarray, w: np.ndarray, gam: float) -> np.ndarray:
    """:math:`\\int_0^w K(v)(w - v)^{\\gamma - 1}dv =
    \\Gamma(\\gamma)w^{\\eta+\\gamma-1}E_{\\eta,\\eta+\\gamma}(\\lambda w^\\eta)`."""
    we = w[..., None] ** eta
    return (special.gamma(gam) * w[..., None] ** (eta + gam - 1.0)
            * mittag_leffler2(eta, eta + gam, lam * we))


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Product-integration weights for
    :math:`\\int_p^{t_i}K(t_i - s)F(s)ds` on a mesh
    :math:`p = s_0 < s_1 < \\dots < s_N`, for every mode :math:`\\lambda_l`.

    ``F`` is interpolated piecewise linearly after subtracting a fitted
    leading singular term :math:`\\alpha(s - p)^{-w}`, whose convolution is
    known in closed form.
    """

    eta: float
    lam: np.ndarray
    nodes: np.ndarray
    rows: np.ndarray
    #: weights of shape (len(rows), N + 1, L)
    weights: np.ndarray
    #: :math:`(t_i - p)^{\\eta-1}E_{\\eta,\\eta}(\\lambda(t_i - p)^\\eta)`
    homogeneous: np.ndarray

    @property
    def origin(self) -> float:
        return float(self.nodes[0])

    def targets(self) -> np.ndarray:
        return self.nodes[self.rows]

    @cached_property
    def _powers(self) -> dict:
        return {}

    def power(self, gam: float) -> np.ndarray:
        """Convolution of :math:`(s - p)^{\\gamma-1}` at every target."""
        key = float(gam)
        if key not in self._powers:
            w = self.targets() - self.origin
            self._powers[key] = _power_convolution(self.eta, self.lam, w, key)
        return self._powers[key]

    def apply(self, values: np.ndarray, exponent: float = 0.0) -> np.ndarray:
        """Convolve modal samples ``values`` (shape (N, L), at
        :math:`s_1..s_N`) with the kernel.

        ``exponent`` is the strength :math:`w \\in [0, 1)` of a possible
        :math:`(s - p)^{-w}` singularity at the origin. For ``w > 0`` the
        two-term model :math:`\\alpha(s-p)^{-w} + \\beta` is fitted on the
        first two nodes and its singular part is integrated exactly; for
        ``w = 0`` the origin value is extrapolated linearly.
        """
        values = np.asarray(values)
        n = self.nodes.size - 1
        if values.shape[0] != n:
            raise DimensionMismatch(f"expected {n} samples, got {values.shape[0]}")
        u = self.nodes[1:] - self.origin
        if exponent > 0.0:
            g = u ** (-exponent)
            alpha = (values[0] - values[1]) / (g[0] - g[1])
            reg = values - g[:, None] * alpha[None, :]
            first = reg[0]
            out = self.power(1.0 - exponent) * alpha[None, :]
        else:
            first = values[0] - (values[1] - values[0]) * u[0] / (u[1] - u[0])
            reg = values
            out = 0.0
        full = np.concatenate([first[None, :], reg], axis=0)
        return out + np.einsum("rjl,jl->rl", self.weights, full)


def _weight_block(eta: float, lam: np.ndarray, s: np.ndarray, rows: np.ndarray,
                  out: np.ndarray) -> None:
    """Accumulate hat-function weights of
    :math:`\\int_{s_0}^{s_i}K(s_i - s)F(s)ds` for target indices ``rows``
    into ``out`` of shape (len(rows), N + 1, L).

    Cells close to the target use exact moments of the kernel, distant
    cells a Gauss-Legendre rule on the smooth kernel.
    """
    ri = np.repeat(np.arange(rows.size), rows)
    cj = np.concatenate([np.arange(i) for i in rows])
    ti = s[rows][ri]
    d = s[cj + 1] - s[cj]
    wa = ti - s[cj]
    wb = ti - s[cj + 1]
    far = wb >= _FAR_CELL_RATIO * d

    near = ~far
    if np.any(near):
        k = int(near.sum())
        ws = np.concatenate([wa[near], wb[near]])
        pos = ws > 0.0
        m0 = np.zeros((ws.size, lam.size), dtype=out.dtype)
        f1 = np.zeros_like(m0)
        m0[pos] = _power_convolution(eta, lam, ws[pos], 1.0)
        f1[pos] = _power_convolution(eta, lam, ws[pos], 2.0)
        dd = d[near][:, None]
        a_int = m0[:k] - m0[k:]
        b_int = (f1[:k] - f1[k:]) / dd - m0[k:]
        np.add.at(out, (ri[near], cj[near]), a_int - b_int)
        np.add.at(out, (ri[near], cj[near] + 1), b_int)

    if np.any(far):
        x, wg = _gauss_legendre(_FAR_CELL_POINTS)
        frac = 0.5 * (x + 1.0)
        kern = _kernel(eta, lam, wa[far][:, None] - d[far][:, None] * frac[None, :])
        half = 0.5 * d[far][:, None, None] * wg[None, :, None]
        a_int = (half * kern).sum(axis=1)
        b_int = (half * kern * frac[None, :, None]).sum(axis=1)
        np.add.at(out, (ri[far], cj[far]), a_int - b_int)
        np.add.at(out, (ri[far], cj[far] + 1), b_int)


@lru_cache(maxsize=8)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


#: bound on the number of (cell, mode) pairs evaluated at once
_CHUNK_CELLS = 1 << 17


_WEIGHT_CACHE: dict = {}
_WEIGHT_CACHE_SIZE = 16


def kernel_weights(eta: float, lam: np.ndarray, nodes: np.ndarray,
                   rows: np.ndarray | None = None) -> KernelWeights:
    """Build (or fetch from a small cache) the product-integration weights
    on ``nodes`` for target indices ``rows`` (all of ``1..N`` by default)."""
    lam = np.asarray(lam)
    nodes = np.asarray(nodes, dtype=float)
    rows = np.arange(1, nodes.size) if rows is None else np.asarray(rows, dtype=int)
    if nodes.size < 3:
        raise QuadratureFailure("product integration needs at least two cells")
    key = (float(eta), lam.tobytes(), str(lam.dtype), nodes.tobytes(), rows.tobytes())
    hit = _WEIGHT_CACHE.get(key)
    if hit is not None:
        return hit

    n = nodes.size - 1
    dtype = np.result_type(lam, float)
    w = np.zeros((rows.size, n + 1, lam.size), dtype=dtype)
    per_row = max(1, lam.size * _FAR_CELL_POINTS)
    start = 0
    while start < rows.size:
        stop = start + 1
        budget = rows[start] * per_row
        while stop < rows.size and budget + rows[stop] * per_row <= _CHUNK_CELLS:
            budget += rows[stop] * per_row
            stop += 1
        _weight_block(eta, lam, nodes, rows[start:stop], w[start:stop])
        start = stop
    tw = nodes[rows] - nodes[0]
    hom = _kernel(eta, lam, tw)
    for a in (w, hom):
        a.setflags(write=False)
    lam_ro = lam.copy()
    lam_ro.setflags(write=False)
    nodes_ro = nodes.copy()
    nodes_ro.setflags(write=False)
    kw = KernelWeights(float(eta), lam_ro, nodes_ro, rows, w, hom)

    if len(_WEIGHT_CACHE) >= _WEIGHT_CACHE_SIZE:
        _WEIGHT_CACHE.pop(next(iter(_WEIGHT_CACHE)))
    _WEIGHT_CACHE[key] = kw
    return kw


# }}}


# {{{ terminal operator


def terminal_operator(a: Generator, eta: FractionalOrder | float,
                      interval: tuple[float, float], f: SampledFunction) -> np.ndarray:
    """Terminal operator
    :math:`\\mathbb{F}f = \\int_{p}^{T}(T - s)^{\\eta-1}T_\\eta(T - s)f(s)ds`
    for ``interval = (p, T)``.

    ``f`` must be sampled on :math:`(p, T]` with its last node at ``T``
    and at least two nodes; ``f.weight_exponent`` is honoured at ``p``.
    """
    e = FractionalOrder(_as_eta(eta)).eta
    p, end = (float(v) for v in interval)
    if not p < end:
        raise ValueError(f"empty interval ({p}, {end}]")
    if f.dim != a.dim:
        raise DimensionMismatch(f"function has dimension {f.dim}, generator {a.dim}")
    x = f.nodes
    tol = 1.0e-12 * max(1.0, abs(end))
    if x[0] <= p or abs(x[-1] - end) > tol or abs(f.origin - p) > tol or x.size < 2:
        raise QuadratureFailure(
            "terminal operator needs samples on (p, T] ending at T with origin p")
    lam = a.modes[0]
    nodes = np.concatenate([[p], x[:-1], [end]])
    kw = kernel_weights(e, lam, nodes, np.array([nodes.size - 1]))
    y = a.to_modal(f.values)
    return a.from_modal(kw.apply(y, f.weight_exponent)[0])


# }}}

# vim: foldmethod=marker
