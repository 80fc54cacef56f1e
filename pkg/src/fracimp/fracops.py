"""Fractional-calculus primitives and special functions.

This module collects the scalar building blocks used by the rest of the
package: the Gamma and Beta functions, the one- and two-parameter
Mittag-Leffler functions, the Wright (Mainardi) probability density, an
improper-integral rule on :math:`(0, \\infty)`, the sampled-function record,
and quadrature for weakly singular kernels together with the
Riemann-Liouville integral and derivative built on it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from fracimp.errors import (
    AccuracyLoss,
    DimensionMismatch,
    OrderOutOfRange,
    QuadratureFailure,
    StencilUnderflow,
)

__all__ = [
    "FractionalOrder",
    "QuadKind",
    "QuadratureRule",
    "SampledFunction",
    "beta_fn",
    "gamma",
    "improper_integral",
    "mittag_leffler",
    "mittag_leffler2",
    "rgamma",
    "rl_derivative",
    "rl_integral",
    "rl_integral_sampled",
    "singular_quad",
    "wright_density",
]

# Gamma and Beta are taken from scipy.special.
gamma = special.gamma
rgamma = special.rgamma


def beta_fn(a: float, b: float) -> float:
    """Euler Beta function :math:`B(a, b) = \\Gamma(a)\\Gamma(b)/\\Gamma(a+b)`."""
    return float(special.beta(a, b))


# {{{ orders


@dataclass(frozen=True)
class FractionalOrder:
    """Order :math:`\\eta` of a Riemann-Liouville operator, with
    :math:`0 < \\eta < 1`."""

    eta: float

    def __post_init__(self) -> None:
        eta = float(self.eta)
        if not np.isfinite(eta) or not 0.0 < eta < 1.0:
            raise OrderOutOfRange(f"order must satisfy 0 < eta < 1: got {self.eta!r}")
        object.__setattr__(self, "eta", eta)

    def __float__(self) -> float:
        return self.eta


def _as_eta(eta: FractionalOrder | float) -> float:
    return eta.eta if isinstance(eta, FractionalOrder) else float(eta)


# }}}


# {{{ Mittag-Leffler

_SERIES_RADIUS = 5.0
_SERIES_MAX_TERMS = 200
_SERIES_AMPLIFICATION = 1.0e5
_ASYMPTOTIC_RADIUS = 50.0
_CONTOUR_HALF_NODES = 64
_CONTOUR_DECAY = 38.0


def _series_ml(alpha: float, beta: float, z: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """Taylor series with Neumaier compensated summation.

    Returns the sums and a boolean mask of the entries whose truncation and
    cancellation are both acceptable.
    """
    k = np.arange(_SERIES_MAX_TERMS + 1)
    coeff = rgamma(alpha * k + beta)

    total = np.zeros_like(z)
    comp = np.zeros_like(z)
    absum = np.zeros(z.shape)
    power = np.ones_like(z)
    tail = np.zeros(z.shape)
    for i in range(_SERIES_MAX_TERMS + 1):
        term = coeff[i] * power
        s = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - s) + term, (term - s) + total)
        total = s
        aterm = np.abs(term)
        absum += aterm
        if i >= _SERIES_MAX_TERMS - 2:
            tail = np.maximum(tail, aterm)
        power = power * z

    value = total + comp
    scale = np.maximum(np.abs(value), np.finfo(float).tiny)
    ok = (tail <= 1.0e-17 * scale) & (absum <= _SERIES_AMPLIFICATION * scale)
    return value, ok


def _asymptotic_ml(alpha: float, beta: float, z: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Large-argument expansion with the exponential (pole) contribution."""
    value = np.zeros_like(z)
    with np.errstate(over="ignore", invalid="ignore"):
        arg = np.abs(np.angle(z))
        dominant = arg <= alpha * np.pi * (1.0 + 1.0e-14)
        root = np.where(dominant, z, 1.0) ** (1.0 / alpha)
        expo = np.where(dominant, root ** (1.0 - beta) * np.exp(root) / alpha, 0.0)

    # the growth test uses the envelope |1/Gamma(x)| <= Gamma(1 - x)/pi so
    # that terms close to a zero of 1/Gamma do not truncate the sum early;
    # exact zeros (integer x <= 0) make the expansion finite
    acc = np.zeros_like(z)
    last = np.zeros(z.shape)
    prev = np.full(z.shape, np.inf)
    growing = np.zeros(z.shape, dtype=bool)
    inv = 1.0 / z
    logabs = np.log(np.abs(z))
    power = np.ones_like(z)
    for k in range(1, 61):
        power = power * inv
        x = beta - alpha * k
        term = power * rgamma(x)
        if x < 1.0 and x != np.round(x):
            env = np.exp(special.gammaln(1.0 - x) - k * logabs) / np.pi
        else:
            env = np.abs(term)
        growing |= env > prev
        acc = np.where(growing, acc, acc - term)
        last = np.where(growing | (env == 0.0), last, env)
        prev = np.where(env > 0.0, env, prev)

    value = expo + acc
    scale = np.maximum(np.abs(value), np.finfo(float).tiny)
    ok = np.isfinite(value) & (last <= 1.0e-16 * scale)
    return value, ok


@lru_cache(maxsize=64)
def _contour_rule(alpha: float, beta: float, mu: float, n: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoidal rule on the parabola :math:`s = \\mu(1 + iu)^2`.

    Returns weights ``w`` and nodes ``sigma = s**alpha`` such that the
    Laplace inversion integral is ``sum(w / (sigma - z))``.
    """
    umax = np.sqrt(1.0 + _CONTOUR_DECAY / mu)
    h = umax / n
    u = h * np.arange(-n, n + 1)
    s = mu * (1.0 + 1j * u) ** 2
    ds = 2j * mu * (1.0 + 1j * u)
    w = h / (2j * np.pi) * np.exp(s) * s ** (alpha - beta) * ds
    w.setflags(write=False)
    sigma = s ** alpha
    sigma.setflags(write=False)
    return w, sigma


def _contour_ml(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """Laplace-inversion evaluation on a parabolic Hankel contour.

    The contour parameter is 1 unless a pole of the integrand lies close to
    it, in which case the contour is moved so that the pole sits well inside
    the enclosed region and its residue is added explicitly.
    """
    out = np.empty_like(z)
    absz = np.abs(z)
    argz = np.angle(z)
    has_pole = np.abs(argz) < alpha * np.pi
    with np.errstate(over="ignore", invalid="ignore"):
        sstar = np.where(has_pole, absz ** (1.0 / alpha) * np.exp(1j * argz / alpha), 0.0)
        rho = np.where(has_pole, np.sqrt(sstar).real, 0.0)

    mus = np.where(has_pole & (np.abs(rho - 1.0) < 0.5), rho**2 / 4.0, 1.0)
    for mu in np.unique(mus):
        sel = mus == mu
        n = max(_CONTOUR_HALF_NODES, int(np.ceil(np.sqrt(1.0 + _CONTOUR_DECAY / mu) / 0.1)))
        w, sigma = _contour_rule(alpha, beta, float(mu), n)
        zs = z[sel]
        val = np.empty(zs.shape, dtype=complex)
        for start in range(0, zs.size, 4096):
            chunk = zs[start:start + 4096]
            val[start:start + 4096] = (w[None, :] / (sigma[None, :] - chunk[:, None])).sum(axis=1)
        right = has_pole[sel] & (np.sqrt(sstar[sel] / mu).real > 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            ss = np.where(right, sstar[sel], 0.0)
            res = np.where(right, ss ** (1.0 - beta) * np.exp(ss) / alpha, 0.0)
        out[sel] = val + res
    return out


def mittag_leffler2(eta: FractionalOrder | float, beta: float, w):
    """Two-parameter Mittag-Leffler function
    :math:`E_{\\eta,\\beta}(w) = \\sum_i w^i / \\Gamma(\\eta i + \\beta)`.

    The argument may be a scalar or an array, real or complex. Small
    arguments use the Taylor series with compensated summation, large ones
    the asymptotic expansion, and the rest a Laplace-inversion contour
    integral. Orders above one are only available inside the series region.

    :raises OrderOutOfRange: if ``eta <= 0`` or ``beta <= 0``.
    :raises AccuracyLoss: if the value overflows or no evaluation route is
        valid for the argument.
    """
    alpha = _as_eta(eta)
    beta = float(beta)
    if not alpha > 0.0 or not np.isfinite(alpha):
        raise OrderOutOfRange(f"Mittag-Leffler order must be positive: got {eta!r}")
    if not beta > 0.0 or not np.isfinite(beta):
        raise OrderOutOfRange(f"Mittag-Leffler beta must be positive: got {beta!r}")

    warr = np.asarray(w)
    is_complex = np.iscomplexobj(warr)
    z = np.atleast_1d(warr).astype(complex).ravel()
    if not np.all(np.isfinite(z)):
        raise AccuracyLoss("Mittag-Leffler argument must be finite")

    out = np.empty_like(z)
    todo = np.ones(z.shape, dtype=bool)

    small = np.abs(z) <= _SERIES_RADIUS
    if np.any(small):
        val, ok = _series_ml(alpha, beta, z[small])
        idx = np.flatnonzero(small)[ok]
        out[idx] = val[ok]
        todo[idx] = False

    if alpha > 1.0:
        if np.any(todo):
            raise AccuracyLoss(
                f"E_{{{alpha},{beta}}} is only validated inside the series region")
    else:
        large = todo & (np.abs(z) >= _ASYMPTOTIC_RADIUS)
        if alpha == 1.0:
            if beta == np.round(beta):
                # the expansion is finite and exact
                large = todo.copy()
            else:
                # the exponential term sits on the Stokes line for negative
                # arguments
                large &= np.abs(np.angle(z)) < 0.5 * np.pi
        if np.any(large):
            val, ok = _asymptotic_ml(alpha, beta, z[large])
            idx = np.flatnonzero(large)[ok]
            out[idx] = val[ok]
            todo[idx] = False
        if np.any(todo):
            out[todo] = _contour_ml(alpha, beta, z[todo])

    if not np.all(np.isfinite(out)):
        raise AccuracyLoss("Mittag-Leffler value overflows double precision")

    result = out if is_complex else out.real
    if warr.ndim == 0:
        return result[0].item()
    return result.reshape(warr.shape)


def mittag_leffler(eta: FractionalOrder | float, w):
    """One-parameter Mittag-Leffler function :math:`E_\\eta(w) = E_{\\eta,1}(w)`."""
    return mittag_leffler2(eta, 1.0, w)


# }}}


# {{{ Wright density

_WRIGHT_MAX_TERMS = 500
_WRIGHT_SERIES_LIMIT = 1.0


@lru_cache(maxsize=32)
def _wright_angle_rule(eta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on :math:`(0, \\pi)` and the values of the
    Zolotarev function :math:`a(\\varphi)`."""
    x, wts = special.roots_legendre(n)
    phi = 0.5 * np.pi * (x + 1.0)
    wts = 0.5 * np.pi * wts
    a = ((np.sin(eta * phi) / np.sin(phi)) ** (1.0 / (1.0 - eta))
         * np.sin((1.0 - eta) * phi) / np.sin(eta * phi))
    return wts, a


def _wright_integral(eta: float, theta: np.ndarray, n: int = 128) -> np.ndarray:
    """Integral representation used away from the origin,
    :math:`\\xi_\\eta(\\theta) = \\frac{\\theta^{\\eta/(1-\\eta)}}{(1-\\eta)\\pi}
    \\int_0^\\pi a(\\varphi) e^{-\\theta^{1/(1-\\eta)} a(\\varphi)} d\\varphi`."""
    wts, a = _wright_angle_rule(eta, n)
    x = theta ** (1.0 / (1.0 - eta))
    with np.errstate(under="ignore"):
        integral = (wts[None, :] * a[None, :] * np.exp(-x[:, None] * a[None, :])).sum(axis=1)
    return theta ** (eta / (1.0 - eta)) * integral / ((1.0 - eta) * np.pi)


def _wright_series(eta: float, theta: float) -> float:
    """Alternating series; stops after three consecutive negligible terms."""
    total = 0.0
    comp = 0.0
    absum = 0.0
    quiet = 0
    for n in range(1, _WRIGHT_MAX_TERMS + 1):
        lmag = (n - 1) * np.log(theta) + special.gammaln(eta * n + 1.0) - special.gammaln(n + 1.0)
        term = (-1.0) ** (n - 1) * np.exp(lmag) * np.sin(np.pi * eta * n)
        s = total + term
        if abs(total) >= abs(term):
            comp += (total - s) + term
        else:
            comp += (term - s) + total
        total = s
        absum += abs(term)
        if np.exp(lmag) < 1.0e-16 * abs(total + comp):
            quiet += 1
            if quiet >= 3:
                value = (total + comp) / (np.pi * eta)
                if absum > 1.0e6 * abs(total + comp):
                    raise AccuracyLoss(
                        f"Wright series cancels catastrophically at theta={theta}")
                return value
        else:
            quiet = 0
    raise AccuracyLoss(
        f"Wright series did not converge within {_WRIGHT_MAX_TERMS} terms at theta={theta}")


def wright_density(eta: FractionalOrder | float, theta):
    """Wright probability density :math:`\\xi_\\eta(\\theta)` on
    :math:`\\theta > 0`.

    Uses the defining alternating series for ``theta <= 1`` and the
    Zolotarev-type integral representation beyond, where the series suffers
    from cancellation. The density is normalised, with
    :math:`\\int_0^\\infty \\theta^\\nu \\xi_\\eta = \\Gamma(1+\\nu)/\\Gamma(1+\\eta\\nu)`.

    :raises OrderOutOfRange: unless ``0 < eta < 1``.
    :raises AccuracyLoss: if the series fails at a requested small ``theta``.
    """
    e = FractionalOrder(_as_eta(eta)).eta
    tarr = np.asarray(theta, dtype=float)
    t = np.atleast_1d(tarr).ravel()
    if np.any(~(t > 0.0)):
        raise ValueError("wright_density requires theta > 0")

    out = np.empty_like(t)
    near = t <= _WRIGHT_SERIES_LIMIT
    for i in np.flatnonzero(near):
        try:
            out[i] = _wright_series(e, float(t[i]))
        except AccuracyLoss:
            out[i] = _wright_integral(e, t[i:i + 1], n=512)[0]
    far = ~near
    if np.any(far):
        out[far] = _wright_integral(e, t[far])
    out = np.maximum(out, 0.0)

    if tarr.ndim == 0:
        return float(out[0])
    return out.reshape(tarr.shape)


# }}}


# {{{ improper integrals


@lru_cache(maxsize=8)
def _improper_nodes(panels: int, points: int, grading: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(points)
    # panel breakpoints in u, graded toward both ends of (0, 1)
    v = np.linspace(0.0, 1.0, panels + 1)
    edges = 0.5 * (1.0 - np.cos(np.pi * v)) ** 1.0
    edges = edges ** grading / (edges ** grading + (1.0 - edges) ** grading)
    a, b = edges[:-1], edges[1:]
    u = (0.5 * (b - a)[:, None] * (x[None, :] + 1.0) + a[:, None]).ravel()
    wu = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    theta = u / (1.0 - u)
    wtheta = wu / (1.0 - u) ** 2
    theta.setflags(write=False)
    wtheta.setflags(write=False)
    return theta, wtheta


def improper_integral(f: Callable[[np.ndarray], np.ndarray], *,
                      panels: int = 48, points: int = 12, grading: float = 1.5,
                      scale: float = 1.0) -> np.ndarray:
    """Integrate ``f`` over :math:`(0, \\infty)`.

    The substitution :math:`\\theta = s\\,u/(1-u)` maps the half line onto
    :math:`(0, 1)`, which is covered by graded Gauss-Legendre panels that
    cluster toward both ends. ``f`` receives a one-dimensional array of
    nodes and may return values with trailing axes.
    """
    theta, wtheta = _improper_nodes(panels, points, grading)
    values = np.asarray(f(scale * theta))
    if values.shape[0] != theta.size:
        raise DimensionMismatch("integrand must return one value per node")
    return scale * np.tensordot(wtheta, values, axes=(0, 0))


# }}}


# {{{ sampled functions


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Vector-valued function known at a set of nodes.

    Values are stored as given. The ``weight_exponent`` :math:`w` records a
    known singularity :math:`(t - t_0)^{-w}` at the origin, so interpolation
    is performed on the weighted values :math:`(t - t_0)^{w} f(t)`.
    ``origin_limit``, when known, is the limit of the weighted values at
    the origin and is used as an extra interpolation node.
    """

    origin: float
    nodes: np.ndarray
    values: np.ndarray
    weight_exponent: float = 0.0
    origin_limit: np.ndarray | None = None

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float).ravel()
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != nodes.size:
            raise DimensionMismatch(
                f"need one value vector per node: {nodes.size} nodes, "
                f"values of shape {values.shape}")
        if nodes.size == 0:
            raise ValueError("a sampled function needs at least one node")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        w = float(self.weight_exponent)
        if not 0.0 <= w < 1.0:
            raise ValueError(f"weight_exponent must lie in [0, 1): got {w}")
        origin = float(self.origin)
        if nodes[0] < origin or (w > 0.0 and nodes[0] <= origin):
            raise ValueError("nodes must start after the origin of a singular function")
        limit = self.origin_limit
        if limit is not None:
            limit = np.array(limit, dtype=float).ravel()
            if limit.size != values.shape[1]:
                raise DimensionMismatch("origin_limit has the wrong dimension")
            limit.setflags(write=False)

        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weight_exponent", w)
        object.__setattr__(self, "origin_limit", limit)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def span(self) -> tuple[float, float]:
        return self.origin, float(self.nodes[-1])

    def weighted_values(self) -> np.ndarray:
        """Values multiplied by :math:`(t - t_0)^{w}`."""
        if self.weight_exponent == 0.0:
            return self.values
        return (self.nodes - self.origin)[:, None] ** self.weight_exponent * self.values

    def interpolation_data(self) -> tuple[np.ndarray, np.ndarray]:
        """Abscissae and weighted ordinates used by the interpolant."""
        x = self.nodes
        y = self.weighted_values()
        if self.origin_limit is not None and x[0] > self.origin:
            x = np.concatenate([[self.origin], x])
            y = np.vstack([self.origin_limit[None, :], y])
        return x, y

    def __call__(self, t, order: int = 4) -> np.ndarray:
        """Evaluate the piecewise-polynomial interpolant at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x, y = self.interpolation_data()
        yt = _piecewise_lagrange(x, y, t, order)
        if self.weight_exponent > 0.0:
            yt = yt / (t - self.origin)[:, None] ** self.weight_exponent
        return yt

    def scaled(self, factor: float) -> SampledFunction:
        limit = None if self.origin_limit is None else factor * self.origin_limit
        return SampledFunction(self.origin, self.nodes, factor * self.values,
                               self.weight_exponent, limit)


def _stencil_start(x: np.ndarray, cell: np.ndarray, order: int) -> np.ndarray:
    """First index of the ``order``-point stencil centred on each cell."""
    n = x.size
    k = min(order, n)
    start = cell - (k - 2) // 2
    return np.clip(start, 0, n - k)


def _cell_index(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    cell = np.searchsorted(x, t, side="right") - 1
    return np.clip(cell, 0, max(x.size - 2, 0))


def _lagrange_basis(xs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Lagrange basis values; ``xs`` has shape (m, k), ``t`` shape (m,)."""
    k = xs.shape[1]
    basis = np.ones((t.size, k))
    for j in range(k):
        for i in range(k):
            if i != j:
                basis[:, j] *= (t - xs[:, i]) / (xs[:, j] - xs[:, i])
    return basis


def _piecewise_lagrange(x: np.ndarray, y: np.ndarray, t: np.ndarray,
                        order: int) -> np.ndarray:
    if x.size == 1:
        return np.repeat(y, t.size, axis=0)
    k = min(order, x.size)
    cell = _cell_index(x, t)
    start = _stencil_start(x, cell, k)
    idx = start[:, None] + np.arange(k)[None, :]
    basis = _lagrange_basis(x[idx], t)
    return np.einsum("mk,mkd->md", basis, y[idx])


# }}}


# {{{ quadrature rules


class QuadKind(enum.Enum):
    """Families of weakly singular quadrature."""

    #: piecewise Lagrange interpolation with exact kernel moments near the
    #: singularity and Gauss-Legendre elsewhere
    GRADED_PRODUCT = "graded-product"
    #: composite Gauss rules with Gauss-Jacobi panels at both endpoints
    GAUSS_JACOBI = "gauss-jacobi"


@dataclass(frozen=True)
class QuadratureRule:
    """Parameters of a weakly singular quadrature rule.

    ``order`` is the number of interpolation points per cell, so the rule
    is exact for polynomials of degree below ``order``. ``grading`` is the
    exponent used when the rule generates its own mesh.
    """

    kind: QuadKind = QuadKind.GRADED_PRODUCT
    order: int = 4
    grading: float = 1.0
    gauss_points: int = 16
    tolerance: float = 1.0e-10

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", QuadKind(self.kind))
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"order must be an integer >= 2: got {self.order}")
        if not self.grading >= 1.0:
            raise ValueError(f"grading must be >= 1: got {self.grading}")
        if self.gauss_points < 2:
            raise ValueError("gauss_points must be at least 2")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")


@lru_cache(maxsize=64)
def _gauss_jacobi(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi rule for weight :math:`(1-x)^a (1+x)^b` on [-1, 1]."""
    if a == 0.0 and b == 0.0:
        x, w = special.roots_legendre(n)
    else:
        x, w = special.roots_jacobi(n, a, b)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _power_moments(kappa: float, xu: float, wa: float, wb: float, deg: int
                   ) -> np.ndarray:
    """Moments :math:`\\int (X_u - x)^\\kappa x^j dx` over the local range
    whose kernel distances are ``wa >= wb >= 0``; returns j = 0..deg.

    Uses the binomial expansion of :math:`x^j = (X_u - W)^j`, which is well
    conditioned when ``xu`` is of order one.
    """
    mom = np.zeros(deg + 1)
    # integrals of W^{kappa+i} over [wb, wa]
    wint = np.array([(wa ** (kappa + i + 1) - wb ** (kappa + i + 1)) / (kappa + i + 1)
                     for i in range(deg + 1)])
    for j in range(deg + 1):
        acc = 0.0
        for i in range(j + 1):
            acc += special.comb(j, i) * xu ** (j - i) * (-1.0) ** i * wint[i]
        mom[j] = acc
    return mom


def singular_quad(kernel_exponent: float, g: SampledFunction, lower: float,
                  upper: float, rule: QuadratureRule | None = None) -> np.ndarray:
    """Weakly singular integral
    :math:`\\int_{l}^{u} (u - s)^{\\kappa} g(s)\\,ds` with
    :math:`-1 < \\kappa \\le 0`.

    ``g`` is replaced by its piecewise Lagrange interpolant of the rule's
    order, honouring ``g.weight_exponent`` at ``g.origin``; the result is
    exact to rounding for polynomial ``g`` of lower degree.

    :raises QuadratureFailure: if the limits fall outside the sampled span
        or the exponents are out of range.
    """
    return _singular_quad(kernel_exponent, g, lower, upper, rule, 0.0)


def _singular_quad(kernel_exponent: float, g: SampledFunction, lower: float,
                   upper: float, rule: QuadratureRule | None,
                   overshoot: float) -> np.ndarray:
    rule = QuadratureRule() if rule is None else rule
    kappa = float(kernel_exponent)
    if not -1.0 < kappa <= 0.0:
        raise QuadratureFailure(f"kernel exponent must lie in (-1, 0]: got {kappa}")
    lower = float(lower)
    upper = float(upper)
    if not lower < upper:
        raise QuadratureFailure(f"need lower < upper: got [{lower}, {upper}]")
    o, end = g.span
    slack = 1.0e-9 * max(1.0, abs(end - o)) + overshoot
    if lower < o or upper > end + slack:
        raise QuadratureFailure(
            f"integration range [{lower}, {upper}] leaves the sampled span [{o}, {end}]")

    x, y = g.interpolation_data()
    breaks = x[(x > lower) & (x < upper)]
    edges = np.concatenate([[lower], breaks, [upper]])
    total = np.zeros(g.dim)
    for a, b in zip(edges[:-1], edges[1:]):
        cell = int(_cell_index(x, np.array([0.5 * (a + b)]))[0])
        seg = _Segment(kappa, x, y, cell, rule, upper, o, g.weight_exponent)
        total += seg.integrate(a, b)
    if not np.all(np.isfinite(total)):
        raise QuadratureFailure("non-finite quadrature result")
    return total


@dataclass(frozen=True)
class _Segment:
    """Integration of one interpolation cell against the power kernel."""

    kappa: float
    x: np.ndarray
    y: np.ndarray
    cell: int
    rule: QuadratureRule
    upper: float
    origin: float
    w: float

    def values(self, s: np.ndarray) -> np.ndarray:
        k = min(self.rule.order, self.x.size)
        start = int(_stencil_start(self.x, np.array([self.cell]), k)[0])
        xs = np.broadcast_to(self.x[start:start + k], (s.size, k))
        return _lagrange_basis(xs, s) @ self.y[start:start + k]

    def integrate(self, a: float, b: float) -> np.ndarray:
        touching = b >= self.upper
        if self.w > 0.0 and a <= self.origin:
            if touching or self.upper - b >= b - a:
                return self._jacobi(a, b, touching, True)
            mid = 0.5 * (a + b)
            return self._jacobi(a, mid, False, True) + self.integrate(mid, b)
        if touching:
            if self.w == 0.0 and self.rule.kind is QuadKind.GRADED_PRODUCT:
                return self._moments(a, b)
            return self._jacobi(a, b, True, False)
        if self.upper - b >= b - a:
            return self._jacobi(a, b, False, False)
        if self.w == 0.0 and self.rule.kind is QuadKind.GRADED_PRODUCT:
            return self._moments(a, b)
        # split geometrically so that every piece is at least its own
        # width away from the kernel singularity
        total = np.zeros(self.y.shape[1])
        c = a
        while True:
            nxt = 0.5 * (c + self.upper)
            if nxt >= b:
                return total + self._jacobi(c, b, False, False)
            total += self._jacobi(c, nxt, False, False)
            c = nxt

    def _jacobi(self, a: float, b: float, at_upper: bool, at_origin: bool) -> np.ndarray:
        half = 0.5 * (b - a)
        ka = self.kappa if at_upper else 0.0
        kb = -self.w if at_origin else 0.0
        xi, wi = _gauss_jacobi(self.rule.gauss_points, ka, kb)
        s = a + half * (xi + 1.0)
        factor = wi * half ** (1.0 + ka + kb)
        if not at_upper:
            factor = factor * (self.upper - s) ** self.kappa
        if self.w > 0.0 and not at_origin:
            factor = factor * (s - self.origin) ** (-self.w)
        return factor @ self.values(s)

    def _moments(self, a: float, b: float) -> np.ndarray:
        # monomial coefficients of the interpolant in xi = (s - a)/(b - a),
        # fitted at Chebyshev points of the segment for good conditioning
        k = min(self.rule.order, self.x.size)
        length = b - a
        cheb = 0.5 * (1.0 - np.cos(np.pi * (np.arange(k) + 0.5) / k))
        coeffs = np.linalg.solve(np.vander(cheb, k, increasing=True),
                                 self.values(a + length * cheb))
        xu = (self.upper - a) / length
        mom = _power_moments(self.kappa, xu, xu, xu - 1.0, k - 1)
        return length ** (1.0 + self.kappa) * (mom @ coeffs)


# }}}


# {{{ Riemann-Liouville operators


def rl_integral(eta_int: float, f: SampledFunction, t: float,
                rule: QuadratureRule | None = None) -> np.ndarray:
    """Riemann-Liouville integral
    :math:`{}_{t_0}I^{\\alpha}_t f(t) = \\frac{1}{\\Gamma(\\alpha)}\\int_{t_0}^t
    (t - r)^{\\alpha - 1} f(r)\\,dr` for :math:`0 < \\alpha \\le 1`, with
    :math:`t_0` the origin of ``f``.
    """
    alpha = float(eta_int)
    if not 0.0 < alpha <= 1.0:
        raise OrderOutOfRange(f"integration order must lie in (0, 1]: got {eta_int}")
    t = float(t)
    if not t > f.origin:
        raise QuadratureFailure(f"need t > origin: got t={t}, origin={f.origin}")
    return singular_quad(alpha - 1.0, f, f.origin, t, rule) / special.gamma(alpha)


def rl_integral_sampled(eta_int: float, f: SampledFunction,
                        rule: QuadratureRule | None = None) -> SampledFunction:
    """Riemann-Liouville integral evaluated at every node of ``f``.

    The result keeps the nodes of ``f``; its weight exponent is reduced by
    the integration order (and clipped at zero).
    """
    alpha = float(eta_int)
    vals = np.array([np.zeros(f.dim) if t <= f.origin else rl_integral(alpha, f, t, rule)
                     for t in f.nodes])
    w = max(0.0, f.weight_exponent - alpha)
    limit = None
    if w > 0.0 and f.origin_limit is not None:
        # I^alpha of c (t - t0)^{-w} is c G(1-w)/G(1-w+alpha) (t - t0)^{alpha-w}
        limit = f.origin_limit * special.gamma(1.0 - f.weight_exponent) * special.rgamma(
            1.0 - f.weight_exponent + float(eta_int))
    elif w == 0.0 and f.weight_exponent < float(eta_int) and f.nodes[0] > f.origin:
        vals_origin = np.zeros((1, f.dim))
        return SampledFunction(f.origin, np.concatenate([[f.origin], f.nodes]),
                               np.vstack([vals_origin, vals]), 0.0)
    return SampledFunction(f.origin, f.nodes, vals, w, limit)


def rl_derivative(eta: FractionalOrder | float, f: SampledFunction, t: float,
                  rule: QuadratureRule | None = None, *,
                  step_factor: float = 1.0e-4) -> np.ndarray:
    """Riemann-Liouville derivative
    :math:`{}_{t_0}D^\\eta_t f = \\frac{d}{dt}\\,{}_{t_0}I^{1-\\eta}_t f`.

    The outer derivative is a central difference with step
    ``step_factor`` times the local mesh width, extrapolated once by
    Richardson's rule.

    :raises StencilUnderflow: if the stencil would reach the origin.
    """
    e = FractionalOrder(_as_eta(eta)).eta
    t = float(t)
    x = f.nodes
    i = int(np.clip(np.searchsorted(x, t), 1, x.size - 1))
    width = x[i] - x[i - 1]
    if i + 1 < x.size:
        width = max(width, x[i + 1] - x[i])
    h = step_factor * width
    if t - h <= f.origin:
        raise StencilUnderflow(f"t={t} is too close to the origin {f.origin} for step {h}")
    if t + h > x[-1] + 1.0e-3 * width:
        raise StencilUnderflow(f"t={t} is too close to the end of the samples for step {h}")

    overshoot = 1.0e-3 * width

    def integ(s: float) -> np.ndarray:
        return _singular_quad(-e, f, f.origin, s, rule, overshoot)

    d_full = (integ(t + h) - integ(t - h)) / (2.0 * h)
    d_half = (integ(t + 0.5 * h) - integ(t - 0.5 * h)) / h
    return (4.0 * d_half - d_full) / 3.0 / special.gamma(1.0 - e)


# }}}

# vim: foldmethod=marker
