"""Exponentially weighted Caputo operators and their diffusive realization.

The memory operator

    D^{alpha,eta} f(t) = 1/Gamma(1-alpha) * int_0^t exp(-eta (t-s)) (t-s)^{-alpha} f'(s) ds

is replaced by a continuum of relaxation modes ``phi(xi)`` obeying

    phi' + (xi^2 + eta) phi = mu(xi) f',     mu(xi) = |xi|^{(2 alpha - 1)/2},

with output ``c * int mu(xi) phi(xi) dxi`` and ``c = sin(alpha pi) / pi``.
Integrals over ``xi`` are discretized on a log-uniform node set (see
:func:`build_xi_quadrature`); :func:`caputo_oracle` evaluates the convolution
directly and is kept independent of the diffusive path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal, special

__all__ = [
    "FractionalParams",
    "XiQuadrature",
    "ClosedFormIntegrals",
    "QuadratureError",
    "IntegrationError",
    "mu_weight",
    "build_xi_quadrature",
    "closed_form_integrals",
    "rule_integrals",
    "phi_step",
    "fractional_output",
    "diffusive_response",
    "caputo_oracle",
    "caputo_linear_exact",
]


class QuadratureError(RuntimeError):
    """A xi-rule failed its accuracy check; ``achieved`` holds the error."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class IntegrationError(RuntimeError):
    """Adaptive reference integration did not converge."""

    def __init__(self, message: str, estimate: float, abserr: float):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr


@dataclass(frozen=True)
class FractionalParams:
    """Order ``alpha`` in (0, 1) and exponential weight ``eta >= 0``."""

    alpha: float
    eta: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0) or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha!r}")
        if not (self.eta >= 0.0) or not math.isfinite(self.eta):
            raise ValueError(f"eta must satisfy eta >= 0, got {self.eta!r}")

    @property
    def coeff_c(self) -> float:
        return math.sin(self.alpha * math.pi) / math.pi


@dataclass(frozen=True)
class XiQuadrature:
    """Nodes on the positive half line with weights doubled for the full line.

    Every integrand used here is even in ``xi``, so ``sum(weights * g(nodes))``
    approximates ``int_R g(xi) dxi``.  :meth:`symmetric` expands to the
    explicit two-sided rule.
    """

    nodes: np.ndarray
    weights: np.ndarray
    truncation: float
    step: float = 0.0
    achieved_error: float = float("nan")

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(nodes <= 0) or np.any(weights <= 0):
            raise ValueError("nodes and weights must be strictly positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return int(self.nodes.size)

    @classmethod
    def empty(cls) -> "XiQuadrature":
        return cls(np.empty(0), np.empty(0), truncation=0.0)

    def symmetric(self) -> tuple[np.ndarray, np.ndarray]:
        nodes = np.concatenate([-self.nodes[::-1], self.nodes])
        weights = 0.5 * np.concatenate([self.weights[::-1], self.weights])
        return nodes, weights

    def integrate(self, g) -> float:
        return float(np.sum(self.weights * g(self.nodes)))


@dataclass(frozen=True)
class ClosedFormIntegrals:
    C: float
    D: float
    J1: float
    J2: float
    J3: float
    c1: float = field(default=float("nan"))


def mu_weight(xi, alpha: float):
    """|xi|^{(2 alpha - 1)/2}; raises at xi = 0 where the weight is singular."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must satisfy 0 < alpha < 1, got {alpha!r}")
    xi = np.abs(np.asarray(xi, dtype=float))
    if alpha < 0.5 and np.any(xi == 0.0):
        raise ValueError("mu(xi) is singular at xi = 0 for alpha < 1/2")
    out = xi ** ((2.0 * alpha - 1.0) / 2.0)
    return float(out) if out.ndim == 0 else out


def default_truncation(alpha: float, tol: float) -> float:
    if not (0.0 < tol < math.inf):
        raise ValueError(f"a finite positive tolerance is needed to pick Xi, got {tol!r}")
    # int_Xi^inf xi^{2a-3} dxi = Xi^{2a-2} / (2 - 2a) <= tol
    return (tol * (2.0 - 2.0 * alpha)) ** (1.0 / (2.0 * alpha - 2.0))


def build_xi_quadrature(
    fp: FractionalParams,
    K: int,
    Xi: float | None = None,
    tol: float = 1e-7,
    strict: bool = False,
) -> XiQuadrature:
    """Log-uniform rule with ``K`` positive nodes and largest node below ``Xi``.

    Nodes are ``xi_k = Xi * exp(-(k + 1/2) h)``, weights ``2 h xi_k``.  The
    step ``h`` balances the trapezoid error in ``u = log xi`` (about
    ``exp(-pi^2 / 2h)``) against the neglected mass ``xi_min^{2 alpha}``
    near the origin, so both shrink as ``K`` grows.  ``Xi`` defaults to the
    value that keeps the two tails below ``tol / 2`` relative to ``C(alpha, eta)``.

    The rule is checked against the adaptive value of ``C(alpha, eta)``; the
    relative error is stored in ``achieved_error``.  If it exceeds ``tol`` a
    warning is issued, or :class:`QuadratureError` raised when ``strict``.
    """
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    ref = _reference_C(fp)
    if Xi is None:
        # both tails together below half the relative budget
        Xi = default_truncation(fp.alpha, 0.25 * tol * ref)
    if not Xi > 0:
        raise ValueError(f"Xi must be positive, got {Xi}")
    a = fp.alpha
    L = math.log(Xi)
    # 2 a K h^2 - 2 a L h - pi^2/2 = 0
    h = (2 * a * L + math.sqrt(4 * a * a * L * L + 4 * a * K * math.pi**2)) / (4 * a * K)
    u = L - (np.arange(K)[::-1] + 0.5) * h
    nodes = np.exp(u)
    weights = 2.0 * h * nodes

    approx = float(np.sum(weights * nodes ** (2 * a - 1) / (nodes**2 + fp.eta + 1.0)))
    achieved = abs(approx - ref) / ref
    rule = XiQuadrature(nodes, weights, truncation=float(Xi), step=h, achieved_error=achieved)
    if achieved > tol:
        msg = f"xi-rule (K={K}, Xi={Xi:.3g}) reaches relative error {achieved:.3e} > {tol:.1e}"
        if strict:
            raise QuadratureError(msg, achieved)
        warnings.warn(msg, stacklevel=2)
    return rule


def _quad(fun, a, b, **kw) -> float:
    val, err = integrate.quad(fun, a, b, epsabs=0.0, epsrel=1e-13, limit=500, **kw)
    if not (math.isfinite(val) and err <= 1e-9 * max(abs(val), 1e-300)):
        raise IntegrationError(
            f"adaptive integration did not converge: estimate={val!r}, abserr={err!r}", val, err
        )
    return val


def _even_singular(alpha: float, g) -> float:
    # int_R |xi|^{2a-1} g(xi) dxi for even, decaying g
    s = 2.0 * alpha - 1.0
    inner = _quad(g, 0.0, 1.0, weight="alg", wvar=(s, 0.0))
    outer = _quad(lambda x: x**s * g(x), 1.0, np.inf)
    return 2.0 * (inner + outer)


def _reference_C(fp: FractionalParams) -> float:
    b = fp.eta + 1.0
    return _even_singular(fp.alpha, lambda x: 1.0 / (x * x + b))


def closed_form_integrals(fp: FractionalParams, lam: float) -> ClosedFormIntegrals:
    """Reference values of the xi-integrals used for well-posedness and stability.

    ``J2`` and ``J3`` come from their closed forms; ``C``, ``D``, ``c1`` and
    ``J1 = c1 (|lam| + eta)^{alpha/2 - 5/4}`` by adaptive integration.  The
    J-integrals need ``|lam| + eta > 0`` and are returned as NaN otherwise.
    """
    a, eta = fp.alpha, fp.eta
    C = _reference_C(fp)
    D = _even_singular(a, lambda x: 1.0 / (x * x + eta + 1.0) ** 2)
    r = abs(lam) + eta
    if r <= 0:
        nan = float("nan")
        return ClosedFormIntegrals(C, D, nan, nan, nan)
    e = a / 2.0 - 0.25
    # int_1^inf (y-1)^e / y^2 dy, singular at y = 1 when e < 0
    c1 = _quad(lambda y: 1.0 / y**2, 1.0, 2.0, weight="alg", wvar=(e, 0.0)) + _quad(
        lambda y: (y - 1.0) ** e / y**2, 2.0, np.inf
    )
    with np.errstate(over="ignore"):
        # subnormal |lam| + eta overflows to inf rather than raising
        rr = np.float64(r)
        J1 = float(c1 * rr ** (a / 2.0 - 1.25))
        J2 = float(math.sqrt(math.pi / 2.0) * rr**-0.75)
        J3 = float(math.sqrt(math.pi) / 4.0 * rr**-1.25)
    return ClosedFormIntegrals(C, D, J1, J2, J3, c1)


def rule_integrals(rule: XiQuadrature, fp: FractionalParams, lam: float) -> ClosedFormIntegrals:
    """The integrals of :func:`closed_form_integrals` evaluated with ``rule``."""
    a, eta = fp.alpha, fp.eta
    x, w = rule.nodes, rule.weights
    s = x ** (2 * a - 1)
    C = float(np.sum(w * s / (x**2 + eta + 1.0)))
    D = float(np.sum(w * s / (x**2 + eta + 1.0) ** 2))
    r = abs(lam) + eta
    J1 = float(np.sum(w * x ** (a + 0.5) / (r + x**2) ** 2))
    J2 = math.sqrt(np.sum(w / (r + x**2) ** 2))
    J3 = math.sqrt(np.sum(w * x**2 / (r + x**2) ** 4))
    return ClosedFormIntegrals(C, D, J1, J2, J3)


def _relaxation(fp: FractionalParams, rule: XiQuadrature, dt: float):
    lam = rule.nodes**2 + fp.eta
    decay = np.exp(-lam * dt)
    # (1 - e^{-lam dt}) / lam without cancellation for tiny lam dt
    gain = -np.expm1(-lam * dt) / lam * mu_weight(rule.nodes, fp.alpha)
    return decay, gain


def phi_step(phi, V_input: float, fp: FractionalParams, rule: XiQuadrature, dt: float):
    """Advance the memory modes over ``dt`` with the input held at ``V_input``.

    Exact for piecewise-constant input: ``phi+ = e^{-l dt} phi + (1 - e^{-l dt}) mu V / l``
    with ``l = xi^2 + eta``.  ``phi`` may carry leading axes (one row per
    spatial point) with the last axis matching the rule.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != rule.count:
        raise ValueError(f"phi has {phi.shape[-1]} modes, rule has {rule.count}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    decay, gain = _relaxation(fp, rule, dt)
    return decay * phi + gain * np.asarray(V_input, dtype=float)[..., None]


def fractional_output(phi, fp: FractionalParams, rule: XiQuadrature):
    """c * sum_k w_k mu(xi_k) phi_k over the last axis."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != rule.count:
        raise ValueError(f"phi has {phi.shape[-1]} modes, rule has {rule.count}")
    out = phi @ (fp.coeff_c * rule.weights * mu_weight(rule.nodes, fp.alpha))
    return float(out) if np.ndim(out) == 0 else out


def diffusive_response(samples, fp: FractionalParams, rule: XiQuadrature, dt: float) -> np.ndarray:
    """Drive the modes from rest with the slopes of ``samples``; return the output series.

    The input on ``[t_n, t_{n+1}]`` is the difference quotient of consecutive
    samples, i.e. the derivative of the piecewise-linear interpolant.
    """
    f = np.asarray(samples, dtype=float)
    decay, gain = _relaxation(fp, rule, dt)
    readout = fp.coeff_c * rule.weights * mu_weight(rule.nodes, fp.alpha)
    phi = np.zeros(rule.count)
    out = np.zeros(f.size)
    for n, slope in enumerate(np.diff(f) / dt, start=1):
        phi = decay * phi + gain * slope
        out[n] = readout @ phi
    return out


def _kernel_primitive(s: np.ndarray, fp: FractionalParams) -> np.ndarray:
    # int_0^s exp(-eta r) r^{-alpha} dr / Gamma(1 - alpha)
    a, eta = fp.alpha, fp.eta
    if eta == 0.0:
        return s ** (1.0 - a) / special.gamma(2.0 - a)
    return eta ** (a - 1.0) * special.gammainc(1.0 - a, eta * s)


def caputo_oracle(samples, fp: FractionalParams, dt: float, t=None) -> np.ndarray:
    """Product-integration (L1) approximation of D^{alpha,eta} f on a uniform grid.

    ``f`` is interpolated piecewise linearly; the weakly singular kernel is
    integrated exactly over every subinterval, so the scheme is exact for
    linear ``f``.  Pass the sample times ``t`` to have uniformity checked.
    """
    f = np.asarray(samples, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("need at least two samples of f")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t is not None:
        t = np.asarray(t, dtype=float)
        if t.shape != f.shape:
            raise ValueError("t and samples differ in length")
        if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0.0):
            raise ValueError("caputo_oracle requires a uniform time grid")
    n = f.size
    weights = np.diff(_kernel_primitive(np.arange(n) * dt, fp))
    slopes = np.diff(f) / dt
    out = np.zeros(n)
    out[1:] = signal.fftconvolve(slopes, weights)[: n - 1]
    return out


def caputo_linear_exact(t, fp: FractionalParams) -> np.ndarray:
    """D^{alpha,eta} applied to f(t) = t."""
    return _kernel_primitive(np.asarray(t, dtype=float), fp)
