"""Closed-form moments, stationary densities, scale functions, boundary
classification, generator evaluation, and the explicit linear-case solution.

Everything here is a pure function of immutable inputs.  Each operation that
has a closed form follows the exact case split driven by the diffusion
exponent alpha2: linear (alpha2 = 1), CKLS (alpha2 in (1/2, 1)), and
square-root (alpha2 = 1/2).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import NonErgodic, QuadratureFailure, WrongRegime
from .model import GridSpec, InternalParams, ModelParams

# window around the degenerate relations sigma2^2 = b2 and sigma2^2 = 2*b2
# inside which the limiting branch is evaluated to avoid 0/0 cancellation
_DEGENERATE_TOL = 1e-9

_QUAD_REL_TOL = 1e-8


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def mean_internal(p: InternalParams, t):
    """E[Y_t] = (y0 - a2/b2) exp(-b2 t) + a2/b2, valid for every alpha2.

    Accepts scalar or array t.  Monotone from y0 toward a2/b2.
    """
    t = np.asarray(t, dtype=float)
    lvl = p.a2 / p.b2
    out = (p.y0 - lvl) * np.exp(-p.b2 * t) + lvl
    return float(out) if out.ndim == 0 else out


def second_moment_linear(p: InternalParams, t):
    """E[Y_t^2] in the linear regime alpha2 = 1 (three-branch closed form).

    Near-degenerate inputs (|sigma2^2 - b2| or |sigma2^2 - 2 b2| < 1e-9)
    evaluate the limiting branch.  Raises WrongRegime unless alpha2 = 1.
    """
    if p.alpha2 != 1.0:
        raise WrongRegime(f"second_moment_linear requires alpha2 = 1, got {p.alpha2}")
    t = np.asarray(t, dtype=float)
    a2, b2, y0 = p.a2, p.b2, p.y0
    s2 = p.sigma2 ** 2
    lvl = a2 / b2
    if abs(s2 - b2) < _DEGENERATE_TOL:
        out = (
            y0 ** 2 * np.exp(-b2 * t)
            + 2.0 * a2 * (y0 - lvl) * t * np.exp(-b2 * t)
            + (2.0 * a2 ** 2 / b2 ** 2) * (1.0 - np.exp(-b2 * t))
        )
    elif abs(s2 - 2.0 * b2) < _DEGENERATE_TOL:
        out = (
            y0 ** 2
            + (2.0 * a2 / b2) * (y0 - lvl) * (1.0 - np.exp(-b2 * t))
            + (2.0 * a2 ** 2 / b2) * t
        )
    else:
        out = (
            y0 ** 2 * np.exp(-(2.0 * b2 - s2) * t)
            + (2.0 * a2 / (b2 - s2)) * (y0 - lvl) * np.exp(-b2 * t) * (1.0 - np.exp(-(b2 - s2) * t))
            + (2.0 * a2 ** 2 / (b2 * (2.0 * b2 - s2))) * (1.0 - np.exp(-(2.0 * b2 - s2) * t))
        )
    return float(out) if out.ndim == 0 else out


def second_moment_cir(p: InternalParams, t):
    """E[Y_t^2] in the square-root regime alpha2 = 1/2.

    As t -> infinity the variance tends to a2 sigma2^2 / (2 b2^2).
    """
    if p.alpha2 != 0.5:
        raise WrongRegime(f"second_moment_cir requires alpha2 = 1/2, got {p.alpha2}")
    t = np.asarray(t, dtype=float)
    a2, b2, y0 = p.a2, p.b2, p.y0
    s2 = p.sigma2 ** 2
    e1 = np.exp(-b2 * t)
    e2 = np.exp(-2.0 * b2 * t)
    out = (
        y0 ** 2 * e2
        + y0 * (s2 + 2.0 * a2) / b2 * (e1 - e2)
        + a2 * (s2 + 2.0 * a2) / (2.0 * b2 ** 2) * (1.0 - e1) ** 2
    )
    return float(out) if out.ndim == 0 else out


def stationary_variance_cir(p: InternalParams) -> float:
    """Limit of Var[Y_t] for alpha2 = 1/2: a2 sigma2^2 / (2 b2^2)."""
    return p.a2 * p.sigma2 ** 2 / (2.0 * p.b2 ** 2)


def moment_curve(p: InternalParams, grid: GridSpec) -> "MomentCurve":
    """Closed-form mean (all regimes) and second moment (alpha2 in {1/2, 1})."""
    times = grid.times()
    mean = mean_internal(p, times)
    if p.alpha2 == 1.0:
        second = second_moment_linear(p, times)
    elif p.alpha2 == 0.5:
        second = second_moment_cir(p, times)
    else:
        second = None
    return MomentCurve(times=times, mean=mean, second_moment=second)


@dataclass(frozen=True)
class MomentCurve:
    times: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray | None


# ---------------------------------------------------------------------------
# stationary densities
# ---------------------------------------------------------------------------

class DensityRegime(str, enum.Enum):
    INVERSE_GAMMA = "InverseGamma"
    CKLS = "CKLS"
    GAMMA = "Gamma"


@dataclass(frozen=True)
class StationaryDensity:
    regime: DensityRegime
    normalizer: float
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.evaluate(x)


def _ckls_log_kernel(p: InternalParams):
    """log of the unnormalized CKLS stationary density."""
    a2, b2, s2, al = p.a2, p.b2, p.sigma2 ** 2, p.alpha2
    c1 = 2.0 * a2 / (s2 * (1.0 - 2.0 * al))   # negative coefficient for al > 1/2
    c2 = 2.0 * b2 / (s2 * (2.0 - 2.0 * al))

    def logk(x):
        x = np.asarray(x, dtype=float)
        return -2.0 * al * np.log(x) + c1 * x ** (1.0 - 2.0 * al) - c2 * x ** (2.0 - 2.0 * al)

    return logk


def ckls_normalizer(p: InternalParams, strategy: str = "exp_map") -> float:
    """Normalization constant G of the CKLS stationary density.

    Two independent quadrature strategies, both targeting relative 1e-8:

    ``exp_map``
        split at x = 1 and substitute x = exp(-u) on (0, 1) and x = exp(u)
        on (1, inf); the mapped integrands decay double-exponentially.
    ``direct``
        adaptive quadrature in the original variable on (0, 1) and (1, inf).
    """
    if not (0.5 < p.alpha2 < 1.0):
        raise WrongRegime(f"CKLS normalizer requires alpha2 in (1/2, 1), got {p.alpha2}")
    if p.a2 <= 0:
        raise NonErgodic("stationary density requires a2 > 0")
    a2, b2, s2, al = p.a2, p.b2, p.sigma2 ** 2, p.alpha2
    c1 = 2.0 * a2 / (s2 * (2.0 * al - 1.0))   # coefficient of -x^{1-2al}
    c2 = 2.0 * b2 / (s2 * (2.0 - 2.0 * al))

    def log_integrand(logx: float) -> float:
        # log of x^{-2al} exp{-c1 x^{1-2al} - c2 x^{2-2al}} with x = e^{logx};
        # both tail exponents are evaluated in log space to dodge overflow
        t1 = (1.0 - 2.0 * al) * logx
        t2 = (2.0 - 2.0 * al) * logx
        if t1 > 700.0 or t2 > 700.0:
            return -math.inf
        return -2.0 * al * logx - c1 * math.exp(t1) - c2 * math.exp(t2)

    def mapped(u: float, sign: float) -> float:
        v = log_integrand(sign * u) + sign * u
        return math.exp(v) if v > -745.0 else 0.0

    if strategy == "exp_map":
        lower = integrate.quad(lambda u: mapped(u, -1.0), 0.0, np.inf,
                               epsabs=0.0, epsrel=_QUAD_REL_TOL, limit=200)
        upper = integrate.quad(lambda u: mapped(u, 1.0), 0.0, np.inf,
                               epsabs=0.0, epsrel=_QUAD_REL_TOL, limit=200)
    elif strategy == "direct":
        def f(x: float) -> float:
            if x <= 0.0:
                return 0.0
            v = log_integrand(math.log(x))
            return math.exp(v) if v > -745.0 else 0.0

        lower = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=_QUAD_REL_TOL, limit=200)
        upper = integrate.quad(f, 1.0, np.inf, epsabs=0.0, epsrel=_QUAD_REL_TOL, limit=200)
    else:
        raise ValueError(f"unknown quadrature strategy {strategy!r}")

    total = lower[0] + upper[0]
    err = lower[1] + upper[1]
    if not (total > 0.0 and np.isfinite(total)) or err > 10.0 * _QUAD_REL_TOL * total:
        raise QuadratureFailure(
            f"CKLS normalizer quadrature: value {total:.6e}, error estimate {err:.2e}"
        )
    return 1.0 / total


def stationary_density(p: InternalParams) -> StationaryDensity:
    """Stationary density of Y, dispatched on alpha2.

    alpha2 = 1/2 gives a gamma law with shape 2 a2/sigma2^2 and rate
    2 b2/sigma2^2; alpha2 = 1 an inverse-gamma law with shape
    2 b2/sigma2^2 + 1 and rate 2 a2/sigma2^2; alpha2 in (1/2, 1) the CKLS
    density with quadrature-computed normalizer.  Raises NonErgodic for
    a2 = 0.
    """
    if p.a2 <= 0:
        raise NonErgodic("stationary density requires a2 > 0")
    s2 = p.sigma2 ** 2

    if p.alpha2 == 0.5:
        shape = 2.0 * p.a2 / s2
        rate = 2.0 * p.b2 / s2
        log_norm = shape * math.log(rate) - gammaln(shape)

        def pdf_gamma(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            pos = x > 0
            out[pos] = np.exp(log_norm + (shape - 1.0) * np.log(x[pos]) - rate * x[pos])
            return out

        return StationaryDensity(DensityRegime.GAMMA, math.exp(log_norm), pdf_gamma)

    if p.alpha2 == 1.0:
        shape = 2.0 * p.b2 / s2 + 1.0
        rate = 2.0 * p.a2 / s2
        log_norm = shape * math.log(rate) - gammaln(shape)

        def pdf_invgamma(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            pos = x > 0
            out[pos] = np.exp(log_norm - (shape + 1.0) * np.log(x[pos]) - rate / x[pos])
            return out

        return StationaryDensity(DensityRegime.INVERSE_GAMMA, math.exp(log_norm), pdf_invgamma)

    G = ckls_normalizer(p)
    logk = _ckls_log_kernel(p)
    logG = math.log(G)

    def pdf_ckls(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(logG + logk(x[pos]))
        return out

    return StationaryDensity(DensityRegime.CKLS, G, pdf_ckls)


def stationary_cdf(p: InternalParams, x: np.ndarray) -> np.ndarray:
    """CDF of the stationary law at the points x (ascending)."""
    from scipy import stats

    s2 = p.sigma2 ** 2
    x = np.asarray(x, dtype=float)
    if p.alpha2 == 0.5:
        return stats.gamma.cdf(x, a=2.0 * p.a2 / s2, scale=s2 / (2.0 * p.b2))
    if p.alpha2 == 1.0:
        return stats.invgamma.cdf(x, a=2.0 * p.b2 / s2 + 1.0, scale=2.0 * p.a2 / s2)
    # CKLS: cumulative quadrature of the analytic density
    dens = stationary_density(p)
    pts = np.concatenate([[0.0], x])
    out = np.empty(x.shape)
    acc = 0.0
    for i in range(len(x)):
        seg = integrate.quad(lambda v: float(dens(np.array([v]))[0]), pts[i], pts[i + 1],
                             epsabs=1e-12, epsrel=1e-9, limit=200)[0]
        acc += seg
        out[i] = min(acc, 1.0)
    return out


# ---------------------------------------------------------------------------
# scale function and boundary classification
# ---------------------------------------------------------------------------

def _scale_integrand_log(p: InternalParams, c: float):
    """log of exp{-int_c^y 2 b(z)/sigma^2(z) dz}, in closed form per regime."""
    a2, b2, s2, al = p.a2, p.b2, p.sigma2 ** 2, p.alpha2
    if al == 1.0:
        def logf(y):
            return (2.0 * a2 / s2) * (1.0 / y - 1.0 / c) + (2.0 * b2 / s2) * math.log(y / c)
    elif al == 0.5:
        def logf(y):
            return -(2.0 * a2 / s2) * math.log(y / c) + (2.0 * b2 / s2) * (y - c)
    else:
        k1 = 2.0 * a2 / (s2 * (2.0 * al - 1.0))
        k2 = b2 / (s2 * (1.0 - al))

        def logf(y):
            return k1 * (y ** (1.0 - 2.0 * al) - c ** (1.0 - 2.0 * al)) + k2 * (
                y ** (2.0 - 2.0 * al) - c ** (2.0 - 2.0 * al)
            )
    return logf


def scale_function(p: InternalParams, c: float, x: float) -> float:
    """Scale function s(x) anchored at s(c) = 0, by adaptive quadrature.

    The inner exponent is evaluated in closed form per regime, so only the
    outer integral is numerical (relative target 1e-8).  Strictly increasing
    in x; negative for x < c.  Raises QuadratureFailure when the target is
    unreachable (e.g. overflowing integrand far from c).
    """
    if not (x > 0 and c > 0):
        raise ValueError("scale_function requires x > 0 and c > 0")
    if x == c:
        return 0.0
    logf = _scale_integrand_log(p, c)

    def f(y):
        v = logf(y)
        if v > 700.0:
            raise _ScaleOverflow
        return math.exp(v)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, c, x, epsabs=0.0, epsrel=_QUAD_REL_TOL, limit=400)
    except (_ScaleOverflow, OverflowError):
        raise QuadratureFailure(f"scale integrand overflows on [{min(c, x)}, {max(c, x)}]")
    if not np.isfinite(val) or (abs(val) > 0 and err > 1e-6 * abs(val)):
        raise QuadratureFailure(f"scale quadrature error {err:.2e} for value {val:.6e}")
    return val


class _ScaleOverflow(Exception):
    pass


class BoundaryVerdict(str, enum.Enum):
    RECURRENT_OSCILLATING = "RecurrentOscillating"
    CONVERGES_TO_ZERO_AS = "ConvergesToZeroAS"
    HITS_ZERO_REFLECTING = "HitsZeroReflecting"
    STRICTLY_POSITIVE = "StrictlyPositive"


@dataclass(frozen=True)
class BoundaryClassification:
    """Long-run path behavior of Y with scale-function evidence.

    ``verdict`` is the analytic classification; ``strictly_positive`` records
    whether the path never reaches 0.  ``s_at_zero`` / ``s_at_infinity`` are
    numeric corroboration: finite extrapolated values, or +-inf when the
    geometric ratio test detects divergence.
    """

    verdict: BoundaryVerdict
    s_at_zero: float
    s_at_infinity: float
    strictly_positive: bool


def _numeric_scale_limit(p: InternalParams, c: float, toward_zero: bool,
                         n_max: int = 14, ratio_cut: float = 1.05) -> float:
    """Extrapolate s along x_n = c 2^{-n} (or c 2^{n}); +-inf on divergence."""
    vals = []
    for n in range(1, n_max + 1):
        x = c * (0.5 ** n if toward_zero else 2.0 ** n)
        try:
            vals.append(scale_function(p, c, x))
        except QuadratureFailure:
            return -math.inf if toward_zero else math.inf
        if not np.isfinite(vals[-1]):
            return -math.inf if toward_zero else math.inf
    vals = np.asarray(vals)
    incr = np.abs(np.diff(vals))
    # ratio of consecutive increments -> constant > 1 indicates divergence
    tail = incr[-4:]
    if np.all(tail > 0) and np.all(tail[1:] / tail[:-1] > ratio_cut):
        return -math.inf if toward_zero else math.inf
    return float(vals[-1])


def classify_boundary(p: InternalParams, c: float | None = None) -> BoundaryClassification:
    """Analytic boundary classification with numeric scale-function evidence.

    Case split:

    * alpha2 in (1/2, 1]: a2 > 0 -> recurrent oscillation (limsup = inf,
      liminf = 0) and strictly positive; a2 = 0 -> converges to 0 a.s.
    * alpha2 = 1/2: a2 >= sigma2^2/2 -> recurrent oscillation, strictly
      positive; 0 < a2 < sigma2^2/2 -> reaches 0 but 0 is strongly
      reflecting; a2 = 0 -> converges to 0 a.s.

    The numeric limits are corroboration only; the analytic verdict is
    authoritative.
    """
    if c is None:
        c = max(p.y0, p.a2 / p.b2 if p.a2 > 0 else p.y0)
    s2 = p.sigma2 ** 2
    strictly_positive = True
    if p.alpha2 == 0.5:
        if p.a2 >= s2 / 2.0:
            verdict = BoundaryVerdict.RECURRENT_OSCILLATING
        elif p.a2 > 0:
            verdict = BoundaryVerdict.HITS_ZERO_REFLECTING
            strictly_positive = False
        else:
            verdict = BoundaryVerdict.CONVERGES_TO_ZERO_AS
            strictly_positive = False
    else:
        if p.a2 > 0:
            verdict = BoundaryVerdict.RECURRENT_OSCILLATING
        else:
            verdict = BoundaryVerdict.CONVERGES_TO_ZERO_AS
    s0 = _numeric_scale_limit(p, c, toward_zero=True)
    sinf = _numeric_scale_limit(p, c, toward_zero=False)
    return BoundaryClassification(
        verdict=verdict, s_at_zero=s0, s_at_infinity=sinf,
        strictly_positive=strictly_positive,
    )


# ---------------------------------------------------------------------------
# generator and Lyapunov scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth test function given by analytic callbacks.

    ``value``, ``grad`` ((f_x, f_y)) and ``hess_diag`` ((f_xx, f_yy)) at a
    point; no cross term is needed since the generator carries no mixed
    second derivative.
    """

    value: Callable[[float, float], float]
    grad: Callable[[float, float], tuple[float, float]]
    hess_diag: Callable[[float, float], tuple[float, float]]

    __test__ = False  # not a pytest collection target


def generator_apply(mp: ModelParams, f: TestFunction, point: tuple[float, float]) -> float:
    """Apply the diffusion generator of (X, Y) to f at (x, y).

    Returns (a1 y - b1 x) f_x + (a2 - b2 y) f_y
            + 1/2 sigma1^2 x^{2 alpha1} f_xx + 1/2 sigma2^2 y^{2 alpha2} f_yy.
    """
    x, y = point
    ex, it = mp.external, mp.internal
    fx, fy = f.grad(x, y)
    fxx, fyy = f.hess_diag(x, y)
    return (
        (ex.a1 * y - ex.b1 * x) * fx
        + (it.a2 - it.b2 * y) * fy
        + 0.5 * ex.sigma1 ** 2 * x ** (2.0 * ex.alpha1) * fxx
        + 0.5 * it.sigma2 ** 2 * y ** (2.0 * it.alpha2) * fyy
    )


def quadratic_lyapunov(k: float) -> TestFunction:
    """V(x, y) = y^2 + k^2 x^2."""
    return TestFunction(
        value=lambda x, y: y * y + k * k * x * x,
        grad=lambda x, y: (2.0 * k * k * x, 2.0 * y),
        hess_diag=lambda x, y: (2.0 * k * k, 2.0),
    )


def generator_on_quadratic(mp: ModelParams, k: float, x, y):
    """Vectorized generator value on V(x,y) = y^2 + k^2 x^2."""
    ex, it = mp.external, mp.internal
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        2.0 * y * (it.a2 - it.b2 * y)
        + it.sigma2 ** 2 * y ** (2.0 * it.alpha2)
        + 2.0 * k * k * x * (ex.a1 * y - ex.b1 * x)
        + ex.sigma1 ** 2 * k * k * x ** (2.0 * ex.alpha1)
    )


@dataclass(frozen=True)
class ScanReport:
    radius: float
    k: float
    max_value: float
    argmax: tuple[float, float]
    all_nonpositive: bool
    covered_by_theory: bool  # alpha1, alpha2 < 1 so power terms are subquadratic


def lyapunov_negativity_scan(mp: ModelParams, k: float, radius: float,
                             grid_n: int = 64) -> ScanReport:
    """Evaluate the generator on V = y^2 + k^2 x^2 over the annular wedge
    {x, y >= 0, radius <= x + y <= 10 radius} and report the maximum.
    """
    s = np.linspace(radius, 10.0 * radius, grid_n)
    frac = np.linspace(0.0, 1.0, grid_n)
    S, F = np.meshgrid(s, frac, indexing="ij")
    X = S * F
    Y = S * (1.0 - F)
    vals = generator_on_quadratic(mp, k, X, Y)
    i = int(np.argmax(vals))
    return ScanReport(
        radius=radius,
        k=k,
        max_value=float(vals.flat[i]),
        argmax=(float(X.flat[i]), float(Y.flat[i])),
        all_nonpositive=bool(vals.flat[i] <= 0.0),
        covered_by_theory=bool(mp.external.alpha1 < 1.0 and mp.internal.alpha2 < 1.0),
    )


def find_negativity_radius(mp: ModelParams, k: float, r_start: float = 1.0,
                           grid_n: int = 64, max_doublings: int = 40) -> float | None:
    """Smallest radius (by doubling from r_start) with generator <= 0 on the
    whole scanned wedge; None if not found within the doubling budget.
    """
    r = r_start
    for _ in range(max_doublings):
        if lyapunov_negativity_scan(mp, k, r, grid_n).all_nonpositive:
            return r
        r *= 2.0
    return None


# ---------------------------------------------------------------------------
# explicit linear-case solution
# ---------------------------------------------------------------------------

def linear_explicit_solution(p: InternalParams, driver: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Pathwise solution Y_t = exp(R_t) (y0 + a2 int_0^t exp(-R_s) ds) for
    alpha2 = 1, with R_t = -b2 t - sigma2^2 t / 2 + sigma2 B_t.

    ``driver`` is the Brownian path B on the grid (n_steps + 1 points,
    starting at 0); the time integral is the trapezoid rule on the same grid.
    The output is strictly positive by construction.
    """
    if p.alpha2 != 1.0:
        raise WrongRegime(f"explicit solution requires alpha2 = 1, got {p.alpha2}")
    b = np.asarray(driver, dtype=float)
    if b.shape != (grid.n_steps + 1,):
        raise ValueError(f"driver must have {grid.n_steps + 1} points, got {b.shape}")
    if b[0] != 0.0:
        raise ValueError("driver must start at 0")
    t = grid.times()
    r = -(p.b2 + 0.5 * p.sigma2 ** 2) * t + p.sigma2 * b
    em = np.exp(-r)
    # cumulative trapezoid of exp(-R) on the grid
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (em[1:] + em[:-1]) * grid.dt)])
    return np.exp(r) * (p.y0 + p.a2 * integral)
