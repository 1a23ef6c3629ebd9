"""Path simulation: full-truncation Euler for the three-equation system, the
reflected internal process, and the comparison harness.

Randomness is counter-based: each path owns a Philox generator keyed by
(seed, path_index), so every simulated path is a pure function of its inputs
and is reproducible regardless of execution order, chunking, or worker count.
Within a path, normals are consumed step-major with a fixed component order
(w, W, B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DriverOrderViolated, InvalidReflection
from .model import (
    ExternalParams,
    GridSpec,
    InternalParams,
    ModelParams,
    ReflectionSpec,
    check_internal_simulatable,
    check_simulatable,
    cholesky_factor,
)

_U64 = 0xFFFFFFFFFFFFFFFF

#: numerical slack when counting ordering violations of the comparison pair
ORDER_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Deterministic per-path random stream.

    (seed, path_index) keys a Philox counter-based generator; distinct
    path_index values give statistically independent streams.
    """

    seed: int
    path_index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _U64, self.path_index & _U64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def normals(self, n_steps: int, n_comp: int) -> np.ndarray:
        g = self.generator()
        if n_comp == 1:
            return g.standard_normal(n_steps)
        return g.standard_normal((n_steps, n_comp))


def _normals_block(seed: int, lo: int, hi: int, n_steps: int, n_comp: int) -> np.ndarray:
    """Stack per-path normals for path indices [lo, hi)."""
    shape = (hi - lo, n_steps) if n_comp == 1 else (hi - lo, n_steps, n_comp)
    out = np.empty(shape)
    for i, pi in enumerate(range(lo, hi)):
        out[i] = RngStream(seed, pi).normals(n_steps, n_comp)
    return out


def brownian_path(grid: GridSpec, stream: RngStream) -> np.ndarray:
    """Discrete Brownian path on the grid (n_steps + 1 points, starts at 0)."""
    xi = stream.normals(grid.n_steps, 1)
    return np.concatenate([[0.0], np.cumsum(np.sqrt(grid.dt) * xi)])


def _pow_alpha(arr: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 0.5:
        return np.sqrt(arr)
    if alpha == 1.0:
        return arr
    return arr ** alpha


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathBundle:
    """One discrete path of (S, X, Y) plus the raw (pre-correlation) normals."""

    grid: GridSpec
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dW3: np.ndarray  # (n_steps, 3) standard-normal triples, order (w, W, B)


@dataclass(frozen=True)
class ReflectedPath:
    """Reflected internal path with its regulator and unregulated integral.

    y_m >= m everywhere; l_m is nondecreasing with l_m[0] = 0 and increases
    only at steps whose pre-projection proposal falls below m; y_m = z_m + l_m
    is the discrete Skorokhod decomposition.
    """

    grid: GridSpec
    y_m: np.ndarray
    l_m: np.ndarray
    z_m: np.ndarray


@dataclass(frozen=True)
class ComparisonPair:
    grid: GridSpec
    x1: np.ndarray
    x2: np.ndarray
    n_violations: int  # grid points with x1 < x2 - ORDER_TOL


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step_full_truncation(state: tuple[float, float, float], params: ModelParams,
                         dt: float, normals: np.ndarray) -> tuple[float, float, float]:
    """Advance (s, x, y) by one full-truncation Euler step.

    The three standard normals are correlated by the Cholesky factor of the
    correlation matrix; the state powers use max(., 0) so the step is total,
    and the proposals for x and y are clamped at 0.  S moves in log space and
    stays positive.
    """
    s, x, y = state
    L = cholesky_factor(params.corr)
    eta = L @ np.asarray(normals, dtype=float)
    ex, it = params.external, params.internal
    sqdt = np.sqrt(dt)
    xp = max(x, 0.0)
    yp = max(y, 0.0)
    y_new = y + (it.a2 - it.b2 * y) * dt + it.sigma2 * _pow_alpha(np.float64(yp), it.alpha2) * sqdt * eta[2]
    x_new = x + (ex.a1 * y - ex.b1 * x) * dt + ex.sigma1 * _pow_alpha(np.float64(xp), ex.alpha1) * sqdt * eta[1]
    s_new = s * np.exp(-0.5 * xp * dt + np.sqrt(xp) * sqdt * eta[0])
    return float(s_new), float(max(x_new, 0.0)), float(max(y_new, 0.0))


@dataclass(frozen=True)
class SystemBlock:
    """Vectorized batch of system paths (rows = consecutive path indices)."""

    grid: GridSpec
    s: np.ndarray       # (n_paths, n_steps + 1)
    x: np.ndarray
    y: np.ndarray
    dW3: np.ndarray | None  # (n_paths, n_steps, 3) raw normals, if retained
    x_clamps: np.ndarray  # per-path count of steps with x proposal <= 0
    y_clamps: np.ndarray


def simulate_system_block(params: ModelParams, grid: GridSpec, seed: int,
                          lo: int, hi: int,
                          reflect_m: float | None = None,
                          store_normals: bool = True) -> SystemBlock:
    """Simulate paths lo..hi-1 of the full system.

    With ``reflect_m`` set, the Y-leg is the reflected process at level m
    (projection scheme) instead of the clamped one; X and S are unchanged.
    Row i reproduces the single-path simulators for path_index = lo + i
    bit-for-bit.  ``store_normals=False`` drops the raw normals after the
    sweep to keep large batches lean.
    """
    check_simulatable(params)
    n, dt = grid.n_steps, grid.dt
    npaths = hi - lo
    ex, it = params.external, params.internal
    L = cholesky_factor(params.corr)
    xi = _normals_block(seed, lo, hi, n, 3)
    eta = xi @ L.T
    sqdt = np.sqrt(dt)

    s = np.empty((npaths, n + 1))
    x = np.empty((npaths, n + 1))
    y = np.empty((npaths, n + 1))
    s[:, 0], x[:, 0], y[:, 0] = params.s0, ex.x0, it.y0
    x_clamps = np.zeros(npaths, dtype=np.int64)
    y_clamps = np.zeros(npaths, dtype=np.int64)

    if reflect_m is not None and not 0.0 < reflect_m < it.y0:
        raise InvalidReflection(f"need 0 < m < y0, got m={reflect_m}, y0={it.y0}")

    for k in range(n):
        sk, xk, yk = s[:, k], x[:, k], y[:, k]
        y_prop = yk + (it.a2 - it.b2 * yk) * dt \
            + it.sigma2 * _pow_alpha(yk, it.alpha2) * sqdt * eta[:, k, 2]
        if reflect_m is None:
            y_clamps += y_prop <= 0.0
            y[:, k + 1] = np.maximum(y_prop, 0.0)
        else:
            y[:, k + 1] = np.maximum(y_prop, reflect_m)
        x_prop = xk + (ex.a1 * yk - ex.b1 * xk) * dt \
            + ex.sigma1 * _pow_alpha(xk, ex.alpha1) * sqdt * eta[:, k, 1]
        x_clamps += x_prop <= 0.0
        x[:, k + 1] = np.maximum(x_prop, 0.0)
        s[:, k + 1] = sk * np.exp(-0.5 * xk * dt + np.sqrt(xk) * sqdt * eta[:, k, 0])

    return SystemBlock(grid=grid, s=s, x=x, y=y, dW3=xi if store_normals else None,
                       x_clamps=x_clamps, y_clamps=y_clamps)


def simulate_system(params: ModelParams, grid: GridSpec, stream: RngStream) -> PathBundle:
    """One path of (S, X, Y); deterministic function of (params, grid, stream)."""
    blk = simulate_system_block(params, grid, stream.seed,
                                stream.path_index, stream.path_index + 1)
    return PathBundle(grid=grid, s=blk.s[0], x=blk.x[0], y=blk.y[0], dW3=blk.dW3[0])


def simulate_system_reflected(params: ModelParams, refl: ReflectionSpec,
                              grid: GridSpec, stream: RngStream) -> PathBundle:
    """Full system with the reflected internal process substituted for Y."""
    blk = simulate_system_block(params, grid, stream.seed,
                                stream.path_index, stream.path_index + 1,
                                reflect_m=refl.m)
    return PathBundle(grid=grid, s=blk.s[0], x=blk.x[0], y=blk.y[0], dW3=blk.dW3[0])


# ---------------------------------------------------------------------------
# internal process alone
# ---------------------------------------------------------------------------

def simulate_internal_block(p: InternalParams, grid: GridSpec, seed: int,
                            lo: int, hi: int) -> np.ndarray:
    """Y-paths lo..hi-1 by full-truncation Euler; one normal per step."""
    check_internal_simulatable(p)
    n, dt = grid.n_steps, grid.dt
    xi = _normals_block(seed, lo, hi, n, 1)
    sqdt = np.sqrt(dt)
    y = np.empty((hi - lo, n + 1))
    y[:, 0] = p.y0
    for k in range(n):
        yk = y[:, k]
        prop = yk + (p.a2 - p.b2 * yk) * dt + p.sigma2 * _pow_alpha(yk, p.alpha2) * sqdt * xi[:, k]
        y[:, k + 1] = np.maximum(prop, 0.0)
    return y


def simulate_internal(p: InternalParams, grid: GridSpec, stream: RngStream) -> np.ndarray:
    """One unreflected Y-path from the stream (full-truncation Euler)."""
    return simulate_internal_block(p, grid, stream.seed,
                                   stream.path_index, stream.path_index + 1)[0]


def simulate_internal_from_driver(p: InternalParams, grid: GridSpec,
                                  driver: np.ndarray) -> np.ndarray:
    """Full-truncation Euler for Y driven by a given Brownian path.

    ``driver`` holds B on the grid; increments are its first differences.
    Lets the same driver feed both this scheme and the explicit linear
    solution for convergence studies.
    """
    check_internal_simulatable(p)
    b = np.asarray(driver, dtype=float)
    n, dt = grid.n_steps, grid.dt
    if b.shape != (n + 1,):
        raise ValueError(f"driver must have {n + 1} points, got {b.shape}")
    db = np.diff(b)
    y = np.empty(n + 1)
    y[0] = p.y0
    for k in range(n):
        prop = y[k] + (p.a2 - p.b2 * y[k]) * dt + p.sigma2 * _pow_alpha(np.float64(max(y[k], 0.0)), p.alpha2) * db[k]
        y[k + 1] = max(prop, 0.0)
    return y


# ---------------------------------------------------------------------------
# reflected internal process
# ---------------------------------------------------------------------------

def simulate_reflected_block(p: InternalParams, m: float, grid: GridSpec,
                             seed: int, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reflected Y-paths with regulator, by per-step projection.

    Per step: proposal q = y + drift dt + diffusion sqrt(dt) xi; if q >= m the
    step is accepted with dL = 0, otherwise y jumps to m and dL = m - q.  The
    unregulated integral path z accumulates the raw increments, so
    y = z + l holds up to floating-point roundoff and dL > 0 forces y = m
    exactly.
    """
    check_internal_simulatable(p)
    if not 0.0 < m < p.y0:
        raise InvalidReflection(f"need 0 < m < y0, got m={m}, y0={p.y0}")
    n, dt = grid.n_steps, grid.dt
    xi = _normals_block(seed, lo, hi, n, 1)
    sqdt = np.sqrt(dt)
    npaths = hi - lo
    y = np.empty((npaths, n + 1))
    l = np.empty((npaths, n + 1))
    z = np.empty((npaths, n + 1))
    y[:, 0], l[:, 0], z[:, 0] = p.y0, 0.0, p.y0
    for k in range(n):
        yk = y[:, k]
        incr = (p.a2 - p.b2 * yk) * dt + p.sigma2 * _pow_alpha(yk, p.alpha2) * sqdt * xi[:, k]
        q = yk + incr
        z[:, k + 1] = z[:, k] + incr
        dl = np.maximum(m - q, 0.0)
        l[:, k + 1] = l[:, k] + dl
        y[:, k + 1] = np.maximum(q, m)
    return y, l, z


def simulate_reflected(p: InternalParams, refl: ReflectionSpec, grid: GridSpec,
                       stream: RngStream) -> ReflectedPath:
    """One reflected path Y^(m) with regulator L^(m) and integral path Z^(m)."""
    y, l, z = simulate_reflected_block(p, refl.m, grid, stream.seed,
                                       stream.path_index, stream.path_index + 1)
    return ReflectedPath(grid=grid, y_m=y[0], l_m=l[0], z_m=z[0])


def regulator_from_running_max(m: float, z: np.ndarray) -> np.ndarray:
    """Skorokhod sup-formula: L_t = max over s <= t of (m - Z_s) vee 0.

    Independent reconstruction of the regulator from the unregulated integral
    path; used as a cross-check oracle against the projection scheme.
    """
    return np.maximum.accumulate(np.maximum(m - np.asarray(z, dtype=float), 0.0))


# ---------------------------------------------------------------------------
# comparison harness
# ---------------------------------------------------------------------------

def simulate_comparison_pair(p: ExternalParams, u1: np.ndarray, u2: np.ndarray,
                             grid: GridSpec, stream: RngStream) -> ComparisonPair:
    """Advance two X-legs with ordered drivers and shared Gaussian increments.

    ``u1`` and ``u2`` are nonnegative driver paths on the grid with
    u1 >= u2 everywhere (DriverOrderViolated otherwise; equality at t = 0 is
    the caller's responsibility, matching the continuous-time comparison
    hypotheses).  Returns both paths and the count of grid points where the
    discrete ordering fails by more than 1e-12.
    """
    n, dt = grid.n_steps, grid.dt
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != (n + 1,) or u2.shape != (n + 1,):
        raise ValueError(f"drivers must have {n + 1} points")
    if np.any(u2 < 0.0) or np.any(u1 < u2):
        raise DriverOrderViolated("need u1 >= u2 >= 0 on the whole grid")
    xi = RngStream(stream.seed, stream.path_index).normals(n, 1)
    sqdt = np.sqrt(dt)
    x1 = np.empty(n + 1)
    x2 = np.empty(n + 1)
    x1[0] = x2[0] = p.x0
    for k in range(n):
        g = sqdt * xi[k]
        x1[k + 1] = max(x1[k] + (u1[k] - p.b1 * x1[k]) * dt
                        + p.sigma1 * _pow_alpha(np.float64(max(x1[k], 0.0)), p.alpha1) * g, 0.0)
        x2[k + 1] = max(x2[k] + (u2[k] - p.b1 * x2[k]) * dt
                        + p.sigma1 * _pow_alpha(np.float64(max(x2[k], 0.0)), p.alpha1) * g, 0.0)
    n_viol = int(np.sum(x1 < x2 - ORDER_TOL))
    return ComparisonPair(grid=grid, x1=x1, x2=x2, n_violations=n_viol)


def comparison_pair_block(p: ExternalParams, u1: np.ndarray, u2: np.ndarray,
                          grid: GridSpec, seed: int, lo: int, hi: int) -> np.ndarray:
    """Per-path count of ordering violations over paths lo..hi-1."""
    n, dt = grid.n_steps, grid.dt
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any(u2 < 0.0) or np.any(u1 < u2):
        raise DriverOrderViolated("need u1 >= u2 >= 0 on the whole grid")
    xi = _normals_block(seed, lo, hi, n, 1)
    sqdt = np.sqrt(dt)
    npaths = hi - lo
    x1 = np.full(npaths, p.x0)
    x2 = np.full(npaths, p.x0)
    viol = np.zeros(npaths, dtype=np.int64)
    for k in range(n):
        g = sqdt * xi[:, k]
        x1 = np.maximum(x1 + (u1[k] - p.b1 * x1) * dt
                        + p.sigma1 * _pow_alpha(x1, p.alpha1) * g, 0.0)
        x2 = np.maximum(x2 + (u2[k] - p.b1 * x2) * dt
                        + p.sigma1 * _pow_alpha(x2, p.alpha1) * g, 0.0)
        viol += x1 < x2 - ORDER_TOL
    return viol
