"""Parameter containers, validation, and the driving-noise correlation structure.

The system simulated by this package is

    dS = S sqrt(X) dw,
    dX = (a1*Y - b1*X) dt + sigma1 * X^alpha1 dW,
    dY = (a2 - b2*Y) dt + sigma2 * Y^alpha2 dB,

with three possibly pairwise correlated Wiener drivers (w, W, B).  The
correlation is supplied as a constant 3x3 matrix (default identity).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPSD

#: tolerance on the smallest eigenvalue of a 3x3 correlation matrix
PSD_TOL = 1e-12


@dataclass(frozen=True)
class InternalParams:
    """Coefficients of the internal mean-reverting process Y."""

    a2: float
    b2: float
    sigma2: float
    alpha2: float
    y0: float

    def violations(self) -> list[str]:
        """Constraint violations against the admissible parameter domain."""
        out = []
        if not self.a2 >= 0:
            out.append("a2 >= 0")
        if not self.b2 > 0:
            out.append("b2 > 0")
        if not self.sigma2 > 0:
            out.append("sigma2 > 0")
        if not 0.5 <= self.alpha2 <= 1.0:
            out.append("alpha2 in [1/2, 1]")
        if not self.y0 > 0:
            out.append("y0 > 0")
        return out

    @property
    def mean_level(self) -> float:
        """Long-run mean a2/b2 toward which E[Y_t] relaxes."""
        return self.a2 / self.b2


@dataclass(frozen=True)
class ExternalParams:
    """Coefficients of the external process X, coupled to Y through the drift."""

    a1: float
    b1: float
    sigma1: float
    alpha1: float
    x0: float

    def violations(self) -> list[str]:
        out = []
        if not self.a1 >= 0:
            out.append("a1 >= 0")
        if not self.b1 > 0:
            out.append("b1 > 0")
        if not self.sigma1 > 0:
            out.append("sigma1 > 0")
        if not 0.5 <= self.alpha1 <= 1.0:
            out.append("alpha1 in [1/2, 1]")
        if not self.x0 > 0:
            out.append("x0 > 0")
        return out


def _identity_matrix() -> tuple[tuple[float, ...], ...]:
    return ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class CorrelationSpec:
    """Constant 3x3 correlation of the Wiener triple, ordered as (w, W, B)."""

    matrix: tuple[tuple[float, ...], ...] = field(default_factory=_identity_matrix)

    @classmethod
    def from_array(cls, m) -> "CorrelationSpec":
        arr = np.asarray(m, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"correlation matrix must be 3x3, got shape {arr.shape}")
        return cls(tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def pairwise(cls, rho_wW: float = 0.0, rho_wB: float = 0.0, rho_WB: float = 0.0) -> "CorrelationSpec":
        return cls.from_array(
            [[1.0, rho_wW, rho_wB], [rho_wW, 1.0, rho_WB], [rho_wB, rho_WB, 1.0]]
        )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def violations(self) -> list[str]:
        m = self.as_array()
        out = []
        if not np.all(np.isfinite(m)):
            out.append("corr entries finite")
            return out
        if not np.allclose(m, m.T, atol=0.0, rtol=0.0):
            out.append("corr symmetric")
        if not np.all(np.diag(m) == 1.0):
            out.append("corr unit diagonal")
        off = m[~np.eye(3, dtype=bool)]
        if np.any(np.abs(off) > 1.0):
            out.append("corr off-diagonals in [-1, 1]")
        if not out:
            try:
                lam_min = float(np.linalg.eigvalsh(m).min())
            except np.linalg.LinAlgError:
                lam_min = -math.inf
            if lam_min < -PSD_TOL:
                out.append("positive semi-definite")
        return out


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the three-equation system."""

    internal: InternalParams
    external: ExternalParams
    s0: float = 1.0
    corr: CorrelationSpec = field(default_factory=CorrelationSpec)

    def violations(self) -> list[str]:
        out = self.internal.violations() + self.external.violations()
        if not self.s0 > 0:
            out.append("s0 > 0")
        out += self.corr.violations()
        return out


@dataclass(frozen=True)
class ReflectionSpec:
    """One-sided reflection level for the internal process, 0 < m < y0."""

    m: float

    def violations(self, internal: InternalParams | None = None) -> list[str]:
        out = []
        if not self.m > 0:
            out.append("m > 0")
        if internal is not None and not self.m < internal.y0:
            out.append("m < y0")
        return out


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid with n_steps steps on [0, t_end]."""

    t_end: float
    n_steps: int

    def violations(self) -> list[str]:
        out = []
        if not self.t_end > 0:
            out.append("t_end > 0")
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            out.append("n_steps positive integer")
        return out

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate(): pass/fail plus the violated constraints by name."""

    passed: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.passed


def validate(params: ModelParams) -> ValidationReport:
    """Check a parameter set against the admissible domain.

    Report-style and total: never raises, returns every violated constraint
    with its field name.  Simulation entry points perform their own (slightly
    weaker) check via :func:`check_simulatable`.
    """
    try:
        v = tuple(params.violations())
    except (TypeError, ValueError) as exc:  # non-numeric junk
        v = (f"unreadable parameters: {exc}",)
    return ValidationReport(passed=not v, violations=v)


def check_simulatable(params: ModelParams) -> None:
    """Raise InvalidParams unless the system can be advanced numerically.

    Identical to :func:`validate` except sigma_i = 0 is admitted, so that
    deterministic (drift-only) runs remain available for testing.
    """
    from .errors import InvalidParams

    v = [s for s in params.violations() if s not in ("sigma1 > 0", "sigma2 > 0")]
    if not params.external.sigma1 >= 0:
        v.append("sigma1 >= 0")
    if not params.internal.sigma2 >= 0:
        v.append("sigma2 >= 0")
    if v:
        raise InvalidParams("; ".join(v))


def check_internal_simulatable(p: InternalParams) -> None:
    from .errors import InvalidParams

    v = [s for s in p.violations() if s != "sigma2 > 0"]
    if not p.sigma2 >= 0:
        v.append("sigma2 >= 0")
    if v:
        raise InvalidParams("; ".join(v))


def cholesky_factor(corr: CorrelationSpec) -> np.ndarray:
    """Lower-triangular L with L L^T equal to the correlation matrix.

    Rank-deficient (but PSD) matrices are handled by zeroing the columns whose
    pivot vanishes, e.g. three perfectly correlated drivers factor through a
    single column.  Raises NotPSD when the smallest eigenvalue is below -1e-12.
    """
    m = corr.as_array()
    lam_min = float(np.linalg.eigvalsh(m).min())
    if lam_min < -PSD_TOL:
        raise NotPSD(f"smallest eigenvalue {lam_min:.3e} < -{PSD_TOL:.0e}")
    L = np.zeros((3, 3))
    for j in range(3):
        d = m[j, j] - np.dot(L[j, :j], L[j, :j])
        if d <= PSD_TOL:
            # zero pivot: column j carries no new direction
            L[j, j] = 0.0
            continue
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, 3):
            L[i, j] = (m[i, j] - np.dot(L[i, :j], L[j, :j])) / L[j, j]
    return L


# ---------------------------------------------------------------------------
# JSON schema: flat keys a1,b1,sigma1,alpha1,x0,a2,b2,sigma2,alpha2,y0,s0,
# corr (nested 3x3 array, optional, default identity), m (optional).
# ---------------------------------------------------------------------------

_INTERNAL_KEYS = ("a2", "b2", "sigma2", "alpha2", "y0")
_EXTERNAL_KEYS = ("a1", "b1", "sigma1", "alpha1", "x0")


def params_from_dict(doc: dict) -> tuple[ModelParams, ReflectionSpec | None]:
    """Build (ModelParams, optional ReflectionSpec) from a flat JSON document."""
    missing = [k for k in _INTERNAL_KEYS + _EXTERNAL_KEYS + ("s0",) if k not in doc]
    if missing:
        raise KeyError(f"missing parameter keys: {', '.join(missing)}")
    internal = InternalParams(**{k: float(doc[k]) for k in _INTERNAL_KEYS})
    external = ExternalParams(**{k: float(doc[k]) for k in _EXTERNAL_KEYS})
    corr = CorrelationSpec.from_array(doc["corr"]) if "corr" in doc else CorrelationSpec()
    params = ModelParams(internal=internal, external=external, s0=float(doc["s0"]), corr=corr)
    refl = ReflectionSpec(m=float(doc["m"])) if "m" in doc else None
    return params, refl


def params_to_dict(params: ModelParams, refl: ReflectionSpec | None = None) -> dict:
    doc = {
        "a1": params.external.a1,
        "b1": params.external.b1,
        "sigma1": params.external.sigma1,
        "alpha1": params.external.alpha1,
        "x0": params.external.x0,
        "a2": params.internal.a2,
        "b2": params.internal.b2,
        "sigma2": params.internal.sigma2,
        "alpha2": params.internal.alpha2,
        "y0": params.internal.y0,
        "s0": params.s0,
        "corr": [list(row) for row in params.corr.matrix],
    }
    if refl is not None:
        doc["m"] = refl.m
    return doc


def params_from_json(text: str) -> tuple[ModelParams, ReflectionSpec | None]:
    return params_from_dict(json.loads(text))
