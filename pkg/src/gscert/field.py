"""Vector fields, Jacobians, singularity classification and positivity sampling."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ArityError,
    ConvergenceError,
    DomainError,
    NotASingularity,
    PreconditionError,
    SingularJacobian,
)
from .expr import parse

HYPERBOLIC_TOL = 1e-9
QR_MAX_ITER = 10_000


@dataclass(frozen=True)
class VectorField:
    dimension: int
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.dimension:
            raise ArityError(
                f"{len(self.components)} components for a field of dimension {self.dimension}")
        for c in self.components:
            if c.arity != self.dimension:
                raise ArityError(f"component {c.source_text!r} has arity {c.arity}, "
                                 f"expected {self.dimension}")

    @classmethod
    def parse(cls, texts, dimension: Optional[int] = None) -> "VectorField":
        """Build a field from component strings (a list, or one comma-separated string)."""
        if isinstance(texts, str):
            texts = [t for t in texts.split(",")]
        texts = [t.strip() for t in texts]
        n = len(texts) if dimension is None else dimension
        return cls(n, tuple(parse(t, n) for t in texts))

    @classmethod
    def linear(cls, matrix) -> "VectorField":
        """The field x -> A x for a square matrix A."""
        a = np.asarray(matrix, dtype=float)
        n = a.shape[0]
        texts = []
        for row in a:
            terms = [f"({float(v)!r})*x{j + 1}" for j, v in enumerate(row) if v != 0.0]
            texts.append(" + ".join(terms) or "0")
        return cls.parse(texts, n)

    def __call__(self, point) -> np.ndarray:
        p = tuple(float(v) for v in point)
        return np.array([c(p) for c in self.components])

    def scaled(self, alpha: float) -> "VectorField":
        return VectorField.parse([f"({float(alpha)!r})*({c})" for c in self.components], self.dimension)

    def negated(self) -> "VectorField":
        return VectorField.parse([f"-({c})" for c in self.components], self.dimension)

    @cached_property
    def partials(self) -> tuple:
        return tuple(c.gradient for c in self.components)

    def __str__(self):
        return ", ".join(str(c) for c in self.components)


# ---------------------------------------------------------------------------
# Jacobian and eigenvalues
# ---------------------------------------------------------------------------


def jacobian_at(field: VectorField, point) -> np.ndarray:
    """Entry (i, j) is the symbolic partial of component i in x_j at ``point``."""
    p = tuple(float(v) for v in point)
    if len(p) != field.dimension:
        raise ArityError(f"expected a point of length {field.dimension}")
    n = field.dimension
    jac = np.empty((n, n))
    for i, row in enumerate(field.partials):
        for j, dij in enumerate(row):
            jac[i, j] = dij(p)
    if not np.all(np.isfinite(jac)):
        raise DomainError("non-finite Jacobian entry")
    return jac


def _hessenberg(a: np.ndarray) -> np.ndarray:
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
    return h


def _wilkinson_shift(a, b, c, d):
    half = (a - d) / 2.0
    disc = cmath.sqrt(half * half + b * c)
    mu1 = (a + d) / 2.0 + disc
    mu2 = (a + d) / 2.0 - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def _qr_eigenvalues(a: np.ndarray, max_iter: int) -> list:
    h = _hessenberg(a)
    n = h.shape[0]
    eps = np.finfo(float).eps
    found = []
    hi = n - 1
    iterations = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            found.append(h[0, 0])
            break
        lo = hi
        while lo > 0:
            scale = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if scale == 0.0:
                scale = np.abs(h).max()
            if abs(h[lo, lo - 1]) <= eps * scale:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            found.append(h[hi, hi])
            hi -= 1
            since_deflation = 0
            continue
        iterations += 1
        since_deflation += 1
        if iterations > max_iter:
            raise ConvergenceError(f"QR iteration did not converge in {max_iter} steps")
        mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        if since_deflation % 11 == 10:
            mu = h[hi, hi] + abs(h[hi, hi - 1])  # exceptional shift breaks cycles
        block = h[lo:hi + 1, lo:hi + 1] - mu * np.eye(hi - lo + 1)
        m = block.shape[0]
        rotations = []
        for k in range(m - 1):
            x, y = block[k, k], block[k + 1, k]
            r = math.hypot(abs(x), abs(y))
            if r == 0.0:
                c, s = 1.0, 0.0
            else:
                # componentwise real division: complex division by a subnormal overflows
                c = complex(x.real / r, x.imag / r)
                s = complex(y.real / r, y.imag / r)
            g = np.array([[np.conj(c), np.conj(s)], [-s, c]])
            block[k:k + 2, :] = g @ block[k:k + 2, :]
            rotations.append(g)
        for k, g in enumerate(rotations):
            block[:, k:k + 2] = block[:, k:k + 2] @ g.conj().T
        h[lo:hi + 1, lo:hi + 1] = block + mu * np.eye(m)
    return found


def _sort_key(z: complex):
    return (-z.real, -z.imag)


def eigenvalues(m, max_iter: int = QR_MAX_ITER) -> list:
    """Eigenvalues of a small dense real matrix, ordered by descending real
    part and then descending imaginary part.

    Closed-form roots of the characteristic polynomial for n <= 2, shifted
    Hessenberg QR iteration otherwise.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise PreconditionError("eigenvalues needs a non-empty square matrix")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise DomainError("non-finite matrix entry")
    # work on a unit-scale copy so products of entries neither underflow nor overflow
    norm = float(np.abs(a).max())
    if norm == 0.0:
        return [0j] * n
    a = a / norm
    a[np.abs(a) < np.finfo(float).tiny] = 0.0
    if n == 1:
        vals = [complex(a[0, 0])]
    elif n == 2:
        p, q, r, s = a[0, 0], a[0, 1], a[1, 0], a[1, 1]
        half = (p - s) / 2.0
        disc = cmath.sqrt(half * half + q * r)
        mean = (p + s) / 2.0
        vals = [mean + disc, mean - disc]
    else:
        vals = [complex(z) for z in _qr_eigenvalues(a, max_iter)]
        # conjugate pairs of a real matrix: snap negligible imaginary parts
        vals = [complex(z.real, 0.0) if abs(z.imag) <= 1e-14 else z for z in vals]
    return sorted((norm * complex(v) for v in vals), key=_sort_key)


class Classification(str, enum.Enum):
    SINK = "HyperbolicSink"
    SOURCE = "HyperbolicSource"
    SADDLE = "HyperbolicSaddle"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple
    min_real_part: float
    max_real_part: float
    classification: Classification
    tolerance_used: float
    point: tuple = ()

    @classmethod
    def from_eigenvalues(cls, vals, tol: float, point=()) -> "SpectrumReport":
        reals = [v.real for v in vals]
        if any(abs(r) <= tol for r in reals):
            kind = Classification.NON_HYPERBOLIC
        elif all(r < -tol for r in reals):
            kind = Classification.SINK
        elif all(r > tol for r in reals):
            kind = Classification.SOURCE
        else:
            kind = Classification.SADDLE
        return cls(tuple(vals), min(reals), max(reals), kind, tol, tuple(point))


def classify_singularity(field: VectorField, point, tol: float = HYPERBOLIC_TOL) -> SpectrumReport:
    residual = float(np.linalg.norm(field(point)))
    if residual > tol:
        raise NotASingularity(residual, tol)
    vals = eigenvalues(jacobian_at(field, point))
    return SpectrumReport.from_eigenvalues(vals, tol, tuple(float(v) for v in point))


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------


def solve_linear(a, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    m = np.array(a, dtype=float)
    x = np.array(b, dtype=float)
    n = m.shape[0]
    scale = max(np.abs(m).max(), 1e-300)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(m[k:, k])))
        if abs(m[piv, k]) <= 1e-14 * scale:
            raise SingularJacobian(f"pivot {m[piv, k]:.3e} in column {k}")
        if piv != k:
            m[[k, piv]] = m[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = m[k + 1:, k] / m[k, k]
        m[k + 1:, k:] -= np.outer(factors, m[k, k:])
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - m[k, k + 1:] @ x[k + 1:]) / m[k, k]
    return x


def find_singularity(field: VectorField, guess, max_iter: int = 50, tol: float = 1e-12) -> np.ndarray:
    """Newton iteration p <- p - J^-1 X(p), with step halving whenever the
    full step does not reduce the residual norm."""
    p = np.array(guess, dtype=float).reshape(field.dimension)
    value = field(p)
    norm = np.linalg.norm(value)
    for _ in range(max_iter):
        if norm <= tol:
            return p
        step = solve_linear(jacobian_at(field, p), value)
        t = 1.0
        while True:
            trial = p - t * step
            try:
                trial_value = field(trial)
                trial_norm = np.linalg.norm(trial_value)
            except DomainError:
                trial_norm = math.inf
            if trial_norm < norm or t < 1e-10:
                break
            t *= 0.5
        if not math.isfinite(trial_norm):
            break
        p, value, norm = trial, trial_value, trial_norm
    if norm <= tol:
        return p
    raise ConvergenceError(
        f"Newton iteration left residual {np.linalg.norm(field(p)):.3e} after {max_iter} steps")


# ---------------------------------------------------------------------------
# Sampling the punctured disc
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingSpec:
    """Shells of random directions at logarithmically spaced radii.

    Explicit ``radii`` override the geometric ladder; they are interpreted
    as absolute radii, not fractions of the disc radius.
    """

    radius_count: int = 16
    directions_per_dim: int = 64
    inner_fraction: float = 1e-3
    seed: int = 42
    radii: Optional[tuple] = None

    def shell_radii(self, radius: float) -> np.ndarray:
        if self.radii is not None:
            return np.asarray(self.radii, dtype=float)
        return np.geomspace(radius * self.inner_fraction, radius, self.radius_count)

    def directions(self, n: int, count: int, rng) -> np.ndarray:
        d = rng.standard_normal((count, n))
        norms = np.linalg.norm(d, axis=1)
        norms[norms == 0.0] = 1.0
        return d / norms[:, None]

    def shells(self, radius: float, n: int):
        """List of (shell radius, points array) pairs, innermost first."""
        if radius <= 0:
            raise PreconditionError("sampling radius must be positive")
        rng = np.random.default_rng(self.seed)
        out = []
        for r in self.shell_radii(radius):
            dirs = self.directions(n, self.directions_per_dim * n, rng)
            out.append((float(r), r * dirs))
        return out

    def points(self, radius: float, n: int) -> np.ndarray:
        return np.vstack([pts for _, pts in self.shells(radius, n)])


@dataclass(frozen=True)
class PositivityReport:
    samples_checked: int
    min_inner_product: float
    attaining_point: tuple
    verdict: bool
    quantity: str = "<h(x),x>"


def min_over_samples(values: Sequence[float], points) -> tuple:
    """Order-independent minimum with a lexicographic tie-break on the point."""
    best = min(zip(values, (tuple(map(float, p)) for p in points)))
    return best


def positivity_report(values, points, quantity: str) -> PositivityReport:
    values = [float(v) for v in values]
    value, point = min_over_samples(values, points)
    return PositivityReport(len(values), value, point, value > 0.0, quantity)


def inner_product_positivity(field: VectorField, radius: float,
                             sampler: SamplingSpec = SamplingSpec()) -> PositivityReport:
    pts = sampler.points(radius, field.dimension)
    pts = pts[np.linalg.norm(pts, axis=1) > 0.0]
    values = [float(np.dot(field(p), p)) for p in pts]
    return positivity_report(values, pts, "<h(x),x>")
