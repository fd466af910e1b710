"""The derivational operator X.f and Gronwall-type bounds along orbits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NoValidSamples, PreconditionError
from .expr import ParsedFunction
from .field import SamplingSpec, VectorField

F_FLOOR = 1e-300


def derive_along(field: VectorField, f: ParsedFunction, point) -> float:
    """X.f = sum_i P_i df/dx_i at ``point``, from exact symbolic partials."""
    p = tuple(float(v) for v in point)
    if len(p) != field.dimension or f.arity != field.dimension:
        raise PreconditionError("field, function and point dimensions disagree")
    total = 0.0
    for comp, partial in zip(field.components, f.gradient):
        total += comp(p) * partial(p)
    return total


@dataclass(frozen=True)
class DerivativeSample:
    point: tuple
    f_value: float
    Xf_value: float
    ratio: float  # math.inf when |f| < floor

    @property
    def flagged(self) -> bool:
        return math.isinf(self.ratio)


def sample_ratio(field: VectorField, f: ParsedFunction, point, floor: float = F_FLOOR,
                 rhs: str = "f") -> DerivativeSample:
    """|X.f| / |f(x)| at a point (or |X.f| / |x| when ``rhs`` is "norm")."""
    p = tuple(float(v) for v in point)
    fv = f(p)
    xf = derive_along(field, f, p)
    denom = abs(fv) if rhs == "f" else math.sqrt(math.fsum(v * v for v in p))
    ratio = abs(xf) / denom if denom >= floor else math.inf
    return DerivativeSample(p, fv, xf, ratio)


@dataclass(frozen=True)
class ConstantEstimate:
    """Sampled sup of |X.f|/|f|.

    ``per_radius_sup`` holds (shell radius, sup) pairs innermost first; the
    sup is NaN for a shell without a single finite ratio. ``flagged`` counts
    samples where |f| is below the floor while |X.f| is not, i.e. where no
    finite constant can satisfy the inequality.
    """

    c_hat: float
    attaining: DerivativeSample
    flagged: int
    per_radius_sup: tuple
    samples: tuple
    rhs: str = "f"

    def outer_sup(self) -> float:
        finite = [s for _, s in self.per_radius_sup if not math.isnan(s)]
        return finite[-1] if finite else math.nan

    def diverging(self, min_exponent: float = 0.5, shells: int = 3) -> bool:
        """True when the sup grows toward the origin at least like r^-min_exponent
        over the innermost ``shells`` resolvable shells: no finite c survives
        shrinking the disc."""
        finite = [(r, s) for r, s in self.per_radius_sup if not math.isnan(s) and s > 0]
        if len(finite) < shells:
            return False
        inner = finite[:shells]
        for (r0, s0), (r1, s1) in zip(inner, inner[1:]):
            # r0 < r1: the sup must be clearly larger at r0, by a power law
            if not s0 > s1 * (1.0 + 1e-9):
                return False
            if math.log(s0 / s1) / math.log(r1 / r0) < min_exponent:
                return False
        return True

    def violations(self, c: float, rel_slack: float = 1e-9) -> int:
        limit = c * (1.0 + rel_slack)
        return sum(1 for s in self.samples if not s.flagged and s.ratio > limit)


def estimate_inequality_constant(field: VectorField, f: ParsedFunction, radius: float,
                                 sampler: SamplingSpec = SamplingSpec(),
                                 floor: float = F_FLOOR, rhs: str = "f") -> ConstantEstimate:
    if rhs not in ("f", "norm"):
        raise PreconditionError(f"rhs must be 'f' or 'norm', got {rhs!r}")
    samples = []
    per_radius = []
    flagged = 0
    for r, pts in sampler.shells(radius, field.dimension):
        sup = math.nan
        for p in pts:
            s = sample_ratio(field, f, p, floor, rhs)
            if s.flagged:
                if abs(s.Xf_value) >= floor:
                    flagged += 1
                else:
                    continue  # both sides vanish numerically: no evidence either way
            else:
                sup = s.ratio if math.isnan(sup) else max(sup, s.ratio)
            samples.append(s)
        per_radius.append((r, sup))
    finite = [s for s in samples if not s.flagged]
    if not finite:
        exc = NoValidSamples("no sample with |f| above the floor")
        exc.flagged = flagged
        raise exc
    best = max(finite, key=lambda s: (s.ratio, s.point))
    return ConstantEstimate(best.ratio, best, flagged, tuple(per_radius), tuple(samples), rhs)


# ---------------------------------------------------------------------------
# Gronwall bounds
# ---------------------------------------------------------------------------


def _simpson_cumulative(beta: ParsedFunction, times: np.ndarray, refine: int = 4) -> np.ndarray:
    out = np.zeros(len(times))
    acc = 0.0
    for k in range(1, len(times)):
        a, b = float(times[k - 1]), float(times[k])
        s = np.linspace(a, b, refine + 1)
        vals = np.array([beta((v,)) for v in s])
        w = np.ones(refine + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        acc += (b - a) / (3.0 * refine) * float(w @ vals)
        out[k] = acc
    return out


def gronwall_bound(u0: float, beta: Union[float, ParsedFunction], times) -> np.ndarray:
    """u0 * exp(integral of beta from times[0] to each t).

    A constant ``beta`` is integrated in closed form; a function of one
    variable (time) by composite Simpson on each grid interval split in 4.
    """
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) < 0):
        raise PreconditionError("times must be non-decreasing")
    if isinstance(beta, ParsedFunction):
        integral = _simpson_cumulative(beta, t)
    else:
        integral = float(beta) * (t - t[0])
    return u0 * np.exp(integral)


@dataclass(frozen=True)
class GronwallReport:
    times: np.ndarray
    observed: np.ndarray  # |f| along the orbit
    bound: np.ndarray
    c: float
    max_violation: float
    verdict: bool
    slack: float

    def to_csv(self) -> str:
        lines = ["t,observed,bound"]
        for t, o, b in zip(self.times, self.observed, self.bound):
            lines.append(f"{float(t)!r},{float(o)!r},{float(b)!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"c": self.c, "max_violation": self.max_violation, "verdict": self.verdict}


def verify_gronwall_along_orbit(orbit, f: ParsedFunction, c: float,
                                slack: float = 1e-12) -> GronwallReport:
    """Check |f(phi_t)| <= |f(phi_0)| exp(c t) at every orbit sample.

    ``slack`` is absolute. Its default matches the vanishing tolerance, so
    an orbit starting on a zero of f passes only if f stays below 1e-12.
    """
    observed = np.array([abs(f(x)) for x in orbit.states])
    bound = gronwall_bound(float(observed[0]), float(c), orbit.times)
    excess = observed - bound
    max_violation = float(excess.max())
    return GronwallReport(np.asarray(orbit.times, dtype=float), observed, bound, float(c),
                          max_violation, max_violation <= slack, slack)


# ---------------------------------------------------------------------------
# One-dimensional radial substitution and the chain rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialSubstitution:
    """u(t) = f(x0 e^t) on [0, ln((x0 + delta)/x0)].

    ``u_prime`` is a finite-difference derivative of u; ``x_fprime`` is
    x f'(x) at x = x0 e^t. ``discrepancy`` is their largest difference.
    """

    t: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    x_fprime: np.ndarray
    discrepancy: float

    def log_rate(self) -> np.ndarray:
        """u'(t) / u(t), NaN where u vanishes."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.u != 0.0, self.x_fprime / self.u, np.nan)


def radial_substitution(f: ParsedFunction, x0: float, delta: float, grid_size: int = 201,
                        fd_step: float = 1e-5) -> RadialSubstitution:
    if f.arity != 1:
        raise PreconditionError("radial substitution needs a function of one variable")
    if x0 <= 0 or delta <= 0:
        raise PreconditionError("x0 and delta must be positive")
    t_end = math.log((x0 + delta) / x0)
    t = np.linspace(0.0, t_end, grid_size)
    step = min(fd_step, t_end / 4.0)

    def u(s):
        return f((x0 * math.exp(s),))

    uvals = np.array([u(s) for s in t])
    up = np.empty(grid_size)
    for i, s in enumerate(t):
        if i == 0:
            up[i] = (-3.0 * u(s) + 4.0 * u(s + step) - u(s + 2 * step)) / (2 * step)
        elif i == grid_size - 1:
            up[i] = (3.0 * u(s) - 4.0 * u(s - step) + u(s - 2 * step)) / (2 * step)
        else:
            up[i] = (u(s + step) - u(s - step)) / (2 * step)
    df = f.derivative(1)
    xs = x0 * np.exp(t)
    xfp = np.array([x * df((x,)) for x in xs])
    return RadialSubstitution(t, uvals, up, xfp, float(np.max(np.abs(up - xfp))))


def chain_rule_check(field: VectorField, f: ParsedFunction, orbit) -> float:
    """Largest gap between d/dt f(phi_t) (three-point differences on the orbit
    grid) and X.f at interior samples. Backward orbits compare against -X.f."""
    from .flow import Direction

    sign = 1.0 if orbit.direction is Direction.FORWARD else -1.0
    t = np.asarray(orbit.times, dtype=float)
    if len(t) < 3:
        raise PreconditionError("chain-rule check needs at least 3 orbit samples")
    fv = np.array([f(x) for x in orbit.states])
    worst = 0.0
    for k in range(1, len(t) - 1):
        h0, h1 = t[k] - t[k - 1], t[k + 1] - t[k]
        fd = (-h1 / (h0 * (h0 + h1)) * fv[k - 1]
              + (h1 - h0) / (h0 * h1) * fv[k]
              + h0 / (h1 * (h0 + h1)) * fv[k + 1])
        exact = sign * derive_along(field, f, orbit.states[k])
        worst = max(worst, abs(fd - exact))
    return worst
