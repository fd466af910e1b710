"""Numerical flows of x' = X(x): integration, maximal intervals, sink rates,
and Lyapunov decrease checks."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateOrbit,
    DomainError,
    GsError,
    InsufficientSamples,
    PreconditionError,
    StepUnderflow,
)
from .expr import ParsedFunction
from .field import PositivityReport, SamplingSpec, VectorField, find_singularity, positivity_report


class Method(str, enum.Enum):
    RK4 = "FixedRK4"
    RK45 = "AdaptiveRK45"


class Direction(str, enum.Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"


class Termination(str, enum.Enum):
    T_MAX = "ReachedTMax"
    CONVERGED = "ConvergedToSingularity"
    LEFT_DOMAIN = "LeftDomain"
    UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.RK45
    step: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    min_step: float = 1e-12
    max_step: float = 0.5
    t_max: float = 100.0
    escape_radius: float = 1.0
    convergence_radius: float = 1e-7
    convergence_dwell: int = 8
    # singular point to test convergence against; None locates one by Newton
    target: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("step", "t_max", "escape_radius", "convergence_radius",
                     "rel_tol", "abs_tol", "min_step", "max_step"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"integrator {name} must be positive")
        if not self.min_step < self.max_step:
            raise PreconditionError("min_step must be below max_step")
        if self.convergence_dwell < 1:
            raise PreconditionError("convergence_dwell must be at least 1")

    def replace(self, **changes) -> "IntegratorConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return IntegratorConfig(**values)


@dataclass(frozen=True)
class Orbit:
    times: np.ndarray
    states: np.ndarray
    direction: Direction
    termination: Termination
    target: Optional[tuple] = None

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(self.dimension)])
        for t, x in zip(self.times, self.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        buf.write(f"# direction={self.direction.value}\n")
        if self.target is not None:
            buf.write("# target=" + ",".join(repr(float(v)) for v in self.target) + "\n")
        buf.write(f"# termination={self.termination.value}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Orbit":
        rows, meta = [], {}
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line.strip():
                rows.append(line)
        table = list(csv.reader(rows))
        header, body = table[0], table[1:]
        if header[0] != "t":
            raise PreconditionError("orbit CSV must start with a 't' column")
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
        target = None
        if meta.get("target"):
            target = tuple(float(v) for v in meta["target"].split(","))
        return cls(data[:, 0].copy(), data[:, 1:].copy(),
                   Direction(meta.get("direction", "Forward")),
                   Termination(meta["termination"]), target)


# ---------------------------------------------------------------------------
# Runge-Kutta steps
# ---------------------------------------------------------------------------

# Fehlberg 4(5) tableau
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


def _rk4_step(rhs, x, h):
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), None


def _rkf45_step(rhs, x, h):
    k = []
    for row in _A:
        xi = x.copy()
        for a, kj in zip(row, k):
            xi += h * a * kj
        k.append(rhs(xi))
    k = np.array(k)
    x4 = x + h * (_B4 @ k)
    x5 = x + h * (_B5 @ k)
    # advance with the 5th-order solution; the 4th-order one only sizes the error
    return x5, x5 - x4


class _Rhs:
    def __init__(self, field: VectorField, sign: float):
        self.field = field
        self.sign = sign

    def __call__(self, x):
        return self.sign * self.field(x)


def _initial_target(field: VectorField, config: IntegratorConfig):
    if config.target is not None:
        return np.asarray(config.target, dtype=float)
    origin = np.zeros(field.dimension)
    try:
        if np.linalg.norm(field(origin)) <= 1e-12:
            return origin
    except DomainError:
        pass
    return None


def _try_locate(field: VectorField, x):
    try:
        return find_singularity(field, x, max_iter=30, tol=1e-13)
    except GsError:
        return None


def integrate(field: VectorField, x0, config: IntegratorConfig = IntegratorConfig(),
              direction: Direction = Direction.FORWARD) -> Orbit:
    """Sample the solution of x' = X(x) from ``x0``.

    Backward integration follows x' = -X(x); times are recorded as elapsed
    (non-negative) time in either direction. Integration stops at ``t_max``,
    on leaving the ball of radius ``escape_radius`` (the exit point is
    located on the sphere by bisection), or after ``convergence_dwell``
    consecutive samples within ``convergence_radius`` of a singular point.
    """
    direction = Direction(direction)
    x = np.array(x0, dtype=float).reshape(field.dimension)
    if np.linalg.norm(x) > config.escape_radius:
        raise PreconditionError("initial point lies outside the escape radius")
    rhs = _Rhs(field, 1.0 if direction is Direction.FORWARD else -1.0)
    adaptive = config.method is Method.RK45
    step = _rkf45_step if adaptive else _rk4_step

    target = _initial_target(field, config)
    times, states = [0.0], [x.copy()]
    t = 0.0
    h = config.step if not adaptive else min(config.max_step, 1e-3)
    dwell = 0

    def finish(reason):
        return Orbit(np.array(times), np.array(states), direction, reason,
                     None if target is None else tuple(float(v) for v in target))

    def near_target(y):
        nonlocal target
        if target is None and np.linalg.norm(field(y)) < 1e-6:
            target = _try_locate(field, y)
        return target is not None and np.linalg.norm(y - target) <= config.convergence_radius

    if near_target(x):
        dwell = 1
        if dwell >= config.convergence_dwell:
            return finish(Termination.CONVERGED)

    n_steps = 0
    while t < config.t_max:
        # absorb a remainder within rounding of h rather than taking a sliver step
        last = config.t_max - t <= h * (1.0 + 1e-9)
        h_try = config.t_max - t if last else h
        x_new, err = step(rhs, x, h_try)
        if adaptive:
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
            err_norm = float(np.max(np.abs(err) / scale))
            if not math.isfinite(err_norm) or err_norm > 1.0:
                factor = 0.2 if not math.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
                h = h_try * factor
                if h < config.min_step:
                    exc = StepUnderflow(f"step fell below {config.min_step:.3e} at t={t:.6g}")
                    exc.orbit = finish(Termination.UNDERFLOW)
                    raise exc
                continue
        if np.linalg.norm(x_new) >= config.escape_radius:
            h_exit, x_exit = _locate_exit(step, rhs, x, h_try, config.escape_radius)
            times.append(t + h_exit)
            states.append(x_exit)
            return finish(Termination.LEFT_DOMAIN)
        if last:
            t = config.t_max
        else:
            t = (n_steps + 1) * h_try if not adaptive else t + h_try
        x = x_new
        times.append(t)
        states.append(x.copy())
        n_steps += 1
        dwell = dwell + 1 if near_target(x) else 0
        if dwell >= config.convergence_dwell:
            return finish(Termination.CONVERGED)
        if adaptive:
            growth = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            h = min(config.max_step, h_try * growth) if not last else h
    return finish(Termination.T_MAX)


def _locate_exit(step, rhs, x, h, radius):
    """Smallest step (to bisection precision) landing on or outside the sphere."""
    lo, hi = 0.0, h
    x_hi = step(rhs, x, h)[0]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        x_mid = step(rhs, x, mid)[0]
        if np.linalg.norm(x_mid) >= radius:
            hi, x_hi = mid, x_mid
        else:
            lo = mid
    return hi, x_hi


# ---------------------------------------------------------------------------
# Maximal interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalEstimate:
    """Estimated maximal interval (t_minus, t_plus) of the solution through x0.

    Each end carries a status: ``escaped`` (finite exit time from the
    domain), ``converged`` (the value is infinite: the orbit tends to a
    singularity), or ``undetermined`` (integration hit t_max; the value is
    only a lower bound on the magnitude).
    """

    t_minus: float
    t_plus: float
    minus_status: str
    plus_status: str


def _end_of(orbit: Orbit):
    if orbit.termination is Termination.CONVERGED:
        return math.inf, "converged"
    if orbit.termination is Termination.LEFT_DOMAIN:
        return orbit.final_time, "escaped"
    return orbit.final_time, "undetermined"


def maximal_interval_estimate(field: VectorField, x0,
                              config: IntegratorConfig = IntegratorConfig()) -> IntervalEstimate:
    forward = integrate(field, x0, config, Direction.FORWARD)
    backward = integrate(field, x0, config, Direction.BACKWARD)
    t_plus, plus_status = _end_of(forward)
    t_minus, minus_status = _end_of(backward)
    return IntervalEstimate(-t_minus, t_plus, minus_status, plus_status)


# ---------------------------------------------------------------------------
# Exponential decay toward a sink
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SinkRateFit:
    theta: float
    lam: float
    rms_log_residual: float
    samples_used: int
    excluded_at_target: int
    initial_distance: float
    times: np.ndarray
    distances: np.ndarray

    def bound(self, t):
        return self.theta * np.exp(-self.lam * np.asarray(t)) * self.initial_distance


def fit_sink_rate(orbit: Orbit, a=None, convergence_radius: float = 1e-7,
                  transient_fraction: float = 0.2, min_samples: int = 10) -> SinkRateFit:
    """Fit |phi_t(x0) - a| <= theta * exp(-lam * t) * |x0 - a| on an orbit.

    ``lam`` is minus the least-squares slope of log-distance against time
    over the retained samples; ``theta`` absorbs the largest positive log
    residual so the bound holds on every retained sample.
    """
    if orbit.termination is not Termination.CONVERGED:
        raise PreconditionError(
            f"sink-rate fit needs a converged orbit, got {orbit.termination.value}")
    if a is None:
        a = orbit.target if orbit.target is not None else np.zeros(orbit.dimension)
    a = np.asarray(a, dtype=float)
    d0 = float(np.linalg.norm(orbit.states[0] - a))
    if d0 == 0.0:
        raise DegenerateOrbit("orbit starts at the singular point")
    dist = np.linalg.norm(orbit.states - a, axis=1)
    times = orbit.times
    at_target = int(np.sum(dist == 0.0))
    start = int(math.floor(transient_fraction * len(times)))
    keep = np.zeros(len(times), dtype=bool)
    keep[start:] = True
    keep &= dist > 10.0 * convergence_radius
    keep &= dist > 0.0
    t, d = times[keep], dist[keep]
    if len(t) < min_samples:
        raise InsufficientSamples(f"{len(t)} samples retained, need {min_samples}")
    logd = np.log(d)
    slope, intercept = np.polyfit(t, logd, 1)
    resid = logd - (intercept + slope * t)
    slack = max(0.0, float(resid.max()))
    theta = math.exp(intercept + slack) / d0
    # absorb rounding so the bound holds exactly on every retained sample
    excess = float(np.max(d / (theta * np.exp(slope * t) * d0)))
    if excess > 1.0:
        theta = float(np.nextafter(theta * excess, math.inf))
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return SinkRateFit(theta, float(-slope), rms, int(len(t)), at_target, d0, t, d)


# ---------------------------------------------------------------------------
# Lyapunov functions
# ---------------------------------------------------------------------------


def lyapunov_check(field: VectorField, V: ParsedFunction, radius: float,
                   sampler: SamplingSpec = SamplingSpec()) -> PositivityReport:
    """Report on -X.V over the punctured disc; the verdict is true iff X.V < 0
    at every sample."""
    from .inequality import derive_along

    n = field.dimension
    pts = sampler.points(radius, n)
    pts = pts[np.linalg.norm(pts, axis=1) > 0.0]
    v0 = V(np.zeros(n))
    if any(V(p) < v0 for p in pts):
        raise PreconditionError("V has no local minimum at the origin over the samples")
    values = [-derive_along(field, V, p) for p in pts]
    return positivity_report(values, pts, "-X.V")
