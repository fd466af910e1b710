"""Flatness probing and the vanishing certificate for X.f-type operators.

A certificate checks, in a fixed order, the four conditions under which a
flat function f with |h.f| <= c|f| near a source of h must vanish:

1. ``spectrum``: every eigenvalue of Jh(0) has positive real part;
2. ``inner_product``: <h(x), x> > 0 on the punctured disc;
3. ``constant``: a finite c bounds |h.f| / |f| at every sample;
4. ``flatness``: |f(x)| / |x|^k -> 0 for every k up to k_max.

When all four pass, the sampled sup of |f| is expected to be numerically
zero; anything else is reported as ``Inconclusive`` rather than as a
counterexample.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import (
    GsError,
    NoValidSamples,
    PreconditionError,
    WitnessUnavailable,
)
from .expr import ParsedFunction
from .field import (
    Classification,
    HYPERBOLIC_TOL,
    PositivityReport,
    SamplingSpec,
    SpectrumReport,
    VectorField,
    classify_singularity,
    inner_product_positivity,
)
from .flow import Direction, IntegratorConfig, SinkRateFit, Termination, fit_sink_rate, integrate
from .inequality import F_FLOOR, ConstantEstimate, derive_along, estimate_inequality_constant

FLAT_TOL = 1e-12
# a ratio column must fall at least like r^0.5 to count as tending to zero
MIN_DECAY_EXPONENT = 0.5
_EQUAL_REL = 1e-9

HYPOTHESIS_ORDER = ("spectrum", "inner_product", "constant", "flatness")


# ---------------------------------------------------------------------------
# Flatness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatnessReport:
    radii: tuple
    k_max: int
    ratio_table: np.ndarray  # rows: radii, columns: k = 0..k_max
    status: tuple  # per k: "flat", "not_flat" or "inconclusive"
    flat_tol: float

    @property
    def verdict(self) -> tuple:
        return tuple(s == "flat" for s in self.status)

    @property
    def overall_verdict(self) -> bool:
        return all(self.verdict)

    @property
    def inconclusive(self) -> bool:
        return (not self.overall_verdict) and "not_flat" not in self.status

    def to_csv(self) -> str:
        lines = ["radius,k,ratio"]
        for r, row in zip(self.radii, self.ratio_table):
            for k, v in enumerate(row):
                lines.append(f"{float(r)!r},{k},{float(v)!r}")
        return "\n".join(lines) + "\n"


def _trend(a: float, b: float) -> int:
    """+1 if b is clearly above a, -1 if clearly below, 0 if equal to ~1e-9."""
    if abs(b - a) <= _EQUAL_REL * max(abs(a), abs(b)):
        return 0
    return 1 if b > a else -1


def column_status(radii, column, flat_tol: float = FLAT_TOL) -> str:
    """Classify one ratio column (radii decreasing) over its last 3 entries."""
    r = np.asarray(radii, dtype=float)[-3:]
    col = np.asarray(column, dtype=float)[-3:]
    trends = [_trend(col[i], col[i + 1]) for i in range(len(col) - 1)]
    if col[-1] < flat_tol and all(t <= 0 for t in trends):
        return "flat"
    if np.all(col > 0) and all(t < 0 for t in trends):
        slopes = [math.log(col[i] / col[i + 1]) / math.log(r[i] / r[i + 1])
                  for i in range(len(col) - 1)]
        if min(slopes) >= MIN_DECAY_EXPONENT:
            return "flat"
    if 1 in trends and -1 in trends:
        return "inconclusive"
    return "not_flat"


def default_flat_radii(radius: float, count: int = 12) -> np.ndarray:
    return np.geomspace(radius, radius * 1e-3, count)


def unit_directions(n: int, count: int, seed: int = 42) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((count, n))
    return d / np.linalg.norm(d, axis=1)[:, None]


def flatness_probe(f: ParsedFunction, radii=None, k_max: int = 8, directions: Optional[int] = None,
                   seed: int = 42, flat_tol: float = FLAT_TOL, radius: float = 1.0,
                   direction_vectors=None) -> FlatnessReport:
    """Tabulate max over directions d of |f(r d)| / r^k.

    Column k is ``flat`` when its last entry is below ``flat_tol`` with no
    increase over the last 3 radii, or when it decreases over the last 3
    radii at least as fast as r^0.5. A column that rises and falls there is
    ``inconclusive``; anything else is ``not_flat``.
    """
    n = f.arity
    radii = default_flat_radii(radius) if radii is None else np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise PreconditionError("flatness radii must be positive and strictly decreasing")
    if direction_vectors is None:
        direction_vectors = unit_directions(n, directions or 32 * n, seed)
    dirs = np.asarray(direction_vectors, dtype=float)
    table = np.empty((len(radii), k_max + 1))
    for i, r in enumerate(radii):
        fmax = max(abs(f(r * d)) for d in dirs)
        for k in range(k_max + 1):
            table[i, k] = fmax / r ** k
    status = tuple(column_status(radii, table[:, k], flat_tol) for k in range(k_max + 1))
    return FlatnessReport(tuple(float(r) for r in radii), k_max, table, status, flat_tol)


# ---------------------------------------------------------------------------
# Lower-bound witness along an orbit of the sink field -h
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessBound:
    q: tuple
    k_const: float
    exponent: float
    lam: float
    c: float
    checked_points: int
    min_margin: float
    times: np.ndarray  # elapsed time from q
    lhs: np.ndarray  # k_const |phi_t(q)|^exponent
    rhs: np.ndarray  # f(phi_t(q))
    fit: SinkRateFit

    def to_csv(self) -> str:
        lines = ["t,lhs,rhs"]
        for t, a, b in zip(self.times, self.lhs, self.rhs):
            lines.append(f"{float(t)!r},{float(a)!r},{float(b)!r}")
        return "\n".join(lines) + "\n"


def lower_bound_witness(h: VectorField, f: ParsedFunction, p, c: Optional[float] = None,
                        radius: float = 1.0, integrator: Optional[IntegratorConfig] = None,
                        anchor_fraction: float = 0.1, floor: float = F_FLOOR,
                        tol_hyperbolic: float = HYPERBOLIC_TOL) -> WitnessBound:
    """Check k |phi_t(q)|^(c/lam) <= f(phi_t(q)) along the orbit of -h.

    The orbit of -h from ``p`` runs into the origin; ``lam`` is fitted on it,
    ``q`` is the first state within ``anchor_fraction * radius`` of the
    origin, and k = f(q) / |q|^(c/lam). With ``c=None`` the sup of
    |h.f| / |f| over the orbit is used.
    """
    p = np.asarray(p, dtype=float).reshape(h.dimension)
    fp = f(p)
    if not fp > 0:
        raise PreconditionError(f"witness needs f(p) > 0, got {fp!r}")
    spectrum = classify_singularity(h, np.zeros(h.dimension), tol_hyperbolic)
    if spectrum.classification is not Classification.SOURCE:
        raise PreconditionError(
            f"origin is {spectrum.classification.value}, not a hyperbolic source")
    cfg = integrator or IntegratorConfig()
    cfg = cfg.replace(escape_radius=max(cfg.escape_radius, radius, float(np.linalg.norm(p))),
                      target=tuple([0.0] * h.dimension))
    orbit = integrate(h, p, cfg, Direction.BACKWARD)
    if orbit.termination is not Termination.CONVERGED:
        raise WitnessUnavailable(
            f"backward orbit ended with {orbit.termination.value}, not at the origin")

    ratios = []
    for x in orbit.states:
        fx = abs(f(x))
        if fx >= floor:
            ratios.append(abs(derive_along(h, f, x)) / fx)
    sup_ratio = max(ratios) if ratios else 0.0
    if c is None:
        c = sup_ratio
    elif c < sup_ratio * (1.0 - 1e-9):
        raise PreconditionError(f"c={c!r} is below the sampled ratio sup {sup_ratio!r} on the orbit")

    fit = fit_sink_rate(orbit, np.zeros(h.dimension), cfg.convergence_radius)
    exponent = c / fit.lam
    norms = np.linalg.norm(orbit.states, axis=1)
    inside = np.nonzero(norms <= anchor_fraction * radius)[0]
    if len(inside) == 0:
        raise WitnessUnavailable("orbit never enters the anchor neighbourhood")
    iq = int(inside[0])
    q = orbit.states[iq]
    fq = f(q)
    try:
        k_const = math.exp(math.log(fq) - exponent * math.log(norms[iq]))
    except OverflowError:
        k_const = math.inf
    idx = [i for i in range(iq, len(orbit)) if norms[i] > 0.0]
    # written as f(q) (|x|/|q|)^e so large exponents do not overflow k
    lhs = np.array([fq * (norms[i] / norms[iq]) ** exponent for i in idx])
    rhs = np.array([f(orbit.states[i]) for i in idx])
    times = orbit.times[idx] - orbit.times[iq]
    margin = float(np.min(rhs - lhs))
    return WitnessBound(tuple(float(v) for v in q), float(k_const), float(exponent), fit.lam,
                        float(c), len(idx), margin, times, lhs, rhs, fit)


# ---------------------------------------------------------------------------
# The certificate
# ---------------------------------------------------------------------------


class ConclusionKind(str, enum.Enum):
    MUST_VANISH = "MustVanish"
    HYPOTHESIS_FAILED = "HypothesisFailed"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Conclusion:
    kind: ConclusionKind
    hypothesis: Optional[str] = None
    reason: str = ""

    def __str__(self):
        if self.kind is ConclusionKind.HYPOTHESIS_FAILED:
            return f"HypothesisFailed({self.hypothesis})"
        return self.kind.value


@dataclass(frozen=True)
class ConstantCheck:
    """The inequality hypothesis |h.f| <= c |f| evaluated with a chosen c."""

    estimate: Optional[ConstantEstimate]
    c_used: float
    c_supplied: bool
    flagged: int
    violations: int
    verdict: bool
    diverging: bool = False


@dataclass(frozen=True)
class CertifyConfig:
    c: Optional[float] = None
    tol_hyperbolic: float = HYPERBOLIC_TOL
    flat_tol: float = FLAT_TOL
    seed: int = 42
    rhs: str = "f"
    floor: float = F_FLOOR
    k_max: int = 8
    flat_radii_count: int = 12
    directions: Optional[int] = None
    witness: bool = True
    integrator: Optional[IntegratorConfig] = None

    @property
    def sampler(self) -> SamplingSpec:
        return SamplingSpec(seed=self.seed)


@dataclass(frozen=True)
class GsCertificate:
    hypothesis_spectrum: SpectrumReport
    hypothesis_inner_product: PositivityReport
    hypothesis_constant: ConstantCheck
    hypothesis_flatness: FlatnessReport
    conclusion: Conclusion
    f_sup_on_domain: float
    radius: float
    config: CertifyConfig
    witness: Optional[WitnessBound] = None
    witness_note: str = ""
    passed: dict = dc_field(default_factory=dict)


def check_constant(h: VectorField, f: ParsedFunction, radius: float,
                   config: CertifyConfig) -> ConstantCheck:
    try:
        est = estimate_inequality_constant(h, f, radius, config.sampler, config.floor, config.rhs)
    except NoValidSamples as exc:
        # f vanishes numerically wherever it was sampled
        flagged = getattr(exc, "flagged", 0)
        c = config.c if config.c is not None else 0.0
        return ConstantCheck(None, c, config.c is not None, flagged, 0, flagged == 0)
    if config.c is not None:
        c = float(config.c)
    else:
        c = est.outer_sup()
    bad = est.violations(c) if math.isfinite(c) else len(est.samples)
    # a sup growing like a power of 1/r defeats any supplied c on a smaller disc
    diverging = est.diverging(MIN_DECAY_EXPONENT)
    ok = math.isfinite(c) and est.flagged == 0 and bad == 0 and not diverging
    return ConstantCheck(est, c, config.c is not None, est.flagged, bad, ok, diverging)


def f_sup(f: ParsedFunction, radius: float, sampler: SamplingSpec) -> float:
    pts = sampler.points(radius, f.arity)
    best = abs(f(np.zeros(f.arity)))
    for p in pts:
        best = max(best, abs(f(p)))
    return float(best)


def certify_gs(h: VectorField, f: ParsedFunction, radius: float,
               config: CertifyConfig = CertifyConfig()) -> GsCertificate:
    """Check every hypothesis over the disc of ``radius`` and draw the conclusion."""
    if f.arity != h.dimension:
        raise PreconditionError("f and h must have the same dimension")
    if radius <= 0:
        raise PreconditionError("radius must be positive")
    origin = np.zeros(h.dimension)
    spectrum = classify_singularity(h, origin, config.tol_hyperbolic)
    inner = inner_product_positivity(h, radius, config.sampler)
    constant = check_constant(h, f, radius, config)
    flat = flatness_probe(f, default_flat_radii(radius, config.flat_radii_count), config.k_max,
                          config.directions, config.seed, config.flat_tol)
    passed = {
        "spectrum": spectrum.classification is Classification.SOURCE,
        "inner_product": inner.verdict,
        "constant": constant.verdict,
        "flatness": flat.overall_verdict,
    }
    sup = f_sup(f, radius, config.sampler)

    failed = next((name for name in HYPOTHESIS_ORDER if not passed[name]), None)
    if failed == "flatness" and flat.inconclusive:
        conclusion = Conclusion(ConclusionKind.INCONCLUSIVE, None,
                                "flatness ratios are not monotone at the sampled radii")
    elif failed is not None:
        conclusion = Conclusion(ConclusionKind.HYPOTHESIS_FAILED, failed)
    elif config.rhs != "f":
        conclusion = Conclusion(ConclusionKind.INCONCLUSIVE, None,
                                "the |x|-bounded inequality carries no vanishing claim")
    elif sup <= config.flat_tol:
        conclusion = Conclusion(ConclusionKind.MUST_VANISH)
    else:
        conclusion = Conclusion(ConclusionKind.INCONCLUSIVE, None,
                                f"all hypotheses pass numerically yet sup|f| = {sup:.3e}; "
                                "sampling does not resolve the failing scale")

    witness, note = None, ""
    if config.witness and passed["spectrum"] and passed["inner_product"] and sup > config.flat_tol:
        witness, note = _try_witness(h, f, radius, constant.c_used, config)
    return GsCertificate(spectrum, inner, constant, flat, conclusion, sup, radius, config,
                         witness, note, passed)


def _try_witness(h, f, radius, c, config):
    pts = config.sampler.points(radius, f.arity)
    values = [f(p) for p in pts]
    best = int(np.argmax(values))
    if not values[best] > 0:
        return None, "f has no positive sample"
    try:
        w = lower_bound_witness(h, f, pts[best], c if math.isfinite(c) else None, radius,
                                config.integrator, floor=config.floor,
                                tol_hyperbolic=config.tol_hyperbolic)
    except GsError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return w, ""


# ---------------------------------------------------------------------------
# The one-dimensional case on [0, 1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem1Report:
    right_isolated_zero: Optional[float]
    inequality_holds: bool
    first_inequality_failure: Optional[float]
    lower_bound_violation: Optional[tuple]  # (x, bound) where |f(x)| < bound
    delta: Optional[float]
    flat: bool
    contradiction: bool


def theorem1_check(f: ParsedFunction, C: float, grid=None, rel_slack: float = 1e-9) -> Theorem1Report:
    """Scan [0, 1] for the case split used to show that |x f'| <= C|f| forces
    a flat f to vanish.

    ``right_isolated_zero`` is the first grid zero with f nonzero at the next
    grid point. When it is 0 the bound |f(x)| >= |f(delta)| (x/delta)^C is
    tested on the nonvanishing run (0, delta]; its first failure is reported.
    ``contradiction`` marks the impossible combination (flat, inequality
    holds, f not identically zero), which can only come from coarse sampling.
    """
    if f.arity != 1:
        raise PreconditionError("theorem1_check needs a function of one variable")
    xs = np.linspace(0.0, 1.0, 1001) if grid is None else np.asarray(grid, dtype=float)
    fv = np.array([f((x,)) for x in xs])
    df = f.derivative(1)
    lhs = np.array([abs(x * df((x,))) for x in xs])
    rhs = C * np.abs(fv)
    bad = np.nonzero(lhs > rhs * (1.0 + rel_slack))[0]
    holds = len(bad) == 0
    first_bad = None if holds else float(xs[bad[0]])

    zero = None
    izero = None
    for i in range(len(xs) - 1):
        if fv[i] == 0.0 and fv[i + 1] != 0.0:
            zero, izero = float(xs[i]), i
            break

    violation = delta = None
    if izero is not None and zero == 0.0:
        end = izero + 1
        while end + 1 < len(xs) and fv[end + 1] != 0.0:
            end += 1
        delta = float(xs[end])
        fd = abs(fv[end])
        for i in range(izero + 1, end + 1):
            bound = fd * (xs[i] / delta) ** C
            if abs(fv[i]) < bound * (1.0 - rel_slack):
                violation = (float(xs[i]), float(bound))
                break

    flat = flatness_probe(f, default_flat_radii(1.0), direction_vectors=[[1.0]]).overall_verdict
    nonzero = bool(np.any(fv != 0.0))
    return Theorem1Report(zero, holds, first_bad, violation, delta, flat,
                          flat and holds and nonzero)
