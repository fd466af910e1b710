"""Acceptance suite: one test per criterion, each printing a pass/fail line
(collected again in the terminal summary)."""

import json
import math
import subprocess
import sys

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gscert import catalog
from gscert.certifier import CertifyConfig, certify_gs, flatness_probe, lower_bound_witness
from gscert.expr import parse
from gscert.field import Classification, SamplingSpec, VectorField, classify_singularity, inner_product_positivity
from gscert.flow import IntegratorConfig, Method, Termination, fit_sink_rate, integrate
from gscert.inequality import estimate_inequality_constant, verify_gronwall_along_orbit

E_INV = math.exp(-1.0)


def _catalog_functions():
    seen = {}
    for entry in catalog.CATALOG.values():
        s = entry.spec
        texts = list(s.field_components) + [s.scalar_function]
        for t in texts:
            seen.setdefault((t, s.dimension), (s.radius, s.f_origin_value if t == s.scalar_function else None))
    return [(t, n, r, o) for (t, n), (r, o) in sorted(seen.items())]


def test_c01_derivative_oracle(criterion):
    rec = criterion(1, "symbolic partials vs central differences (h=1e-5, 1e-6*(1+|value|), 100 points/function)")
    rng = np.random.default_rng(2024)
    h = 1e-5
    worst = worst_rel = 0.0
    functions = _catalog_functions()
    for text, n, radius, origin in functions:
        f = parse(text, n, origin)
        for _ in range(100):
            # uniform in the catalog disc, away from the removable singularity at 0
            d = rng.standard_normal(n)
            p = radius * rng.uniform(1e-3, 1.0) ** (1.0 / n) * d / np.linalg.norm(d)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                fd = (f(p + e) - f(p - e)) / (2 * h)
                sym = f.derivative(i + 1)(p)
                worst = max(worst, abs(sym - fd) / (1.0 + abs(sym)))
                if sym != 0.0:
                    worst_rel = max(worst_rel, abs(sym - fd) / abs(sym))
    rec.check(worst <= 1e-6, f"{len(functions)} functions, worst gap {worst:.2e} "
                             f"(pure relative {worst_rel:.2e}, from FD truncation near the flat origin)")


def test_c02_flow_accuracy(criterion):
    rec = criterion(2, "x'=-x to t=1: adaptive within 1e-8; RK4 halving ratio in [12, 20]")
    orbit = integrate(VectorField.parse("-x1"), [1.0], IntegratorConfig(t_max=1.0))
    err = abs(orbit.final_state[0] - E_INV)
    rec.check(err <= 1e-8, f"adaptive error {err:.2e}")
    errors = []
    for step in (0.1, 0.05, 0.025, 0.0125):
        cfg = IntegratorConfig(method=Method.RK4, step=step, t_max=1.0)
        errors.append(abs(integrate(VectorField.parse("-x1"), [1.0], cfg).final_state[0] - E_INV))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    rec.check(all(12.0 <= q <= 20.0 for q in ratios), "RK4 ratios " + ", ".join(f"{q:.3f}" for q in ratios))


def test_c03_sink_rate_fit(criterion):
    rec = criterion(3, "x'=-2x: lambda in [1.999, 2.001], theta in [0.98, 1.05], bound on all samples")
    orbit = integrate(VectorField.parse("-2*x1"), [1.0], IntegratorConfig(escape_radius=2.0))
    rec.check(orbit.termination is Termination.CONVERGED, f"termination {orbit.termination.value}")
    fit = fit_sink_rate(orbit)
    rec.check(1.999 <= fit.lam <= 2.001, f"lambda {fit.lam:.9f}")
    rec.check(0.98 <= fit.theta <= 1.05, f"theta {fit.theta:.9f}")
    ok = bool(np.all(fit.distances <= fit.bound(fit.times)))
    rec.check(ok, f"bound holds on {fit.samples_used} retained samples")


def test_c04_gronwall_equality(criterion):
    rec = criterion(4, "field x, f=x^2: observed vs x0^2 e^{2t} within 1e-8 rel; c=1.9 violates")
    orbit = integrate(VectorField.parse("x1"), [0.1], IntegratorConfig(t_max=1.0, escape_radius=10.0))
    f = parse("x1^2", 1)
    rep = verify_gronwall_along_orbit(orbit, f, 2.0)
    rel = float(np.max(np.abs(rep.observed - rep.bound) / rep.bound))
    rec.check(rel <= 1e-8, f"max relative gap {rel:.2e}")
    rec.check(rep.verdict, f"c=2 verdict {rep.verdict}, max_violation {rep.max_violation:.2e}")
    bad = verify_gronwall_along_orbit(orbit, f, 1.9)
    rec.check(not bad.verdict, f"c=1.9 verdict {bad.verdict}, max_violation {bad.max_violation:.3e}")


_zero_start = st.tuples(
    st.sampled_from(["x1, x2", "x1 + x2^2, 2*x2", "-x1, 0.5*x2", "x2, -x1", "x1 - x1*x2, x2"]),
    st.sampled_from(["x2", "x2*(1 + x1^2)", "x2*exp(x1)", "x1 - {a}", "x1*x2 + x1 - {a}", "sin(x2)"]),
    st.floats(-0.6, 0.6).filter(lambda v: v != 0.0),
    st.floats(0.1, 4.0),
    st.floats(0.1, 2.0),
)


def test_c05_vanishing_propagation(criterion):
    rec = criterion(5, "observed[0]=0 with a passing Gronwall check forces observed <= 1e-12")
    tally = {"passing": 0, "failing": 0, "worst": 0.0}

    @given(_zero_start)
    @settings(max_examples=80, deadline=None, derandomize=True)
    def prop(case):
        field_text, f_template, a, c, t_max = case
        f = parse(f_template.format(a=repr(a)), 2)
        orbit = integrate(VectorField.parse(field_text), [a, 0.0],
                          IntegratorConfig(t_max=t_max, escape_radius=5.0))
        rep = verify_gronwall_along_orbit(orbit, f, c)
        assert rep.observed[0] == 0.0
        if rep.verdict:
            tally["passing"] += 1
            tally["worst"] = max(tally["worst"], float(rep.observed.max()))
            assert rep.observed.max() <= 1e-12
        else:
            tally["failing"] += 1

    prop()
    rec.check(tally["worst"] <= 1e-12 and tally["passing"] > 0,
              f"{tally['passing']} passing orbits stay at max {tally['worst']:.1e}; "
              f"{tally['failing']} orbits leave the zero set and fail the check")


def test_c06_flat_counterexample(criterion):
    rec = criterion(6, "f=exp(-1/x^2): sup(r) r^2 in [1.8, 2.2]; certify -> HypothesisFailed(constant)")
    h = VectorField.parse("x1")
    f = parse("exp(-1/(x1^2))", 1, origin_value=0.0)
    radii = (0.05, 0.1, 0.2, 0.5)
    est = estimate_inequality_constant(h, f, 0.5, SamplingSpec(radii=radii))
    scaled = {r: s * r * r for r, s in est.per_radius_sup}
    rec.check(all(1.8 <= v <= 2.2 for v in scaled.values()),
              "sup*r^2: " + ", ".join(f"{r}:{v:.6f}" for r, v in scaled.items()))
    cert = certify_gs(h, f, 0.5)
    rec.check(str(cert.conclusion) == "HypothesisFailed(constant)", f"conclusion {cert.conclusion}")


def test_c07_identity_field(criterion):
    rec = criterion(7, "h(x)=x, n=2: spectrum {1,1} HyperbolicSource; <h(x),x> > 0 at every sample")
    h = VectorField.parse("x1, x2")
    rep = classify_singularity(h, [0.0, 0.0])
    rec.check(rep.eigenvalues == (1 + 0j, 1 + 0j) and rep.classification is Classification.SOURCE,
              f"eigenvalues {rep.eigenvalues}, {rep.classification.value}")
    pos = inner_product_positivity(h, 1.0)
    attained = float(np.dot(pos.attaining_point, pos.attaining_point))
    rec.check(pos.verdict and pos.min_inner_product == attained,
              f"{pos.samples_checked} samples, min {pos.min_inner_product:.3e} = |x|^2 at argmin")


def test_c08_witness_equality(criterion):
    rec = criterion(8, "h=x, f=x^2, p=0.5, c=2: exponent, k_const and margin within bounds")
    w = lower_bound_witness(VectorField.parse("x1"), parse("x1^2", 1), [0.5], c=2.0)
    rec.check(0.999 <= w.lam <= 1.001, f"lambda {w.lam:.9f}")
    rec.check(1.998 <= w.exponent <= 2.002, f"exponent {w.exponent:.9f}")
    rec.check(0.99 <= w.k_const <= 1.01, f"k_const {w.k_const:.9f}")
    rec.check(w.min_margin >= -1e-6, f"min_margin {w.min_margin:.2e} over {w.checked_points} points")


def test_c09_dichotomy_sweep(criterion):
    rec = criterion(9, "catalog sweep: expected conclusions; no all-pass entry with sup|f| > 1e-12")
    kinds = set()
    for name in catalog.names():
        entry = catalog.get(name)
        s = entry.spec
        cert = certify_gs(s.field(), s.function(), s.radius, CertifyConfig(c=s.constant_c, seed=s.seed))
        kinds.add(entry.expected_conclusion)
        rec.check(str(cert.conclusion) == entry.expected_conclusion, f"{name}: {cert.conclusion}")
        all_pass = all(cert.passed.values())
        rec.check(not (all_pass and cert.f_sup_on_domain > 1e-12),
                  f"{name}: all-pass={all_pass}, sup|f|={cert.f_sup_on_domain:.3e}")
    needed = {"MustVanish", "HypothesisFailed(constant)", "HypothesisFailed(spectrum)",
              "HypothesisFailed(inner_product)", "HypothesisFailed(flatness)"}
    rec.check(len(catalog.names()) >= 6 and needed <= kinds, f"{len(catalog.names())} entries span {sorted(kinds)}")


def test_c10_flatness_ladder(criterion):
    rec = criterion(10, "f=|x|^m, m=1..4: verdict[k] true exactly for k < m")
    for m in (1, 2, 3, 4):
        rep = flatness_probe(parse(f"sqrt(x1^2 + x2^2)^{m}", 2))
        expected = tuple(k < m for k in range(rep.k_max + 1))
        rec.check(rep.verdict == expected, f"m={m}: verdict {''.join('T' if v else 'F' for v in rep.verdict)}")


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "gscert", *args], capture_output=True)


def test_c11_cli_contract(criterion):
    rec = criterion(11, "CLI: byte-identical certify output; malformed -> 2; Inconclusive -> 4")
    first = _cli("certify", "--catalog", "flat-bump-1d", "--seed", "7")
    second = _cli("certify", "--catalog", "flat-bump-1d", "--seed", "7")
    rec.check(first.returncode == 0 and first.stdout == second.stdout and len(first.stdout) > 0,
              f"two runs, {len(first.stdout)} bytes, identical={first.stdout == second.stdout}")
    rec.check(json.loads(first.stdout)["problem"]["seed"] == 7, "seed recorded")
    bad = _cli("analyze", "--field", "x1 + * x2,x2")
    rec.check(bad.returncode == 2, f"malformed expression exit {bad.returncode}")
    # x^10 passes every probe at k_max = 8 while f is visibly nonzero
    inc = _cli("certify", "--field", "x1", "--f", "x1^10")
    rec.check(inc.returncode == 4, f"Inconclusive exit {inc.returncode}")
