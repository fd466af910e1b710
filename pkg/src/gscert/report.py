"""JSON views of the report objects.

Floats are written by ``json`` with Python's shortest round-trip repr, so a
fixed input and seed always produce byte-identical output. Non-finite
values become the strings "inf", "-inf" and "nan".
"""

from __future__ import annotations

import enum
import json
import math

import numpy as np


def clean(obj):
    """Recursively convert numpy scalars/arrays, enums, complex and
    non-finite floats into plain JSON-compatible values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": clean(float(obj.real)), "im": clean(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj, indent=2) -> str:
    return json.dumps(clean(obj), indent=indent, allow_nan=False)


def spectrum_dict(s) -> dict:
    return {
        "eigenvalues": list(s.eigenvalues),
        "min_real_part": s.min_real_part,
        "max_real_part": s.max_real_part,
        "classification": s.classification,
        "tolerance_used": s.tolerance_used,
        "point": list(s.point),
    }


def positivity_dict(p) -> dict:
    return {
        "quantity": p.quantity,
        "samples_checked": p.samples_checked,
        "min_inner_product": p.min_inner_product,
        "attaining_point": list(p.attaining_point),
        "verdict": p.verdict,
    }


def sample_dict(s) -> dict:
    return {"point": list(s.point), "f_value": s.f_value, "Xf_value": s.Xf_value, "ratio": s.ratio}


def constant_dict(check) -> dict:
    est = check.estimate
    return {
        "verdict": check.verdict,
        "c_used": check.c_used,
        "c_supplied": check.c_supplied,
        "c_hat": None if est is None else est.c_hat,
        "attaining": None if est is None else sample_dict(est.attaining),
        "flagged": check.flagged,
        "violations": check.violations,
        "diverging": check.diverging,
        "rhs": "f" if est is None else est.rhs,
        "per_radius_sup": [] if est is None else [list(p) for p in est.per_radius_sup],
    }


def flatness_dict(r) -> dict:
    return {
        "radii": list(r.radii),
        "k_max": r.k_max,
        "ratio_table": r.ratio_table,
        "status": list(r.status),
        "verdict": list(r.verdict),
        "overall_verdict": r.overall_verdict,
        "flat_tol": r.flat_tol,
    }


def fit_dict(fit) -> dict:
    return {
        "lambda": fit.lam,
        "theta": fit.theta,
        "rms_log_residual": fit.rms_log_residual,
        "samples_used": fit.samples_used,
        "excluded_at_target": fit.excluded_at_target,
    }


def witness_dict(w) -> dict:
    return {
        "q": list(w.q),
        "k_const": w.k_const,
        "exponent": w.exponent,
        "lambda": w.lam,
        "c": w.c,
        "checked_points": w.checked_points,
        "min_margin": w.min_margin,
        "fit": fit_dict(w.fit),
    }


def certificate_dict(cert, problem: dict) -> dict:
    c = cert.conclusion
    return {
        "schema": "gscert.certificate/1",
        "problem": problem,
        "conclusion": {"kind": c.kind, "hypothesis": c.hypothesis, "reason": c.reason,
                       "label": str(c)},
        "passed": dict(cert.passed),
        "hypotheses": {
            "spectrum": spectrum_dict(cert.hypothesis_spectrum),
            "inner_product": positivity_dict(cert.hypothesis_inner_product),
            "constant": constant_dict(cert.hypothesis_constant),
            "flatness": flatness_dict(cert.hypothesis_flatness),
        },
        "f_sup_on_domain": cert.f_sup_on_domain,
        "witness": None if cert.witness is None else witness_dict(cert.witness),
        "witness_note": cert.witness_note,
    }


def ratio_sup_csv(estimate) -> str:
    lines = ["radius,sup"]
    if estimate is not None:
        for r, s in estimate.per_radius_sup:
            lines.append(f"{float(r)!r},{float(s)!r}")
    return "\n".join(lines) + "\n"
