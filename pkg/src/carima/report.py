"""Report serialization: versioned machine-readable JSON, human summaries,
SVG plot emission and a checksummed file manifest.

All emitted bytes are deterministic functions of the report content and the
schema version string; no timestamps or environment-dependent values.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .causal import CausalReport
from .errors import IoError
from .simlab import StudyTables
from .svgplot import render_effect_plot

SCHEMA_VERSION = "carima-report/1"


def _jsonable(obj):
    """Convert arrays and NaN to JSON-safe structures (NaN becomes null)."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not np.isfinite(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def analysis_report_dict(report: CausalReport, config=None) -> dict:
    """Machine representation of a CausalReport."""
    model = report.model
    order = model.order
    d = {
        "schema": SCHEMA_VERSION,
        "kind": "analysis",
        "config": config.to_dict() if config is not None else None,
        "model": {
            "order": {
                "p": order.p, "q": order.q, "P": order.P, "Q": order.Q,
                "d": order.diff.d, "D": order.diff.D, "s": order.diff.s,
            },
            "label": order.label(),
            "params": {
                "phi": model.params.phi, "theta": model.params.theta,
                "Phi": model.params.Phi, "Theta": model.params.Theta,
                "beta": model.params.beta, "sigma2": model.params.sigma2,
            },
            "regressors": list(model.regressor_names),
            "loglik": model.loglik,
            "bic": model.bic,
            "n_obs": model.n_obs,
            "converged": model.converged,
        },
        "t_star": report.t_star,
        "alpha": report.alpha,
        "log_scale": report.log_scale,
        "horizons": list(report.horizons),
        "observed_post": report.observed_post,
        "counterfactual": {
            "mean": report.counterfactual,
            "variance": report.counterfactual_variance,
        },
        "paths": {
            scale: {
                "tau_hat": p.tau_hat,
                "delta_hat": p.delta_hat,
                "tau_bar_hat": p.tau_bar_hat,
                "missing": p.missing,
                "n_observed": p.n_observed,
                "var_tau": p.var_tau,
                "var_delta": p.var_delta,
                "var_tau_bar": p.var_tau_bar,
            }
            for scale, p in report.paths.items()
        },
        "tests": [
            {
                "estimand": t.estimand, "scale": t.scale, "k": t.k,
                "estimate": t.estimate, "std_error": t.std_error,
                "statistic": t.statistic, "p_value": t.p_value,
                "interval": list(t.interval), "alpha": t.alpha,
                "method": t.method, "n_boot": t.n_boot, "stars": t.stars,
            }
            for t in report.tests
        ],
        "multiplicative_summary": report.multiplicative_summary,
        "notes": list(report.notes),
    }
    return _jsonable(d)


def study_report_dict(tables: StudyTables, config=None) -> dict:
    d = {
        "schema": SCHEMA_VERSION,
        "kind": "study",
        "config": config,
        "tables": tables.to_dict(),
    }
    return _jsonable(d)


def serialize_report(d: dict) -> str:
    """Canonical JSON bytes: sorted keys, minimal separators, newline-terminated."""
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def parse_report(text: str) -> dict:
    return json.loads(text)


def analysis_summary_text(report: CausalReport) -> str:
    """Aligned human summary of estimates and tests."""
    lines = []
    m = report.model
    lines.append(f"Model {m.order.label()}  loglik {m.loglik:.3f}  BIC {m.bic:.3f}  "
                 f"n={m.n_obs}  converged={m.converged}")
    lines.append(f"Regressors: {', '.join(m.regressor_names) if m.regressor_names else '(none)'}")
    lines.append(f"Pre-period observations: {report.t_star}; post: {len(report.observed_post)}")
    if report.log_scale:
        lines.append("Target analyzed on the natural-log scale.")
    lines.append("")
    hdr = f"{'scale':<12}{'estimand':<12}{'k':>5}{'method':<11}{'estimate':>12}{'se':>10}" \
          f"{'p':>10}  interval"
    lines.append(hdr)
    for t in report.tests:
        lines.append(
            f"{t.scale:<12}{t.estimand:<12}{t.k:>5} {t.method:<10}{t.estimate:>12.4f}"
            f"{t.std_error:>10.4f}{t.p_value:>10.4f}  "
            f"[{t.interval[0]:.4f}, {t.interval[1]:.4f}] {t.stars}"
        )
    if report.multiplicative_summary:
        lines.append("")
        lines.append("Multiplicative average effect, exp(tau_bar) - 1:")
        for k, row in report.multiplicative_summary.items():
            lines.append(
                f"  horizon {k}: {row['estimate']:+.4f} "
                f"[{row['interval'][0]:+.4f}, {row['interval'][1]:+.4f}]"
            )
    lines.append("")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str, manifest: list) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    manifest.append({"name": path.name, "sha256": digest, "bytes": len(text.encode("utf-8"))})


def emit_report(report, out_dir, formats=("csv", "json-like", "svg"), config=None,
                extra_files=None) -> dict:
    """Write a report bundle and return its checksummed manifest.

    For an analysis report: machine JSON, human summary, and one two-panel
    SVG per horizon.  For study tables: machine JSON, aligned text, and the
    metrics CSV.  ``extra_files`` maps extra file names to text content
    (e.g. a comparator document).  Same content in, byte-identical files
    out; the manifest lists every emitted file with its checksum.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}")
    manifest = []
    formats = tuple(formats)
    if isinstance(report, CausalReport):
        if "json-like" in formats:
            _write(out / "report.json", serialize_report(analysis_report_dict(report, config)),
                   manifest)
        _write(out / "summary.txt", analysis_summary_text(report), manifest)
        if "svg" in formats:
            for k in report.horizons:
                _write(out / f"effect_h{k}.svg", render_effect_plot(report, k), manifest)
        if "csv" in formats:
            _write(out / "effects.csv", effects_csv_text(report), manifest)
    elif isinstance(report, StudyTables):
        if "json-like" in formats:
            _write(out / "study.json", serialize_report(study_report_dict(report, config)),
                   manifest)
        _write(out / "tables.txt", report.to_text(), manifest)
        if "csv" in formats:
            _write(out / "tables.csv", report.to_csv_text(), manifest)
    else:
        raise IoError(f"cannot emit report of type {type(report).__name__}")
    for name, text in (extra_files or {}).items():
        _write(out / name, text, manifest)
    manifest_doc = {"schema": SCHEMA_VERSION, "files": manifest}
    _write(out / "manifest.json", serialize_report(manifest_doc), manifest)
    return manifest_doc


def effects_csv_text(report: CausalReport) -> str:
    """Per-day effect paths on both scales as tidy CSV."""
    lines = ["scale,post_day,tau_hat,delta_hat,tau_bar_hat,var_tau,var_delta,var_tau_bar"]

    def cell(x):
        return "" if not np.isfinite(x) else repr(float(x))

    for scale, p in report.paths.items():
        for i in range(p.horizon):
            lines.append(
                f"{scale},{i + 1},{cell(p.tau_hat[i])},{cell(p.delta_hat[i])},"
                f"{cell(p.tau_bar_hat[i])},{cell(p.var_tau[i])},{cell(p.var_delta[i])},"
                f"{cell(p.var_tau_bar[i])}"
            )
    return "\n".join(lines) + "\n"
