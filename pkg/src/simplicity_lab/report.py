"""Deterministic JSON, CSV and SVG output.

Every number is rounded to 9 significant digits, fields keep a fixed
order, and nothing depends on time or platform, so equal inputs give
byte-equal files.  Infinite values are written as the string ``"inf"``
because JSON has no literal for them.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError, SimplicityError

TOOL = "simplicity-lab"


class ReportError(SimplicityError):
    pass


def num(x):
    """Round to 9 significant digits; ``inf`` becomes a string, ``nan`` null."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    v = float(f"{x:.9g}")
    return int(v) if v.is_integer() and abs(v) < 1e15 else v


def clean(obj):
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (float, int, np.floating, np.integer, np.bool_, bool)):
        return num(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, ensure_ascii=False) + "\n"


def csv_cell(x) -> str:
    v = num(x) if isinstance(x, (int, float, np.integer, np.floating)) else x
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def to_csv(header, rows) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for r in rows:
        out.write(",".join(csv_cell(r[h]) for h in header) + "\n")
    return out.getvalue()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    seed: int = 0
    mode: str | None = None
    trials: int | None = None
    horizon: int | None = None
    f: list | None = None
    param_bits: float | None = None
    words_per_year: float | None = None
    output_format: str = "report"
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d["inputs"] = [str(p) for p in self.inputs]
        return d


def envelope(config: RunConfig, result) -> dict:
    """Wrap a result with the config, input digests and tool version."""
    return {
        "tool": TOOL,
        "version": __version__,
        "config": config.as_dict(),
        "inputs": [{"path": str(p), "sha256": file_digest(p)} for p in config.inputs],
        "result": result,
    }


# -- profiles ---------------------------------------------------------------------

PROFILE_COLUMNS = ("n", "s_n", "cum_s", "delta_n", "cum_delta", "lambda_n", "cum_lambda",
                   "bound_pred", "bound_over", "bound_under")


def profile_csv(profile) -> str:
    return to_csv(PROFILE_COLUMNS, profile.rows())


def profile_dict(profile) -> dict:
    d = {
        "mode": profile.mode,
        "horizon": profile.horizon,
        "truth_bits": profile.truth_bits,
        "reference_symbol": profile.ref_symbol,
        "bounds": {
            "prediction": profile.bound_pred,
            "overgeneralization": profile.bound_over,
            "undergeneralization": {f"{f:g}": b for f, b in profile.bound_under.items()},
        },
        "s_n": profile.s, "cum_s": profile.cum_s,
        "tv2_n": profile.tv2,
        "delta_n": profile.delta, "cum_delta": profile.cum_delta,
        "lambda_n": {f"{f:g}": v for f, v in profile.lam.items()},
        "cum_lambda": {f"{f:g}": np.cumsum(v) for f, v in profile.lam.items()},
    }
    if profile.truth_posterior is not None:
        d["truth_posterior"] = profile.truth_posterior
    if profile.mode == "monte-carlo":
        d["trials"] = profile.trials
        d["seed"] = profile.seed
        d["ci95"] = profile.ci
    return d


# -- SVG ----------------------------------------------------------------------------

_W, _H, _PAD = 640, 260, 48
_COLORS = {"s": "#1f77b4", "delta": "#d62728", "lambda": "#2ca02c"}


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def _polyline(xs, ys, x0, y0, w, h, xmax, ymax, color, label):
    pts = " ".join(f"{x0 + w * (x - 1) / max(xmax - 1, 1):.3f},{y0 + h - h * y / ymax:.3f}"
                   for x, y in zip(xs, ys))
    return f'<polyline class="series" data-series="{label}" fill="none" stroke="{color}" ' \
           f'stroke-width="1.5" points="{pts}"/>'


def profile_svg(profile) -> str:
    """Two panels: per-step losses, then cumulative losses with bound lines."""
    if profile is None or profile.horizon < 1 or len(profile.s) == 0:
        raise ParameterError("cannot plot an empty profile")
    f = profile.primary_f
    n = np.arange(1, profile.horizon + 1)
    lam = profile.lam[f] if f is not None else np.zeros(profile.horizon)
    per = {"s": profile.s, "delta": profile.delta, "lambda": lam}
    cum = {k: np.cumsum(v) for k, v in per.items()}
    bounds = {"s": profile.bound_pred, "delta": profile.bound_over,
              "lambda": profile.bound_under.get(f, 0.0)}
    w = _W - 2 * _PAD
    h = _H - 2 * _PAD
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{2 * _H}" '
             f'viewBox="0 0 {_W} {2 * _H}">',
             '<rect width="100%" height="100%" fill="white"/>']
    ymax1 = max(1e-12, max(float(v.max()) for v in per.values())) * 1.05
    ymax2 = max(1e-12, max(bounds.values()), max(float(v.max()) for v in cum.values())) * 1.05
    for panel, (title, series, ymax) in enumerate((("per-step", per, ymax1),
                                                   ("cumulative", cum, ymax2))):
        y0 = panel * _H + _PAD
        parts.append(f'<g class="panel" data-panel="{title}">')
        parts.append(f'<rect x="{_PAD}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>')
        parts.append(f'<text x="{_PAD}" y="{y0 - 8}" font-family="sans-serif" font-size="12">'
                     f'{title} (mode {profile.mode}, L = {_fmt(profile.truth_bits)} bits)</text>')
        parts.append(f'<text x="{_PAD - 4}" y="{y0 + 4}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{_fmt(ymax)}</text>')
        parts.append(f'<text x="{_PAD + w}" y="{y0 + h + 14}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">n = {profile.horizon}</text>')
        for key, ys in series.items():
            parts.append(_polyline(n, ys, _PAD, y0, w, h, profile.horizon, ymax, _COLORS[key], key))
        if title == "cumulative":
            for key, b in bounds.items():
                y = y0 + h - h * b / ymax
                parts.append(f'<line class="bound" data-series="{key}" data-value="{_fmt(b)}" '
                             f'x1="{_PAD}" x2="{_PAD + w}" y1="{y:.3f}" y2="{y:.3f}" '
                             f'stroke="{_COLORS[key]}" stroke-dasharray="6 4"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_profile_plot(profile, path) -> None:
    """Write the SVG; nothing is created when the profile is empty."""
    text = profile_svg(profile)
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from None
