"""Static SVG rendering: observed vs counterfactual and effect-path panels.

Hand-rolled vector output so the bytes are fully deterministic; no raster
content, no external plotting dependency.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 860, 560
PANEL_H = 240
MARGIN_L, MARGIN_R, MARGIN_T, GAP = 64, 20, 28, 48


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if not np.isfinite(lo) or not np.isfinite(hi) or lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return ticks


class _Panel:
    """Linear mapping of data coordinates into one panel's pixel box."""

    def __init__(self, x0, x1, y0, y1, top):
        pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
        self.x0, self.x1 = x0, x1
        self.y0, self.y1 = y0 - pad, y1 + pad
        self.top = top
        self.left = MARGIN_L
        self.right = WIDTH - MARGIN_R
        self.bottom = top + PANEL_H

    def sx(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def sy(self, y):
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = []
        for x, y in zip(xs, ys):
            if np.isfinite(y):
                pts.append(f"{_fmt(self.sx(x))},{_fmt(self.sy(y))}")
        if not pts:
            return ""
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        return (
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} '
            f'points="{" ".join(pts)}"/>'
        )

    def band(self, xs, lo, hi, color, opacity=0.25):
        fwd = [(x, l) for x, l in zip(xs, lo) if np.isfinite(l)]
        bwd = [(x, h) for x, h in zip(xs, hi) if np.isfinite(h)][::-1]
        if not fwd or not bwd:
            return ""
        pts = " ".join(f"{_fmt(self.sx(x))},{_fmt(self.sy(y))}" for x, y in fwd + bwd)
        return f'<polygon fill="{color}" fill-opacity="{opacity}" stroke="none" points="{pts}"/>'

    def vline(self, x, color="#c03030"):
        px = _fmt(self.sx(x))
        return (
            f'<line x1="{px}" y1="{self.top}" x2="{px}" y2="{self.bottom}" '
            f'stroke="{color}" stroke-width="1" stroke-dasharray="4,3"/>'
        )

    def frame_and_axes(self, title):
        parts = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
            f'height="{PANEL_H}" fill="none" stroke="#444" stroke-width="1"/>',
            f'<text x="{self.left}" y="{self.top - 8}" font-size="13" '
            f'font-family="sans-serif" fill="#222">{title}</text>',
        ]
        for t in _nice_ticks(self.y0, self.y1):
            py = self.sy(t)
            if self.top <= py <= self.bottom:
                parts.append(
                    f'<line x1="{self.left - 4}" y1="{_fmt(py)}" x2="{self.left}" '
                    f'y2="{_fmt(py)}" stroke="#444" stroke-width="1"/>'
                )
                parts.append(
                    f'<text x="{self.left - 8}" y="{_fmt(py + 4)}" font-size="10" '
                    f'font-family="sans-serif" text-anchor="end" fill="#333">{_fmt(t)}</text>'
                )
        for t in _nice_ticks(self.x0, self.x1, 7):
            px = self.sx(t)
            if self.left <= px <= self.right:
                parts.append(
                    f'<line x1="{_fmt(px)}" y1="{self.bottom}" x2="{_fmt(px)}" '
                    f'y2="{self.bottom + 4}" stroke="#444" stroke-width="1"/>'
                )
                parts.append(
                    f'<text x="{_fmt(px)}" y="{self.bottom + 16}" font-size="10" '
                    f'font-family="sans-serif" text-anchor="middle" fill="#333">{_fmt(t)}</text>'
                )
        return parts


def render_effect_plot(report, horizon: int) -> str:
    """Two stacked panels for one horizon.

    Top: observed series around the intervention with the counterfactual
    forecast and an intervention marker.  Bottom: the point-effect path on
    the original scale with its confidence band; the band excludes zero
    exactly where the pointwise test rejects.
    """
    from scipy.stats import norm

    if horizon not in report.horizons:
        raise ValueError(f"horizon {horizon} not in report horizons {report.horizons}")
    k = horizon
    t_star = report.t_star
    zq = float(norm.ppf(1.0 - report.alpha / 2.0))

    pre_show = min(60, t_star)
    y_model = report.model.y.values
    pre_x = np.arange(t_star - pre_show, t_star)
    post_x = np.arange(t_star, t_star + k)
    obs_post = report.observed_post[:k]
    cf = report.counterfactual[:k]
    cf_se = np.sqrt(report.counterfactual_variance[:k])

    path = report.paths["original"]
    tau = path.tau_hat[:k]
    tau_se = np.sqrt(path.var_tau[:k])

    all_top = np.concatenate([y_model[pre_x], obs_post, cf - zq * cf_se, cf + zq * cf_se])
    finite_top = all_top[np.isfinite(all_top)]
    p1 = _Panel(pre_x[0] if pre_show else t_star, t_star + k - 1,
                float(finite_top.min()), float(finite_top.max()), MARGIN_T)
    all_bot = np.concatenate([tau - zq * tau_se, tau + zq * tau_se, [0.0]])
    finite_bot = all_bot[np.isfinite(all_bot)]
    p2 = _Panel(t_star, t_star + k - 1, float(finite_bot.min()), float(finite_bot.max()),
                MARGIN_T + PANEL_H + GAP)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    parts += p1.frame_and_axes(f"Observed vs counterfactual (horizon {k})")
    parts.append(p1.band(post_x, cf - zq * cf_se, cf + zq * cf_se, "#4878b0"))
    if pre_show:
        parts.append(p1.polyline(pre_x, y_model[pre_x], "#777777"))
    parts.append(p1.polyline(post_x, obs_post, "#777777"))
    parts.append(p1.polyline(post_x, cf, "#2b5fa3", width=2))
    parts.append(p1.vline(t_star - 0.5))

    parts += p2.frame_and_axes("Point effect with confidence band")
    parts.append(p2.band(post_x, tau - zq * tau_se, tau + zq * tau_se, "#4878b0"))
    parts.append(p2.polyline([t_star, t_star + k - 1], [0.0, 0.0], "#999999", width=1, dash="2,3"))
    parts.append(p2.polyline(post_x, tau, "#2b5fa3", width=2))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
