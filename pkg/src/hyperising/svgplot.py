"""Hand-rolled SVG line plots for sweep results.

No plotting library: the SVG is assembled from fixed-precision strings so
that identical inputs always produce identical bytes, which the sweep
determinism guarantee depends on.  One polyline per p value; x is alpha
(or n for explicit-n sweeps), y the aggregated metric in [0, 1].
"""

from __future__ import annotations

from .sweep import TrialRow

__all__ = ["render_sweep_svg"]

_WIDTH, _HEIGHT = 640.0, 480.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 70.0, 150.0, 40.0, 60.0
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")

_METRICS = {
    "rate": ("mean recovery rate", "rate"),
    "success": ("success fraction", "success"),
}


def _f(value: float) -> str:
    return f"{value:.2f}"


def _series(rows: list[TrialRow], metric: str):
    """metric means per (p, x) over ok rows; x is alpha when present else n."""
    use_alpha = any(row.alpha is not None for row in rows)
    acc: dict[tuple[int, float], list[float]] = {}
    for row in rows:
        if row.status != "ok":
            continue
        value = row.rate if metric == "rate" else (
            None if row.success is None else float(row.success))
        if value is None:
            continue
        x = row.alpha if use_alpha else float(row.n)
        if x is None:
            continue
        acc.setdefault((row.p, float(x)), []).append(float(value))
    series: dict[int, list[tuple[float, float]]] = {}
    for (p, x), values in sorted(acc.items()):
        series.setdefault(p, []).append((x, sum(values) / len(values)))
    x_label = "alpha" if use_alpha else "n"
    return series, x_label


def render_sweep_svg(rows: list[TrialRow], metric: str = "rate") -> str:
    """Render aggregated sweep rows as a complete SVG document string."""
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {sorted(_METRICS)}")
    y_label = _METRICS[metric][0]
    series, x_label = _series(rows, metric)

    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_WIDTH)}" '
        f'height="{int(_HEIGHT)}" viewBox="0 0 {int(_WIDTH)} {int(_HEIGHT)}">',
        f'<rect x="0" y="0" width="{int(_WIDTH)}" height="{int(_HEIGHT)}" '
        'fill="white"/>',
        # axes
        f'<line x1="{_f(_LEFT)}" y1="{_f(_TOP)}" x2="{_f(_LEFT)}" '
        f'y2="{_f(_TOP + plot_h)}" stroke="black" stroke-width="1"/>',
        f'<line x1="{_f(_LEFT)}" y1="{_f(_TOP + plot_h)}" '
        f'x2="{_f(_LEFT + plot_w)}" y2="{_f(_TOP + plot_h)}" '
        'stroke="black" stroke-width="1"/>',
    ]

    all_x = sorted({x for pts in series.values() for x, _ in pts})
    if not all_x:
        parts.append(
            f'<text x="{_f(_LEFT + plot_w / 2)}" y="{_f(_TOP + plot_h / 2)}" '
            'font-family="monospace" font-size="16" text-anchor="middle">'
            'no data</text>')
    else:
        x_min, x_max = all_x[0], all_x[-1]
        span = x_max - x_min

        def sx(x: float) -> float:
            if span == 0.0:
                return _LEFT + plot_w / 2
            return _LEFT + (x - x_min) / span * plot_w

        def sy(y: float) -> float:
            return _TOP + (1.0 - y) * plot_h

        ticks = all_x if len(all_x) <= 10 else all_x[:: len(all_x) // 10 + 1]
        for x in ticks:
            parts.append(
                f'<line x1="{_f(sx(x))}" y1="{_f(_TOP + plot_h)}" '
                f'x2="{_f(sx(x))}" y2="{_f(_TOP + plot_h + 5)}" '
                'stroke="black" stroke-width="1"/>')
            parts.append(
                f'<text x="{_f(sx(x))}" y="{_f(_TOP + plot_h + 20)}" '
                'font-family="monospace" font-size="11" '
                f'text-anchor="middle">{x:g}</text>')
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            parts.append(
                f'<line x1="{_f(_LEFT - 5)}" y1="{_f(sy(frac))}" '
                f'x2="{_f(_LEFT)}" y2="{_f(sy(frac))}" '
                'stroke="black" stroke-width="1"/>')
            parts.append(
                f'<text x="{_f(_LEFT - 10)}" y="{_f(sy(frac) + 4)}" '
                'font-family="monospace" font-size="11" '
                f'text-anchor="end">{frac:g}</text>')
        for idx, (p, pts) in enumerate(sorted(series.items())):
            color = _PALETTE[idx % len(_PALETTE)]
            coords = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                'stroke-width="2"/>')
            for x, y in pts:
                parts.append(
                    f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="3" '
                    f'fill="{color}"/>')
            ly = _TOP + 10 + 18 * idx
            parts.append(
                f'<line x1="{_f(_LEFT + plot_w + 15)}" y1="{_f(ly)}" '
                f'x2="{_f(_LEFT + plot_w + 40)}" y2="{_f(ly)}" '
                f'stroke="{color}" stroke-width="2"/>')
            parts.append(
                f'<text x="{_f(_LEFT + plot_w + 45)}" y="{_f(ly + 4)}" '
                f'font-family="monospace" font-size="12">p={p}</text>')

    parts.append(
        f'<text x="{_f(_LEFT + plot_w / 2)}" y="{_f(_HEIGHT - 15)}" '
        'font-family="monospace" font-size="13" '
        f'text-anchor="middle">{x_label}</text>')
    parts.append(
        f'<text x="20" y="{_f(_TOP + plot_h / 2)}" font-family="monospace" '
        f'font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 20 {_f(_TOP + plot_h / 2)})">{y_label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
