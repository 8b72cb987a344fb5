"""Markdown tables and standalone SVG bar charts for per-industry breakdowns."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .analytics import IndustryBreakdown, dominant_failure
from .atomic import atomic_write_text
from .evaluation import MetricsReport, matrix_rows, metrics_table
from .taxonomy import canonical_order

ORDER = tuple(canonical_order())

Y_LABEL = "Number of failures"
X_LABEL = "Failure Type"

# chart geometry, in SVG user units
WIDTH = 640
HEIGHT = 420
MARGIN_LEFT = 72
MARGIN_RIGHT = 24
MARGIN_TOP = 48
MARGIN_BOTTOM = 160
BAR_WIDTH = 28
TICK_LABEL_ROTATION = -45  # counter-clockwise, like the published figures
HEADROOM = 1.15
FONT = "font-family=\"DejaVu Sans, Arial, Helvetica, sans-serif\""
BAR_FILL = "#6666ff"  # 60% blue on white


@dataclass(frozen=True)
class ChartSpec:
    title: str
    x_labels: tuple[str, ...]
    values: tuple[int, ...]
    y_label: str = Y_LABEL
    x_label: str = X_LABEL

    def __post_init__(self) -> None:
        if len(self.x_labels) != len(self.values):
            raise ValueError("x_labels and values differ in length")
        if any(v < 0 for v in self.values):
            raise ValueError("bar values must be non-negative")


def default_title(industry: str) -> str:
    return f"In {industry} Industry"


def chart_spec(b: IndustryBreakdown, title: str | None = None) -> ChartSpec:
    return ChartSpec(
        title=title or default_title(b.industry.name),
        x_labels=tuple(t.value for t in ORDER),
        values=tuple(b.values()),
    )


def _nice_step(span: float, target_ticks: int = 5) -> int:
    raw = span / target_ticks
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return max(1, int(m * mag))
    return max(1, int(10 * mag))


def _num(x: float) -> str:
    text = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def render_chart(spec: ChartSpec) -> str:
    """A self-contained SVG bar chart; identical specs give identical bytes."""
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    base_y = MARGIN_TOP + plot_h
    peak = max(spec.values, default=0)
    step = _nice_step(max(peak * HEADROOM, 1))
    y_max = max(step, math.ceil(peak * HEADROOM / step) * step)
    scale = plot_h / y_max
    slot = plot_w / max(len(spec.values), 1)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(spec.title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{_num(WIDTH / 2)}" y="28" text-anchor="middle" font-size="16" {FONT}>{escape(spec.title)}</text>',
    ]

    out.append('<g class="y-axis">')
    for tick in range(0, y_max + 1, step):
        y = base_y - tick * scale
        out.append(
            f'<line x1="{MARGIN_LEFT}" y1="{_num(y)}" x2="{WIDTH - MARGIN_RIGHT}" y2="{_num(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{_num(y + 4)}" text-anchor="end" font-size="11" {FONT}>{tick}</text>'
        )
    out.append("</g>")

    out.append('<g class="bars">')
    for i, (label, value) in enumerate(zip(spec.x_labels, spec.values)):
        cx = MARGIN_LEFT + slot * (i + 0.5)
        h = value * scale
        out.append(
            f'<rect x="{_num(cx - BAR_WIDTH / 2)}" y="{_num(base_y - h)}" width="{BAR_WIDTH}" '
            f'height="{_num(h)}" fill="{BAR_FILL}" stroke="#333399" stroke-width="0.5"/>'
        )
        out.append(
            f'<text class="value" x="{_num(cx)}" y="{_num(base_y - h - 5)}" text-anchor="middle" '
            f'font-size="11" {FONT}>{value}</text>'
        )
        ty = base_y + 14
        out.append(
            f'<text class="tick" x="{_num(cx)}" y="{_num(ty)}" text-anchor="end" font-size="11" {FONT} '
            f'transform="rotate({TICK_LABEL_ROTATION} {_num(cx)} {_num(ty)})">{escape(label)}</text>'
        )
    out.append("</g>")

    out.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base_y}" stroke="#000000" stroke-width="1"/>'
    )
    out.append(
        f'<line x1="{MARGIN_LEFT}" y1="{base_y}" x2="{WIDTH - MARGIN_RIGHT}" y2="{base_y}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    mid_y = MARGIN_TOP + plot_h / 2
    out.append(
        f'<text x="18" y="{_num(mid_y)}" text-anchor="middle" font-size="12" {FONT} '
        f'transform="rotate(-90 18 {_num(mid_y)})">{escape(spec.y_label)}</text>'
    )
    out.append(
        f'<text x="{_num(MARGIN_LEFT + plot_w / 2)}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12" '
        f"{FONT}>{escape(spec.x_label)}</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- markdown --------------------------------------------------------------


def percent_one_decimal(part: int, whole: int) -> str:
    pct = (Decimal(part) * 100 / Decimal(whole)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{pct}%"


def _table(rows: Sequence[Sequence[str]], align: Sequence[str]) -> list[str]:
    head, *body = rows
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join(align) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return lines


def industry_section(b: IndustryBreakdown) -> list[str]:
    lines = [f"## {b.industry.name} ({b.total} failures)", ""]
    rows = [["Failure type", "Count", "Percent"]]
    for t in ORDER:
        n = b.counts[t]
        rows.append([t.value, str(n), percent_one_decimal(n, b.total) if b.total else "n/a"])
    lines += _table(rows, ["---", "---:", "---:"])
    lines.append("")
    if b.total:
        top = dominant_failure(b)
        lines.append(f"Dominant failure: {top.value} ({b.counts[top]} of {b.total})")
    else:
        lines.append("Dominant failure: n/a")
    lines.append("")
    return lines


def metrics_section(m: MetricsReport) -> list[str]:
    lines = ["## Classification quality", ""]
    lines.append(f"Overall accuracy: {m.accuracy_display}")
    lines.append("")
    lines.append(f"Correct: {m.matrix.trace} of {m.total}")
    macro = "n/a" if m.macro_recall is None else f"{m.macro_recall:.4f}"
    lines.append(f"Macro-averaged recall: {macro}")
    lines.append("")
    lines += _table(metrics_table(m), ["---", "---:", "---:", "---:"])
    lines += ["", "### Confusion matrix (rows: gold, columns: predicted)", ""]
    header = ["gold \\ predicted", *(t.value for t in ORDER)]
    lines += _table([header, *matrix_rows(m.matrix)], ["---", *(["---:"] * len(ORDER))])
    lines.append("")
    return lines


def render_markdown_report(
    breakdowns: Sequence[IndustryBreakdown], metrics: MetricsReport | None = None
) -> str:
    lines = ["# Software failures by industry", ""]
    if not breakdowns:
        lines += ["No data.", ""]
    else:
        for b in breakdowns:
            lines += industry_section(b)
    if metrics is not None:
        lines += metrics_section(metrics)
    return "\n".join(lines).rstrip("\n") + "\n"


def write_charts(
    breakdowns: Sequence[IndustryBreakdown],
    out_dir: str | Path,
    titles: Mapping[str, str] | None = None,
) -> list[Path]:
    """One <industry-slug>.svg per breakdown; titles is keyed by case-folded industry name."""
    titles = {k.casefold(): v for k, v in (titles or {}).items()}
    paths = []
    for b in breakdowns:
        path = Path(out_dir) / f"{b.industry.slug}.svg"
        atomic_write_text(path, render_chart(chart_spec(b, titles.get(b.industry.key))))
        paths.append(path)
    return paths
