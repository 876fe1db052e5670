"""Per-generation CSV summary and an SVG plot of the best fitness."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .run import EvolutionHistory

COLUMNS = ("generation", "best_fitness", "mean_fitness", "velocity_sum", "energy_sum")


def report_rows(history: EvolutionHistory) -> list[dict]:
    rows = []
    for rec in history.records:
        best = rec["best"]
        rows.append({"generation": rec["generation"], "best_fitness": best["fitness"],
                     "mean_fitness": rec["mean_fitness"], "velocity_sum": best["velocity_term_sum"],
                     "energy_sum": best["energy_term_sum"]})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if k != "generation" else int(v)) for k, v in row.items()})
    return buf.getvalue()


def fitness_svg(rows: list[dict], width: int = 640, height: int = 400, title: str = "Best fitness per generation") -> str:
    pad_l, pad_r, pad_t, pad_b = 70, 20, 40, 50
    gens = [r["generation"] for r in rows]
    best = [r["best_fitness"] for r in rows]
    mean = [r["mean_fitness"] for r in rows]
    lo, hi = min(best + mean), max(best + mean)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    g0, g1 = min(gens), max(gens)
    span = max(g1 - g0, 1)
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(g, f):
        return pad_l + pw * (g - g0) / span, pad_t + ph * (1 - (f - lo) / (hi - lo))

    def polyline(values, colour, dash=""):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(g, f) for g, f in zip(gens, values)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline fill="none" stroke="{colour}" stroke-width="2"{extra} points="{pts}"/>'

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
           f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
           f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>']
    for k in range(5):
        f = lo + (hi - lo) * k / 4
        _, y = xy(g0, f)
        out.append(f'<text x="{pad_l - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{f:.3g}</text>')
    step = max(1, span // 10)
    for g in range(g0, g1 + 1, step):
        x, _ = xy(g, lo)
        out.append(f'<text x="{x:.2f}" y="{pad_t + ph + 16}" text-anchor="middle" font-size="11">{g}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">generation</text>')
    out.append(polyline(mean, "#888888", "4 3"))
    out.append(polyline(best, "#c0392b"))
    for g, f in zip(gens, best):
        x, y = xy(g, f)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="#c0392b"/>')
    out.append(f'<text x="{pad_l + 8}" y="{pad_t + 12}" font-size="11" fill="#c0392b">best</text>')
    out.append(f'<text x="{pad_l + 48}" y="{pad_t + 12}" font-size="11" fill="#888888">mean</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(run_dir, out_dir=None) -> tuple[Path, Path]:
    run_dir = Path(run_dir)
    history = EvolutionHistory.load(run_dir)
    if not history.records:
        raise FileNotFoundError(f"no generation records under {run_dir}")
    out_dir = Path(out_dir or run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = report_rows(history)
    csv_path, svg_path = out_dir / "report.csv", out_dir / "report.svg"
    csv_path.write_text(rows_to_csv(rows))
    svg_path.write_text(fitness_svg(rows))
    return csv_path, svg_path
