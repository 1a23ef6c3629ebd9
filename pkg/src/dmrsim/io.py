"""Deterministic file emission: CSV tables, a small binary path format,
JSON reports, and plain SVG figures.

All writers are byte-stable: floats are rendered with 17 significant digits,
JSON keys are sorted, and nothing embeds timestamps, so re-running a command
with the same config overwrites files with identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

#: binary path-table format: 32-byte header, then row-major float64 data
BINARY_MAGIC = b"DMRPATHS"
BINARY_VERSION = 1
_HEADER = struct.Struct("<8sIIQ8x")  # magic, version, n_cols, n_steps, pad to 32


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def write_path_table(path: str | Path, times: np.ndarray,
                     named_paths: dict[str, np.ndarray]) -> None:
    """Single-path table: header `t,<names...>`."""
    write_csv(path, ["t"] + list(named_paths), [times] + list(named_paths.values()))


def write_multi_path_table(path: str | Path, times: np.ndarray,
                           named_blocks: dict[str, np.ndarray]) -> None:
    """Stacked paths with a leading `path` column; blocks are (n_paths, n+1)."""
    n_paths = next(iter(named_blocks.values())).shape[0]
    header = ["path", "t"] + list(named_blocks)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for p in range(n_paths):
            for i in range(len(times)):
                vals = [str(p), _fmt(times[i])] + [_fmt(b[p, i]) for b in named_blocks.values()]
                fh.write(",".join(vals) + "\n")


def write_binary_table(path: str | Path, table: np.ndarray) -> None:
    """Flat little-endian float64 dump of a (n_steps + 1, n_cols) table.

    Header layout (32 bytes): magic ``DMRPATHS`` (8 bytes), version uint32,
    n_cols uint32, n_steps uint64, 8 zero bytes of padding; all little-endian.
    """
    table = np.ascontiguousarray(table, dtype="<f8")
    n_rows, n_cols = table.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, n_cols, n_rows - 1))
        fh.write(table.tobytes())


def read_binary_table(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, n_cols, n_steps = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != BINARY_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != BINARY_VERSION:
            raise ValueError(f"unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(n_steps + 1, n_cols)


def write_json(path: str | Path, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# minimal SVG output (curves and histograms, no interactivity)
# ---------------------------------------------------------------------------

_SVG_SIZE = (640, 400)
_MARGIN = 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(vals, dtype=float) - lo) / span * (out_hi - out_lo)


def write_svg_curves(path: str | Path, x: np.ndarray,
                     curves: dict[str, np.ndarray], title: str = "") -> None:
    """Plain SVG polyline chart of one or more curves over a shared x-axis."""
    w, h = _SVG_SIZE
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in curves.values()]
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo = min(float(v.min()) for v in ys)
    y_hi = max(float(v.max()) for v in ys)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    px = _scale(x, x_lo, x_hi, _MARGIN, w - _MARGIN)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{h - _MARGIN}" x2="{w - _MARGIN}" y2="{h - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{h - _MARGIN}" stroke="black"/>',
    ]
    if title:
        lines.append(f'<text x="{w // 2}" y="20" text-anchor="middle" '
                     f'font-family="monospace" font-size="14">{title}</text>')
    for i, (name, v) in enumerate(curves.items()):
        py = _scale(v, y_lo, y_hi, h - _MARGIN, _MARGIN)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        color = _COLORS[i % len(_COLORS)]
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        lines.append(f'<text x="{w - _MARGIN}" y="{_MARGIN + 16 * i}" text-anchor="end" '
                     f'font-family="monospace" font-size="12" fill="{color}">{name}</text>')
    lines.append(
        f'<text x="{_MARGIN}" y="{h - _MARGIN + 20}" font-family="monospace" font-size="10">'
        f'{x_lo:.4g}</text>'
        f'<text x="{w - _MARGIN}" y="{h - _MARGIN + 20}" text-anchor="end" '
        f'font-family="monospace" font-size="10">{x_hi:.4g}</text>'
        f'<text x="{_MARGIN - 4}" y="{h - _MARGIN}" text-anchor="end" '
        f'font-family="monospace" font-size="10">{y_lo:.4g}</text>'
        f'<text x="{_MARGIN - 4}" y="{_MARGIN}" text-anchor="end" '
        f'font-family="monospace" font-size="10">{y_hi:.4g}</text>'
    )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def write_svg_histogram(path: str | Path, edges: np.ndarray, density: np.ndarray,
                        overlay_x: np.ndarray | None = None,
                        overlay_y: np.ndarray | None = None,
                        title: str = "") -> None:
    """Histogram bars as SVG rects, with an optional overlaid curve."""
    w, h = _SVG_SIZE
    edges = np.asarray(edges, dtype=float)
    density = np.asarray(density, dtype=float)
    x_lo, x_hi = float(edges[0]), float(edges[-1])
    y_hi = float(density.max())
    if overlay_y is not None:
        y_hi = max(y_hi, float(np.max(overlay_y)))
    if y_hi <= 0:
        y_hi = 1.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    if title:
        lines.append(f'<text x="{w // 2}" y="20" text-anchor="middle" '
                     f'font-family="monospace" font-size="14">{title}</text>')
    for i in range(len(density)):
        x0 = float(_scale([edges[i]], x_lo, x_hi, _MARGIN, w - _MARGIN)[0])
        x1 = float(_scale([edges[i + 1]], x_lo, x_hi, _MARGIN, w - _MARGIN)[0])
        y = float(_scale([density[i]], 0.0, y_hi, h - _MARGIN, _MARGIN)[0])
        lines.append(f'<rect x="{x0:.2f}" y="{y:.2f}" width="{x1 - x0:.2f}" '
                     f'height="{h - _MARGIN - y:.2f}" fill="#aec7e8" stroke="none"/>')
    if overlay_x is not None and overlay_y is not None:
        px = _scale(overlay_x, x_lo, x_hi, _MARGIN, w - _MARGIN)
        py = _scale(overlay_y, 0.0, y_hi, h - _MARGIN, _MARGIN)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    lines.append(f'<line x1="{_MARGIN}" y1="{h - _MARGIN}" x2="{w - _MARGIN}" '
                 f'y2="{h - _MARGIN}" stroke="black"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
