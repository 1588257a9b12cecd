"""PNG rendering: grayscale B-mode panel with the adjacent-line correlation plot."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .imaging import BeamformedImage, envelope_logcompress
from .metrics import adjacent_correlation_profile

__all__ = ["render_bmode_png", "PROFILE_PANEL_HEIGHT"]

PROFILE_PANEL_HEIGHT = 64


def render_bmode_png(
    img: BeamformedImage,
    out_path: str | Path,
    dynamic_range_db: float = 60.0,
    panel_height: int = PROFILE_PANEL_HEIGHT,
) -> None:
    """Write a (depth + panel) x lines PNG: B-mode on top, correlation below.

    The B-mode panel maps [-dynamic_range_db, 0] dB to [0, 255] gray; the
    lower panel draws the adjacent-line correlation profile as a polyline
    over a rho axis from 0 (bottom) to 1 (top).
    """
    db = envelope_logcompress(img, dynamic_range_db)
    gray = np.round((db + dynamic_range_db) / dynamic_range_db * 255.0)
    bmode = gray.astype(np.uint8)

    depth, lines = bmode.shape
    canvas = Image.new("L", (lines, depth + panel_height), color=32)
    canvas.paste(Image.fromarray(bmode, mode="L"), (0, 0))

    rho = adjacent_correlation_profile(img).rho
    draw = ImageDraw.Draw(canvas)
    if len(rho) >= 1 and lines >= 2:
        xs = np.linspace(0, lines - 1, len(rho))
        ys = depth + (panel_height - 1) * (1.0 - np.clip(rho, 0.0, 1.0))
        points = list(zip(xs.tolist(), ys.tolist()))
        if len(points) == 1:
            points = points * 2
        draw.line(points, fill=255, width=1)
    canvas.save(Path(out_path), format="PNG")
