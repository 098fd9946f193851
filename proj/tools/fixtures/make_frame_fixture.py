#!/usr/bin/env python3
"""Small frame directory for CLI tests: 24 grayscale 8-bit PNGs, 64x64, with
a bright ring that drifts and fades over dark speckle.

    python3 tools/fixtures/make_frame_fixture.py tests/data/frames
"""
import sys
from pathlib import Path

import cv2
import numpy as np


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(11)
    yy, xx = np.mgrid[0:64, 0:64].astype(np.float64)
    for t in range(24):
        cx, cy = 32 + 6 * np.sin(t / 5), 30 + 4 * np.cos(t / 7)
        gain = 0.3 + 0.6 * np.exp(-((t - 12) / 6.0) ** 2)
        r = np.hypot((xx - cx) / 20, (yy - cy) / 14)
        img = gain * np.exp(-10 * (r - 1) ** 2) + 0.08 * rng.random((64, 64))
        cv2.imwrite(str(out / f"frame_{t:03d}.png"), np.clip(img * 255, 0, 255).astype(np.uint8))


if __name__ == "__main__":
    main(Path(sys.argv[1]))
