#!/usr/bin/env python3
"""Synthetic manifest and video list whose summary statistics match the
published dataset tables.

    python3 tools/fixtures/make_dataset_fixtures.py tests/data

images_manifest.csv: image counts, patient counts and train flags per class.
Patient ids are integers laid out as overlapping ranges so that the brain
union covers 1,082 patients and the whole set 1,792. The "other" class has
143 images, so it can cover at most 143 patients.

videos.csv: 130 videos whose duration/fps min, max, mean and population std
hit the table values (after rounding to two decimals).
"""
import sys
from pathlib import Path

import numpy as np

# label, first patient, patient count, images, train images
CLASSES = [
    ("trans_ventricular", 636, 446, 597, 231),
    ("trans_thalamic", 0, 909, 1638, 873),
    ("trans_cerebellar", 0, 575, 714, 375),
    ("brain_other", 0, 143, 143, 77),
    ("not_a_brain", 61, 1731, 9308, 5509),
]

VIDEO_COUNT = 130
DURATION = dict(lo=4.0, hi=50.0, mean=16.42, std=7.85)
FPS = dict(lo=22.0, hi=55.0, mean=29.67, std=3.63)


def write_manifest(path):
    lines = ["patient_id,image_path,label,split"]
    for label, first, patients, images, train in CLASSES:
        for j in range(images):
            pid = first + j % patients
            split = "train" if j < train else "val"
            lines.append(f"P{pid:04d},images/{label}/{j:05d}.png,{label},{split}")
    path.write_text("\n".join(lines) + "\n")


def moments_column(rng, spec, skewed):
    """Two pinned extremes plus 128 values shifted and scaled so the whole
    column has the requested mean and population std."""
    n, inner = VIDEO_COUNT, VIDEO_COUNT - 2
    total = n * spec["mean"]
    total_sq = n * (spec["std"] ** 2 + spec["mean"] ** 2)
    in_mean = (total - spec["lo"] - spec["hi"]) / inner
    in_var = (total_sq - spec["lo"] ** 2 - spec["hi"] ** 2) / inner - in_mean ** 2
    while True:
        z = rng.gamma(6.0, size=inner) if skewed else rng.normal(size=inner)
        z = (z - z.mean()) / z.std()
        vals = np.round(in_mean + np.sqrt(in_var) * z, 2)
        if vals.min() > spec["lo"] and vals.max() < spec["hi"]:
            return np.concatenate([[spec["lo"], spec["hi"]], vals])


def write_videos(path):
    rng = np.random.default_rng(130)
    dur = moments_column(rng, DURATION, skewed=True)
    fps = moments_column(rng, FPS, skewed=False)
    fps = np.concatenate([[fps[0]], rng.permutation(fps[1:])])
    lines = ["video_id,duration_s,fps,frame_count"]
    for i, (d, f) in enumerate(zip(dur, fps)):
        lines.append(f"video_{i:03d},{d:.2f},{f:.2f},{int(round(d * f))}")
    path.write_text("\n".join(lines) + "\n")
    for name, col in (("duration", dur), ("fps", fps)):
        print(f"{name}: min {col.min():.2f} max {col.max():.2f} mean {col.mean():.4f} std {col.std():.4f}")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "images_manifest.csv")
    write_videos(out / "videos.csv")


if __name__ == "__main__":
    main()
