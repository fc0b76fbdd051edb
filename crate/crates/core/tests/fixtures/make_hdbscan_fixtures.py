"""Regenerates the HDBSCAN reference partitions with scikit-learn.

Points are rounded to float32 first so both sides cluster identical inputs.
sklearn counts a point as its own neighbour, so `min_samples` here is the
toolkit's value plus one.

    python3 make_hdbscan_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
import sklearn
from sklearn.cluster import HDBSCAN

HERE = Path(__file__).parent


def cosine_distance(x):
    x = x.astype(np.float64)
    unit = x / np.linalg.norm(x, axis=1, keepdims=True)
    d = 1.0 - np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def blobs(rng, sizes, dim, spread):
    pts = []
    for c, n in enumerate(sizes):
        centre = np.zeros(dim)
        centre[c] = 1.0
        pts.append(centre + rng.normal(0.0, spread, size=(n, dim)))
    return np.vstack(pts).astype(np.float32)


def write(name, points, min_cluster_size, min_samples):
    model = HDBSCAN(
        min_cluster_size=min_cluster_size,
        min_samples=min_samples + 1,
        metric="precomputed",
        cluster_selection_method="eom",
        allow_single_cluster=True,
    ).fit(cosine_distance(points))
    width = len(str(len(points)))
    fixture = {
        "generator": f"scikit-learn {sklearn.__version__}",
        "min_cluster_size": min_cluster_size,
        "min_samples": min_samples,
        "dim": points.shape[1],
        "ids": [f"p{i:0{width}d}" for i in range(len(points))],
        "points": [[float(v) for v in row] for row in points],
        "labels": [int(l) for l in model.labels_],
        "probabilities": [float(p) for p in model.probabilities_],
    }
    (HERE / f"{name}.json").write_text(json.dumps(fixture) + "\n")
    n_clusters = len(set(model.labels_) - {-1})
    print(f"{name}: {n_clusters} clusters, {int((model.labels_ == -1).sum())} noise")


def main():
    rng = np.random.default_rng(20240611)
    write("hdbscan_three_blobs", blobs(rng, [100, 100, 100], 8, 0.15), 15, 5)
    write("hdbscan_two_blobs", blobs(rng, [50, 50], 6, 0.1), 10, 5)
    one = blobs(rng, [50], 6, 0.1)
    outlier = np.zeros((1, 6), dtype=np.float32)
    outlier[0, 5] = 1.0
    write("hdbscan_outlier", np.vstack([one, outlier]), 10, 5)


if __name__ == "__main__":
    main()
