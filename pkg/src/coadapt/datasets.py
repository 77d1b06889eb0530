"""Dataset generation: train/val/test splits and snapshot streams on disk.

Layout: ``<out>/train/000.el ...``, ``<out>/val/...``, ``<out>/test/...``
plus ``manifest.json`` recording the generator, its parameters, and every
per-file seed. Snapshot datasets are a flat directory ``000.el, 001.el, ...``
plus the manifest. All parameters are validated and all graphs generated in
memory before anything is written.
"""

from __future__ import annotations

import json
from pathlib import Path

from .graphs import Graph, RbParams, generate_dynamic, generate_er, generate_rb, save_graph, save_stream
from .rngs import derive_rng, derive_seed

SPLITS = ("train", "val", "test")


def generate_static_dataset(
    out_dir: str | Path,
    generator: str,
    counts: dict[str, int],
    master_seed: int = 0,
    k: int = 6,
    a: float = 1.26,
    p_train_range: tuple[float, float] = (0.3, 1.0),
    p_test: float = 0.25,
    n: int = 30,
    edge_prob: float = 0.3,
) -> dict:
    """Write a split dataset; returns the manifest.

    Clique-bundle instances sample p uniformly from ``p_train_range`` for
    the train and val splits and pin ``p_test`` for the test split (harder
    instances). ER instances use a fixed edge probability everywhere.
    """
    if generator not in ("rb", "er"):
        raise ValueError(f"generator must be 'rb' or 'er', got {generator!r}")
    for split, cnt in counts.items():
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        if cnt < 0:
            raise ValueError("split counts must be >= 0")
    if generator == "rb":
        lo, hi = p_train_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"p_train_range must satisfy 0 < lo <= hi <= 1, got {p_train_range}")
        RbParams(k=k, a=a, p=p_test)  # validates k, a, p_test before any write
    elif not (1 <= n and 0 <= edge_prob <= 1):
        raise ValueError(f"invalid ER parameters n={n}, edge_prob={edge_prob}")
    files: list[tuple[str, Graph, dict]] = []
    for split in SPLITS:
        for i in range(counts.get(split, 0)):
            seed = derive_seed(master_seed, "dataset", split, i)
            if generator == "rb":
                if split == "test":
                    p = p_test
                else:
                    lo, hi = p_train_range
                    p = float(derive_rng(master_seed, "dataset-p", split, i).uniform(lo, hi))
                params = RbParams(k=k, a=a, p=p, rng_seed=seed)
                g = generate_rb(params)
                meta = {"split": split, "index": i, "seed": seed, "p": p}
            else:
                g = generate_er(n, edge_prob, seed)
                meta = {"split": split, "index": i, "seed": seed}
            files.append((f"{split}/{i:03d}.el", g, meta))
    out = Path(out_dir)
    manifest = {
        "generator": generator,
        "master_seed": master_seed,
        "counts": {s: counts.get(s, 0) for s in SPLITS},
        "params": (
            {"k": k, "a": a, "p_train_range": list(p_train_range), "p_test": p_test}
            if generator == "rb"
            else {"n": n, "edge_prob": edge_prob}
        ),
        "files": {rel: meta for rel, _g, meta in files},
    }
    for rel, g, _meta in files:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        save_graph(g, path)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def generate_snapshot_dataset(
    out_dir: str | Path,
    snapshots: int,
    flip_rate: float,
    master_seed: int = 0,
    n: int = 30,
    edge_prob: float = 0.3,
) -> dict:
    """Write a snapshot-stream dataset from an ER base graph."""
    base = generate_er(n, edge_prob, derive_seed(master_seed, "dynamic-base"))
    stream = generate_dynamic(base, snapshots, flip_rate, derive_seed(master_seed, "dynamic-flips"))
    out = Path(out_dir)
    save_stream(stream, out)
    manifest = {
        "generator": "er-dynamic",
        "master_seed": master_seed,
        "params": {"n": n, "edge_prob": edge_prob, "snapshots": snapshots, "flip_rate": flip_rate},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
