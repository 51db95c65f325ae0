#!/usr/bin/env python3
"""Convert geom-gcn style WebKB files to the canonical dataset directory.

Input directory (as distributed with geom-gcn):
    out1_node_feature_label.txt   header, then "id<TAB>f1,f2,...<TAB>label"
    out1_graph_edges.txt          header, then "src<TAB>dst"

Output directory:
    meta.json, edges.tsv, features.csv, labels.txt

`--toy N` writes a synthetic heterophilic graph instead (no input needed).
"""

import argparse
import json
import random
import sys
from pathlib import Path


def read_geom_gcn(src: Path):
    feats, labels = {}, {}
    with open(src / "out1_node_feature_label.txt") as f:
        next(f)
        for line in f:
            if not line.strip():
                continue
            node, fs, label = line.rstrip("\n").split("\t")
            feats[int(node)] = [float(v) for v in fs.split(",")]
            labels[int(node)] = int(label)
    edges = []
    with open(src / "out1_graph_edges.txt") as f:
        next(f)
        for line in f:
            if line.strip():
                a, b = line.split()
                edges.append((int(a), int(b)))
    n = len(feats)
    if sorted(feats) != list(range(n)):
        sys.exit("node ids are not 0..N-1")
    return [feats[i] for i in range(n)], [labels[i] for i in range(n)], edges


def toy(n: int, n_features: int, n_classes: int, seed: int):
    rng = random.Random(seed)
    labels = [i % n_classes for i in range(n)]
    feats = []
    for y in labels:
        row = [1.0 if rng.random() < 0.05 else 0.0 for _ in range(n_features)]
        for k in range(y * 4, y * 4 + 4):
            row[k % n_features] = 1.0 if rng.random() < 0.7 else 0.0
        feats.append(row)
    edges = set()
    while len(edges) < 2 * n:
        a, b = rng.randrange(n), rng.randrange(n)
        # Mostly cross-class links.
        if a != b and (labels[a] != labels[b] or rng.random() < 0.2):
            edges.add((min(a, b), max(a, b)))
    return feats, labels, sorted(edges)


def write(dst: Path, name: str, feats, labels, edges):
    dst.mkdir(parents=True, exist_ok=True)
    meta = {"name": name, "n_nodes": len(feats), "n_features": len(feats[0]), "n_classes": max(labels) + 1}
    (dst / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (dst / "edges.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in edges))
    (dst / "features.csv").write_text("".join(",".join(f"{v:g}" for v in row) + "\n" for row in feats))
    (dst / "labels.txt").write_text("".join(f"{y}\n" for y in labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("output", type=Path)
    ap.add_argument("--input", type=Path, help="geom-gcn dataset directory")
    ap.add_argument("--name", help="dataset name (default: output directory name)")
    ap.add_argument("--toy", type=int, metavar="N", help="write an N-node synthetic graph")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    name = args.name or args.output.name
    if args.toy:
        write(args.output, name, *toy(args.toy, 32, 4, args.seed))
    elif args.input:
        write(args.output, name, *read_geom_gcn(args.input))
    else:
        ap.error("give --input or --toy")


if __name__ == "__main__":
    main()
