#!/usr/bin/env python3
"""Triangulate the region between the unit circle and a small offset circle.

Writes the plain-text mesh format read by penaltyflow: boundary flag 1 on the
outer circle, 2 on the inner one. Points are placed on rings graded away from
the inner circle, then on a hexagonal lattice, and joined by Delaunay.
"""

import argparse
import math
import sys

import numpy as np
from scipy.spatial import Delaunay


def circle(cx, cy, r, n, phase=0.0):
    a = phase + 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])


def build(n_outer, n_inner, r_inner, center, grading):
    h = 2.0 * math.pi / n_outer
    cx, cy = center
    outer = circle(0.0, 0.0, 1.0, n_outer)
    inner = circle(cx, cy, r_inner, n_inner)

    pts = [outer, inner]
    # Rings around the hole with spacing growing geometrically up to h.
    s = 2.0 * math.pi * r_inner / n_inner
    r = r_inner
    ring = 0
    while s < h:
        r += s
        s = min(h, s * grading)
        ring += 1
        n = max(6, math.ceil(2.0 * math.pi * r / s))
        p = circle(cx, cy, r, n, phase=0.5 * ring * 2.0 * math.pi / n)
        keep = np.hypot(p[:, 0], p[:, 1]) < 1.0 - 0.7 * h
        pts.append(p[keep])
    graded_radius = r

    # Hexagonal lattice for the bulk.
    dy = h * math.sqrt(3.0) / 2.0
    ys = np.arange(-1.0, 1.0 + dy, dy)
    lattice = []
    for j, y in enumerate(ys):
        xs = np.arange(-1.0, 1.0 + h, h) + (0.5 * h if j % 2 else 0.0)
        lattice.append(np.column_stack([xs, np.full_like(xs, y)]))
    lattice = np.vstack(lattice)
    d_out = 1.0 - np.hypot(lattice[:, 0], lattice[:, 1])
    d_in = np.hypot(lattice[:, 0] - cx, lattice[:, 1] - cy) - graded_radius
    pts.append(lattice[(d_out > 0.7 * h) & (d_in > 0.7 * h)])

    nodes = np.vstack(pts)
    flags = np.zeros(len(nodes), dtype=int)
    flags[:n_outer] = 1
    flags[n_outer:n_outer + n_inner] = 2

    tri = Delaunay(nodes).simplices
    cen = nodes[tri].mean(axis=1)
    tri = tri[np.hypot(cen[:, 0] - cx, cen[:, 1] - cy) > r_inner]

    # Counterclockwise orientation.
    a = nodes[tri[:, 0]]
    b = nodes[tri[:, 1]]
    c = nodes[tri[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))
    cw = area < 0
    tri[cw] = tri[cw][:, [0, 2, 1]]
    area = np.abs(area)
    if area.min() <= 1e-12:
        sys.exit("degenerate triangle produced; adjust the resolution")

    # Both polygons must appear as boundary edges, and nothing else may.
    edges = {}
    for t in tri:
        for i in range(3):
            e = tuple(sorted((int(t[i]), int(t[(i + 1) % 3]))))
            edges[e] = edges.get(e, 0) + 1
    boundary = {e for e, n in edges.items() if n == 1}
    expected = {tuple(sorted((i, (i + 1) % n_outer))) for i in range(n_outer)}
    expected |= {tuple(sorted((n_outer + i, n_outer + (i + 1) % n_inner))) for i in range(n_inner)}
    if boundary != expected:
        sys.exit("triangulation does not conform to the circles; adjust the resolution")

    # Drop nodes no triangle uses.
    used = np.unique(tri)
    remap = -np.ones(len(nodes), dtype=int)
    remap[used] = np.arange(len(used))
    return nodes[used], flags[used], remap[tri], float(area.sum())


def write(path, nodes, flags, tris):
    with open(path, "w") as f:
        f.write(f"# offset circles: outer r=1 (flag 1), inner r=0.1 at (0.5,0) (flag 2)\n")
        f.write(f"{len(nodes)} {len(tris)}\n")
        for (x, y), fl in zip(nodes, flags):
            f.write(f"{x:.17g} {y:.17g} {fl}\n")
        for t in tris:
            f.write(f"{t[0]} {t[1]} {t[2]}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output")
    ap.add_argument("--outer", type=int, default=200, help="points on the outer circle")
    ap.add_argument("--inner", type=int, default=40, help="points on the inner circle")
    ap.add_argument("--grading", type=float, default=1.25, help="ring spacing growth factor")
    args = ap.parse_args()
    nodes, flags, tris, area = build(args.outer, args.inner, 0.1, (0.5, 0.0), args.grading)
    write(args.output, nodes, flags, tris)
    exact = math.pi * (1.0 - 0.01)
    print(f"{args.output}: {len(nodes)} nodes, {len(tris)} triangles, area {area:.6f} "
          f"({100.0 * (area - exact) / exact:+.3f}% vs {exact:.6f})")


if __name__ == "__main__":
    main()
