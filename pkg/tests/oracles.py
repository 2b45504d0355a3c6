"""Independent brute-force oracles.

These are deliberately naive and share no code with the library: clustering
re-scans every cross-pair each round, the circuit oracle evaluates word-level
arithmetic directly on integers, and the accuracy tally recounts from
scratch.
"""
from __future__ import annotations


def brute_sq_dist(a, b):
    assert len(a) == len(b)
    return sum((int(x) - int(y)) ** 2 for x, y in zip(a, b))


def brute_linkage(xs, ys, single: bool):
    vals = [brute_sq_dist(x, y) for x in xs for y in ys]
    return min(vals) if single else max(vals)


def brute_hc(points, single: bool, target: int):
    """O(n^3) agglomerative clustering by full re-scan.

    Clusters live in slots; a merge keeps the smaller slot index.  Returns
    (merge list [(round, i, j)], final clusters {slot: set of point idx}).
    """
    points = [tuple(p) for p in points]
    clusters = {i: {i} for i in range(len(points))}
    merges = []
    rnd = 0
    while len(clusters) > target:
        best = None
        for i in sorted(clusters):
            for j in sorted(clusters):
                if i >= j:
                    continue
                d = brute_linkage(
                    [points[a] for a in clusters[i]],
                    [points[b] for b in clusters[j]],
                    single,
                )
                if best is None or d < best[0] or (d == best[0] and (i, j) < best[1:]):
                    best = (d, i, j)
        _, i, j = best
        clusters[i] |= clusters.pop(j)
        merges.append((rnd, i, j))
        rnd += 1
    return merges, clusters


def brute_accuracy(clusters, labels):
    """Recount majority-label accuracy from scratch."""
    correct = 0
    n = 0
    for members in clusters:
        members = list(members)
        tally = {}
        for m in members:
            tally[labels[m]] = tally.get(labels[m], 0) + 1
        best = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        correct += sum(1 for m in members if labels[m] == best)
        n += len(members)
    return correct / n


def brute_argmin(values):
    """1-based index of the first minimum."""
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best + 1
