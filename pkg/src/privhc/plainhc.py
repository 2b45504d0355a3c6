"""Plaintext agglomerative hierarchical clustering and the trusted-party
reference functionality used as the ground-truth oracle for the secure
protocol.

Conventions shared with the secure protocol:
  * a merge of slots (i, j) with i < j survives at slot i; slot j is dead
    afterwards and never reused;
  * the pair merged each round is the one with minimum linkage, ties broken
    by the lexicographically smallest (i, j) over live slot indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .rng import CtrRng, apply_perm

# Sentinel larger than any squared distance we ever handle in the
# object-dtype fallback path.
_HUGE = 1 << 200


class LinkageKind(Enum):
    SINGLE = "single"
    COMPLETE = "complete"


@dataclass(frozen=True)
class MergeStep:
    """One clustering round: slots (left, right) merged into slot `new`."""

    round: int
    left: int
    right: int
    new: int


@dataclass(frozen=True)
class ClusterMetadata:
    rep_sum: tuple[int, ...]
    size: int

    @property
    def centroid(self):
        """Exact rational centroid as (rep_sum, size); consumer divides."""
        return self.rep_sum, self.size


@dataclass(frozen=True)
class Dendrogram:
    leaf_count: int
    merges: tuple[MergeStep, ...]
    target_clusters: tuple[frozenset[int], ...]

    def validate(self) -> None:
        seen_right = set()
        last_round = -1
        for step in self.merges:
            if step.round <= last_round:
                raise ValueError("merge rounds must be strictly increasing")
            last_round = step.round
            if step.right in seen_right or step.left in seen_right:
                raise ValueError("merged a dead slot")
            seen_right.add(step.right)
        covered = set()
        for members in self.target_clusters:
            if covered & members:
                raise ValueError("target clusters overlap")
            covered |= members
        if covered != set(range(self.leaf_count)):
            raise ValueError("target clusters do not cover all inputs")


@dataclass(frozen=True)
class SelectionStrategy:
    """Metadata redaction rule: target roots, or s-merging threshold."""

    kind: str  # "target" | "smerging"
    s: int = 0

    @staticmethod
    def target() -> "SelectionStrategy":
        return SelectionStrategy("target")

    @staticmethod
    def smerging(s: int) -> "SelectionStrategy":
        if s < 1:
            raise ValueError("s must be >= 1")
        return SelectionStrategy("smerging", s)


@dataclass
class HcResult:
    dendrogram: Dendrogram
    target_metadata: tuple[ClusterMetadata, ...]
    # metadata of the cluster created at each merge, parallel to merges
    merge_metadata: tuple[ClusterMetadata, ...]
    # (left size, right size) of the children of each merge
    merge_child_sizes: tuple[tuple[int, int], ...]


def sq_dist(a: Sequence[int], b: Sequence[int]) -> int:
    """Squared Euclidean distance over integer coordinates."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return sum((int(x) - int(y)) ** 2 for x, y in zip(a, b))


def linkage(
    xs: Iterable[Sequence[int]], ys: Iterable[Sequence[int]], kind: LinkageKind
) -> int:
    """Cluster linkage: min (single) or max (complete) cross-pair distance."""
    xs, ys = list(xs), list(ys)
    if not xs or not ys:
        raise ValueError("linkage of an empty cluster")
    pick = min if kind is LinkageKind.SINGLE else max
    return pick(sq_dist(x, y) for x in xs for y in ys)


def _as_int_matrix(points) -> np.ndarray:
    arr = np.asarray(points, dtype=object)
    if arr.ndim != 2:
        raise ValueError("points must be a sequence of equal-length vectors")
    return arr


def pairwise_sq_dists(points) -> np.ndarray:
    """Full n x n squared-distance matrix, exact.

    Uses int64 when the value range provably fits, otherwise Python ints in
    an object array.
    """
    pts = _as_int_matrix(points)
    n, d = pts.shape
    coord_max = max((abs(int(v)) for row in pts for v in row), default=0)
    if d * (2 * coord_max) ** 2 < 2**62:
        a = pts.astype(np.int64)
        diff = a[:, None, :] - a[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 0
        for j in range(i + 1, n):
            v = sq_dist(pts[i], pts[j])
            out[i, j] = v
            out[j, i] = v
    return out


def _group_linkage_matrix(dists: np.ndarray, groups: Sequence[Sequence[int]],
                          kind: LinkageKind) -> np.ndarray:
    m = len(groups)
    out = np.empty((m, m), dtype=dists.dtype if dists.dtype != np.int64 else np.int64)
    reduce_ = np.min if kind is LinkageKind.SINGLE else np.max
    idx = [np.asarray(g, dtype=np.intp) for g in groups]
    for i in range(m):
        out[i, i] = 0
        for j in range(i + 1, m):
            block = dists[np.ix_(idx[i], idx[j])]
            v = reduce_(block)
            out[i, j] = v
            out[j, i] = v
    return out


def _run_merge_rounds(dist: np.ndarray, kind: LinkageKind, rounds: int,
                      stop: Optional[Callable[[int, int], bool]] = None):
    """Shared merge loop over a linkage matrix.

    Each round picks the live pair with minimum linkage (row-major first
    occurrence = lexicographic tie-break) and folds slot j into slot i with
    the single/complete update rule.  Returns the merge list.
    """
    m = dist.shape[0]
    if dist.dtype == np.int64:
        sentinel = np.iinfo(np.int64).max
        work = dist.copy()
    else:
        sentinel = _HUGE
        work = dist.astype(object, copy=True)
    np.fill_diagonal(work, sentinel)
    alive = np.ones(m, dtype=bool)
    merges: list[MergeStep] = []
    combine = np.minimum if kind is LinkageKind.SINGLE else np.maximum
    for rnd in range(rounds):
        flat = int(np.argmin(work))
        i, j = divmod(flat, m)
        if work[i, j] >= sentinel:
            raise RuntimeError("no live pair left to merge")
        if i > j:  # argmin is row-major; symmetric matrix guarantees i < j first
            i, j = j, i
        linkval = int(work[i, j])
        if stop is not None and stop(int(alive.sum()), linkval):
            break
        updated = combine(work[i, :], work[j, :])
        work[i, :] = updated
        work[:, i] = updated
        work[i, i] = sentinel
        work[j, :] = sentinel
        work[:, j] = sentinel
        alive[j] = False
        merges.append(MergeStep(round=rnd, left=i, right=j, new=i))
    return merges


def _collect(points, groups, merges) -> HcResult:
    pts = [tuple(int(v) for v in row) for row in points]
    d = len(pts[0]) if pts else 0
    members: dict[int, set[int]] = {
        s: set(g) for s, g in enumerate(groups)
    }
    sums: dict[int, list[int]] = {}
    for s, g in members.items():
        acc = [0] * d
        for p in g:
            for c in range(d):
                acc[c] += pts[p][c]
        sums[s] = acc
    merge_meta = []
    child_sizes = []
    for step in merges:
        child_sizes.append((len(members[step.left]), len(members[step.right])))
        members[step.left] |= members.pop(step.right)
        sl = sums[step.left]
        sr = sums.pop(step.right)
        sums[step.left] = [a + b for a, b in zip(sl, sr)]
        merge_meta.append(
            ClusterMetadata(tuple(sums[step.left]), len(members[step.left]))
        )
    target_slots = sorted(members)
    dend = Dendrogram(
        leaf_count=sum(len(g) for g in groups),
        merges=tuple(merges),
        target_clusters=tuple(frozenset(members[s]) for s in target_slots),
    )
    target_meta = tuple(
        ClusterMetadata(tuple(sums[s]), len(members[s])) for s in target_slots
    )
    return HcResult(dend, target_meta, tuple(merge_meta), tuple(child_sizes))


def hc_run(
    points,
    kind: LinkageKind,
    target: int,
    stop: Optional[Callable[[int, int], bool]] = None,
) -> HcResult:
    """Deterministic agglomerative clustering down to `target` clusters.

    `stop(level, last_linkage)`, when given, is an additional termination
    predicate checked before each merge; count-based termination is the
    supported configuration.
    """
    pts = _as_int_matrix(points)
    n = pts.shape[0]
    if not 1 <= target <= n:
        raise ValueError(f"target cluster count {target} out of range [1, {n}]")
    dist = pairwise_sq_dists(pts)
    merges = _run_merge_rounds(dist, kind, n - target, stop)
    return _collect(pts, [[i] for i in range(n)], merges)


def hc_run_grouped(
    points,
    groups: Sequence[Sequence[int]],
    kind: LinkageKind,
    target: int,
) -> HcResult:
    """Clustering that starts from pre-formed clusters (point index groups).

    Group-to-group distance is the single/complete linkage over member
    points, so the result equals running the merge process on the original
    points from an intermediate level.  Merge slots refer to group indices;
    target clusters are reported as point index sets.
    """
    m = len(groups)
    if not 1 <= target <= m:
        raise ValueError(f"target cluster count {target} out of range [1, {m}]")
    if any(len(g) == 0 for g in groups):
        raise ValueError("empty input group")
    pts = _as_int_matrix(points)
    dist = pairwise_sq_dists(pts)
    link = _group_linkage_matrix(dist, groups, kind)
    merges = _run_merge_rounds(link, kind, m - target)
    return _collect(pts, [list(g) for g in groups], merges)


def ideal_fhc(
    p_points,
    q_points,
    kind: LinkageKind,
    target: int,
    select: SelectionStrategy,
    perm_seed: int | bytes | None = None,
    permutation: Optional[Sequence[int]] = None,
):
    """Trusted-party functionality: concatenate, shuffle, cluster, redact.

    Returns (dendrogram over permuted positions, redacted metadata list,
    permutation used).  Metadata entries are (descriptor, ClusterMetadata)
    where the descriptor names either a target slot or a merge round.
    """
    combined = [tuple(int(v) for v in row) for row in p_points] + [
        tuple(int(v) for v in row) for row in q_points
    ]
    n = len(combined)
    if n < target:
        raise ValueError("fewer points than target clusters")
    if permutation is not None:
        perm = list(permutation)
        if sorted(perm) != list(range(n)):
            raise ValueError("not a permutation")
    else:
        perm = CtrRng(perm_seed, domain=b"ideal-perm").permutation(n)
    shuffled = apply_perm(combined, perm)
    res = hc_run(shuffled, kind, target)
    redacted: list[tuple[tuple, ClusterMetadata]] = []
    if select.kind == "target":
        live = sorted(
            set(range(n)) - {s.right for s in res.dendrogram.merges}
        )
        for slot, meta in zip(live, res.target_metadata):
            redacted.append((("target", slot), meta))
    elif select.kind == "smerging":
        for step, meta, (ls, rs) in zip(
            res.dendrogram.merges, res.merge_metadata, res.merge_child_sizes
        ):
            if ls > select.s and rs > select.s:
                redacted.append((("merge", step.round), meta))
    else:
        raise ValueError(f"unknown selection strategy {select.kind!r}")
    return res.dendrogram, redacted, perm


def accuracy(clusters: Sequence[Iterable[int]], labels: Sequence[int],
             exclude: Optional[Sequence[bool]] = None) -> float:
    """Majority-class accuracy of a clustering against ground-truth labels.

    Each cluster votes its majority label (ties to the smallest label id);
    the score is the fraction of points matching their cluster's majority.
    `exclude` optionally masks points (e.g. injected outliers) out of both
    the vote and the score.
    """
    if not clusters:
        raise ValueError("empty clustering")
    labels = list(labels)
    correct = 0
    total = 0
    for members in clusters:
        counts: dict[int, int] = {}
        kept = []
        for m in members:
            if labels[m] is None:
                raise ValueError(f"point {m} has no label")
            if exclude is not None and exclude[m]:
                continue
            kept.append(m)
            counts[labels[m]] = counts.get(labels[m], 0) + 1
        if not kept:
            continue
        majority = min(
            counts, key=lambda lab: (-counts[lab], lab)
        )
        correct += counts[majority]
        total += len(kept)
    if total == 0:
        raise ValueError("no labelled points to score")
    return correct / total


def lam_bits(domain_bits: int, dim: int) -> int:
    """Bit width that provably bounds any squared distance."""
    return 2 * domain_bits + math.ceil(math.log2(dim)) if dim > 1 else 2 * domain_bits
