"""Progressive multiple alignment and per-column conservation scoring.

The pipeline is the classic Clustal shape: all-pairs global alignment
(Needleman-Wunsch with affine gaps) -> p-distance matrix -> UPGMA guide
tree -> profile-profile alignment up the tree. Everything is
deterministic: ties in the DP traceback and in UPGMA merging are broken
by fixed rules so re-alignment is reproducible across runs, platforms,
and worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import PhyloflowError, ValidationError
from .seqio import Alignment, SequenceRecord

NEG_INF = -1e30

# DP states: 0 = substitution, 1 = gap in second row set, 2 = gap in first.
_M, _X, _Y = 0, 1, 2

_SYMBOLS = "ACGTN-"
_SYM_INDEX = {c: i for i, c in enumerate(_SYMBOLS)}
_GAP = _SYM_INDEX["-"]


class LengthMismatch(PhyloflowError):
    code = "length_mismatch"


class LeafMismatch(PhyloflowError):
    code = "leaf_mismatch"


class NotAligned(PhyloflowError):
    code = "not_aligned"


@dataclass(frozen=True)
class ScoringParams:
    """Alignment scores; penalties are non-positive, opening >= extending cost."""

    match: int = 2
    mismatch: int = -1
    gap_open: int = -4
    gap_extend: int = -1

    def __post_init__(self):
        if self.match <= self.mismatch:
            raise ValidationError("match score must exceed mismatch score")
        if not (self.gap_open <= self.gap_extend <= 0):
            raise ValidationError("need gap_open <= gap_extend <= 0")


@dataclass(frozen=True)
class GuideNode:
    """Node of the rooted UPGMA tree; leaves carry labels at height 0."""

    height: float
    label: str | None = None
    children: tuple["GuideNode", ...] = ()

    @property
    def leaves(self) -> tuple[str, ...]:
        if self.label is not None:
            return (self.label,)
        return tuple(l for c in self.children for l in c.leaves)


@dataclass(frozen=True)
class ConservationProfile:
    """Per-column fraction of the modal non-gap residue; 0 for all-gap columns."""

    scores: tuple[float, ...]
    mean: float


class DistanceMatrix:
    """Symmetric p-distance matrix over an ordered taxon list."""

    def __init__(self, labels, values):
        self.labels = tuple(labels)
        self.values = np.asarray(values, dtype=float)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValidationError("distance matrix shape does not match labels")

    def __getitem__(self, pair):
        i, j = pair
        return float(self.values[self.labels.index(i), self.labels.index(j)])


def _column_weight_matrix(s: ScoringParams) -> np.ndarray:
    """Pair-score table over symbol classes; used for profile column scores."""
    w = np.full((6, 6), float(s.mismatch))
    np.fill_diagonal(w, float(s.match))
    w[_GAP, :] = float(s.gap_open)
    w[:, _GAP] = float(s.gap_open)
    w[_GAP, _GAP] = 0.0
    return w


def _column_counts(rows: list[str]) -> np.ndarray:
    length = len(rows[0])
    counts = np.zeros((length, 6))
    for row in rows:
        for pos, ch in enumerate(row):
            counts[pos, _SYM_INDEX[ch]] += 1
    return counts


def _align_profiles(
    rows_a: list[str], rows_b: list[str], s: ScoringParams
) -> tuple[list[str], list[str], float]:
    """Global affine-gap DP between two row groups (Gotoh, 3 states).

    A gap of length L costs gap_open + (L-1) * gap_extend. Substitution
    score of two columns is the mean pair score under the symbol table.
    Traceback ties prefer substitution, then gaps in the second group:
    a fixed order, so the output is deterministic.
    """
    ca = _column_counts(rows_a)
    cb = _column_counts(rows_b)
    la, lb = ca.shape[0], cb.shape[0]
    w = _column_weight_matrix(s)
    sub = (ca @ w @ cb.T) / (len(rows_a) * len(rows_b))

    go, ge = float(s.gap_open), float(s.gap_extend)
    score = np.full((3, la + 1, lb + 1), NEG_INF)
    ptr = np.zeros((3, la + 1, lb + 1), dtype=np.int8)
    score[_M, 0, 0] = 0.0
    for i in range(1, la + 1):
        score[_X, i, 0] = go + (i - 1) * ge
        ptr[_X, i, 0] = _X
    for j in range(1, lb + 1):
        score[_Y, 0, j] = go + (j - 1) * ge
        ptr[_Y, 0, j] = _Y

    for i in range(1, la + 1):
        srow = sub[i - 1]
        for j in range(1, lb + 1):
            prev = (score[_M, i - 1, j - 1], score[_X, i - 1, j - 1],
                    score[_Y, i - 1, j - 1])
            k = int(np.argmax(prev))
            score[_M, i, j] = prev[k] + srow[j - 1]
            ptr[_M, i, j] = k

            opts = (score[_M, i - 1, j] + go, score[_X, i - 1, j] + ge,
                    score[_Y, i - 1, j] + go)
            k = int(np.argmax(opts))
            score[_X, i, j] = opts[k]
            ptr[_X, i, j] = k

            opts = (score[_M, i, j - 1] + go, score[_X, i, j - 1] + go,
                    score[_Y, i, j - 1] + ge)
            k = int(np.argmax(opts))
            score[_Y, i, j] = opts[k]
            ptr[_Y, i, j] = k

    finals = (score[_M, la, lb], score[_X, la, lb], score[_Y, la, lb])
    state = int(np.argmax(finals))
    best = float(finals[state])

    out_a: list[list[str]] = [[] for _ in rows_a]
    out_b: list[list[str]] = [[] for _ in rows_b]
    i, j = la, lb
    while i > 0 or j > 0:
        prev_state = int(ptr[state, i, j])
        if state == _M:
            for r, row in enumerate(rows_a):
                out_a[r].append(row[i - 1])
            for r, row in enumerate(rows_b):
                out_b[r].append(row[j - 1])
            i, j = i - 1, j - 1
        elif state == _X:
            for r, row in enumerate(rows_a):
                out_a[r].append(row[i - 1])
            for r in range(len(rows_b)):
                out_b[r].append("-")
            i -= 1
        else:
            for r in range(len(rows_a)):
                out_a[r].append("-")
            for r, row in enumerate(rows_b):
                out_b[r].append(row[j - 1])
            j -= 1
        state = prev_state

    return (
        ["".join(reversed(c)) for c in out_a],
        ["".join(reversed(c)) for c in out_b],
        best,
    )


def pairwise_align(
    a: SequenceRecord, b: SequenceRecord, s: ScoringParams = ScoringParams()
) -> tuple[tuple[str, str], float]:
    """Optimal global alignment of two sequences; returns aligned pair + score."""
    if not a.residues or not b.residues:
        raise ValidationError("cannot align empty sequences")
    rows_a, rows_b, score = _align_profiles([a.residues], [b.residues], s)
    return (rows_a[0], rows_b[0]), score


def p_distance(a: str, b: str) -> float:
    """Mismatch fraction over comparable sites ('-'/'N' on either side skipped)."""
    if len(a) != len(b):
        raise LengthMismatch(f"aligned lengths differ: {len(a)} vs {len(b)}")
    compared = 0
    diffs = 0
    for x, y in zip(a, b):
        if x in "-N" or y in "-N":
            continue
        compared += 1
        diffs += x != y
    return diffs / compared if compared else 0.0


def _degap(residues: str) -> str:
    return residues.replace("-", "")


def distance_matrix(
    seqs, s: ScoringParams = ScoringParams(), workers: int = 1
) -> DistanceMatrix:
    """All-pairs p-distances over pairwise alignments.

    Entries are independent, so the matrix is identical for any worker
    count or pair ordering.
    """
    seqs = list(seqs)
    if len(seqs) < 2:
        raise ValidationError("need at least 2 sequences")
    bare = [SequenceRecord(r.id, _degap(r.residues)) for r in seqs]
    n = len(bare)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def entry(pair):
        i, j = pair
        (ra, rb), _ = pairwise_align(bare[i], bare[j], s)
        return i, j, p_distance(ra, rb)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(entry, pairs))
    else:
        results = [entry(p) for p in pairs]

    values = np.zeros((n, n))
    for i, j, d in results:
        values[i, j] = values[j, i] = d
    return DistanceMatrix([r.id for r in seqs], values)


def build_guide_tree(dm: DistanceMatrix) -> GuideNode:
    """UPGMA with average linkage; merge height is half the cluster distance.

    Ties choose the pair whose (smallest-member, smallest-member) label
    pair sorts lexicographically first.
    """
    if len(dm.labels) < 2:
        raise ValidationError("need at least 2 taxa")
    clusters: list[tuple[str, int, GuideNode, int]] = [
        (label, i, GuideNode(0.0, label=label), 1)
        for i, label in enumerate(dm.labels)
    ]
    dist: dict[tuple[int, int], float] = {}
    for i in range(len(dm.labels)):
        for j in range(i + 1, len(dm.labels)):
            dist[(i, j)] = float(dm.values[i, j])
    next_id = len(dm.labels)

    def d(i, j):
        return dist[(i, j) if i < j else (j, i)]

    while len(clusters) > 1:
        best = None
        for x in range(len(clusters)):
            for y in range(x + 1, len(clusters)):
                a, b = clusters[x], clusters[y]
                key_pair = tuple(sorted((a[0], b[0])))
                cand = (d(a[1], b[1]), key_pair, x, y)
                if best is None or cand[:2] < best[:2]:
                    best = cand
        dmin, _, x, y = best
        a, b = clusters[x], clusters[y]
        merged = GuideNode(dmin / 2.0, children=(a[2], b[2]))
        size = a[3] + b[3]
        for other in clusters:
            if other is a or other is b:
                continue
            avg = (a[3] * d(a[1], other[1]) + b[3] * d(b[1], other[1])) / size
            dist[(min(next_id, other[1]), max(next_id, other[1]))] = avg
        clusters = [c for c in clusters if c is not a and c is not b]
        clusters.append((min(a[0], b[0]), next_id, merged, size))
        next_id += 1
    return clusters[0][2]


def progressive_align(
    seqs, guide: GuideNode, s: ScoringParams = ScoringParams()
) -> Alignment:
    """Profile-profile alignment following the guide tree's merge order.

    Output rows come back in the input order, and removing gaps always
    recovers the input sequences exactly.
    """
    seqs = list(seqs)
    by_id = {r.id: _degap(r.residues) for r in seqs}
    if set(guide.leaves) != set(by_id) or len(guide.leaves) != len(seqs):
        raise LeafMismatch("guide tree leaves do not match sequence ids")

    def walk(node: GuideNode) -> tuple[list[str], list[str]]:
        if node.label is not None:
            return [node.label], [by_id[node.label]]
        (ids_l, rows_l), (ids_r, rows_r) = walk(node.children[0]), walk(
            node.children[1]
        )
        new_l, new_r, _ = _align_profiles(rows_l, rows_r, s)
        return ids_l + ids_r, new_l + new_r

    ids, rows = walk(guide)
    by_out = dict(zip(ids, rows))
    return Alignment.from_records(
        SequenceRecord(r.id, by_out[r.id]) for r in seqs
    )


def conservation_profile(a: Alignment) -> ConservationProfile:
    """Score each column by the frequency of its modal non-gap residue."""
    if a.kind != "aligned":
        raise NotAligned("conservation profile requires an aligned set")
    scores = []
    for col in zip(*(r.residues for r in a.records)):
        residues = [c for c in col if c != "-"]
        if not residues:
            scores.append(0.0)
            continue
        top = max(residues.count(c) for c in set(residues))
        scores.append(top / len(residues))
    mean = sum(scores) / len(scores)
    return ConservationProfile(tuple(scores), mean)


def realign(
    a: Alignment, s: ScoringParams = ScoringParams(), workers: int = 1
) -> Alignment:
    """Strip gaps and rebuild the alignment from scratch (idempotent)."""
    bare = [SequenceRecord(r.id, _degap(r.residues)) for r in a.records]
    if any(not r.residues for r in bare):
        raise ValidationError("a sequence is empty after removing gaps")
    if len(bare) == 1:
        return Alignment.from_records(bare)
    dm = distance_matrix(bare, s, workers=workers)
    guide = build_guide_tree(dm)
    return progressive_align(bare, guide, s)
