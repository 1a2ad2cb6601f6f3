"""Post-run summarization: burn-in, split frequencies, the majority-rule
consensus with posterior probabilities, convergence diagnostics, and the
exact small-problem posterior used to validate the sampler.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import PhyloflowError, ValidationError
from ..phylomodel import (
    PhyloTree,
    SubstitutionModel,
    enumerate_topologies,
    log_likelihood,
    tree_splits,
)
from ..phylomodel.likelihood import LikelihoodEngine, TaxaMismatch
from ..phylomodel.tree import Node, with_branch_lengths


class EmptyRetained(PhyloflowError):
    code = "empty_retained"


def burn_in(samples, fraction: float) -> list:
    """Drop the first ceil(fraction * len) entries; error if nothing is left."""
    if not 0 <= fraction < 1:
        raise ValidationError("burn-in fraction must be in [0, 1)")
    samples = list(samples)
    dropped = math.ceil(fraction * len(samples))
    retained = samples[dropped:]
    if not retained:
        raise EmptyRetained(
            f"burn-in {fraction} drops all {len(samples)} samples"
        )
    return retained


def split_frequencies(trees) -> dict[tuple[str, ...], float]:
    """Fraction of trees containing each internal-edge bipartition."""
    trees = list(trees)
    if not trees:
        raise EmptyRetained("no trees to summarize")
    taxa = trees[0].taxa
    counts: Counter = Counter()
    for tree in trees:
        if tree.taxa != taxa:
            raise TaxaMismatch("trees are over different taxon sets")
        counts.update(tree_splits(tree))
    return {split: c / len(trees) for split, c in sorted(counts.items())}


@dataclass
class ConsensusTree:
    """Majority-rule consensus: possibly multifurcating, internal edges
    annotated with the split frequency (posterior probability)."""

    root: Node
    taxa: tuple[str, ...]
    support: dict[tuple[str, ...], float]

    def newick(self) -> str:
        anchor = min(self.taxa)
        all_taxa = set(self.taxa)

        def serialize(node: Node) -> tuple[str, set[str]]:
            if node.is_leaf:
                return f"{node.name}:{node.length!r}", {node.name}
            rendered = [serialize(c) for c in node.children]
            rendered.sort(key=lambda pair: min(pair[1]))
            body = "(" + ",".join(text for text, _ in rendered) + ")"
            below = set().union(*(leafset for _, leafset in rendered))
            side = below if anchor in below else all_taxa - below
            pp = self.support.get(tuple(sorted(side)))
            note = f"[&pp={pp:.6g}]" if pp is not None else ""
            length = f":{node.length!r}" if node.length is not None else ""
            return body + note + length, below

        text, _ = serialize(self.root)
        return text + ";"


def majority_rule_consensus(trees, burnin_fraction: float = 0.0) -> ConsensusTree:
    """Greedy >50% consensus; edge lengths average over supporting trees."""
    retained = burn_in(list(trees), burnin_fraction)
    taxa = retained[0].taxa
    anchor = min(taxa)
    all_taxa = set(taxa)
    n = len(retained)

    split_count: Counter = Counter()
    length_sum: dict[tuple[str, ...], float] = defaultdict(float)
    pendant_sum: dict[str, float] = defaultdict(float)
    for tree in retained:
        if tree.taxa != taxa:
            raise TaxaMismatch("trees are over different taxon sets")
        below: dict[int, set[str]] = {}
        for node in tree.postorder():
            if node.is_leaf:
                below[id(node)] = {node.name}
                pendant_sum[node.name] += node.length
            else:
                below[id(node)] = set().union(*(below[id(c)] for c in node.children))
        for node in tree.internal_branch_nodes():
            side = below[id(node)]
            if anchor not in side:
                side = all_taxa - side
            key = tuple(sorted(side))
            split_count[key] += 1
            length_sum[key] += node.length

    support = {
        key: count / n for key, count in split_count.items() if count / n > 0.5
    }
    # clusters in the anchor-rooted view are the anchor-free sides
    clusters = {frozenset(all_taxa - set(key)): key for key in support}

    root = Node()
    node_of: dict[frozenset, Node] = {}
    for cluster in sorted(clusters, key=len):
        key = clusters[cluster]
        node_of[cluster] = Node(length=length_sum[key] / split_count[key])

    def parent_node(member_set: frozenset) -> Node:
        covering = [c for c in node_of if member_set < c]
        if not covering:
            return root
        return node_of[min(covering, key=len)]

    for taxon in taxa:
        leaf = Node(name=taxon, length=pendant_sum[taxon] / n)
        if taxon == anchor:
            root.children.append(leaf)
        else:
            parent_node(frozenset({taxon})).children.append(leaf)
    for cluster in sorted(clusters, key=len):
        parent_node(cluster).children.append(node_of[cluster])

    return ConsensusTree(root=root, taxa=taxa, support=dict(support))


def convergence_diag(run_traces, burnin_fraction: float = 0.0) -> float:
    """Average across splits of the between-run std. dev. of frequencies.

    Uses the (n-1) sample estimator over the union of observed splits;
    0.0 means the runs agree exactly.
    """
    run_traces = list(run_traces)
    if len(run_traces) < 2:
        raise ValidationError("convergence diagnostic needs at least 2 runs")
    freq_maps = [
        split_frequencies(burn_in(list(trace), burnin_fraction))
        for trace in run_traces
    ]
    observed = sorted(set().union(*(f.keys() for f in freq_maps)))
    if not observed:
        return 0.0
    sds = [
        float(np.std([fm.get(split, 0.0) for fm in freq_maps], ddof=1))
        for split in observed
    ]
    return float(np.mean(sds))


def exact_topology_posterior(
    data, model: SubstitutionModel, branch_length: float
) -> dict[str, float]:
    """Posterior over all topologies with every edge fixed to one length.

    Feasible only at oracle scale (n <= 6); the prior over topologies is
    uniform, so the posterior is the normalized per-topology likelihood.
    """
    taxa = data.taxa
    if len(taxa) > 6:
        raise ValidationError("exact posterior is limited to 6 taxa")
    if branch_length <= 0:
        raise ValidationError("branch length must be positive")
    engine = LikelihoodEngine(data)
    topologies = enumerate_topologies(taxa)
    ids = [t.topology_id() for t in topologies]
    lnls = np.array([
        engine.log_likelihood(with_branch_lengths(t, branch_length), model)
        for t in topologies
    ])
    shifted = np.exp(lnls - lnls.max())
    posterior = shifted / shifted.sum()
    return dict(zip(ids, posterior.tolist()))
