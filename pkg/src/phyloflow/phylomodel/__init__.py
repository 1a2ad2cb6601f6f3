"""Trees, substitution models, and likelihood computation."""

from .tree import (
    NewickError,
    PhyloTree,
    count_topologies,
    enumerate_topologies,
    parse_newick,
    random_tree,
    tree_splits,
    write_newick,
)
from .model import (
    LsetError,
    SubstitutionModel,
    category_rates,
    lset_parse,
    lset_render,
    rate_matrix,
    transition_matrix,
)
from .likelihood import LikelihoodEngine, log_likelihood

__all__ = [
    "PhyloTree",
    "SubstitutionModel",
    "LikelihoodEngine",
    "NewickError",
    "LsetError",
    "count_topologies",
    "enumerate_topologies",
    "parse_newick",
    "write_newick",
    "random_tree",
    "tree_splits",
    "category_rates",
    "lset_parse",
    "lset_render",
    "rate_matrix",
    "transition_matrix",
    "log_likelihood",
]
