"""Bayesian phylogenetic inference workflow engine.

A library plus CLI/HTTP service covering the full pipeline: sequence
format conversion (FASTA/PHYLIP/Clustal -> canonical NEXUS), progressive
multiple alignment with conservation scoring, Metropolis-coupled MCMC
tree sampling with .p/.t/.mcmc traces, consensus summarization, and a
job workflow running on a simulated multi-worker backend.
"""

__version__ = "0.1.0"
