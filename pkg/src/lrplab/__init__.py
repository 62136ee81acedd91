"""Long-range percolation laboratory.

Simulation and exact-combinatorics toolkit for supercritical long-range
percolation on transitive graphs of polynomial growth: kernel and
degree/length calculus, reproducible windowed Monte Carlo with a
guard/one-step-escape finiteness protocol, block decompositions with
their Peierls and coarse-connectivity audits, isoperimetric estimators,
and an exhaustive micro-window oracle validating every stochastic path.
"""

__version__ = "0.1.0"

from .graphs import Heisenberg, Lattice, MetricHorizonError, growth_fit
from .kernel import KernelSpec, TailSum, degree_profile, edge_probability, j_cross, j_star
from .window import Window, external_masses
from .sampler import Configuration, finiteness_verdict, sample_configuration
from .clusters import (EstimateSeries, cluster_tail_estimate, clusters,
                       exponent_fit, giant_fraction_estimate,
                       set_escape_estimate, truncated_one_arm_estimate)
from .blocks import (block_decomposition, block_graph, closure, enumerate_blocks,
                     forward_degree_vectors, minimal_r_connectivity,
                     one_connected_components, realizable_f_trees)
from .oracle import MicroWindow, enumerate_exact, partition_audit, single_long_edge_probability
from .experiments import ExperimentSpec, emit, run

__all__ = [
    "Heisenberg", "Lattice", "MetricHorizonError", "growth_fit",
    "KernelSpec", "TailSum", "degree_profile", "edge_probability", "j_cross", "j_star",
    "Window", "external_masses",
    "Configuration", "finiteness_verdict", "sample_configuration",
    "EstimateSeries", "cluster_tail_estimate", "clusters", "exponent_fit",
    "giant_fraction_estimate", "set_escape_estimate", "truncated_one_arm_estimate",
    "block_decomposition", "block_graph", "closure", "enumerate_blocks",
    "forward_degree_vectors", "minimal_r_connectivity", "one_connected_components",
    "realizable_f_trees",
    "MicroWindow", "enumerate_exact", "partition_audit", "single_long_edge_probability",
    "ExperimentSpec", "emit", "run",
]
