"""Nonlinear distributed observers and bipartite output regulation over signed digraphs."""

from .engine import Scenario, Trajectory, convergence_report, integrate, order_check
from .exosystem import Exosystem, constant2, vanderpol
from .observer import ObserverState, mu_bound, ndo_rhs
from .regulation import RegulatedAgent, build_xmaps, choose_gains, control_input
from .signed_graph import (
    GaugePartition,
    SignedDigraph,
    build_graph,
    diag_lyapunov,
    has_leader_spanning_tree,
    laplacian_family,
    structural_balance,
)

__version__ = "0.1.0"
