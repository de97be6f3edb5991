"""Stripe patterns drawn by bipartite regulation over per-row path graphs.

Every pixel is a pendulum follower.  Within an image row the pixels form a
directed path, pixel k feeding pixel k+1 with weight +1 when both have the
same colour and -1 otherwise; the leader feeds the first pixel.  Dark pixels
sit in V1 and white in V2, so with a constant leader output y0 = -1 dark
pixels settle at -1 and white ones at +1.

Rows never interact.  They are integrated together as one block-diagonal
system, which gives exactly the per-row arithmetic (CSR products sum each
row on its own), so results do not depend on which rows share a batch.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import exosystem, observer, regulation
from .engine import BlowUp, ClosedLoop, group_agents, run
from .signed_graph import (
    GaugePartition,
    build_graph,
    check_partition,
    diag_lyapunov,
    has_leader_spanning_tree,
    laplacian_family,
    structural_balance,
)

TURING_V0 = np.array([-1.0, 1.0])


@dataclass(frozen=True)
class TuringSpec:
    target: np.ndarray
    mu: float | None = None
    dt: float = 0.01
    t_final: float = 30.0
    safety_factor: float = observer.DEFAULT_SAFETY_FACTOR
    mu_min: float = 10.0
    pole: float = -2.0

    def __post_init__(self):
        t = np.asarray(self.target)
        if t.ndim != 2 or 0 in t.shape:
            raise ValueError("target must be a non-empty 2-D bitmap")
        if t.dtype != bool:
            if not np.all(np.isin(t, (0, 1))):
                raise ValueError("target must be strictly binary")
            t = t.astype(bool)
        object.__setattr__(self, "target", t)

    @property
    def height(self):
        return self.target.shape[0]

    @property
    def width(self):
        return self.target.shape[1]


@dataclass
class TuringResult:
    image: np.ndarray
    mu: float
    times: np.ndarray | None = None
    outputs: np.ndarray | None = None


def build_row_network(row):
    """Path digraph and colour partition for one image row (True = dark)."""
    dark = np.asarray(row, dtype=bool)
    if dark.size == 0:
        raise ValueError("row must be non-empty")
    edges = [(0, 1, 1.0)]
    for k in range(1, dark.size):
        edges.append((k, k + 1, 1.0 if dark[k] == dark[k - 1] else -1.0))
    g = build_graph(edges, n_followers=dark.size)
    gp = GaugePartition(np.where(dark, 1.0, -1.0))
    return g, gp


def zebra_stripes(width, height, period=8.0, wobble=3.0):
    """Wavy vertical stripes; True marks dark pixels."""
    x = np.arange(width)[None, :]
    y = np.arange(height)[:, None]
    phase = 2 * np.pi * (x + wobble * np.sin(2 * np.pi * y / max(height, 1) * 2)) / period
    return np.sin(phase) < 0


def checkerboard(width, height):
    return (np.arange(height)[:, None] + np.arange(width)[None, :]) % 2 == 0


def _row_blocks(target):
    blocks, degree, leader, phi = [], [], [], []
    for idx, row in enumerate(target):
        g, gp = build_row_network(row)
        # the colour rule makes every row balanced; a failure here is a bug
        check_partition(g, gp)
        assert has_leader_spanning_tree(g), f"row {idx} not leader-rooted"
        balanced = structural_balance(g)
        assert np.array_equal(np.abs(balanced.phi * gp.phi), np.ones(row.size)), idx
        adj = g.follower_adjacency
        blocks.append(sparse.csr_matrix(adj))
        degree.append(np.abs(adj).sum(axis=1))
        leader.append(g.leader_weights)
        phi.append(gp.phi)
    adj = sparse.block_diag(blocks, format="csr")
    return adj, np.concatenate(degree), np.concatenate(leader), np.concatenate(phi)


def turing_mu(spec, exo):
    if spec.mu is not None:
        return float(spec.mu)
    # every row graph is a unit-weight path with unit leader pinning, so
    # H = I + (sub-diagonal -1) for all rows and one certificate serves all
    g, gp = build_row_network(spec.target[0])
    cert = diag_lyapunov(laplacian_family(g, gp).h_unsigned)
    mu_1 = observer.mu_bound(cert, exo)
    return max(spec.mu_min, observer.recommended_mu(mu_1, spec.safety_factor))


def run_turing(spec, sample_every=None):
    """Integrate every row to ``t_final`` and return the output image y_i(t_final)."""
    exo = exosystem.constant2()
    h, w = spec.height, spec.width
    adj, degree, leader, phi = _row_blocks(spec.target)
    mu = turing_mu(spec, exo)
    gains = regulation.choose_gains(2, [spec.pole, spec.pole])
    xm = regulation.build_xmaps(exo, 2)
    agents = [regulation.RegulatedAgent(2, regulation.pendulum, 1.0, np.zeros(2))]
    loop = ClosedLoop(adj, degree, leader, phi, exo, mu, 2, group_agents(agents), gains, xm)
    n = h * w
    y0 = loop.pack(TURING_V0, np.zeros((n, 2)), np.zeros((n, 2)))
    every = sample_every or int(round(spec.t_final / spec.dt))
    try:
        times, states = run(loop, y0, spec.t_final, spec.dt, sample_every=every)
    except BlowUp as exc:
        bad = int(np.argmax(np.abs(exc.state[2:2 + 2 * n].reshape(n, 2)).max(axis=1)
                             + np.abs(exc.state[2 + 2 * n:].reshape(n, 2)).max(axis=1)))
        raise BlowUp(f"row {bad // w}: {exc}", trajectory=exc.trajectory,
                     time=exc.time, state=exc.state) from exc
    outputs = states[:, 2 + 2 * n:].reshape(len(times), h, w, 2)[..., 0]
    res = TuringResult(image=outputs[-1].copy(), mu=mu)
    if sample_every:
        res.times, res.outputs = times, outputs
    return res
