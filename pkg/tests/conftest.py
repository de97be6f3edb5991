import itertools

import numpy as np
import pytest

from bipartite_regulation import engine, scenarios
from bipartite_regulation.signed_graph import build_graph


def brute_force_balance(g):
    """All sign vectors (first entry fixed to +1) that gauge every follower edge."""
    adj = g.follower_adjacency
    n = g.n_followers
    rows, cols = np.nonzero(adj)
    signs = np.sign(adj[rows, cols])
    found = []
    for rest in itertools.product((1.0, -1.0), repeat=n - 1):
        phi = np.array((1.0,) + rest)
        if np.all(signs == phi[rows] * phi[cols]):
            found.append(phi)
    return found


def random_signed_graph(rng, n, density=0.4, balanced=None):
    """Random signed digraph on n followers with a leader-rooted spanning tree.

    ``balanced=True`` draws signs from a hidden bipartition; ``None`` draws
    them freely.
    """
    phi = rng.choice([1.0, -1.0], size=n)
    edges = []
    # random leader-rooted tree first
    order = rng.permutation(n) + 1
    edges.append((0, int(order[0]), float(rng.uniform(0.5, 2.0))))
    for k in range(1, n):
        parent = int(order[rng.integers(0, k)])
        edges.append((parent, int(order[k]), 1.0))
    have = {(a, b) for a, b, _ in edges}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and (j, i) not in have and rng.random() < density:
                edges.append((j, i, 1.0))
                have.add((j, i))
        if rng.random() < 0.2 and (0, i) not in have:
            edges.append((0, i, float(rng.uniform(0.1, 1.5))))
            have.add((0, i))
    out = []
    for a, b, w in edges:
        if a == 0:
            out.append((a, b, w))
            continue
        mag = float(rng.uniform(0.2, 2.0))
        if balanced:
            s = phi[a - 1] * phi[b - 1]
        else:
            s = rng.choice([1.0, -1.0])
        out.append((a, b, s * mag))
    return build_graph(out, n_followers=n)


@pytest.fixture(scope="session")
def demo_run():
    """Full Van der Pol demo closed loop at dt = 1e-3, sampled every 10 steps."""
    return engine.integrate(scenarios.vdp_pendulums(sample_every=10))


@pytest.fixture(scope="session")
def demo_gauged_run():
    sc = engine.gauged_scenario(scenarios.vdp_pendulums(sample_every=10))
    return engine.integrate(sc)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
