"""Signed communication digraphs with a leader node.

Node 0 is the leader; followers are 1..N.  ``weights[i, j]`` is the weight of
the edge j -> i, so row i lists what agent i listens to.
"""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or input."""


class StructurallyUnbalanced(GraphError):
    """No bipartition makes every follower edge sign consistent.

    ``cycle`` is a closed walk of follower nodes whose edge-sign product is
    negative.
    """

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(
            "graph is structurally unbalanced; negative cycle: "
            + " - ".join(str(c) for c in self.cycle)
        )


class NotPositiveStable(ValueError):
    pass


class CertificateSearchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SignedDigraph:
    n_followers: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        n = self.n_followers
        if n < 1:
            raise GraphError("need at least one follower")
        if w.shape != (n + 1, n + 1):
            raise GraphError(f"weights must be {(n + 1, n + 1)}, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise GraphError("weights must be finite")
        if np.any(np.diag(w) != 0):
            raise GraphError("self-loops are not allowed")
        if np.any(w[1:, 0] < 0):
            raise GraphError("leader weights a_i0 must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def follower_adjacency(self):
        """The signed adjacency among followers (N x N)."""
        return self.weights[1:, 1:]

    @property
    def leader_weights(self):
        return self.weights[1:, 0]

    def edges(self):
        """Yield ``(from, to, weight)`` for every nonzero entry."""
        rows, cols = np.nonzero(self.weights)
        for i, j in zip(rows, cols):
            yield int(j), int(i), float(self.weights[i, j])


@dataclass(frozen=True)
class GaugePartition:
    phi: np.ndarray
    isolated: tuple = field(default=())

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 1 or not np.all(np.isin(phi, (-1.0, 1.0))):
            raise GraphError("phi must be a vector of +1/-1 entries")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def v1(self):
        return frozenset(int(i) + 1 for i in np.flatnonzero(self.phi > 0))

    @property
    def v2(self):
        return frozenset(int(i) + 1 for i in np.flatnonzero(self.phi < 0))

    @property
    def matrix(self):
        return np.diag(self.phi)


@dataclass(frozen=True)
class GraphMatrices:
    laplacian_s: np.ndarray
    degree: np.ndarray
    delta: np.ndarray
    h_signed: np.ndarray
    h_unsigned: np.ndarray


@dataclass(frozen=True)
class LyapunovCertificate:
    p: np.ndarray
    q: np.ndarray
    mu_lower: float | None = None


def build_graph(edges, n_followers=None):
    """Build a :class:`SignedDigraph` from ``(from, to, weight)`` triples.

    Zero weights are dropped (a zero weight means no edge).  When
    ``n_followers`` is omitted it is the largest node index seen.
    """
    edges = [(int(a), int(b), float(w)) for a, b, w in edges]
    if n_followers is None:
        n_followers = max((max(a, b) for a, b, _ in edges), default=0)
    n = int(n_followers)
    weights = np.zeros((n + 1, n + 1))
    seen = set()
    for src, dst, w in edges:
        if not (0 <= src <= n and 0 <= dst <= n):
            raise GraphError(f"node index out of range in edge {src}->{dst}")
        if src == dst:
            raise GraphError(f"self-loop at node {src}")
        if not np.isfinite(w):
            raise GraphError(f"non-finite weight on edge {src}->{dst}")
        if (src, dst) in seen:
            raise GraphError(f"duplicate edge {src}->{dst}")
        seen.add((src, dst))
        if src == 0 and w < 0:
            raise GraphError(f"negative leader weight on edge 0->{dst}")
        if w == 0:
            continue
        weights[dst, src] = w
    return SignedDigraph(n, weights)


def parse_edge_list(text, source="<string>"):
    """Parse ``<from> <to> <weight>`` lines; ``#`` starts a comment."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"{source}:{lineno}: expected '<from> <to> <weight>', got {raw!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
            w = float(parts[2])
        except ValueError:
            raise GraphError(f"{source}:{lineno}: malformed edge {raw!r}") from None
        if src < 0 or dst < 0:
            raise GraphError(f"{source}:{lineno}: negative node index")
        edges.append((src, dst, w))
    try:
        return build_graph(edges)
    except GraphError as exc:
        raise GraphError(f"{source}: {exc}") from None


def load_edge_list(path):
    path = Path(path)
    return parse_edge_list(path.read_text(), source=str(path))


def format_edge_list(g):
    lines = [f"# signed digraph, {g.n_followers} followers; node 0 is the leader"]
    lines += [f"{a} {b} {w:.17g}" for a, b, w in g.edges()]
    return "\n".join(lines) + "\n"


def _follower_neighbours(g):
    """Undirected signed neighbour lists over follower edges (0-based)."""
    adj = g.follower_adjacency
    n = g.n_followers
    nbrs = [[] for _ in range(n)]
    for i, j in zip(*np.nonzero(adj)):
        s = 1 if adj[i, j] > 0 else -1
        nbrs[i].append((int(j), s))
        nbrs[j].append((int(i), s))
    return nbrs


def _tree_path(parent, node):
    path = [node]
    while parent[node] is not None:
        node = parent[node]
        path.append(node)
    return path


def structural_balance(g):
    """Find the gauge signs phi with sgn(a_ij) = phi_i * phi_j on follower edges.

    Each connected component (ignoring edge direction) is 2-coloured by BFS.
    The anchor of a component, which gets phi = +1, is its lowest-index node
    with a leader edge, or its lowest-index node if no member has one.
    Followers with no edges at all are reported in ``isolated`` and get +1.

    Raises :class:`StructurallyUnbalanced` carrying a negative cycle.
    """
    n = g.n_followers
    nbrs = _follower_neighbours(g)
    leader = g.leader_weights > 0
    phi = np.zeros(n)
    isolated = []
    for start in range(n):
        if phi[start] != 0:
            continue
        # collect the component first so the anchor can be chosen
        comp, queue, seen = [], deque([start]), {start}
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w, _ in nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        led = [c for c in comp if leader[c]]
        anchor = min(led) if led else min(comp)
        if len(comp) == 1 and not nbrs[anchor] and not leader[anchor]:
            isolated.append(anchor + 1)

        parent = {anchor: None}
        phi[anchor] = 1.0
        queue = deque([anchor])
        while queue:
            u = queue.popleft()
            for w, s in nbrs[u]:
                if phi[w] == 0:
                    phi[w] = s * phi[u]
                    parent[w] = u
                    queue.append(w)
                elif phi[w] != s * phi[u]:
                    raise StructurallyUnbalanced(_witness(parent, u, w))
    return GaugePartition(phi, tuple(isolated))


def _witness(parent, u, w):
    pu = _tree_path(parent, u)
    pw = _tree_path(parent, w)
    common = set(pu) & set(pw)
    pu = pu[: next(k for k, x in enumerate(pu) if x in common) + 1]
    pw = pw[: next(k for k, x in enumerate(pw) if x in common) + 1]
    # u ... lca ... w, then back to u over the offending edge
    cycle = pu + pw[-2::-1] + [u]
    return [c + 1 for c in cycle]


def check_partition(g, gp):
    """Raise :class:`GraphError` unless ``gp`` gauges every follower edge of ``g``."""
    if gp.phi.shape != (g.n_followers,):
        raise GraphError("partition size does not match the graph")
    adj = g.follower_adjacency
    rows, cols = np.nonzero(adj)
    bad = np.sign(adj[rows, cols]) != gp.phi[rows] * gp.phi[cols]
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GraphError(
            f"partition inconsistent with edge {cols[k] + 1}->{rows[k] + 1}"
        )


def has_leader_spanning_tree(g):
    """True when every follower is reachable from the leader along directed edges."""
    w = g.weights
    reached = np.zeros(g.n_followers + 1, dtype=bool)
    reached[0] = True
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(w[:, j]):
            if not reached[i]:
                reached[i] = True
                queue.append(int(i))
    return bool(reached.all())


def laplacian_family(g, gp):
    check_partition(g, gp)
    adj = g.follower_adjacency
    degree = np.diag(np.abs(adj).sum(axis=1))
    lap = degree - adj
    delta = np.diag(g.leader_weights.copy())
    hs = lap + delta
    phi = gp.phi
    h = phi[:, None] * hs * phi[None, :]
    return GraphMatrices(lap, degree, delta, hs, h)


def pd_tolerance(q):
    return 1e-10 * max(1.0, np.linalg.norm(q, 2))


def _min_eig_sym(m):
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def diag_lyapunov(h, max_sweeps=200):
    """Diagonal P > 0 such that Q = P H + H^T P is positive definite.

    Candidates in order: P = I (enough when H + H^T > 0), P = diag(1 / w)
    with w = H^{-1} 1, the left/right weighting diag(H^{-T} 1 / w), and
    finally coordinate ascent on min-eig(Q) over diagonal P with trace N.
    """
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    if h.shape != (n, n):
        raise ValueError("h must be square")
    eig = np.linalg.eigvals(h)
    if np.any(eig.real <= 0):
        raise NotPositiveStable(f"eigenvalues with nonpositive real part: {eig}")

    def q_of(p):
        return p[:, None] * h + h.T * p[None, :]

    def score(p):
        q = q_of(p)
        return _min_eig_sym(q) - pd_tolerance(q)

    ones = np.ones(n)
    candidates = [ones]
    try:
        right = np.linalg.solve(h, ones)
        left = np.linalg.solve(h.T, ones)
    except np.linalg.LinAlgError:
        right = left = None
    if right is not None and np.all(right > 0):
        candidates.append(1.0 / right)
        if np.all(left > 0):
            candidates.append(left / right)
    for p in candidates:
        if score(p) > 0:
            return _certificate(p, q_of(p))

    p = candidates[-1] * n / candidates[-1].sum()
    best = score(p)
    factors = (0.5, 0.8, 0.95, 1.05, 1.25, 2.0)
    for _ in range(max_sweeps):
        improved = False
        for i in range(n):
            for f in factors:
                trial = p.copy()
                trial[i] *= f
                trial *= n / trial.sum()
                s = score(trial)
                if s > best:
                    p, best, improved = trial, s, True
        if best > 0:
            return _certificate(p, q_of(p))
        if not improved:
            break
    raise CertificateSearchFailed(
        f"no diagonal Lyapunov matrix found (best min-eig margin {best:.3g})"
    )


def _certificate(p, q):
    q = 0.5 * (q + q.T)
    return LyapunovCertificate(np.diag(p), q)


def is_positive_definite(q):
    q = np.asarray(q, dtype=float)
    return _min_eig_sym(q) > pd_tolerance(q)
