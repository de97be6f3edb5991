"""Nonlinear distributed observer over a structurally balanced signed digraph.

Agent i keeps an estimate eta_i of phi_i * v and evolves it by

    eta_i' = phi_i a(phi_i eta_i)
             + mu * ( sum_j a_ij (eta_j - sgn(a_ij) eta_i) + a_i0 (phi_i v - eta_i) )

Only agents with a_i0 > 0 read the leader state.  Stacked over agents this
is ``phi * a(phi * eta) + mu * (A eta - C eta + Delta (phi v - eta))`` with A
the follower adjacency and C the absolute degree, i.e. ``-mu H^s eta`` plus the
leader term.  The unsigned and linear reductions share :func:`coupling`, so
they agree bit for bit with :func:`ndo_rhs` wherever the formulas coincide.
"""

from dataclasses import dataclass

import numpy as np

from .signed_graph import check_partition, pd_tolerance

DEFAULT_SAFETY_FACTOR = 2.0
MU_FLOOR = 1e-6


@dataclass(frozen=True)
class ObserverState:
    eta: np.ndarray
    mu: float

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 2:
            raise ValueError("eta must be an N x m matrix")
        if not self.mu > 0:
            raise ValueError("coupling gain mu must be positive")
        object.__setattr__(self, "eta", eta)


def _check_dims(g, exo, state, v):
    n, m = state.eta.shape
    if n != g.n_followers:
        raise ValueError(f"eta has {n} rows, graph has {g.n_followers} followers")
    if m != exo.dim_state:
        raise ValueError(f"eta has {m} columns, exosystem state has {exo.dim_state}")
    v = np.asarray(v, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"leader state must have shape ({m},)")
    return v


def coupling(adj, degree, leader, phi, eta, v, mu):
    """mu * (A eta - C eta + Delta (phi v - eta)).

    ``adj`` may be dense or scipy-sparse; ``degree``, ``leader`` and ``phi``
    are length-N vectors.
    """
    return mu * (
        (adj @ eta - degree[:, None] * eta)
        + leader[:, None] * (phi[:, None] * v[None, :] - eta)
    )


def ndo_rhs(g, gp, exo, state, v):
    v = _check_dims(g, exo, state, v)
    check_partition(g, gp)
    adj = g.follower_adjacency
    phi = gp.phi[:, None]
    eta = state.eta
    return phi * exo.drift(phi * eta) + coupling(
        adj, np.abs(adj).sum(axis=1), g.leader_weights, gp.phi, eta, v, state.mu
    )


def gauge_coordinates(state, gp):
    """z_i = phi_i eta_i.  Applying it twice gives eta back."""
    eta = state.eta if isinstance(state, ObserverState) else np.asarray(state)
    return gp.phi[:, None] * eta


def estimation_error(state, gp, v):
    """Per-agent ||eta_i - phi_i v|| and their maximum."""
    eta = state.eta if isinstance(state, ObserverState) else np.asarray(state)
    err = np.linalg.norm(eta - np.outer(gp.phi, v), axis=1)
    return err, float(err.max())


def sym_max_eig(p, m):
    """Largest eigenvalue of the symmetric part of kron(P, M).

    Only the symmetric part enters the quadratic form z^T (P kron M) z.
    """
    k = np.kron(p, m)
    return float(np.linalg.eigvalsh(0.5 * (k + k.T))[-1])


def mu_bound(cert, exo):
    """mu_1 = 2 lambda_max(sym(P kron M)) / lambda_min(Q), floored at zero.

    This is the gain above which the leader-free error dynamics decay for
    linear leaders.  It does not account for the nonlinear part T(v), so
    treat it as an estimate of the required gain, not a guarantee.
    """
    q = np.asarray(cert.q)
    qmin = float(np.linalg.eigvalsh(0.5 * (q + q.T))[0])
    if qmin <= pd_tolerance(q):
        raise ValueError("invalid certificate: Q is not positive definite")
    return max(0.0, 2.0 * sym_max_eig(cert.p, exo.m_matrix) / qmin)


def recommended_mu(mu_1, safety_factor=DEFAULT_SAFETY_FACTOR):
    if safety_factor <= 0:
        raise ValueError("safety factor must be positive")
    return safety_factor * max(mu_1, MU_FLOOR)


def unsigned_reduction_rhs(g, exo, state, v):
    """Observer on an unsigned graph: eta_i' = a(eta_i) + mu sum_j a_ij (eta_j - eta_i), eta_0 = v."""
    if np.any(g.weights < 0):
        raise ValueError("unsigned observer requires nonnegative weights")
    v = _check_dims(g, exo, state, v)
    eta = state.eta
    adj = g.follower_adjacency
    # sum over j = 0..N of a_ij (eta_j - eta_i), leader term split out
    return exo.drift(eta) + coupling(
        adj, adj.sum(axis=1), g.leader_weights, np.ones(len(eta)), eta, v, state.mu
    )


def linear_reduction_rhs(g, gp, s_matrix, state, v):
    """Signed observer for a linear leader a(v) = S v."""
    s = np.asarray(s_matrix, dtype=float)
    n, m = state.eta.shape
    if s.shape != (m, m) or n != g.n_followers or np.shape(v) != (m,):
        raise ValueError("dimension mismatch")
    check_partition(g, gp)
    adj = g.follower_adjacency
    eta = state.eta
    return eta @ s.T + coupling(
        adj, np.abs(adj).sum(axis=1), g.leader_weights, gp.phi, eta,
        np.asarray(v, dtype=float), state.mu,
    )


def gauged_rhs(h, exo, z, v, mu):
    """Unsigned closed loop in gauge coordinates: z' = a(z) - mu (H kron I)(z - 1 kron v)."""
    z = np.asarray(z, dtype=float)
    return exo.drift(z) - mu * (np.asarray(h) @ (z - np.asarray(v)[None, :]))
