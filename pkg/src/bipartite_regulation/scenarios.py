"""Ready-made scenarios and the flat ``key = value`` scenario config format.

Config keys (``#`` starts a comment, blank lines ignored)::

    graph = four_agents.txt   # edge-list file, relative to the config; or "four_agents"
    exosystem = vanderpol     # or constant2
    nonlinearity = pendulum   # or none; omit agents with "agents = no"
    order = 2
    poles = -2,-2
    mu = auto                 # or a number; auto = max(mu_min, safety_factor * mu_1)
    mu_min = 10
    safety_factor = 2
    dt = 0.001
    t_final = 30
    sample_every = 10
    v0 = 0.1,0.2
    eta0 = ramp               # eta_i = (i-1)*0.2 in every entry; or "zero"
    eta0.3 = 0.4,0.4          # per-agent override
    x0.1 = 0.3,0.4            # per-agent follower state (default zero)
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import exosystem, observer, regulation
from .engine import Scenario
from .signed_graph import (
    build_graph,
    diag_lyapunov,
    laplacian_family,
    load_edge_list,
    structural_balance,
)

# Recovered from the displayed H^s = L^s + Delta of the four-pendulum example:
# only agent 1 hears the leader; V1 = {1, 2}, V2 = {3, 4}.
FOUR_AGENT_EDGES = [
    (0, 1, 1.0),
    (1, 2, 1.0),
    (4, 2, -1.0),
    (1, 3, -1.0),
    (2, 4, -1.0),
    (3, 4, 1.0),
]

DEMO_X0 = np.array([[0.3, 0.4], [0.5, 0.6], [0.7, 0.8], [0.9, 1.0]])
DEMO_V0 = np.array([0.1, 0.2])
DEFAULT_POLE = -2.0
DEFAULT_MU_MIN = 10.0


class ConfigError(ValueError):
    pass


def four_agent_graph():
    return build_graph(FOUR_AGENT_EDGES)


def ramp_eta0(n, m, step=0.2):
    return np.repeat((np.arange(n) * step)[:, None], m, axis=1)


@dataclass(frozen=True)
class GainChoice:
    mu_1: float
    mu_rec: float
    mu: float


def choose_mu(graph, partition, exo, safety_factor=observer.DEFAULT_SAFETY_FACTOR,
              mu_min=DEFAULT_MU_MIN):
    """mu_1 from the diagonal certificate, then mu = max(mu_min, safety * mu_1)."""
    h = laplacian_family(graph, partition).h_unsigned
    cert = diag_lyapunov(h)
    mu_1 = observer.mu_bound(cert, exo)
    mu_rec = observer.recommended_mu(mu_1, safety_factor)
    return GainChoice(mu_1, mu_rec, max(mu_min, mu_rec))


def vdp_pendulums(dt=1e-3, t_final=30.0, mu=None, poles=None, with_agents=True,
             sample_every=1, eta0=None):
    """Four pendulums tracking a Van der Pol leader over the four-follower signed graph."""
    g = four_agent_graph()
    gp = structural_balance(g)
    exo = exosystem.vanderpol()
    if mu is None:
        mu = choose_mu(g, gp, exo).mu
    eta0 = ramp_eta0(4, 2) if eta0 is None else np.asarray(eta0, dtype=float)
    agents, gains, xm = (), None, None
    if with_agents:
        gains = regulation.choose_gains(2, poles or [DEFAULT_POLE] * 2)
        xm = regulation.build_xmaps(exo, 2)
        agents = tuple(
            regulation.RegulatedAgent(2, regulation.pendulum, p, x0)
            for p, x0 in zip(gp.phi, DEMO_X0)
        )
    return Scenario(
        graph=g, partition=gp, exo=exo, mu=mu, t_final=t_final, dt=dt,
        v0=DEMO_V0.copy(), eta0=eta0, agents=agents, gains=gains,
        xmaps=xm, sample_every=sample_every,
    )


def parse_config_text(text, source="<config>"):
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in cfg:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        cfg[key] = value
    return cfg


def _floats(text, key):
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise ConfigError(f"bad numeric list for {key!r}: {text!r}") from None


def _float(cfg, key, default):
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"bad number for {key!r}: {cfg[key]!r}") from None


KNOWN_KEYS = {
    "graph", "exosystem", "nonlinearity", "order", "poles", "mu", "mu_min",
    "safety_factor", "dt", "t_final", "sample_every", "v0", "eta0", "agents",
}


def scenario_from_config(cfg, base_dir=".", mu_override=None, safety_factor=None):
    """Build a :class:`Scenario` from a parsed config mapping."""
    for key in cfg:
        root = key.split(".", 1)[0]
        if root not in KNOWN_KEYS | {"x0", "eta0"}:
            raise ConfigError(f"unknown config key {key!r}")

    gspec = cfg.get("graph", "four_agents")
    if gspec == "four_agents":
        g = four_agent_graph()
    else:
        path = Path(gspec)
        if not path.is_absolute():
            path = Path(base_dir) / path
        g = load_edge_list(path)
    gp = structural_balance(g)
    try:
        exo = exosystem.builtin(cfg.get("exosystem", "vanderpol"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n, m = g.n_followers, exo.dim_state

    sf = safety_factor if safety_factor is not None else _float(
        cfg, "safety_factor", observer.DEFAULT_SAFETY_FACTOR)
    mu_text = cfg.get("mu", "auto") if mu_override is None else str(mu_override)
    if mu_text == "auto":
        mu = choose_mu(g, gp, exo, sf, _float(cfg, "mu_min", DEFAULT_MU_MIN)).mu
    else:
        mu = _float({"mu": mu_text}, "mu", None)

    v0 = _floats(cfg["v0"], "v0") if "v0" in cfg else np.zeros(m)
    eta_mode = cfg.get("eta0", "zero")
    if eta_mode == "ramp":
        eta0 = ramp_eta0(n, m)
    elif eta_mode == "zero":
        eta0 = np.zeros((n, m))
    else:
        raise ConfigError(f"eta0 must be 'ramp' or 'zero', got {eta_mode!r}")
    for i in range(1, n + 1):
        if f"eta0.{i}" in cfg:
            eta0[i - 1] = _floats(cfg[f"eta0.{i}"], f"eta0.{i}")

    agents, gains, xm = (), None, None
    if cfg.get("agents", "yes") != "no":
        r = int(_float(cfg, "order", 2))
        name = cfg.get("nonlinearity", "pendulum")
        if name not in regulation.NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {name!r}")
        f = regulation.NONLINEARITIES[name]
        poles = regulation.parse_poles(cfg["poles"]) if "poles" in cfg else [DEFAULT_POLE] * r
        gains = regulation.choose_gains(r, poles)
        xm = regulation.build_xmaps(exo, r)
        agents = []
        for i in range(1, n + 1):
            x0 = _floats(cfg[f"x0.{i}"], f"x0.{i}") if f"x0.{i}" in cfg else np.zeros(r)
            agents.append(regulation.RegulatedAgent(r, f, gp.phi[i - 1], x0))
        agents = tuple(agents)

    return Scenario(
        graph=g, partition=gp, exo=exo, mu=mu,
        t_final=_float(cfg, "t_final", 30.0), dt=_float(cfg, "dt", 1e-3),
        v0=v0, eta0=eta0, agents=agents, gains=gains, xmaps=xm,
        sample_every=int(_float(cfg, "sample_every", 1)),
    )


def load_config(path, **kw):
    path = Path(path)
    cfg = parse_config_text(path.read_text(), source=str(path))
    return scenario_from_config(cfg, base_dir=path.parent, **kw)
