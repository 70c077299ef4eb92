"""Agent communication graphs and mixing matrices.

The graph is undirected and connected; consensus-based baselines
additionally use a doubly stochastic mixing matrix built with
Metropolis-Hastings weights.
"""

import json

import numpy as np

from .exceptions import ConfigurationError, GraphGenerationError

MAX_GENERATION_ATTEMPTS = 100


class Graph:
    """Undirected connected communication graph.

    Parameters
    ----------
    num_agents : int
        Number of agents N (>= 1).
    edges : iterable of (int, int)
        Unordered agent pairs; self-loops are rejected.

    Attributes
    ----------
    num_agents : int
    edges : tuple of (int, int)
        Canonical sorted edge list, each pair with i < j.
    neighborhoods : tuple of tuple of int
        Sorted neighbor ids per agent.
    degrees : ndarray
        Per-agent neighborhood sizes.
    """

    def __init__(self, num_agents, edges):
        if num_agents < 1:
            raise ConfigurationError(f"num_agents must be >= 1, got {num_agents}")
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ConfigurationError(f"self-loop at agent {i}")
            if not (0 <= i < num_agents and 0 <= j < num_agents):
                raise ConfigurationError(f"edge ({i},{j}) out of range")
            canon.add((min(i, j), max(i, j)))
        self.num_agents = int(num_agents)
        self.edges = tuple(sorted(canon))
        nbr = [[] for _ in range(num_agents)]
        for i, j in self.edges:
            nbr[i].append(j)
            nbr[j].append(i)
        self.neighborhoods = tuple(tuple(sorted(v)) for v in nbr)
        self.degrees = np.array([len(v) for v in self.neighborhoods], dtype=np.int64)
        if not self.is_connected():
            raise ConfigurationError("graph is not connected")
        self._directed = None

    def is_connected(self):
        """BFS check for a single connected component."""
        if self.num_agents == 1:
            return True
        seen = np.zeros(self.num_agents, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in self.neighborhoods[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    @property
    def num_edges(self):
        return len(self.edges)

    def directed_index(self):
        """Index arrays over directed edges, used by the round kernels.

        Directed edges (i, j) for every i and every j in its neighborhood,
        sorted by (i, j). Returns ``(edge_dst, edge_ptr, edge_rev)`` where
        ``edge_ptr[i]:edge_ptr[i+1]`` slices agent i's outgoing edges,
        ``edge_dst[e]`` is the neighbor, and ``edge_rev[e]`` is the index
        of the opposite edge (j, i).
        """
        if self._directed is None:
            pairs = []
            for i in range(self.num_agents):
                for j in self.neighborhoods[i]:
                    pairs.append((i, j))
            index = {p: e for e, p in enumerate(pairs)}
            edge_dst = np.array([j for _, j in pairs], dtype=np.int64)
            edge_rev = np.array([index[(j, i)] for i, j in pairs], dtype=np.int64)
            edge_ptr = np.zeros(self.num_agents + 1, dtype=np.int64)
            np.cumsum(self.degrees, out=edge_ptr[1:])
            self._directed = (edge_dst, edge_ptr, edge_rev)
        return self._directed

    def to_json_dict(self):
        return {"N": self.num_agents, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json_dict(cls, data):
        return cls(data["N"], data["edges"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def __eq__(self, other):
        return (isinstance(other, Graph)
                and self.num_agents == other.num_agents
                and self.edges == other.edges)

    def __repr__(self):
        return f"Graph(num_agents={self.num_agents}, num_edges={self.num_edges})"


def generate_graph(kind, num_agents, edge_prob=0.4, seed=None):
    """Generate a connected graph of the requested topology.

    Parameters
    ----------
    kind : {'ring', 'complete', 'erdos_renyi'}
    num_agents : int
        Must be >= 2.
    edge_prob : float
        Edge probability for Erdos-Renyi, in (0, 1].
    seed : int, optional
        Seed for the Erdos-Renyi sampler; resampling after a disconnected
        draw uses an incremented sub-seed so generation stays deterministic.

    Returns
    -------
    Graph
    """
    if num_agents < 2:
        raise ConfigurationError(f"num_agents must be >= 2, got {num_agents}")
    if kind == "ring":
        edges = [(i, (i + 1) % num_agents) for i in range(num_agents)]
        if num_agents == 2:
            edges = [(0, 1)]
        return Graph(num_agents, edges)
    if kind == "complete":
        edges = [(i, j) for i in range(num_agents) for j in range(i + 1, num_agents)]
        return Graph(num_agents, edges)
    if kind == "erdos_renyi":
        if not 0 < edge_prob <= 1:
            raise ConfigurationError(f"edge_prob must be in (0,1], got {edge_prob}")
        for attempt in range(MAX_GENERATION_ATTEMPTS):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))
            draws = rng.random((num_agents, num_agents))
            edges = [(i, j) for i in range(num_agents)
                     for j in range(i + 1, num_agents) if draws[i, j] < edge_prob]
            candidate = _try_graph(num_agents, edges)
            if candidate is not None:
                return candidate
        raise GraphGenerationError(
            f"no connected graph after {MAX_GENERATION_ATTEMPTS} attempts "
            f"(N={num_agents}, p={edge_prob})")
    raise ConfigurationError(f"unknown graph kind {kind!r}")


def _try_graph(num_agents, edges):
    try:
        return Graph(num_agents, edges)
    except ConfigurationError:
        return None


def metropolis_weights(graph):
    """Doubly stochastic mixing matrix with Metropolis-Hastings weights.

    W_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal absorbs the
    remainder. Symmetric, rows and columns sum to one, and W is
    compatible with the graph sparsity.

    Parameters
    ----------
    graph : Graph

    Returns
    -------
    ndarray of shape (N, N)
    """
    n = graph.num_agents
    w = np.zeros((n, n))
    deg = graph.degrees
    for i, j in graph.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w
