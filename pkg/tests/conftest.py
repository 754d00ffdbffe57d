"""Shared random-instance generators for the test suite.

Random per-node output blocks carry ceil(n/2) to ceil(n/2)+1 rows: with
fewer rows the stacked observability matrices of large random pairs turn
into near-degenerate Krylov sequences (condition numbers beyond 1e12)
and no solver can meet the toolkit's residual contracts at double
precision. The structured family below covers the genuinely partial
observation cases instead, with perfect conditioning at any size.
"""

import numpy as np

from observer_kit import Digraph, SystemModel, joint_observability_rank


def random_sc_digraph(rng, n_nodes, weight_range=(0.5, 2.0), extra_edge_prob=0.3):
    """Strongly connected random digraph: a random directed Hamiltonian
    cycle plus independent extra arcs."""
    order = rng.permutation(n_nodes)
    A = np.zeros((n_nodes, n_nodes))

    def add_edge(src, dst):
        A[dst, src] = rng.uniform(*weight_range)

    for k in range(n_nodes):
        add_edge(order[k], order[(k + 1) % n_nodes])
    for src in range(n_nodes):
        for dst in range(n_nodes):
            if src != dst and A[dst, src] == 0 and rng.random() < extra_edge_prob:
                add_edge(src, dst)
    return Digraph(A)


def random_undirected_graph(rng, n_nodes, weight_range=(0.5, 2.0)):
    """Connected undirected graph (symmetric adjacency): a ring plus chords."""
    A = np.zeros((n_nodes, n_nodes))
    for k in range(n_nodes):
        w = rng.uniform(*weight_range)
        i, j = k, (k + 1) % n_nodes
        A[i, j] = A[j, i] = w
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if A[i, j] == 0 and rng.random() < 0.3:
                A[i, j] = A[j, i] = rng.uniform(*weight_range)
    return Digraph(A)


def random_dense_model(rng, n, n_nodes, entry_range=(-1.0, 1.0)):
    """Random plant with dense random output blocks, jointly observable."""
    rows_min = -(-n // 2)  # ceil(n/2); see module docstring
    while True:
        A = rng.uniform(*entry_range, (n, n))
        outputs = tuple(
            rng.uniform(*entry_range, (int(rng.integers(rows_min, rows_min + 2)), n))
            for _ in range(n_nodes)
        )
        model = SystemModel(A=A, outputs=outputs)
        if joint_observability_rank(model) == n:
            return model


def random_partial_model(rng, n, n_nodes, mode_range=(-1.0, 1.5)):
    """Diagonal plant whose coordinates are split among the nodes.

    Every coordinate is measured by exactly one node, so the network is
    jointly observable while each node has a genuine unobservable block
    (possibly with unstable modes). Nodes that own no coordinate end up
    fully blind (a zero output row), which the toolkit admits.
    """
    modes = rng.uniform(*mode_range, n)
    A = np.diag(modes)
    owner = rng.integers(0, n_nodes, n)
    eye = np.eye(n)
    outputs = []
    for i in range(n_nodes):
        rows = [eye[k] for k in range(n) if owner[k] == i]
        outputs.append(np.array(rows) if rows else np.zeros((1, n)))
    return SystemModel(A=A, outputs=tuple(outputs))


def random_model(rng, n, n_nodes):
    """Fifty-fifty mix of the dense and structured families."""
    if rng.random() < 0.5:
        return random_dense_model(rng, n, n_nodes)
    return random_partial_model(rng, n, n_nodes)
