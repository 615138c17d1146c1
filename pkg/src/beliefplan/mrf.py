"""Dependency refinement of predicate beliefs with a pairwise Markov random field.

Perception scores every predicate independently, but predicates are not
independent: a block with something on it is not clear, a block resting on
another touches it, and stacking patterns correlate.  This module turns a
belief state into a small binary MRF whose unary potentials encode the raw
confidences and whose pairwise potentials encode those structural rules,
then re-estimates marginals by exact enumeration (small graphs) or loopy
belief propagation.

Energy convention: P(x) proportional to exp(-E(x)) with
E(x) = sum_i psi_i(x_i) + sum_ij phi_ij(x_i, x_j).  Lower energy means more
probable.  All tables are indexed [false, true].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from beliefplan.core import GroundPredicate, ProbabilisticState, Relation

CONFIDENCE_CLAMP = 1e-6
HARD_WEIGHT = 20.0
DEFAULT_CORRELATION = 0.5
ENUMERATION_CAP = 20


class CapacityError(RuntimeError):
    """Raised when an exact computation would exceed its size cap."""


class EdgeKind(Enum):
    MUTUAL_EXCLUSION = "mutual_exclusion"
    IMPLICATION = "implication"
    CORRELATION = "correlation"


@dataclass(frozen=True)
class Edge:
    """Pairwise factor between node indices i < j.

    ``table[x_i, x_j]`` is the energy contribution.  Implication edges record
    which endpoint is the antecedent; correlation edges record their signed
    strength rho.
    """

    i: int
    j: int
    kind: EdgeKind
    table: tuple[tuple[float, float], tuple[float, float]]
    antecedent: int | None = None
    rho: float | None = None

    def __post_init__(self):
        if not (0 <= self.i < self.j):
            raise ValueError(f"edge endpoints must satisfy 0 <= i < j, got ({self.i}, {self.j})")
        if self.kind is EdgeKind.IMPLICATION and self.antecedent not in (self.i, self.j):
            raise ValueError("implication edge must name one endpoint as antecedent")
        if self.kind is EdgeKind.CORRELATION:
            if self.rho is None or not (-1.0 < self.rho < 1.0):
                raise ValueError(f"correlation strength must lie in (-1, 1), got {self.rho}")

    def table_array(self) -> np.ndarray:
        return np.array(self.table, dtype=float)


@dataclass(frozen=True)
class PredicateMrf:
    nodes: tuple[GroundPredicate, ...]
    unary: np.ndarray  # shape (n, 2), unary[i] = [psi(false), psi(true)]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.unary.shape != (len(self.nodes), 2):
            raise ValueError("unary table shape must be (n_nodes, 2)")
        seen = set()
        for e in self.edges:
            if e.j >= len(self.nodes):
                raise ValueError(f"edge ({e.i}, {e.j}) exceeds node count {len(self.nodes)}")
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate edge ({e.i}, {e.j})")
            seen.add((e.i, e.j))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
        return [sorted(a) for a in adj]

    def log_partition(self) -> float:
        """log Z by exhaustive enumeration (node count capped)."""
        energies = _all_energies(self)
        return _logsumexp(-energies)

    def partition_function(self) -> float:
        return math.exp(self.log_partition())


@dataclass(frozen=True)
class BeliefSet:
    """Marginals produced by enumeration or belief propagation.

    ``node_marginals`` are sum-product (probability) marginals.
    ``max_node_marginals`` are max-product marginals, the right quantity to
    argmax for a MAP readout; on trees that argmax is the exact minimum
    energy assignment.
    """

    node_marginals: np.ndarray  # shape (n, 2)
    edge_marginals: tuple[np.ndarray, ...]  # one (2, 2) table per mrf edge
    converged: bool
    iterations: int
    log_z: float | None = None
    max_node_marginals: np.ndarray | None = None


def _clamp(p: float) -> float:
    return min(max(p, CONFIDENCE_CLAMP), 1.0 - CONFIDENCE_CLAMP)


def unary_potentials(p: float) -> tuple[float, float]:
    """Energy pair [psi(false), psi(true)] for a confidence value."""
    return (-math.log(_clamp(1.0 - p)), -math.log(_clamp(p)))


def _mutex_table(weight: float) -> tuple[tuple[float, float], tuple[float, float]]:
    return ((0.0, 0.0), (0.0, weight))


def _implication_table(
    antecedent_is_i: bool, weight: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    # penalize antecedent true with consequent false
    t = [[0.0, 0.0], [0.0, 0.0]]
    if antecedent_is_i:
        t[1][0] = weight
    else:
        t[0][1] = weight
    return (tuple(t[0]), tuple(t[1]))


def _correlation_table(rho: float) -> tuple[tuple[float, float], tuple[float, float]]:
    # kappa = 1: agreement lowers energy by rho, disagreement raises it
    return ((-rho, rho), (rho, -rho))


def mutex_edge(i: int, j: int, weight: float = HARD_WEIGHT) -> Edge:
    """Hard pairwise factor forbidding both endpoints true."""
    return Edge(i, j, EdgeKind.MUTUAL_EXCLUSION, _mutex_table(weight))


def implication_edge(i: int, j: int, antecedent: int, weight: float = HARD_WEIGHT) -> Edge:
    """Hard pairwise factor penalizing antecedent-true, consequent-false."""
    return Edge(i, j, EdgeKind.IMPLICATION, _implication_table(antecedent == i, weight), antecedent)


def correlation_edge(i: int, j: int, rho: float) -> Edge:
    """Soft agreement factor of signed strength rho."""
    return Edge(i, j, EdgeKind.CORRELATION, _correlation_table(rho), rho=rho)


def build_mrf(
    state: ProbabilisticState,
    hard_weight: float = HARD_WEIGHT,
    correlation_rho: float = DEFAULT_CORRELATION,
) -> PredicateMrf:
    """Construct the dependency MRF for a belief state.

    One node per predicate, unary energies from the confidences, and three
    structural edge rules:

    * mutual exclusion between On(A, B) and Clear(B),
    * implication from On(A, B) to Touching(A, B),
    * correlation between chained supports On(A, B) and On(B, C).

    At most one edge per node pair; when rules collide the harder constraint
    wins (exclusion, then implication, then correlation).
    """
    nodes = tuple(state.predicates())
    index = {pred: k for k, pred in enumerate(nodes)}
    unary = np.array([unary_potentials(state.confidence(p)) for p in nodes], dtype=float)

    taken: set[tuple[int, int]] = set()
    edges: list[Edge] = []

    def add(i: int, j: int, edge: Edge) -> None:
        key = (min(i, j), max(i, j))
        if key not in taken:
            taken.add(key)
            edges.append(edge)

    ons = [p for p in nodes if p.relation is Relation.ON]

    for on in ons:
        a, b = on.args
        clear_b = state.get(GroundPredicate(Relation.CLEAR, (b,)))
        if clear_b is not None:
            i, j = sorted((index[on], index[GroundPredicate(Relation.CLEAR, (b,))]))
            add(i, j, Edge(i, j, EdgeKind.MUTUAL_EXCLUSION, _mutex_table(hard_weight)))

    for on in ons:
        a, b = on.args
        touching = GroundPredicate(Relation.TOUCHING, (a, b))
        if touching in state:
            ant, cons = index[on], index[touching]
            i, j = sorted((ant, cons))
            add(
                i,
                j,
                Edge(
                    i,
                    j,
                    EdgeKind.IMPLICATION,
                    _implication_table(ant == i, hard_weight),
                    antecedent=ant,
                ),
            )

    for upper in ons:
        a, b = upper.args
        for lower in ons:
            c, d = lower.args
            if c == b and d != a:  # On(a, b) chained with On(b, d)
                i, j = sorted((index[upper], index[lower]))
                add(
                    i,
                    j,
                    Edge(
                        i,
                        j,
                        EdgeKind.CORRELATION,
                        _correlation_table(correlation_rho),
                        rho=correlation_rho,
                    ),
                )

    edges.sort(key=lambda e: (e.i, e.j))
    return PredicateMrf(nodes, unary, tuple(edges))


def energy(mrf: PredicateMrf, assignment: Sequence[bool] | Mapping[int, bool]) -> float:
    """Total energy of a full assignment (lower is more probable)."""
    if isinstance(assignment, Mapping):
        missing = [i for i in range(mrf.n_nodes) if i not in assignment]
        if missing:
            raise ValueError(f"assignment missing nodes {missing}")
        bits = [bool(assignment[i]) for i in range(mrf.n_nodes)]
    else:
        if len(assignment) != mrf.n_nodes:
            raise ValueError(
                f"assignment covers {len(assignment)} of {mrf.n_nodes} nodes"
            )
        bits = [bool(v) for v in assignment]
    total = sum(mrf.unary[i, int(b)] for i, b in enumerate(bits))
    for e in mrf.edges:
        total += e.table[int(bits[e.i])][int(bits[e.j])]
    return float(total)


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + float(np.log(np.sum(np.exp(values - m))))


def _all_energies(mrf: PredicateMrf) -> np.ndarray:
    """Energy of every assignment, indexed by the node-bit integer."""
    n = mrf.n_nodes
    if n > ENUMERATION_CAP:
        raise CapacityError(f"enumeration capped at {ENUMERATION_CAP} nodes, got {n}")
    idx = np.arange(1 << n, dtype=np.int64)
    bits = [(idx >> i) & 1 for i in range(n)]
    total = np.zeros(1 << n, dtype=float)
    for i in range(n):
        total += mrf.unary[i][bits[i]]
    for e in mrf.edges:
        total += e.table_array()[bits[e.i], bits[e.j]]
    return total


def enumerate_beliefs(mrf: PredicateMrf) -> BeliefSet:
    """Exact marginals by summing over every assignment (node count capped)."""
    n = mrf.n_nodes
    energies = _all_energies(mrf)
    log_z = _logsumexp(-energies)
    w = np.exp(-energies - log_z)
    idx = np.arange(1 << n, dtype=np.int64)

    node_marg = np.empty((n, 2), dtype=float)
    for i in range(n):
        p_true = float(np.sum(w[((idx >> i) & 1) == 1]))
        node_marg[i] = (1.0 - p_true, p_true)

    edge_marg = []
    for e in mrf.edges:
        bi = (idx >> e.i) & 1
        bj = (idx >> e.j) & 1
        tbl = np.empty((2, 2), dtype=float)
        for xi in (0, 1):
            for xj in (0, 1):
                tbl[xi, xj] = float(np.sum(w[(bi == xi) & (bj == xj)]))
        edge_marg.append(tbl)

    max_marg = np.empty((n, 2), dtype=float)
    for i in range(n):
        on = ((idx >> i) & 1) == 1
        best_true = float(np.max(w[on]))
        best_false = float(np.max(w[~on]))
        total = best_true + best_false
        max_marg[i] = (best_false / total, best_true / total)

    return BeliefSet(
        node_marg, tuple(edge_marg), True, 0, log_z=log_z, max_node_marginals=max_marg
    )


def loopy_bp(
    mrf: PredicateMrf,
    damping: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
) -> BeliefSet:
    """Sum-product belief propagation with synchronous flooding updates.

    Messages live in log space and are damped as
    new = damping * old + (1 - damping) * computed.  Exact on trees; on
    loopy graphs the returned marginals are the usual approximation, with
    ``converged`` reporting whether the message change fell below ``tol``
    within ``max_iters`` sweeps.
    """
    if not (0.0 <= damping < 1.0):
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    if tol <= 0 or max_iters < 1:
        raise ValueError("tol must be positive and max_iters at least 1")

    n = mrf.n_nodes
    log_unary = -mrf.unary  # log of unnormalized node factor
    tables = {}
    for e in mrf.edges:
        tables[(e.i, e.j)] = -e.table_array()  # log factor, indexed [x_i, x_j]

    # directed messages, each normalized to logsumexp zero; the max-product
    # family is carried alongside for the MAP readout
    msgs: dict[tuple[int, int], np.ndarray] = {}
    max_msgs: dict[tuple[int, int], np.ndarray] = {}
    inbound: list[list[int]] = [[] for _ in range(n)]
    for e in mrf.edges:
        for s, t in ((e.i, e.j), (e.j, e.i)):
            msgs[(s, t)] = np.full(2, -math.log(2.0))
            max_msgs[(s, t)] = np.full(2, -math.log(2.0))
            inbound[t].append(s)

    def oriented_table(s: int, t: int) -> np.ndarray:
        return tables[(s, t)] if (s, t) in tables else tables[(t, s)].T

    converged = False
    iterations = 0
    for sweep in range(max_iters):
        iterations = sweep + 1
        new_msgs: dict[tuple[int, int], np.ndarray] = {}
        new_max: dict[tuple[int, int], np.ndarray] = {}
        delta = 0.0
        for (s, t), old in msgs.items():
            pre = log_unary[s].copy()
            pre_max = log_unary[s].copy()
            for k in inbound[s]:
                if k != t:
                    pre += msgs[(k, s)]
                    pre_max += max_msgs[(k, s)]
            log_phi = oriented_table(s, t)  # [x_s, x_t]
            raw = np.array(
                [_logsumexp(pre + log_phi[:, xt]) for xt in (0, 1)], dtype=float
            )
            raw -= _logsumexp(raw)
            nxt = damping * old + (1.0 - damping) * raw
            nxt -= _logsumexp(nxt)
            new_msgs[(s, t)] = nxt

            raw_m = np.max(pre_max[:, None] + log_phi, axis=0)
            raw_m -= _logsumexp(raw_m)
            old_m = max_msgs[(s, t)]
            nxt_m = damping * old_m + (1.0 - damping) * raw_m
            nxt_m -= _logsumexp(nxt_m)
            new_max[(s, t)] = nxt_m

            delta = max(
                delta,
                float(np.max(np.abs(nxt - old))),
                float(np.max(np.abs(nxt_m - old_m))),
            )
        msgs = new_msgs
        max_msgs = new_max
        if delta < tol:
            converged = True
            break
    if not mrf.edges:
        converged = True
        iterations = max(iterations, 1)

    node_marg = np.empty((n, 2), dtype=float)
    for i in range(n):
        b = log_unary[i].copy()
        for k in inbound[i]:
            b += msgs[(k, i)]
        b -= _logsumexp(b)
        node_marg[i] = np.exp(b)

    max_marg = np.empty((n, 2), dtype=float)
    for i in range(n):
        b = log_unary[i].copy()
        for k in inbound[i]:
            b += max_msgs[(k, i)]
        b -= _logsumexp(b)
        max_marg[i] = np.exp(b)

    edge_marg = []
    for e in mrf.edges:
        b = tables[(e.i, e.j)].copy()
        side_i = log_unary[e.i].copy()
        for k in inbound[e.i]:
            if k != e.j:
                side_i += msgs[(k, e.i)]
        side_j = log_unary[e.j].copy()
        for k in inbound[e.j]:
            if k != e.i:
                side_j += msgs[(k, e.j)]
        b = b + side_i[:, None] + side_j[None, :]
        b -= _logsumexp(b.ravel())
        edge_marg.append(np.exp(b))

    return BeliefSet(
        node_marg, tuple(edge_marg), converged, iterations, max_node_marginals=max_marg
    )


def _entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def conditional_uncertainty(
    beliefs: BeliefSet, mrf: PredicateMrf, exact: bool | None = None
) -> float:
    """Dependency-aware uncertainty: sum over nodes of H(X_i | neighbors).

    For graphs up to the enumeration cap the conditional entropies are
    computed exactly from the joint.  Larger graphs fall back to
    conditioning each node on its single highest-mutual-information
    neighbor, using the pairwise marginals in ``beliefs``.  Nats.
    """
    n = mrf.n_nodes
    if n == 0:
        return 0.0
    if exact is None:
        exact = n <= ENUMERATION_CAP

    adj = mrf.neighbors()
    if exact:
        energies = _all_energies(mrf)
        w = np.exp(-energies - _logsumexp(-energies))
        idx = np.arange(1 << n, dtype=np.int64)

        def subset_entropy(nodes_subset: list[int]) -> float:
            if not nodes_subset:
                return 0.0
            keys = np.zeros(1 << n, dtype=np.int64)
            for t, s in enumerate(nodes_subset):
                keys |= ((idx >> s) & 1) << t
            dist = np.bincount(keys, weights=w, minlength=1 << len(nodes_subset))
            return _entropy(dist)

        total = 0.0
        for i in range(n):
            total += subset_entropy([i] + adj[i]) - subset_entropy(adj[i])
        return total

    # approximate: condition on the most informative single neighbor
    edge_tbl: dict[tuple[int, int], np.ndarray] = {}
    for e, tbl in zip(mrf.edges, beliefs.edge_marginals):
        edge_tbl[(e.i, e.j)] = np.asarray(tbl, dtype=float)

    def pair_table(i: int, j: int) -> np.ndarray:
        # oriented so axis 0 indexes node i
        return edge_tbl[(i, j)] if (i, j) in edge_tbl else edge_tbl[(j, i)].T

    total = 0.0
    for i in range(n):
        if not adj[i]:
            total += _entropy(beliefs.node_marginals[i])
            continue
        best = None
        for j in adj[i]:
            tbl = pair_table(i, j)
            pi = tbl.sum(axis=1)
            pj = tbl.sum(axis=0)
            mi = 0.0
            for xi in (0, 1):
                for xj in (0, 1):
                    if tbl[xi, xj] > 0.0 and pi[xi] > 0.0 and pj[xj] > 0.0:
                        mi += tbl[xi, xj] * math.log(tbl[xi, xj] / (pi[xi] * pj[xj]))
            if best is None or mi > best[0]:
                best = (mi, tbl, pj)
        _, tbl, pj = best
        total += _entropy(tbl) - _entropy(pj)
    return total


def map_assignment(beliefs: BeliefSet) -> tuple[bool, ...]:
    """Per-node argmax readout; exact ties resolve to false.

    Uses the max-product marginals when the belief set carries them (their
    argmax is the exact minimum-energy assignment on trees), falling back
    to the probability marginals otherwise.
    """
    marg = beliefs.max_node_marginals
    if marg is None:
        marg = beliefs.node_marginals
    return tuple(bool(b[1] > b[0]) for b in marg)


def refined_state(state: ProbabilisticState, beliefs: BeliefSet) -> ProbabilisticState:
    """Belief state with confidences replaced by refined true-marginals.

    Node order follows :func:`build_mrf` (sorted predicates), so ``beliefs``
    must come from the MRF built for this same state.
    """
    preds = state.predicates()
    if len(preds) != beliefs.node_marginals.shape[0]:
        raise ValueError("belief set does not match state size")
    conf = {p: float(beliefs.node_marginals[k, 1]) for k, p in enumerate(preds)}
    return ProbabilisticState(conf, state.known & set(preds))


def dump_mrf(mrf: PredicateMrf) -> str:
    """Stable structured-text rendering of nodes and edges.

    Deterministic for a given input state: nodes are listed in their sorted
    order with unary energies, then edges sorted by endpoints.
    """

    def fmt(x: float) -> str:
        return format(float(x), ".9g")

    lines = [f"mrf nodes={mrf.n_nodes} edges={len(mrf.edges)}"]
    for k, pred in enumerate(mrf.nodes):
        lines.append(
            f"node {k} {pred} psi_false={fmt(mrf.unary[k, 0])} psi_true={fmt(mrf.unary[k, 1])}"
        )
    for e in mrf.edges:
        extra = ""
        if e.kind is EdgeKind.IMPLICATION:
            extra = f" antecedent={e.antecedent}"
        elif e.kind is EdgeKind.CORRELATION:
            extra = f" rho={fmt(e.rho)}"
        rows = ";".join(
            ",".join(fmt(v) for v in row) for row in e.table
        )
        lines.append(f"edge {e.i} {e.j} kind={e.kind.value}{extra} phi=[{rows}]")
    return "\n".join(lines) + "\n"
