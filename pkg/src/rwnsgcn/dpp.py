"""Diversity-aware selection of negative samples.

Communities come from asynchronous label propagation; a per-source PSD
kernel couples candidate quality (similarity of the source to each
candidate's community) with pairwise redundancy (node/community feature
similarity); subsets are drawn either by an exact fixed-size determinantal
sampler or by a deterministic greedy log-det maximizer.  The union of all
sampled pairs forms the negative-sample graph the model propagates over.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from rwnsgcn.graph import Graph, build_graph
from rwnsgcn.scoring import CandidateSet

__all__ = [
    "CommunityAssignment",
    "DppKernel",
    "label_propagation",
    "cosine_rows",
    "build_dpp_kernel",
    "kdpp_sample_exact",
    "dpp_map_greedy",
    "build_negative_graph",
    "draw_negative_samples",
]


@dataclass(frozen=True, eq=False)
class CommunityAssignment:
    """Node -> community labels (compacted to 0..C-1) plus mean features."""

    labels: np.ndarray
    community_features: np.ndarray | None
    iterations_run: int

    @property
    def num_communities(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True, eq=False)
class DppKernel:
    """Candidate-indexed PSD kernel with its assembly factors."""

    source: int
    items: list[int]
    L: np.ndarray
    S_node: np.ndarray
    S_com: np.ndarray
    Q: np.ndarray
    jitter: float


def label_propagation(
    g: Graph,
    features: np.ndarray | None = None,
    seed: int = 0,
    max_iter: int = 100,
) -> CommunityAssignment:
    """Asynchronous majority-label propagation.

    Every node starts in its own community; sweeps visit nodes in a
    seed-shuffled order and each node adopts the most frequent label
    among its neighbors (ties to the smallest label).  Stops after a
    sweep with no change.  When ``features`` is given, per-community
    mean feature rows are computed for the compacted labels.
    """
    n = g.num_nodes
    labels = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    sweeps = 0
    for _ in range(max_iter):
        sweeps += 1
        changed = False
        for v in rng.permutation(n):
            nbrs = g.neighbors(v)
            if nbrs.size == 0:
                continue
            counts = np.bincount(labels[nbrs])
            best = int(np.argmax(counts))  # argmax returns the smallest label on ties
            if labels[v] != best:
                labels[v] = best
                changed = True
        if not changed:
            break
    uniq, compact = np.unique(labels, return_inverse=True)
    compact = compact.astype(np.int64)
    comm_features = None
    if features is not None:
        comm_features = np.vstack(
            [features[compact == c].mean(axis=0) for c in range(uniq.size)]
        )
    return CommunityAssignment(
        labels=compact, community_features=comm_features, iterations_run=sweeps
    )


def cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of the rows of a and b.

    Zero-norm rows contribute 0 similarity everywhere.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    an = np.where(na[:, None] > 0, a / np.where(na[:, None] > 0, na[:, None], 1.0), 0.0)
    bn = np.where(nb[:, None] > 0, b / np.where(nb[:, None] > 0, nb[:, None], 1.0), 0.0)
    return an @ bn.T


def build_dpp_kernel(
    source: int,
    candidates: CandidateSet,
    features: np.ndarray,
    comm: CommunityAssignment,
    jitter: float = 1e-8,
) -> DppKernel:
    """Assemble the candidate kernel for one source.

    With q_j the cosine of the source's features against candidate j's
    community features, the kernel is

        L = (diag(q) (S_com S_com^T) diag(q)) * exp(S_node - 1) + jitter I

    where * is elementwise.  All three factors are PSD, so L is PSD up
    to roundoff before the jitter.
    """
    if comm.community_features is None:
        raise ValueError("community assignment carries no community features")
    items = candidates.nodes()
    if not items:
        raise ValueError("candidate set is empty")
    x = features[items]
    s_node = cosine_rows(x, x)
    cf = comm.community_features[comm.labels[items]]
    s_com = cosine_rows(cf, cf)
    q = cosine_rows(features[source][None, :], cf)[0]
    quality = np.diag(q)
    core = quality @ (s_com @ s_com.T) @ quality.T
    L = core * np.exp(s_node - 1.0)
    L = 0.5 * (L + L.T)
    L += jitter * np.eye(len(items))
    return DppKernel(
        source=int(source),
        items=items,
        L=L,
        S_node=s_node,
        S_com=s_com,
        Q=quality,
        jitter=jitter,
    )


def _elem_sympoly(eigvals: np.ndarray, k: int) -> np.ndarray:
    """E[l, m] = elementary symmetric polynomial e_l over the first m values."""
    n = eigvals.size
    E = np.zeros((k + 1, n + 1))
    E[0, :] = 1.0
    for l in range(1, k + 1):
        for m in range(1, n + 1):
            E[l, m] = E[l, m - 1] + eigvals[m - 1] * E[l - 1, m - 1]
    return E


RANK_TOL = 1e-10


def kdpp_sample_exact(
    kernel: DppKernel, k: int, rng: np.random.Generator
) -> list[int]:
    """Draw an exactly-size-k subset with probability proportional to
    det(L_S), via eigendecomposition (eigenvector subset selection by
    elementary symmetric polynomials, then sequential projection).

    If k exceeds the numerical rank of the kernel it is clamped with a
    warning.  Returns the sampled node ids, ascending.
    """
    n = len(kernel.items)
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count {n}")
    eigvals, eigvecs = np.linalg.eigh(kernel.L)
    eigvals = np.maximum(eigvals, 0.0)
    rank = int(np.sum(eigvals > RANK_TOL))
    if k > rank:
        warnings.warn(
            f"k={k} exceeds numerical rank {rank}; clamping", stacklevel=2
        )
        k = rank
        if k == 0:
            return []

    E = _elem_sympoly(eigvals, k)
    picked: list[int] = []
    rem = k
    for m in range(n, 0, -1):
        if rem == 0:
            break
        if m == rem:
            marg = 1.0
        elif E[rem, m] <= 0.0:
            continue
        else:
            marg = eigvals[m - 1] * E[rem - 1, m - 1] / E[rem, m]
        if rng.random() < marg:
            picked.append(m - 1)
            rem -= 1

    V = eigvecs[:, picked]
    chosen: list[int] = []
    while V.shape[1] > 0:
        probs = np.sum(V**2, axis=1)
        probs = np.maximum(probs, 0.0)
        total = probs.sum()
        if total <= 0:
            break
        i = int(rng.choice(n, p=probs / total))
        chosen.append(i)
        if V.shape[1] == 1:
            break
        # project the basis onto the subspace with zero coordinate i
        j = int(np.argmax(np.abs(V[i, :])))
        vj = V[:, j].copy()
        V = np.delete(V, j, axis=1)
        V = V - np.outer(vj, V[i, :] / vj[i])
        V, _ = np.linalg.qr(V)
    return sorted(kernel.items[i] for i in chosen)


def dpp_map_greedy(
    kernel: DppKernel, k: int, return_gains: bool = False
) -> list[int] | tuple[list[int], list[float]]:
    """Deterministic greedy log-det maximization (ties to the smaller id).

    Always returns k items even when extra picks add ~zero determinant
    mass; per-pick log-det gains are available via ``return_gains``.
    """
    n = len(kernel.items)
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count {n}")
    selected: list[int] = []
    gains: list[float] = []
    current = 0.0
    # candidate indices in ascending node-id order so strict > keeps ties minimal
    id_order = sorted(range(n), key=lambda i: kernel.items[i])
    for _ in range(k):
        best_gain = -np.inf
        best_i = None
        for i in id_order:
            if i in selected:
                continue
            trial = selected + [i]
            sign, logdet = np.linalg.slogdet(kernel.L[np.ix_(trial, trial)])
            gain = (logdet - current) if sign > 0 else -np.inf
            if gain > best_gain:
                best_gain = gain
                best_i = i
        if best_i is None:  # all remaining determinants vanish; take smallest id
            best_i = next(i for i in id_order if i not in selected)
            best_gain = -np.inf
        selected.append(best_i)
        gains.append(float(best_gain))
        if np.isfinite(best_gain):
            current += best_gain
    ids = sorted(kernel.items[i] for i in selected)
    if return_gains:
        return ids, gains
    return ids


def build_negative_graph(
    samples: Mapping[int, Iterable[int]], num_nodes: int
) -> Graph:
    """Unit-weight symmetric graph with an edge (source, j) per sampled j.

    Duplicates collapse; nodes never touched by sampling keep zero rows.
    """
    edges = [
        (int(src), int(j), 1.0) for src, subset in samples.items() for j in subset
    ]
    return build_graph(num_nodes, edges)


def draw_negative_samples(
    candidates: Mapping[int, CandidateSet],
    features: np.ndarray,
    comm: CommunityAssignment,
    k: int = 3,
    method: str = "exact",
    jitter: float = 1e-8,
    rng_for_source=None,
) -> dict[int, list[int]]:
    """Per-source negative draws over all candidate sets.

    ``k`` is clamped to each source's candidate count.  ``rng_for_source``
    maps a source id to the generator used for its draw, so results do
    not depend on iteration order; it is required for the exact sampler.
    """
    if method not in ("exact", "greedy"):
        raise ValueError(f"unknown sampling method {method!r}")
    out: dict[int, list[int]] = {}
    for src in sorted(candidates):
        cs = candidates[src]
        if len(cs) == 0:
            out[src] = []
            continue
        kernel = build_dpp_kernel(src, cs, features, comm, jitter=jitter)
        k_eff = min(k, len(cs))
        if method == "greedy":
            out[src] = dpp_map_greedy(kernel, k_eff)
        else:
            if rng_for_source is None:
                raise ValueError("exact sampling needs rng_for_source")
            out[src] = kdpp_sample_exact(kernel, k_eff, rng_for_source(src))
    return out
