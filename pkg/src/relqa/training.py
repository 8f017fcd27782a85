"""Joint embedding training by alternating edge-sampling subgradient descent.

Two coupled objectives share one feature embedding array.  The RE side ties
relation-mention vectors to their features through a negative-sampling
co-occurrence loss and to relation-type vectors through a partial-label
hinge.  The QA side ties pair vectors to their features the same way and
ranks same-question positive pairs above negative ones with a pairwise
hinge.  Each training iteration flips a coin between the two sides and runs
one co-occurrence step plus one hinge step for the chosen side.

Exact-objective oracles (full softmax, enumerated noise expectation, full
hinge sums) live here as well; training only ever evaluates them at check
intervals, never inside steps.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from relqa.graph import HeterogeneousGraph
from relqa.sampling import stage_rng

MODEL_MAGIC = "REQUEST-EMB"
MODEL_VERSION = 1
LR_FLOOR_FRACTION = 0.01  # linear decay target: alpha/100
DIVERGENCE_FACTOR = 10.0

MODES = ("joint", "qa_then_re", "re_then_qa")


class TrainingDivergedError(RuntimeError):
    """Objective exceeded 10x its initial value or went non-finite."""


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def log_sigmoid(x):
    # min(x,0) - log1p(exp(-|x|)) == -logaddexp(0,-x), but branch-free and
    # several times faster on the large noise matrices the exact objective
    # evaluates; exact objectives sit on the convergence-check hot path.
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


@dataclass
class TrainConfig:
    """alpha is deliberately required: no learning-rate default is defined.

    The learning rate decays linearly from alpha to alpha/100 over
    max_iterations (per phase for the staged modes).  batch_size scales how
    many sampled terms each component step processes per iteration; 1 keeps
    the plain one-sample update sequence.
    """

    alpha: float
    d: int = 50
    lam: float = 1e-4
    negatives: int = 3
    re_qa_mix: float = 0.5
    max_iterations: int = 200_000
    convergence_tol: float = 1e-4
    objective_check_every: int = 5_000
    batch_size: int = 1
    mode: str = "joint"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if not (0.0 <= self.re_qa_mix <= 1.0):
            raise ValueError("re_qa_mix must be in [0, 1]")
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.objective_check_every < 1:
            raise ValueError("objective_check_every must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class EmbeddingStore:
    """Z: mention rows, P: pair rows, C: shared feature rows, R: type rows.

    C covers the union feature vocabulary; a feature occurring in both
    corpora has exactly one row, which is what couples the two objectives.
    """

    Z: np.ndarray
    P: np.ndarray
    C: np.ndarray
    R: np.ndarray
    d: int
    mention_ids: tuple[str, ...] = ()
    pair_ids: tuple[str, ...] = ()
    feature_strings: tuple[str, ...] = ()
    type_names: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("Z", "P", "C", "R"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.d:
                raise ValueError(f"{name} must be 2-d with {self.d} columns")
            setattr(self, name, arr)
        self.feature_index = {s: i for i, s in enumerate(self.feature_strings)}

    @classmethod
    def initialize(cls, graph: HeterogeneousGraph, d: int, rng: np.random.Generator) -> "EmbeddingStore":
        """All rows uniform in [-0.5/d, 0.5/d]."""
        bound = 0.5 / d
        def init(n):
            return rng.uniform(-bound, bound, size=(n, d))
        return cls(
            Z=init(graph.num_mentions),
            P=init(graph.num_pairs),
            C=init(graph.num_features),
            R=init(graph.num_types),
            d=d,
            mention_ids=graph.mention_ids,
            pair_ids=graph.pair_ids,
            feature_strings=graph.vocab.strings,
            type_names=graph.type_names,
        )

    def check_shapes(self, graph: HeterogeneousGraph) -> None:
        if (
            self.Z.shape[0] != graph.num_mentions
            or self.P.shape[0] != graph.num_pairs
            or self.C.shape[0] != graph.num_features
            or self.R.shape[0] != graph.num_types
        ):
            raise ValueError("store row counts do not match graph")

    def all_finite(self) -> bool:
        return all(
            bool(np.all(np.isfinite(a))) for a in (self.Z, self.P, self.C, self.R)
        )


# ---------------------------------------------------------------------------
# loss terms and their subgradients (shared by steps and gradient tests)


def ns_term(z, c_pos, c_negs):
    """Sampled negative-sampling loss and subgradients.

    value = -(log sigma(z.c_pos) + sum_v log sigma(-z.c_neg_v)); returns
    (value, dz, dc_pos, dc_negs) evaluated at the given point.
    """
    z = np.asarray(z, dtype=np.float64)
    c_pos = np.asarray(c_pos, dtype=np.float64)
    c_negs = np.atleast_2d(np.asarray(c_negs, dtype=np.float64))
    s_pos = float(z @ c_pos)
    s_negs = c_negs @ z
    value = -(float(log_sigmoid(s_pos)) + float(log_sigmoid(-s_negs).sum()))
    g_pos = 1.0 - float(sigmoid(s_pos))
    g_negs = sigmoid(s_negs)
    dz = -(g_pos * c_pos) + g_negs @ c_negs
    dc_pos = -g_pos * z
    dc_negs = g_negs[:, None] * z[None, :]
    return value, dz, dc_pos, dc_negs


def hinge_term(anchor, plus, minus):
    """max{0, 1 - (anchor.plus - anchor.minus)} and its subgradients.

    Covers both the type hinge (anchor=z, plus=best candidate type row,
    minus=best non-candidate row) and the QA pairwise hinge (anchor=p_k,
    plus=p_k1, minus=p_k2).  The kink (margin exactly 1) counts as inactive.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    plus = np.asarray(plus, dtype=np.float64)
    minus = np.asarray(minus, dtype=np.float64)
    margin = float(anchor @ plus - anchor @ minus)
    if margin < 1.0:
        value = 1.0 - margin
        return value, -(plus - minus), -anchor, anchor.copy()
    zero = np.zeros_like(anchor)
    return 0.0, zero, zero.copy(), zero.copy()


def l2_term(x, lam):
    """(lam/2) * ||x||^2 and its gradient lam*x."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * lam * float(x @ x), lam * x


# ---------------------------------------------------------------------------
# exact objectives


def _side_noise(graph: HeterogeneousGraph, side: str):
    if side == "re":
        fids = graph.re_noise_fids
        table = graph.re_noise_table
    else:
        fids = graph.qa_noise_fids
        table = graph.qa_noise_table
    probs = table.probabilities if table is not None else None
    return fids, probs


def _ns_objective(obj_matrix, edges, C, noise_fids, noise_probs, V, chunk=2048):
    """Exact expected negative-sampling loss for one side."""
    if len(edges) == 0:
        return 0.0
    s_pos = np.einsum("ed,ed->e", obj_matrix[edges.objects], C[edges.features])
    w = edges.weights.astype(np.float64)
    total = -float(w @ log_sigmoid(s_pos))
    # per-object noise expectation E_i = sum_f pn(f) log sigma(-z_i.c_f)
    n = obj_matrix.shape[0]
    wsum = np.bincount(edges.objects, weights=w, minlength=n)
    Csub = C[noise_fids]
    e_obj = np.empty(n, dtype=np.float64)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        s = obj_matrix[lo:hi] @ Csub.T
        e_obj[lo:hi] = log_sigmoid(-s) @ noise_probs
    total -= float(V * (wsum @ e_obj))
    return total


def objective_zf(store: EmbeddingStore, graph: HeterogeneousGraph) -> float:
    """Exact full-softmax co-occurrence loss on the RE side (test oracle)."""
    store.check_shapes(graph)
    edges = graph.re_edges
    if len(edges) == 0:
        return 0.0
    fids = np.flatnonzero(graph.vocab.in_re)
    Csub = store.C[fids]
    logits = store.Z @ Csub.T
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    s_pos = np.einsum("ed,ed->e", store.Z[edges.objects], store.C[edges.features])
    w = edges.weights.astype(np.float64)
    return float(w @ (lse[edges.objects] - s_pos))


def objective_zf_ns(store: EmbeddingStore, graph: HeterogeneousGraph, V: int = 3) -> float:
    """Exact expectation of the negative-sampling form on the RE side.

    Per edge the expectation of the sampled term is
    -(log sigma(z.c_j) + V * E_noise[log sigma(-z.c')]); this returns the
    weighted sum over edges (the quantity objective_total uses for L_ZF).
    """
    store.check_shapes(graph)
    fids, probs = _side_noise(graph, "re")
    if len(graph.re_edges) == 0:
        return 0.0
    return _ns_objective(store.Z, graph.re_edges, store.C, fids, probs, V)


def objective_pf_ns(store: EmbeddingStore, graph: HeterogeneousGraph, V: int = 3) -> float:
    """QA-side mirror of objective_zf_ns."""
    store.check_shapes(graph)
    if len(graph.qa_edges) == 0:
        return 0.0
    fids, probs = _side_noise(graph, "qa")
    return _ns_objective(store.P, graph.qa_edges, store.C, fids, probs, V)


def partial_label_loss(z, candidates, R) -> float:
    """Type hinge: margin between best candidate and best non-candidate.

    candidates must be a non-empty proper subset of the type ids covered
    by R (ties inside the maxes resolve toward the lowest id, which the
    max value itself does not depend on).
    """
    R = np.asarray(R, dtype=np.float64)
    k = R.shape[0]
    cand = sorted(candidates)
    if not cand or len(cand) >= k:
        raise ValueError("candidates must be a non-empty proper subset of all types")
    if cand[0] < 0 or cand[-1] >= k:
        raise ValueError("candidate id out of range")
    scores = R @ np.asarray(z, dtype=np.float64)
    mask = np.zeros(k, dtype=bool)
    mask[cand] = True
    margin = float(scores[mask].max() - scores[~mask].max())
    return max(0.0, 1.0 - margin)


def qa_pairwise_loss(k: int, group, P) -> float:
    """Full ranking loss for one anchor positive pair of one question.

    group is (positive pair ids, negative pair ids).  Sums
    max{0, 1 - (p_k.p_k1 - p_k.p_k2)} over every other positive k1 and
    every negative k2; empty when the question has <2 positives or 0
    negatives.
    """
    pos, neg = group
    pos = np.asarray(pos, dtype=np.int64)
    neg = np.asarray(neg, dtype=np.int64)
    if k not in set(pos.tolist()):
        raise ValueError(f"pair {k} is not a positive pair of the group")
    if len(pos) < 2 or len(neg) == 0:
        return 0.0
    P = np.asarray(P, dtype=np.float64)
    anchor = P[k]
    others = pos[pos != k]
    s_plus = P[others] @ anchor
    s_minus = P[neg] @ anchor
    margins = s_plus[:, None] - s_minus[None, :]
    return float(np.maximum(0.0, 1.0 - margins).sum())


def _type_hinge_total(store: EmbeddingStore, graph: HeterogeneousGraph) -> float:
    scores = store.Z @ store.R.T
    mask = candidate_matrix(graph)
    cand = np.where(mask, scores, -np.inf).max(axis=1)
    non = np.where(mask, -np.inf, scores).max(axis=1)
    return float(np.maximum(0.0, 1.0 - (cand - non)).sum())


def _qa_hinge_total(store: EmbeddingStore, graph: HeterogeneousGraph) -> float:
    total = 0.0
    for pos, neg in graph.question_groups:
        if len(pos) < 2 or len(neg) == 0:
            continue
        G = store.P[pos] @ store.P[pos].T
        H = store.P[pos] @ store.P[neg].T
        margins = G[:, :, None] - H[:, None, :]
        loss = np.maximum(0.0, 1.0 - margins)
        k = len(pos)
        loss[np.arange(k), np.arange(k), :] = 0.0
        total += float(loss.sum())
    return total


def candidate_matrix(graph: HeterogeneousGraph) -> np.ndarray:
    """Boolean (mention, type) candidate mask, cached on the graph."""
    cached = getattr(graph, "_candidate_matrix", None)
    if cached is not None:
        return cached
    mask = np.zeros((graph.num_mentions, graph.num_types), dtype=bool)
    for i, cands in enumerate(graph.mention_candidates):
        mask[i, sorted(cands)] = True
    graph._candidate_matrix = mask
    return mask


def objective_total(
    store: EmbeddingStore, graph: HeterogeneousGraph, cfg: TrainConfig
) -> tuple[float, float, float]:
    """(O, O_Z, O_QA) with the negative-sampling forms for both co-occurrence
    losses; this is the trained objective that checks and convergence use."""
    store.check_shapes(graph)
    lam = cfg.lam
    o_z = (
        objective_zf_ns(store, graph, cfg.negatives)
        + _type_hinge_total(store, graph)
        + 0.5 * lam * (float(np.sum(store.Z * store.Z)) + float(np.sum(store.R * store.R)))
    )
    o_qa = (
        objective_pf_ns(store, graph, cfg.negatives)
        + _qa_hinge_total(store, graph)
        + 0.5 * lam * float(np.sum(store.P * store.P))
    )
    return o_z + o_qa, o_z, o_qa


# ---------------------------------------------------------------------------
# SGD step kernels (batched; batch 1 realizes the single-sample sequence)


def _edge_batch(obj_matrix, C, edges, edge_table, noise_fids, noise_table, rng, lr, v, batch):
    """One co-occurrence batch: positive edges plus V noise features each.

    All gradients are taken at batch-start values, then accumulated.
    Returns (object rows, positive feature ids, noise feature ids).
    """
    e = edge_table.sample(rng, batch)
    obj = edges.objects[e]
    fpos = edges.features[e]
    negs = noise_fids[noise_table.sample(rng, (batch, v))]
    zrows = obj_matrix[obj]
    cpos = C[fpos]
    cneg = C[negs]
    g_pos = 1.0 - sigmoid(np.einsum("bd,bd->b", zrows, cpos))
    g_neg = sigmoid(np.einsum("bd,bvd->bv", zrows, cneg))
    dz = g_pos[:, None] * cpos - np.einsum("bv,bvd->bd", g_neg, cneg)
    np.add.at(obj_matrix, obj, lr * dz)
    np.add.at(C, fpos, lr * g_pos[:, None] * zrows)
    np.add.at(C, negs.reshape(-1), (-lr * g_neg[..., None] * zrows[:, None, :]).reshape(-1, C.shape[1]))
    return obj, fpos, negs


def _run_edge_batch(store, graph, side, rng, lr, v, batch):
    if side == "re":
        if graph.re_edge_table is None or graph.re_noise_table is None:
            return None
        return _edge_batch(
            store.Z, store.C, graph.re_edges, graph.re_edge_table,
            graph.re_noise_fids, graph.re_noise_table, rng, lr, v, batch,
        )
    if graph.qa_edge_table is None or graph.qa_noise_table is None:
        return None
    return _edge_batch(
        store.P, store.C, graph.qa_edges, graph.qa_edge_table,
        graph.qa_noise_fids, graph.qa_noise_table, rng, lr, v, batch,
    )


def _partial_label_batch(store, graph, rng, lr, lam, batch):
    """Type-hinge batch: active rows move, every sampled row shrinks."""
    n = graph.num_mentions
    mask = candidate_matrix(graph)
    mi = rng.integers(n, size=batch)
    zrows = store.Z[mi]
    scores = zrows @ store.R.T
    cand_scores = np.where(mask[mi], scores, -np.inf)
    non_scores = np.where(mask[mi], -np.inf, scores)
    rb = np.argmax(cand_scores, axis=1)
    rn = np.argmax(non_scores, axis=1)
    rows = np.arange(batch)
    margin = cand_scores[rows, rb] - non_scores[rows, rn]
    active = margin < 1.0
    if np.any(active):
        rbest = store.R[rb]
        rnon = store.R[rn]
        dz = np.where(active[:, None], lr * (rbest - rnon), 0.0)
        np.add.at(store.Z, mi, dz)
        np.add.at(store.R, rb[active], lr * zrows[active])
        np.add.at(store.R, rn[active], -lr * zrows[active])
    if lam > 0.0:
        shrink = 1.0 - lr * lam
        np.multiply.at(store.Z, mi, shrink)
        np.multiply.at(store.R, rb, shrink)
        np.multiply.at(store.R, rn, shrink)
    return mi, rb, rn, active


def _eligible_groups(graph: HeterogeneousGraph):
    """Flattened per-question pair index arrays for eligible questions."""
    cached = getattr(graph, "_eligible_groups", None)
    if cached is not None:
        return cached
    pos_lists, neg_lists = [], []
    for pos, neg in graph.question_groups:
        if len(pos) >= 2 and len(neg) >= 1:
            pos_lists.append(pos)
            neg_lists.append(neg)
    if not pos_lists:
        graph._eligible_groups = None
        return None
    pos_counts = np.asarray([len(p) for p in pos_lists], dtype=np.int64)
    neg_counts = np.asarray([len(nl) for nl in neg_lists], dtype=np.int64)
    pos_offsets = np.concatenate([[0], np.cumsum(pos_counts)[:-1]])
    neg_offsets = np.concatenate([[0], np.cumsum(neg_counts)[:-1]])
    out = (
        np.concatenate(pos_lists),
        pos_offsets,
        pos_counts,
        np.concatenate(neg_lists),
        neg_offsets,
        neg_counts,
    )
    graph._eligible_groups = out
    return out


def _qa_pairwise_batch(store, graph, rng, lr, lam, batch):
    """Pairwise-hinge batch over uniformly drawn eligible questions."""
    groups = _eligible_groups(graph)
    if groups is None:
        return None
    pos_cat, pos_off, pos_cnt, neg_cat, neg_off, neg_cnt = groups
    q = rng.integers(len(pos_cnt), size=batch)
    k_local = rng.integers(0, pos_cnt[q])
    k1_local = rng.integers(0, pos_cnt[q] - 1)
    k1_local = k1_local + (k1_local >= k_local)
    k2_local = rng.integers(0, neg_cnt[q])
    k = pos_cat[pos_off[q] + k_local]
    k1 = pos_cat[pos_off[q] + k1_local]
    k2 = neg_cat[neg_off[q] + k2_local]
    a = store.P[k]
    b = store.P[k1]
    c = store.P[k2]
    margin = np.einsum("bd,bd->b", a, b) - np.einsum("bd,bd->b", a, c)
    active = margin < 1.0
    if np.any(active):
        da = np.where(active[:, None], lr * (b - c), 0.0)
        np.add.at(store.P, k, da)
        np.add.at(store.P, k1[active], lr * a[active])
        np.add.at(store.P, k2[active], -lr * a[active])
    if lam > 0.0:
        shrink = 1.0 - lr * lam
        for idx in (k, k1, k2):
            np.multiply.at(store.P, idx, shrink)
    return k, k1, k2, active


def sgd_step_zf(store: EmbeddingStore, graph: HeterogeneousGraph, rng, cfg: TrainConfig):
    """Single RE co-occurrence step; returns the sampled row indices."""
    out = _run_edge_batch(store, graph, "re", rng, cfg.alpha, cfg.negatives, 1)
    if out is None:
        return None
    obj, fpos, negs = out
    return {"object": int(obj[0]), "feature": int(fpos[0]), "negatives": negs[0].copy()}


def sgd_step_pf(store: EmbeddingStore, graph: HeterogeneousGraph, rng, cfg: TrainConfig):
    """Single QA co-occurrence step; no-op (None) when the QA side is empty."""
    out = _run_edge_batch(store, graph, "qa", rng, cfg.alpha, cfg.negatives, 1)
    if out is None:
        return None
    obj, fpos, negs = out
    return {"object": int(obj[0]), "feature": int(fpos[0]), "negatives": negs[0].copy()}


def sgd_step_partial_label(store: EmbeddingStore, graph: HeterogeneousGraph, rng, cfg: TrainConfig):
    """Single type-hinge step over a uniformly sampled mention."""
    mi, rb, rn, active = _partial_label_batch(store, graph, rng, cfg.alpha, cfg.lam, 1)
    return {
        "mention": int(mi[0]),
        "best_candidate": int(rb[0]),
        "best_noncandidate": int(rn[0]),
        "active": bool(active[0]),
    }


def sgd_step_qa_pairwise(store: EmbeddingStore, graph: HeterogeneousGraph, rng, cfg: TrainConfig):
    """Single pairwise-hinge step; None (flagged no-op) without eligible questions."""
    out = _qa_pairwise_batch(store, graph, rng, cfg.alpha, cfg.lam, 1)
    if out is None:
        return None
    k, k1, k2, active = out
    return {"anchor": int(k[0]), "positive": int(k1[0]), "negative": int(k2[0]), "active": bool(active[0])}


# ---------------------------------------------------------------------------
# training loop


@dataclass
class CheckRecord:
    iteration: int
    phase: str
    O: float
    O_Z: float
    O_QA: float
    wall_ms: float


@dataclass
class PhaseResult:
    phase: str
    iterations: int
    stop_reason: str


@dataclass
class TrainStats:
    zf_steps: int = 0
    pl_steps: int = 0
    pf_steps: int = 0
    qa_steps: int = 0
    qa_noop_iterations: int = 0
    qa_pairwise_noops: int = 0
    phases: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.phases) and all(p.stop_reason == "converged" for p in self.phases)


@dataclass
class TrainResult:
    store: EmbeddingStore
    log: list
    stats: TrainStats


def _phase_objective(phase: str, triple: tuple[float, float, float]) -> float:
    o, o_z, o_qa = triple
    if phase == "re":
        return o_z
    if phase == "qa":
        return o_qa
    return o


def _run_joint_iteration(store, graph, cfg, rngs, lr, stats):
    coin_rng, re_rng, qa_rng = rngs
    b = cfg.batch_size
    if coin_rng.random() < cfg.re_qa_mix:
        _re_iteration(store, graph, cfg, re_rng, lr, stats, b)
    else:
        _qa_iteration(store, graph, cfg, qa_rng, lr, stats, b)


def _re_iteration(store, graph, cfg, rng, lr, stats, b):
    if _run_edge_batch(store, graph, "re", rng, lr, cfg.negatives, b) is not None:
        stats.zf_steps += b
    _partial_label_batch(store, graph, rng, lr, cfg.lam, b)
    stats.pl_steps += b


def _qa_iteration(store, graph, cfg, rng, lr, stats, b):
    if graph.num_pairs == 0:
        stats.qa_noop_iterations += 1
        return
    if _run_edge_batch(store, graph, "qa", rng, lr, cfg.negatives, b) is not None:
        stats.pf_steps += b
    if _qa_pairwise_batch(store, graph, rng, lr, cfg.lam, b) is None:
        stats.qa_pairwise_noops += 1
    else:
        stats.qa_steps += b


def _lr_at(cfg: TrainConfig, it: int) -> float:
    frac = (it - 1) / cfg.max_iterations
    return cfg.alpha * (1.0 - (1.0 - LR_FLOOR_FRACTION) * frac)


def _run_phase(store, graph, cfg, phase, rngs, stats, log, t0, global_iter):
    """One phase of the loop; returns the updated global iteration count."""
    triple = objective_total(store, graph, cfg)
    if not (store.all_finite() and all(np.isfinite(v) for v in triple)):
        raise TrainingDivergedError("non-finite objective at phase start")
    log.append(CheckRecord(global_iter, phase, *triple, (time.perf_counter() - t0) * 1e3))
    prev = _phase_objective(phase, triple)
    initial = prev
    stop_reason = "max_iterations"
    it = 0
    while it < cfg.max_iterations:
        it += 1
        global_iter += 1
        lr = _lr_at(cfg, it)
        if phase == "joint":
            _run_joint_iteration(store, graph, cfg, rngs, lr, stats)
        elif phase == "re":
            _re_iteration(store, graph, cfg, rngs[1], lr, stats, cfg.batch_size)
        else:
            _qa_iteration(store, graph, cfg, rngs[2], lr, stats, cfg.batch_size)
        if it % cfg.objective_check_every == 0 or it == cfg.max_iterations:
            triple = objective_total(store, graph, cfg)
            if not (store.all_finite() and all(np.isfinite(v) for v in triple)):
                raise TrainingDivergedError(f"non-finite values at iteration {global_iter}")
            log.append(CheckRecord(global_iter, phase, *triple, (time.perf_counter() - t0) * 1e3))
            cur = _phase_objective(phase, triple)
            if abs(cur) > DIVERGENCE_FACTOR * max(abs(initial), 1e-12) and cur > initial:
                raise TrainingDivergedError(
                    f"objective diverged at iteration {global_iter}: {cur:.6g} vs initial {initial:.6g}"
                )
            if abs(cur - prev) / max(abs(prev), 1e-12) < cfg.convergence_tol:
                stop_reason = "converged"
                prev = cur
                break
            prev = cur
    stats.phases.append(PhaseResult(phase, it, stop_reason))
    return global_iter


def _run_phase_threaded(store, graph, cfg, phase, stats, log, t0, global_iter):
    """Unsynchronized multi-worker variant; objective checks by coordinator."""
    triple = objective_total(store, graph, cfg)
    log.append(CheckRecord(global_iter, phase, *triple, (time.perf_counter() - t0) * 1e3))
    prev = _phase_objective(phase, triple)
    initial = prev
    stop_reason = "max_iterations"
    done = 0
    worker_rngs = [
        (
            stage_rng(cfg.seed, f"train/{phase}/w{t}/coin"),
            stage_rng(cfg.seed, f"train/{phase}/w{t}/re"),
            stage_rng(cfg.seed, f"train/{phase}/w{t}/qa"),
        )
        for t in range(cfg.threads)
    ]
    while done < cfg.max_iterations:
        window = min(cfg.objective_check_every, cfg.max_iterations - done)
        lr = _lr_at(cfg, done + 1)
        share = [window // cfg.threads] * cfg.threads
        share[0] += window - sum(share)

        def work(t):
            rngs = worker_rngs[t]
            for _ in range(share[t]):
                if phase == "joint":
                    _run_joint_iteration(store, graph, cfg, rngs, lr, stats)
                elif phase == "re":
                    _re_iteration(store, graph, cfg, rngs[1], lr, stats, cfg.batch_size)
                else:
                    _qa_iteration(store, graph, cfg, rngs[2], lr, stats, cfg.batch_size)

        threads = [threading.Thread(target=work, args=(t,)) for t in range(cfg.threads)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        done += window
        global_iter += window
        triple = objective_total(store, graph, cfg)
        if not (store.all_finite() and all(np.isfinite(v) for v in triple)):
            raise TrainingDivergedError(f"non-finite values at iteration {global_iter}")
        log.append(CheckRecord(global_iter, phase, *triple, (time.perf_counter() - t0) * 1e3))
        cur = _phase_objective(phase, triple)
        if abs(cur) > DIVERGENCE_FACTOR * max(abs(initial), 1e-12) and cur > initial:
            raise TrainingDivergedError(
                f"objective diverged at iteration {global_iter}: {cur:.6g} vs initial {initial:.6g}"
            )
        if abs(cur - prev) / max(abs(prev), 1e-12) < cfg.convergence_tol:
            stop_reason = "converged"
            break
        prev = cur
    stats.phases.append(PhaseResult(phase, done, stop_reason))
    return global_iter


def train(graph: HeterogeneousGraph, cfg: TrainConfig) -> TrainResult:
    """Learn all embeddings; returns the store, check log, and step stats.

    Raises TrainingDivergedError when the tracked objective exceeds ten
    times its initial value or any stored value goes non-finite.
    """
    init_rng = stage_rng(cfg.seed, "train/init")
    store = EmbeddingStore.initialize(graph, cfg.d, init_rng)
    rngs = (
        stage_rng(cfg.seed, "train/coin"),
        stage_rng(cfg.seed, "train/re"),
        stage_rng(cfg.seed, "train/qa"),
    )
    if cfg.mode == "joint":
        phases = ("joint",)
    elif cfg.mode == "qa_then_re":
        phases = ("qa", "re")
    else:
        phases = ("re", "qa")

    log: list[CheckRecord] = []
    stats = TrainStats()
    t0 = time.perf_counter()
    global_iter = 0
    for phase in phases:
        if cfg.threads > 1:
            global_iter = _run_phase_threaded(store, graph, cfg, phase, stats, log, t0, global_iter)
        else:
            global_iter = _run_phase(store, graph, cfg, phase, rngs, stats, log, t0, global_iter)
    return TrainResult(store=store, log=log, stats=stats)


# ---------------------------------------------------------------------------
# model and log persistence


def _check_token(token: str, what: str):
    if not token or any(ch.isspace() for ch in token):
        raise ValueError(f"{what} {token!r} must be non-empty and whitespace-free")


def save_model(store: EmbeddingStore, path) -> None:
    """Text model file: magic header, then #Z/#P/#C/#R sections of id + floats."""
    sections = (
        ("#Z", store.mention_ids, store.Z),
        ("#P", store.pair_ids, store.P),
        ("#C", store.feature_strings, store.C),
        ("#R", store.type_names, store.R),
    )
    for _, ids, arr in sections:
        if len(ids) != arr.shape[0]:
            raise ValueError("store ids do not cover all rows; cannot serialize")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{MODEL_MAGIC} {MODEL_VERSION} {store.d} {store.Z.shape[0]} "
            f"{store.P.shape[0]} {store.C.shape[0]} {store.R.shape[0]}\n"
        )
        for name, ids, arr in sections:
            fh.write(name + "\n")
            for row_id, row in zip(ids, arr):
                _check_token(row_id, "row id")
                fh.write(row_id + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_model(path) -> EmbeddingStore:
    """Parse a model file back into an EmbeddingStore (full precision)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        if int(header[1]) != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {header[1]}")
        d, n_z, n_p, m, k_r = (int(x) for x in header[2:])
        expected = {"#Z": n_z, "#P": n_p, "#C": m, "#R": k_r}
        sections: dict[str, tuple[list[str], list[np.ndarray]]] = {}
        current = None
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line not in expected:
                    raise ValueError(f"{path}: unknown section {line!r}")
                current = line
                sections[current] = ([], [])
                continue
            if current is None:
                raise ValueError(f"{path}: row before any section header")
            parts = line.split(" ")
            if len(parts) != 1 + d:
                raise ValueError(f"{path}: row has {len(parts) - 1} values, expected {d}")
            ids, rows = sections[current]
            ids.append(parts[0])
            rows.append(np.asarray([float(x) for x in parts[1:]], dtype=np.float64))
    for name, count in expected.items():
        got = len(sections.get(name, ([], []))[0])
        if got != count:
            raise ValueError(f"{path}: section {name} has {got} rows, header promises {count}")

    def stack(name, count):
        ids, rows = sections.get(name, ([], []))
        arr = np.vstack(rows) if rows else np.zeros((0, d), dtype=np.float64)
        return tuple(ids), arr

    mention_ids, Z = stack("#Z", n_z)
    pair_ids, P = stack("#P", n_p)
    feature_strings, C = stack("#C", m)
    type_names, R = stack("#R", k_r)
    return EmbeddingStore(
        Z=Z, P=P, C=C, R=R, d=d,
        mention_ids=mention_ids,
        pair_ids=pair_ids,
        feature_strings=feature_strings,
        type_names=type_names,
    )


def write_training_log(log: Sequence[CheckRecord], path) -> None:
    """Objective-check log as CSV; wall_ms is elapsed time, not reproducible."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,phase,O,O_Z,O_QA,wall_ms\n")
        for rec in log:
            fh.write(
                f"{rec.iteration},{rec.phase},{rec.O!r},{rec.O_Z!r},{rec.O_QA!r},{rec.wall_ms:.3f}\n"
            )
