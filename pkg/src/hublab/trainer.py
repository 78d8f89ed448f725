"""Desk-scale trainer: synthetic planted-hub data, analytic-gradient
descent on the combined objective, and parameter-space gradient checks.

The model is either a free embedding table (one learnable vector per
sample) or a linear projection over fixed features. Embeddings are unit
normalized inside the forward pass and the chain rule through that
normalization is applied analytically, so finite differences over raw
parameters reproduce the assembled gradients.

Targets are constants within a step: centrality weights, neighbor target
vectors, and transport plans are computed from the current batch and
memory bank, then held fixed while the loss is differentiated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .bank import (
    MemoryBank,
    centrality_weights,
    cross_centrality,
    intra_centrality,
    push_batch,
)
from .core import (
    MODALITY_GALLERY,
    MODALITY_QUERY,
    EmbeddingSet,
    SimilarityMatrix,
    cosine_similarity_matrix,
    l2_normalize,
)
from .errors import DivergenceDetected, InvalidFraction
from .hubness import HubnessReport, RelevanceLabels, hubness_report
from .losses import (
    GRAD_MODE_EXACT,
    GRAD_MODE_PAPER,
    LossBundle,
    NeighborSet,
    loss_kl,
    loss_nbi,
    loss_wti,
    neighbor_targets,
    select_neighbors,
    total_loss,
)
from .transport import BlendedTarget, TransportPlan, blend_targets, loss_opt, sinkhorn_plan

MODEL_TABLE = "embedding-table"
MODEL_PROJECTION = "linear-projection"

POOL_BATCH = "batch"
POOL_BANK = "bank"

CURVE_COLUMNS = ("step", "total", "wti", "nbi", "opt", "kl",
                 "sinkhorn_residual", "sinkhorn_iterations")


@dataclass
class TrainConfig:
    """Every knob of the training loop; the seed fixes all randomness."""

    kappa: float = 0.1
    beta: float = 0.5
    epsilon_sinkhorn: float = 0.05
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iter: int = 2000
    temperature: float = 1.0
    k_neighbors: int = 20
    bank_capacity: int = 10240
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 128
    seed: int = 0
    grad_mode: str = GRAD_MODE_EXACT
    normalize_weights: bool = True
    model: str = MODEL_TABLE
    use_wti: bool = True
    use_nbi: bool = True
    use_opt: bool = True
    use_kl: bool = True
    neighbor_pool: str = POOL_BATCH
    report_k: int = 15
    hub_size_factor: float = 2.0
    atkinson_epsilon: float = 0.5

    def __post_init__(self):
        if self.grad_mode not in (GRAD_MODE_EXACT, GRAD_MODE_PAPER):
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}")
        if self.model not in (MODEL_TABLE, MODEL_PROJECTION):
            raise ValueError(f"unknown model {self.model!r}")
        if self.neighbor_pool not in (POOL_BATCH, POOL_BANK):
            raise ValueError(f"unknown neighbor_pool {self.neighbor_pool!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        for name in ("kappa", "epsilon_sinkhorn", "sinkhorn_tol", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("k_neighbors", "bank_capacity", "epochs", "batch_size",
                     "sinkhorn_max_iter", "report_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class PairedData:
    """Matched query/gallery embeddings plus relevance labels.

    ``planted`` flags the gallery rows that were contracted toward the
    centroid by the synthetic generator (all False for imported data).
    """

    queries: EmbeddingSet
    galleries: EmbeddingSet
    labels: RelevanceLabels
    planted: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.queries.n


@dataclass
class TrainResult:
    queries: EmbeddingSet
    galleries: EmbeddingSet
    loss_curve: list
    report_before: HubnessReport
    report_after: HubnessReport


_ANCHOR_SCALE = 1.0  # shared-direction strength, relative to sqrt(d)


def synth_generate(n_pairs: int, d: int, hub_fraction: float,
                   contraction: float, noise: float, seed: int) -> PairedData:
    """Synthetic matched pairs with a planted-hub subset.

    Gallery vectors share a common direction (so the gallery centroid is
    meaningful); a ``hub_fraction`` subset is contracted toward that
    centroid, which raises their similarity to everything and makes them
    behave like hubs. Queries are noisy copies of their gallery mates.
    ``contraction`` of 1.0 leaves the planted rows untouched.
    """
    if not 0.0 <= hub_fraction < 1.0:
        raise InvalidFraction(f"hub_fraction must lie in [0, 1), got {hub_fraction}")
    if not 0.0 < contraction <= 1.0:
        raise InvalidFraction(f"contraction must lie in (0, 1], got {contraction}")
    if noise < 0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    anchor_rng, z_rng, pick_rng, noise_rng = np.random.default_rng(seed).spawn(4)

    anchor = anchor_rng.normal(size=d)
    anchor /= np.linalg.norm(anchor)
    raw = _ANCHOR_SCALE * np.sqrt(d) * anchor + z_rng.normal(size=(n_pairs, d))
    galleries = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    planted = np.zeros(n_pairs, dtype=bool)
    n_hub = int(round(hub_fraction * n_pairs))
    if n_hub:
        chosen = np.sort(pick_rng.choice(n_pairs, size=n_hub, replace=False))
        planted[chosen] = True
        centroid = galleries.mean(axis=0)
        moved = centroid + contraction * (galleries[chosen] - centroid)
        galleries[chosen] = moved / np.linalg.norm(moved, axis=1, keepdims=True)

    if noise > 0:
        # noise is the expected perturbation norm relative to the unit mate
        jitter = galleries + noise / np.sqrt(d) * noise_rng.normal(size=(n_pairs, d))
        queries = jitter / np.linalg.norm(jitter, axis=1, keepdims=True)
    else:
        queries = galleries.copy()

    classes = list(range(n_pairs))
    return PairedData(
        queries=EmbeddingSet(queries, MODALITY_QUERY,
                             ids=[f"q{i:05d}" for i in range(n_pairs)], labels=classes),
        galleries=EmbeddingSet(galleries, MODALITY_GALLERY,
                               ids=[f"g{i:05d}" for i in range(n_pairs)],
                               labels=list(classes)),
        labels=RelevanceLabels.diagonal(n_pairs),
        planted=planted,
    )


class _TableModel:
    """One learnable vector per sample, renormalized after every step."""

    def __init__(self, queries: EmbeddingSet, galleries: EmbeddingSet):
        self.table_q = l2_normalize(queries).data.copy()
        self.table_g = l2_normalize(galleries).data.copy()

    @property
    def params(self) -> list[np.ndarray]:
        return [self.table_q, self.table_g]

    def forward(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        eq = self.table_q[idx]
        eq = eq / np.linalg.norm(eq, axis=1, keepdims=True)
        eg = self.table_g[idx]
        eg = eg / np.linalg.norm(eg, axis=1, keepdims=True)
        return eq, eg

    def full_embeddings(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.table_q / np.linalg.norm(self.table_q, axis=1, keepdims=True)
        g = self.table_g / np.linalg.norm(self.table_g, axis=1, keepdims=True)
        return q, g

    def backward(self, idx, eq, eg, grad_s, extra_q=None, extra_g=None):
        d_eq = grad_s @ eg
        if extra_q is not None:
            d_eq = d_eq + extra_q
        d_eg = grad_s.T @ eq
        if extra_g is not None:
            d_eg = d_eg + extra_g
        norm_q = np.linalg.norm(self.table_q[idx], axis=1, keepdims=True)
        norm_g = np.linalg.norm(self.table_g[idx], axis=1, keepdims=True)
        gq_rows = (d_eq - (d_eq * eq).sum(axis=1, keepdims=True) * eq) / norm_q
        gg_rows = (d_eg - (d_eg * eg).sum(axis=1, keepdims=True) * eg) / norm_g
        gq = np.zeros_like(self.table_q)
        gg = np.zeros_like(self.table_g)
        gq[idx] = gq_rows
        gg[idx] = gg_rows
        return [gq, gg]

    def postprocess(self):
        self.table_q /= np.linalg.norm(self.table_q, axis=1, keepdims=True)
        self.table_g /= np.linalg.norm(self.table_g, axis=1, keepdims=True)


class _ProjectionModel:
    """Shared-dimension linear heads over frozen features, one per modality."""

    def __init__(self, queries: EmbeddingSet, galleries: EmbeddingSet):
        self.feat_q = queries.data.copy()
        self.feat_g = galleries.data.copy()
        d = queries.dim
        self.w_q = np.eye(d)
        self.w_g = np.eye(d)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w_q, self.w_g]

    def _embed(self, feats, w):
        raw = feats @ w
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        return raw / norms, norms

    def forward(self, idx):
        eq, _ = self._embed(self.feat_q[idx], self.w_q)
        eg, _ = self._embed(self.feat_g[idx], self.w_g)
        return eq, eg

    def full_embeddings(self):
        eq, _ = self._embed(self.feat_q, self.w_q)
        eg, _ = self._embed(self.feat_g, self.w_g)
        return eq, eg

    def backward(self, idx, eq, eg, grad_s, extra_q=None, extra_g=None):
        d_eq = grad_s @ eg
        if extra_q is not None:
            d_eq = d_eq + extra_q
        d_eg = grad_s.T @ eq
        if extra_g is not None:
            d_eg = d_eg + extra_g
        _, norm_q = self._embed(self.feat_q[idx], self.w_q)
        _, norm_g = self._embed(self.feat_g[idx], self.w_g)
        d_raw_q = (d_eq - (d_eq * eq).sum(axis=1, keepdims=True) * eq) / norm_q
        d_raw_g = (d_eg - (d_eg * eg).sum(axis=1, keepdims=True) * eg) / norm_g
        return [self.feat_q[idx].T @ d_raw_q, self.feat_g[idx].T @ d_raw_g]

    def postprocess(self):
        pass


def _build_model(config: TrainConfig, queries, galleries):
    if config.model == MODEL_TABLE:
        return _TableModel(queries, galleries)
    return _ProjectionModel(queries, galleries)


class Adam:
    """Plain Adam over a list of parameter arrays."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class _BatchTargets:
    """Constants for one optimization step (no gradients flow into these)."""

    w_q: np.ndarray
    w_g: np.ndarray
    nbi_q2g: list
    nbi_g2q: list
    opt_q2g: BlendedTarget
    opt_g2q: BlendedTarget
    pool_g: np.ndarray | None
    pool_q: np.ndarray | None
    sinkhorn: dict = field(default_factory=dict)


def _weights_for(bank: MemoryBank, batch: EmbeddingSet, config: TrainConfig):
    if bank.fill(batch.modality) == 0:
        return np.ones(batch.n)
    c = intra_centrality(bank, batch)
    return centrality_weights(c, config.kappa, config.normalize_weights)


def _cross_values(bank: MemoryBank, batch: EmbeddingSet) -> np.ndarray:
    opposite = bank._opposite(batch.modality)
    if bank.fill(opposite) == 0:
        return np.zeros(batch.n)
    return cross_centrality(bank, batch).values


def _neighbor_targets_for(anchor_scores: np.ndarray, cross_vals: np.ndarray,
                          k: int, temperature: float) -> list:
    """(NeighborSet, H) per anchor from one direction's candidate scores."""
    s = SimilarityMatrix(anchor_scores, temperature)
    s_tilde = SimilarityMatrix(anchor_scores - cross_vals[None, :], temperature)
    out = []
    for i in range(anchor_scores.shape[0]):
        ns = select_neighbors(s, i, k, ground_truth=i)
        out.append((ns, neighbor_targets(s_tilde, ns)))
    return out


def compute_targets(config: TrainConfig, bank: MemoryBank,
                    eq: np.ndarray, eg: np.ndarray) -> _BatchTargets:
    """All per-step constants: weights, neighbor targets, transport targets."""
    b, d = eq.shape
    batch_q = EmbeddingSet(eq, MODALITY_QUERY)
    batch_g = EmbeddingSet(eg, MODALITY_GALLERY)
    scores = eq @ eg.T

    w_q = _weights_for(bank, batch_q, config) if config.use_wti else np.ones(b)
    w_g = _weights_for(bank, batch_g, config) if config.use_wti else np.ones(b)

    pool_g = pool_q = None
    if config.neighbor_pool == POOL_BANK:
        if bank.fill(MODALITY_GALLERY):
            pool_g = np.asarray(bank.vectors(MODALITY_GALLERY))
        if bank.fill(MODALITY_QUERY):
            pool_q = np.asarray(bank.vectors(MODALITY_QUERY))

    nbi_q2g: list = []
    nbi_g2q: list = []
    if config.use_nbi:
        cross_g = _cross_values(bank, batch_g)
        cross_q = _cross_values(bank, batch_q)
        cand_q2g = scores
        cross_q2g = cross_g
        if pool_g is not None:
            cand_q2g = np.concatenate([scores, eq @ pool_g.T], axis=1)
            pool_set = EmbeddingSet(pool_g, MODALITY_GALLERY)
            cross_q2g = np.concatenate([cross_g, _cross_values(bank, pool_set)])
        nbi_q2g = _neighbor_targets_for(cand_q2g, cross_q2g,
                                        config.k_neighbors, config.temperature)
        cand_g2q = scores.T
        cross_g2q = cross_q
        if pool_q is not None:
            cand_g2q = np.concatenate([scores.T, eg @ pool_q.T], axis=1)
            pool_set = EmbeddingSet(pool_q, MODALITY_QUERY)
            cross_g2q = np.concatenate([cross_q, _cross_values(bank, pool_set)])
        nbi_g2q = _neighbor_targets_for(cand_g2q, cross_g2q,
                                        config.k_neighbors, config.temperature)

    eye = BlendedTarget(np.eye(b), 0.0)
    opt_q2g = opt_g2q = eye
    sink_summary = {"residual": 0.0, "iterations_used": 0, "warning": False}
    if config.use_opt:
        # slow batches surface through the warning flag recorded below, so
        # the per-batch RuntimeWarning is consumed here instead of emitted
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            plan = sinkhorn_plan(SimilarityMatrix(scores, config.temperature),
                                 config.epsilon_sinkhorn, config.sinkhorn_tol,
                                 config.sinkhorn_max_iter)
        opt_q2g = blend_targets(plan, config.beta)
        plan_t = TransportPlan(plan.q.T.copy(), plan.col_marginal, plan.row_marginal,
                               plan.epsilon, plan.iterations_used, plan.residual)
        opt_g2q = blend_targets(plan_t, config.beta)
        sink_summary = plan.summary()

    return _BatchTargets(w_q, w_g, nbi_q2g, nbi_g2q, opt_q2g, opt_g2q,
                         pool_g, pool_q, sink_summary)


def _zero_bundle(b: int) -> LossBundle:
    return LossBundle(0.0, np.zeros((b, b)))


def _nbi_direction(anchor_scores: np.ndarray, pairs: list, mode: str,
                   temperature: float, b: int):
    """Mean neighbor loss over anchors; splits the gradient into the batch
    columns and any bank-pool columns."""
    s = SimilarityMatrix(anchor_scores, temperature)
    grad = np.zeros_like(anchor_scores)
    value = 0.0
    for ns, h in pairs:
        bundle = loss_nbi(s, h, ns, mode)
        value += bundle.value
        grad += bundle.grad
    n_anchors = len(pairs)
    value /= n_anchors
    grad /= n_anchors
    ext = grad[:, b:] if anchor_scores.shape[1] > b else None
    return value, grad[:, :b], ext


def batch_loss(config: TrainConfig, eq: np.ndarray, eg: np.ndarray,
               targets: _BatchTargets):
    """Assemble the half-sum objective over both directions.

    Returns (value, per-part values, dL/dS over the batch grid, and the
    extra embedding gradients contributed by bank-pool neighbor columns).
    """
    b = eq.shape[0]
    scores = eq @ eg.T
    s_q2g = SimilarityMatrix(scores, config.temperature)
    s_g2q = SimilarityMatrix(scores.T, config.temperature)

    parts = {"q2g": {}, "g2q": {}}
    ext_q = ext_g = None

    for direction, s_dir, w in (("q2g", s_q2g, targets.w_q),
                                ("g2q", s_g2q, targets.w_g)):
        parts[direction]["wti"] = (loss_wti(s_dir, w)
                                   if config.use_wti else _zero_bundle(b))

    if config.use_nbi:
        cand = scores
        if targets.pool_g is not None:
            cand = np.concatenate([scores, eq @ targets.pool_g.T], axis=1)
        value, grad_batch, ext = _nbi_direction(cand, targets.nbi_q2g,
                                                config.grad_mode,
                                                config.temperature, b)
        parts["q2g"]["nbi"] = LossBundle(value, grad_batch)
        if ext is not None:
            ext_q = 0.5 * (ext @ targets.pool_g)
        cand = scores.T
        if targets.pool_q is not None:
            cand = np.concatenate([scores.T, eg @ targets.pool_q.T], axis=1)
        value, grad_batch, ext = _nbi_direction(cand, targets.nbi_g2q,
                                                config.grad_mode,
                                                config.temperature, b)
        parts["g2q"]["nbi"] = LossBundle(value, grad_batch)
        if ext is not None:
            ext_g = 0.5 * (ext @ targets.pool_q)
    else:
        parts["q2g"]["nbi"] = _zero_bundle(b)
        parts["g2q"]["nbi"] = _zero_bundle(b)

    if config.use_opt:
        parts["q2g"]["opt"] = loss_opt(s_q2g, targets.opt_q2g)
        parts["g2q"]["opt"] = loss_opt(s_g2q, targets.opt_g2q)
    else:
        parts["q2g"]["opt"] = _zero_bundle(b)
        parts["g2q"]["opt"] = _zero_bundle(b)

    if config.use_kl:
        # single-vector mode: the high level coincides with the low level,
        # so the loss is identically zero but the path stays assembled
        for direction, s_dir in (("q2g", s_q2g), ("g2q", s_g2q)):
            kl = loss_kl(s_dir, s_dir)
            parts[direction]["kl"] = LossBundle(kl.value, kl.grad + kl.grad_high)
    else:
        parts["q2g"]["kl"] = _zero_bundle(b)
        parts["g2q"]["kl"] = _zero_bundle(b)

    total = total_loss(parts)
    part_values = {
        name: 0.5 * (parts["q2g"][name].value + parts["g2q"][name].value)
        for name in ("wti", "nbi", "opt", "kl")
    }
    return total.value, part_values, total.grad, ext_q, ext_g


def train(config: TrainConfig, data: PairedData) -> TrainResult:
    """Run the optimization loop and report hubness before and after."""
    queries = l2_normalize(data.queries)
    galleries = l2_normalize(data.galleries)
    n, d = queries.data.shape
    model = _build_model(config, queries, galleries)
    bank = MemoryBank(config.bank_capacity, d)
    adam = Adam(model.params, config.learning_rate)
    rng = np.random.default_rng(config.seed)

    report_before = _full_report(config, model)
    frozen = config.learning_rate == 0.0
    curve: list[dict] = []
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            if idx.size < 2:
                continue
            eq, eg = model.forward(idx)
            targets = compute_targets(config, bank, eq, eg)
            value, part_values, grad_s, ext_q, ext_g = batch_loss(
                config, eq, eg, targets)
            if not np.isfinite(value):
                raise DivergenceDetected(f"loss became non-finite at step {step}")
            if not frozen:
                grads = model.backward(idx, eq, eg, grad_s, ext_q, ext_g)
                adam.step(model.params, grads)
                model.postprocess()
            push_batch(bank, EmbeddingSet(eq, MODALITY_QUERY))
            push_batch(bank, EmbeddingSet(eg, MODALITY_GALLERY))
            curve.append({
                "step": step,
                "total": value,
                "wti": part_values["wti"],
                "nbi": part_values["nbi"],
                "opt": part_values["opt"],
                "kl": part_values["kl"],
                "sinkhorn_residual": targets.sinkhorn["residual"],
                "sinkhorn_iterations": targets.sinkhorn["iterations_used"],
            })
            step += 1

    report_after = _full_report(config, model)
    full_q, full_g = model.full_embeddings()
    return TrainResult(
        queries=EmbeddingSet(full_q, MODALITY_QUERY, queries.ids, queries.labels),
        galleries=EmbeddingSet(full_g, MODALITY_GALLERY,
                               galleries.ids, galleries.labels),
        loss_curve=curve,
        report_before=report_before,
        report_after=report_after,
    )


def _full_report(config: TrainConfig, model) -> HubnessReport:
    full_q, full_g = model.full_embeddings()
    s = cosine_similarity_matrix(EmbeddingSet(full_q, MODALITY_QUERY),
                                 EmbeddingSet(full_g, MODALITY_GALLERY))
    k = min(config.report_k, s.m)
    return hubness_report(s, k, config.hub_size_factor, config.atkinson_epsilon)


def _max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Infinity-norm error relative to the gradient scale, floored at 1.

    The floor makes the measure absolute for near-stationary points, where
    a true ratio would just amplify finite-difference noise.
    """
    scale = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1.0)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def grad_check(config: TrainConfig, data: PairedData, h: float = 1e-5) -> dict:
    """Central finite differences of the total loss against the assembled
    analytic gradients, per loss term and combined.

    Targets are computed once from the unperturbed parameters and held
    fixed, matching how a training step treats them. Returns a mapping
    from term name ('wti', 'nbi', 'opt', 'kl', 'total') to the max
    relative error over every model parameter.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"step h must lie in [1e-7, 1e-3], got {h}")
    queries = l2_normalize(data.queries)
    galleries = l2_normalize(data.galleries)
    n = queries.n
    idx = np.arange(min(config.batch_size, n))
    model = _build_model(config, queries, galleries)
    bank = MemoryBank(config.bank_capacity, queries.dim)
    eq0, eg0 = model.forward(idx)
    push_batch(bank, EmbeddingSet(eq0, MODALITY_QUERY))
    push_batch(bank, EmbeddingSet(eg0, MODALITY_GALLERY))

    # targets for every term, so single-loss configs below can reuse them
    all_on = replace(config, use_wti=True, use_nbi=True, use_opt=True, use_kl=True)
    base_targets = compute_targets(all_on, bank, eq0, eg0)

    def loss_value(cfg) -> float:
        eq, eg = model.forward(idx)
        value, _, _, _, _ = batch_loss(cfg, eq, eg, base_targets)
        return value

    def analytic_grads(cfg) -> list[np.ndarray]:
        eq, eg = model.forward(idx)
        _, _, grad_s, ext_q, ext_g = batch_loss(cfg, eq, eg, base_targets)
        return model.backward(idx, eq, eg, grad_s, ext_q, ext_g)

    if config.model == MODEL_TABLE:
        active_rows = idx
    else:
        active_rows = None  # every projection entry matters

    terms = {
        "wti": replace(config, use_wti=True, use_nbi=False, use_opt=False, use_kl=False),
        "nbi": replace(config, use_wti=False, use_nbi=True, use_opt=False, use_kl=False),
        "opt": replace(config, use_wti=False, use_nbi=False, use_opt=True, use_kl=False),
        "kl": replace(config, use_wti=False, use_nbi=False, use_opt=False, use_kl=True),
        "total": config,
    }
    errors = {}
    for name, cfg in terms.items():
        analytic = analytic_grads(cfg)
        numeric = [np.zeros_like(p) for p in model.params]
        for p, num in zip(model.params, numeric):
            if active_rows is not None and p.shape[0] >= len(queries.data):
                rows = active_rows
            else:
                rows = range(p.shape[0])
            for r in rows:
                for cidx in range(p.shape[1]):
                    keep = p[r, cidx]
                    p[r, cidx] = keep + h
                    up = loss_value(cfg)
                    p[r, cidx] = keep - h
                    down = loss_value(cfg)
                    p[r, cidx] = keep
                    num[r, cidx] = (up - down) / (2.0 * h)
        errors[name] = max(
            _max_rel_error(a, f) for a, f in zip(analytic, numeric))
    return errors
