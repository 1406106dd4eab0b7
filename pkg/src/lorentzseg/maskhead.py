"""Mask-classification head on the hyperboloid.

N learned queries each predict a class distribution and a soft binary
mask.  Class logits score queries against the class prototypes
(sample-to-prototype),

    q_ij = -w_d * d(x_i, q_j) - max(0, ext(x_i, q_j) - aper(x_i)),

with an appended learned scalar column for "no object".  Mask logits
score pixel embeddings against each mask query (sample-to-sample),

    m^d = (-d + b_d)/s_d,   m^a = (-ext + b_a)/s_a,   m^q = m^d + m^a,

with a sigmoid downstream; the published shifts put the cone boundary
(b_a = 0.17, the unit-radius aperture) and the b_d = 1 distance shell at
logit zero.  Training matches queries to ground-truth segments by
Hungarian assignment each step, applies cross-entropy on classes plus
focal and dice losses on matched masks, supervises unmatched queries
toward no-object, and backpropagates through every term by chain rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import grad as gr
from .entailment import (
    EntailmentConfig,
    PrototypeSet,
    anchor_apertures,
    cross_entropy_rows,
    ext_angles_to_anchors,
    softmax_rows,
)
from .errors import TrainingDivergedError, UsageError
from .lorentz import (
    EmbeddingGrid,
    batched_exp_lift,
    distances_from_inner,
    inner_to_anchors,
)
from .segtoy import (
    DescriptorBank,
    EncoderParams,
    LabelMap,
    SyntheticScene,
    TrainConfig,
    _encoder_parts,
    build_prototypes,
    init_encoder,
    scene_segments,
)
from .uncertainty import ScalarMap, angle_uncertainty

_EPS = 1e-12


@dataclass(frozen=True)
class MaskHeadConfig:
    n_queries: int = 12
    w_d: float = 1.0
    b_d: float = 1.0
    s_d: float = 0.1
    b_a: float = 0.17
    s_a: float = 0.02
    gamma: float = 2.0
    lambda_cls: float = 1.0
    lambda_focal: float = 20.0
    lambda_dice: float = 1.0
    no_object_weight: float = 0.1
    # cone constant for the class-logit apertures; keep equal to the
    # training K so the hinge matches the prototypes' cones
    K: float = 0.1
    # the 1/s_a and 1/s_d factors make the mask-logit path far stiffer
    # than the class-logit path; per-group learning rates rebalance them
    # (the usual encoder-vs-head split)
    class_lr_scale: float = 100.0

    def __post_init__(self):
        if self.s_d <= 0 or self.s_a <= 0:
            raise UsageError("logit scales must be positive")
        if self.n_queries < 1:
            raise UsageError("need at least one query")
        if self.class_lr_scale <= 0:
            raise UsageError("class_lr_scale must be positive")


@dataclass
class QuerySet:
    """Learnable query embeddings: tangent parameters plus the no-object
    bias; lifted coordinates are derived on demand."""

    class_tangents: np.ndarray  # (N, d)
    mask_tangents: np.ndarray  # (N, d)
    no_object_bias: float = 0.0

    def __post_init__(self):
        if self.class_tangents.shape != self.mask_tangents.shape:
            raise UsageError("class and mask tangents must share a shape")
        if not (np.all(np.isfinite(self.class_tangents)) and np.all(np.isfinite(self.mask_tangents))):
            raise UsageError("query tangents must be finite")

    @property
    def n(self) -> int:
        return self.class_tangents.shape[0]

    def class_points(self):
        return batched_exp_lift(self.class_tangents)

    def mask_points(self):
        return batched_exp_lift(self.mask_tangents)


def class_query_logits(protos: PrototypeSet, queries: QuerySet, cfg: MaskHeadConfig) -> np.ndarray:
    """(N, C) matrix of -w_d*distance minus the cone hinge."""
    qt, qsp = queries.class_points()
    inner = inner_to_anchors(qsp, qt, protos.spatial, protos.time)
    d = distances_from_inner(inner)
    ext = ext_angles_to_anchors(
        qsp, qt, protos.spatial, protos.time, inner=inner, anchor_norms=protos.spatial_norms
    )
    apers = anchor_apertures(protos.spatial_norms, cfg.K)
    hinge = np.maximum(0.0, ext - apers[None, :])
    return -cfg.w_d * d - hinge


def mask_query_logits(queries: QuerySet, grid: EmbeddingGrid, cfg: MaskHeadConfig) -> np.ndarray:
    """(N, H, W) mask logits m^d + m^a before the sigmoid."""
    mt, msp = queries.mask_points()
    sp, t = grid.flat()
    inner = inner_to_anchors(sp, t, msp, mt)
    d = distances_from_inner(inner)
    ext = ext_angles_to_anchors(sp, t, msp, mt, inner=inner)
    logits = (-d + cfg.b_d) / cfg.s_d + (-ext + cfg.b_a) / cfg.s_a
    h, w = grid.shape
    return logits.T.reshape(queries.n, h, w)


def hungarian_match(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost injective assignment of M columns (segments) to N rows
    (queries); returns the query index for each segment."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise UsageError("cost must be a matrix")
    n, m = cost.shape
    if m > n:
        raise UsageError(f"more segments ({m}) than queries ({n})")
    if not np.all(np.isfinite(cost)):
        raise UsageError("matching cost must be finite")
    seg_idx, query_idx = linear_sum_assignment(cost.T)
    out = np.empty(m, dtype=np.int64)
    out[seg_idx] = query_idx
    return out


def focal_loss(pred_prob_map: np.ndarray, gt_mask: np.ndarray, gamma: float = 2.0) -> float:
    """Mean of -(1 - p_t)^gamma * log p_t over the map."""
    p = np.asarray(pred_prob_map, dtype=np.float64)
    g = np.asarray(gt_mask, dtype=np.float64)
    if p.shape != g.shape:
        raise UsageError("shape mismatch")
    p = np.clip(p, 1e-300, 1.0 - 1e-16)
    pt = np.where(g > 0.5, p, 1.0 - p)
    return float(np.mean(-((1.0 - pt) ** gamma) * np.log(pt)))


def dice_loss(pred_prob_map: np.ndarray, gt_mask: np.ndarray, eps: float = 1.0) -> float:
    """1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)."""
    p = np.asarray(pred_prob_map, dtype=np.float64)
    g = np.asarray(gt_mask, dtype=np.float64)
    if p.shape != g.shape:
        raise UsageError("shape mismatch")
    num = 2.0 * float((p * g).sum()) + eps
    den = float(p.sum() + g.sum()) + eps
    return 1.0 - num / den


def matching_cost(class_probs: np.ndarray, mask_probs: np.ndarray, segments, cfg: MaskHeadConfig) -> np.ndarray:
    """(N, M) assignment cost: -lambda_cls * p(class) + lambda_focal *
    focal + lambda_dice * dice.  ``segments`` is a list of
    (class_column, binary mask)."""
    n = class_probs.shape[0]
    cost = np.zeros((n, len(segments)))
    for m, (col, gmask) in enumerate(segments):
        for j in range(n):
            cost[j, m] = (
                -cfg.lambda_cls * class_probs[j, col]
                + cfg.lambda_focal * focal_loss(mask_probs[j], gmask, cfg.gamma)
                + cfg.lambda_dice * dice_loss(mask_probs[j], gmask)
            )
    return cost


def semantic_map(class_probs: np.ndarray, mask_probs: np.ndarray, legend=None) -> LabelMap:
    """Per-pixel argmax of sum_i class_probs[i, c] * mask_probs[i, h, w];
    ties break to the lowest class index."""
    scores = np.einsum("nc,nhw->hwc", class_probs, mask_probs)
    values = scores.argmax(axis=2)
    return LabelMap(values, dict(legend or {}))


def mask_angle_uncertainty(grid: EmbeddingGrid, queries: QuerySet) -> ScalarMap:
    """Minimum exterior angle against the mask queries."""
    mt, msp = queries.mask_points()
    return angle_uncertainty(grid, (msp, mt))


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def _softplus(z):
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


def _focal_value_and_dlogit(z, g, gamma):
    """Stable focal loss mean and its gradient w.r.t. the logits."""
    p = 1.0 / (1.0 + np.exp(-z))
    log_p = -_softplus(-z)
    log_1p = -_softplus(z)
    q = 1.0 - p
    val = np.where(g > 0.5, -(q**gamma) * log_p, -(p**gamma) * log_1p)
    dz = np.where(
        g > 0.5,
        gamma * p * (q**gamma) * log_p - q ** (gamma + 1.0),
        -gamma * (p**gamma) * q * log_1p + p ** (gamma + 1.0),
    )
    n = z.size
    return float(val.sum() / n), dz / n


def _dice_value_and_dlogit(z, g, eps=1.0):
    p = 1.0 / (1.0 + np.exp(-z))
    num = 2.0 * float((p * g).sum()) + eps
    den = float(p.sum() + g.sum()) + eps
    val = 1.0 - num / den
    dp = -(2.0 * g * den - num) / (den * den)
    return val, dp * p * (1.0 - p)


@dataclass
class MaskHeadResult:
    queries: QuerySet
    params: EncoderParams
    protos: PrototypeSet
    bank: DescriptorBank
    trace: dict
    head_cfg: MaskHeadConfig
    train_cfg: TrainConfig

    @property
    def final_loss(self) -> float:
        return float(self.trace["total"][-1])


def _forward_state(params, queries, flat, protos, head_cfg, apers):
    a1, u = _encoder_parts(params, flat)
    v_p = params.alpha * u
    pt, psp = batched_exp_lift(v_p)
    qt, qsp = batched_exp_lift(queries.class_tangents)
    mt, msp = batched_exp_lift(queries.mask_tangents)
    inner_cq = inner_to_anchors(qsp, qt, protos.spatial, protos.time)
    d_cq = distances_from_inner(inner_cq)
    ext_cq = ext_angles_to_anchors(
        qsp, qt, protos.spatial, protos.time, inner=inner_cq, anchor_norms=protos.spatial_norms
    )
    hinge_active = ext_cq > apers[None, :]
    cls_logits = -head_cfg.w_d * d_cq - np.maximum(0.0, ext_cq - apers[None, :])
    full_logits = np.concatenate(
        [cls_logits, np.full((queries.n, 1), queries.no_object_bias)], axis=1
    )
    inner_mp = inner_to_anchors(psp, pt, msp, mt)
    d_mp = distances_from_inner(inner_mp)
    ext_mp = ext_angles_to_anchors(psp, pt, msp, mt, inner=inner_mp)
    mq = (-d_mp + head_cfg.b_d) / head_cfg.s_d + (-ext_mp + head_cfg.b_a) / head_cfg.s_a
    return {
        "a1": a1, "u": u, "v_p": v_p, "pt": pt, "psp": psp,
        "qt": qt, "qsp": qsp, "mt": mt, "msp": msp,
        "inner_cq": inner_cq, "d_cq": d_cq, "ext_cq": ext_cq,
        "hinge_active": hinge_active, "full_logits": full_logits,
        "inner_mp": inner_mp, "mq": mq,
    }


def _mask_loss_at(state, segments_flat, assign, head_cfg):
    """Class CE + matched focal/dice given a fixed assignment."""
    n = state["full_logits"].shape[0]
    n_cls = state["full_logits"].shape[1] - 1
    targets = np.full(n, n_cls, dtype=np.int64)
    for m, (col, _) in enumerate(segments_flat):
        targets[assign[m]] = col
    ce_rows = cross_entropy_rows(state["full_logits"], targets)
    weights = np.where(targets == n_cls, head_cfg.no_object_weight, 1.0)
    ce = float((ce_rows * weights).sum() / weights.sum())
    focal_total = dice_total = 0.0
    for m, (col, gmask) in enumerate(segments_flat):
        z = state["mq"].T[assign[m]]
        fv, _ = _focal_value_and_dlogit(z, gmask, head_cfg.gamma)
        dv, _ = _dice_value_and_dlogit(z, gmask)
        focal_total += fv
        dice_total += dv
    m_count = max(len(segments_flat), 1)
    mask_term = (head_cfg.lambda_focal * focal_total + head_cfg.lambda_dice * dice_total) / m_count
    return ce, mask_term, ce + mask_term, targets, weights


def train_maskhead(
    scene: SyntheticScene,
    bank: DescriptorBank,
    head_cfg: MaskHeadConfig,
    train_cfg: TrainConfig,
) -> MaskHeadResult:
    """Hungarian-matched mask-classification training, all gradients by
    chain rule through the closed forms."""
    segments = scene_segments(scene)
    if len(segments) > head_cfg.n_queries:
        raise UsageError(
            f"{len(segments)} segments exceed {head_cfg.n_queries} queries"
        )
    class_to_idx = {cid: j for j, cid in enumerate(bank.included)}
    entail_cfg = EntailmentConfig(K=train_cfg.K)
    protos = build_prototypes(bank, entail_cfg)
    apers = anchor_apertures(protos.spatial_norms, train_cfg.K)
    flat = scene.features.reshape(-1, scene.features.shape[-1])
    n_px = flat.shape[0]
    segments_flat = [(class_to_idx[c], m.reshape(-1).astype(np.float64)) for c, m in segments]

    rng = np.random.default_rng(train_cfg.seed)
    params = init_encoder(flat.shape[1], train_cfg.hidden, bank.d, train_cfg.seed)
    _, u0 = _encoder_parts(params, flat)
    mean_norm = float(np.linalg.norm(u0, axis=1).mean())
    params.alpha = 1.0 / mean_norm if mean_norm > 0 else 1.0
    queries = QuerySet(
        class_tangents=rng.normal(size=(head_cfg.n_queries, bank.d)) * 0.5,
        mask_tangents=rng.normal(size=(head_cfg.n_queries, bank.d)) * 0.5,
        no_object_bias=0.0,
    )

    n_classes = len(bank.included)
    trace = {"epoch": [], "ce": [], "mask": [], "total": []}
    for epoch in range(train_cfg.epochs):
        state = _forward_state(params, queries, flat, protos, head_cfg, apers)
        probs_full = softmax_rows(state["full_logits"])
        mask_probs = 1.0 / (1.0 + np.exp(-state["mq"].T))  # (N, n_px)
        cost = np.zeros((head_cfg.n_queries, len(segments_flat)))
        for m, (col, gmask) in enumerate(segments_flat):
            fv = np.array([
                _focal_value_and_dlogit(state["mq"].T[j], gmask, head_cfg.gamma)[0]
                for j in range(head_cfg.n_queries)
            ])
            dv = np.array([
                _dice_value_and_dlogit(state["mq"].T[j], gmask)[0]
                for j in range(head_cfg.n_queries)
            ])
            cost[:, m] = (
                -head_cfg.lambda_cls * probs_full[:, col]
                + head_cfg.lambda_focal * fv
                + head_cfg.lambda_dice * dv
            )
        assign = hungarian_match(cost)
        ce, mask_term, total, targets, weights = _mask_loss_at(
            state, segments_flat, assign, head_cfg
        )
        if not math.isfinite(total):
            raise TrainingDivergedError(epoch)
        trace["epoch"].append(epoch)
        trace["ce"].append(ce)
        trace["mask"].append(mask_term)
        trace["total"].append(total)

        # ---- backward: class logits ----
        d_logits = softmax_rows(state["full_logits"])
        d_logits[np.arange(queries.n), targets] -= 1.0
        d_logits *= (weights / weights.sum())[:, None]
        g_bno = float(d_logits[:, n_classes].sum())
        dl = d_logits[:, :n_classes]
        dl_dd = -head_cfg.w_d * dl
        dl_dext = -dl * state["hinge_active"]
        g_qsp = np.einsum(
            "nc,ncd->nd",
            dl_dd,
            gr.grad_distance_cross(
                state["qsp"], state["qt"], protos.spatial, protos.time, state["inner_cq"]
            ),
        )
        g_qsp += np.einsum(
            "nc,ncd->nd",
            dl_dext,
            gr.grad_ext_cross_point(
                state["qsp"], state["qt"], protos.spatial, protos.time,
                state["inner_cq"], protos.spatial_norms,
            ),
        )
        g_qc = gr.exp_lift_backward(queries.class_tangents, g_qsp)

        # ---- backward: mask logits ----
        d_mq = np.zeros_like(state["mq"])  # (n_px, N)
        m_count = len(segments_flat)
        for m, (col, gmask) in enumerate(segments_flat):
            j = assign[m]
            z = state["mq"].T[j]
            _, dz_f = _focal_value_and_dlogit(z, gmask, head_cfg.gamma)
            _, dz_d = _dice_value_and_dlogit(z, gmask)
            d_mq[:, j] += (head_cfg.lambda_focal * dz_f + head_cfg.lambda_dice * dz_d) / m_count
        dd_mp = d_mq * (-1.0 / head_cfg.s_d)
        dext_mp = d_mq * (-1.0 / head_cfg.s_a)
        mnorms = np.linalg.norm(state["msp"], axis=1)
        g_psp = np.einsum(
            "pn,pnd->pd",
            dd_mp,
            gr.grad_distance_cross(
                state["psp"], state["pt"], state["msp"], state["mt"], state["inner_mp"]
            ),
        )
        g_psp += np.einsum(
            "pn,pnd->pd",
            dext_mp,
            gr.grad_ext_cross_point(
                state["psp"], state["pt"], state["msp"], state["mt"],
                state["inner_mp"], mnorms,
            ),
        )
        g_msp = np.einsum(
            "pn,pnd->nd",
            dd_mp,
            gr.grad_distance_cross_anchor(
                state["psp"], state["pt"], state["msp"], state["mt"], state["inner_mp"]
            ),
        )
        g_msp += np.einsum(
            "pn,pnd->nd",
            dext_mp,
            gr.grad_ext_cross_anchor(
                state["psp"], state["pt"], state["msp"], state["mt"],
                state["inner_mp"], mnorms,
            ),
        )
        g_qm = gr.exp_lift_backward(queries.mask_tangents, g_msp)
        g_vp = gr.exp_lift_backward(state["v_p"], g_psp)

        # ---- encoder ----
        g_u = params.alpha * g_vp
        g_alpha = float(np.einsum("nd,nd->", state["u"], g_vp))
        g_w2 = g_u.T @ state["a1"] + train_cfg.weight_decay * params.w2
        g_b2 = g_u.sum(axis=0)
        g_a1 = g_u @ params.w2
        g_z1 = g_a1 * (1.0 - state["a1"] * state["a1"])
        g_w1 = g_z1.T @ flat + train_cfg.weight_decay * params.w1
        g_b1 = g_z1.sum(axis=0)

        lr = train_cfg.lr
        cls_lr = lr * head_cfg.class_lr_scale
        params.w1 = params.w1 - lr * g_w1
        params.b1 = params.b1 - lr * g_b1
        params.w2 = params.w2 - lr * g_w2
        params.b2 = params.b2 - lr * g_b2
        params.alpha = float(params.alpha - lr * g_alpha)
        queries.class_tangents = queries.class_tangents - cls_lr * g_qc
        queries.mask_tangents = queries.mask_tangents - lr * g_qm
        queries.no_object_bias = float(queries.no_object_bias - cls_lr * g_bno)

    state = _forward_state(params, queries, flat, protos, head_cfg, apers)
    probs_full = softmax_rows(state["full_logits"])
    cost = np.zeros((head_cfg.n_queries, len(segments_flat)))
    for m, (col, gmask) in enumerate(segments_flat):
        for j in range(head_cfg.n_queries):
            cost[j, m] = (
                -head_cfg.lambda_cls * probs_full[j, col]
                + head_cfg.lambda_focal * _focal_value_and_dlogit(state["mq"].T[j], gmask, head_cfg.gamma)[0]
                + head_cfg.lambda_dice * _dice_value_and_dlogit(state["mq"].T[j], gmask)[0]
            )
    assign = hungarian_match(cost)
    ce, mask_term, total, _, _ = _mask_loss_at(state, segments_flat, assign, head_cfg)
    trace["epoch"].append(train_cfg.epochs)
    trace["ce"].append(ce)
    trace["mask"].append(mask_term)
    trace["total"].append(total)
    trace = {k: np.asarray(vals) for k, vals in trace.items()}
    return MaskHeadResult(queries, params, protos, bank, trace, head_cfg, train_cfg)


def predict_semantic(result: MaskHeadResult, scene: SyntheticScene) -> LabelMap:
    """MaskFormer-style assembly: softmax class probabilities without the
    no-object column, weighted by sigmoid mask probabilities."""
    flat = scene.features.reshape(-1, scene.features.shape[-1])
    apers = anchor_apertures(result.protos.spatial_norms, result.train_cfg.K)
    state = _forward_state(result.params, result.queries, flat, result.protos,
                           result.head_cfg, apers)
    probs_full = softmax_rows(state["full_logits"])[:, :-1]
    h, w = scene.shape
    mask_probs = (1.0 / (1.0 + np.exp(-state["mq"].T))).reshape(result.queries.n, h, w)
    legend = {i: n for i, n in enumerate(result.protos.labels)}
    return semantic_map(probs_full, mask_probs, legend)


def embed_scene_grid(result: MaskHeadResult, scene: SyntheticScene) -> EmbeddingGrid:
    from .segtoy import embed_scene

    return embed_scene(result.params, scene)
