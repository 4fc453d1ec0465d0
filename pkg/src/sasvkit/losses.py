"""Margin-loss kernels with hand-derived gradients.

Two losses are implemented:

* a multiplicative angular-margin softmax: the target logit is
  s*cos(m*theta) with theta the angle between the (normalized) embedding
  and its class weight, non-target logits are s*cos(theta); the loss is
  the mean negative log-softmax probability of the true class.

* a pairwise similarity loss over within-batch positive/negative cosine
  pairs:

      L = log(1 + sum_p exp(-g*a_p*(s_p - d_p)) * sum_n exp(g*a_n*(s_n - d_n)))

  with self-paced weights a_p = max(0, 1 + m - s_p) and
  a_n = max(0, s_n + m), offsets d_p = 1 - m, d_n = m. The weights a_*
  are treated as constants during differentiation (the original
  convention), which also makes the finite-difference oracle
  well-defined.

Gradients are exact derivatives of the computation actually performed,
including normalization of the raw inputs and the arccos clamp (a
clamped coordinate contributes zero gradient). No autodiff framework is
involved; everything is verified against central finite differences.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax

from .errors import InvalidBatch, ValueOutOfRange


@dataclass(frozen=True)
class SphereFaceConfig:
    scale_s: float = 30.0
    margin_m: float = 1.5
    cos_clamp_eps: float = 1e-7

    def __post_init__(self):
        if self.scale_s <= 0:
            raise ValueError("scale_s must be > 0")
        if self.margin_m < 1:
            raise ValueError("margin_m must be >= 1")
        if not 0 < self.cos_clamp_eps < 1:
            raise ValueError("cos_clamp_eps must be in (0, 1)")


@dataclass(frozen=True)
class CircleConfig:
    gamma: float = 80.0
    margin: float = 0.25
    weight: float = 0.2

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not 0 < self.margin < 1:
            raise ValueError("margin must be in (0, 1)")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")

    # derived constants of the pairwise loss
    @property
    def delta_p(self):
        return 1.0 - self.margin

    @property
    def delta_n(self):
        return self.margin

    @property
    def o_p(self):
        return 1.0 + self.margin

    @property
    def o_n(self):
        return -self.margin


class LossBatch:
    """Embeddings, class weights, and labels for one loss evaluation.

    Rows of both matrices are unit-normalized inside the loss; callers
    pass raw values and receive gradients w.r.t. those raw values.
    """

    def __init__(self, embeddings, class_weights, labels):
        X = np.asarray(embeddings, dtype=np.float64)
        W = np.asarray(class_weights, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InvalidBatch("embeddings must be a BxD matrix with B >= 1")
        if W.ndim != 2 or W.shape[0] < 2:
            raise InvalidBatch("class_weights must be a CxD matrix with C >= 2")
        if X.shape[1] != W.shape[1]:
            raise InvalidBatch(
                f"embedding dim {X.shape[1]} vs class weight dim {W.shape[1]}"
            )
        if y.shape != (X.shape[0],):
            raise InvalidBatch("labels must be a length-B vector")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(W))):
            raise InvalidBatch("non-finite values in batch")
        if np.any(y < 0) or np.any(y >= W.shape[0]):
            raise InvalidBatch("label outside [0, C)")
        if np.any(np.linalg.norm(X, axis=1) == 0) or np.any(
            np.linalg.norm(W, axis=1) == 0
        ):
            raise InvalidBatch("zero-norm row cannot be normalized")
        self.embeddings = X
        self.class_weights = W
        self.labels = y

    @property
    def size(self):
        return self.embeddings.shape[0]

    @property
    def n_classes(self):
        return self.class_weights.shape[0]


@dataclass
class PairSet:
    """Within-batch positive/negative pair cosine similarities.

    pos_pairs / neg_pairs hold the (i, j) row indices each similarity
    came from; they are None when the set was built directly from
    similarity values.
    """

    s_p: np.ndarray
    s_n: np.ndarray
    pos_pairs: np.ndarray = None
    neg_pairs: np.ndarray = None

    def __post_init__(self):
        self.s_p = np.asarray(self.s_p, dtype=np.float64)
        self.s_n = np.asarray(self.s_n, dtype=np.float64)


def _normalize_rows(M):
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    return M / norms, norms[:, 0]


def _backprop_row_normalization(G_hat, M_hat, norms):
    # d(x/||x||)/dx applied to upstream gradient G_hat:
    # (G_hat - <G_hat, x_hat> x_hat) / ||x||
    inner = np.sum(G_hat * M_hat, axis=1, keepdims=True)
    return (G_hat - inner * M_hat) / norms[:, None]


def sphereface_loss(batch, cfg=SphereFaceConfig()):
    """Angular-margin softmax loss, mean over the batch.

    Returns (loss, grad_embeddings, grad_weights) with gradients taken
    w.r.t. the raw (un-normalized) inputs. Cosines are clamped to
    [-1+eps, 1-eps] before arccos and the clamp is part of the
    differentiated graph.
    """
    X, W, y = batch.embeddings, batch.class_weights, batch.labels
    B = batch.size
    s, m, eps = cfg.scale_s, cfg.margin_m, cfg.cos_clamp_eps

    Xh, xn = _normalize_rows(X)
    Wh, wn = _normalize_rows(W)
    C0 = Xh @ Wh.T
    Cc = np.clip(C0, -1.0 + eps, 1.0 - eps)
    active = (C0 > -1.0 + eps) & (C0 < 1.0 - eps)

    rows = np.arange(B)
    cy = Cc[rows, y]
    logits = s * Cc
    if m == 1.0:
        # exact collapse to plain scaled-cosine cross-entropy
        dtarget_dc = np.full(B, s)
    else:
        theta = np.arccos(cy)
        logits[rows, y] = s * np.cos(m * theta)
        dtarget_dc = s * m * np.sin(m * theta) / np.sqrt(1.0 - cy * cy)

    loss = float(-np.mean(log_softmax(logits, axis=1)[rows, y]))

    dZ = softmax(logits, axis=1)
    dZ[rows, y] -= 1.0
    dZ /= B
    dC = dZ * s
    dC[rows, y] = dZ[rows, y] * dtarget_dc
    dC *= active

    G_Xh = dC @ Wh
    G_Wh = dC.T @ Xh
    grad_X = _backprop_row_normalization(G_Xh, Xh, xn)
    grad_W = _backprop_row_normalization(G_Wh, Wh, wn)
    return loss, grad_X, grad_W


def mine_pairs(embeddings, labels):
    """Cosine similarities of all unordered within-batch pairs.

    Pairs are enumerated row-major: (0,1), (0,2), ..., (1,2), ... so the
    order is deterministic. Same-label pairs go to s_p, different-label
    pairs to s_n.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    B = X.shape[0]
    if B < 2:
        raise InvalidBatch("pair mining needs at least 2 rows")
    Xh, _ = _normalize_rows(X)
    sims = np.clip(Xh @ Xh.T, -1.0, 1.0)
    iu, ju = np.triu_indices(B, k=1)
    same = y[iu] == y[ju]
    pos_pairs = np.stack([iu[same], ju[same]], axis=1)
    neg_pairs = np.stack([iu[~same], ju[~same]], axis=1)
    return PairSet(
        s_p=sims[iu[same], ju[same]],
        s_n=sims[iu[~same], ju[~same]],
        pos_pairs=pos_pairs,
        neg_pairs=neg_pairs,
    )


def circle_loss(pairs, cfg=CircleConfig(), alphas=None):
    """Pairwise similarity loss with detached self-paced weights.

    Returns (loss, grad_s_p, grad_s_n). If either pair list is empty the
    product inside the log vanishes and the loss is exactly 0. `alphas`
    overrides the (a_p, a_n) weights, which the finite-difference oracle
    uses to keep them frozen at the base point.
    """
    sp, sn = pairs.s_p, pairs.s_n
    for arr in (sp, sn):
        if arr.size and (np.any(arr < -1.0) or np.any(arr > 1.0)):
            raise ValueOutOfRange("pair similarity outside [-1, 1]")
    if sp.size == 0 or sn.size == 0:
        return 0.0, np.zeros_like(sp), np.zeros_like(sn)

    g = cfg.gamma
    if alphas is None:
        a_p = np.maximum(0.0, cfg.o_p - sp)
        a_n = np.maximum(0.0, sn - cfg.o_n)
    else:
        a_p, a_n = alphas

    logit_p = -g * a_p * (sp - cfg.delta_p)
    logit_n = g * a_n * (sn - cfg.delta_n)
    u = logsumexp(logit_p)
    v = logsumexp(logit_n)
    loss = float(np.logaddexp(0.0, u + v))  # log(1 + e^(u+v)), stable

    sig = expit(u + v)
    grad_sp = sig * softmax(logit_p) * (-g * a_p)
    grad_sn = sig * softmax(logit_n) * (g * a_n)
    return loss, grad_sp, grad_sn


def circle_alphas(pairs, cfg=CircleConfig()):
    """The self-paced weights at the given similarities (for freezing)."""
    a_p = np.maximum(0.0, cfg.o_p - pairs.s_p)
    a_n = np.maximum(0.0, pairs.s_n - cfg.o_n)
    return a_p, a_n


def _chain_pair_grads_to_rows(grad_out, pair_grads, pairs_idx, Xh, norms):
    # s = x_hat_i . x_hat_j ; ds/dx_i = (x_hat_j - s x_hat_i)/||x_i||
    if pairs_idx is None or len(pairs_idx) == 0:
        return
    i, j = pairs_idx[:, 0], pairs_idx[:, 1]
    s = np.sum(Xh[i] * Xh[j], axis=1)
    gi = pair_grads[:, None] * (Xh[j] - s[:, None] * Xh[i]) / norms[i, None]
    gj = pair_grads[:, None] * (Xh[i] - s[:, None] * Xh[j]) / norms[j, None]
    np.add.at(grad_out, i, gi)
    np.add.at(grad_out, j, gj)


def combined_loss(batch, sf=SphereFaceConfig(), cc=CircleConfig(), frozen_alphas=None):
    """Angular-margin loss plus weighted pairwise loss over mined pairs.

    Gradients of the pairwise term are chained through the within-batch
    pair mining back to the raw embeddings. With cc.weight == 0 the
    result equals sphereface_loss exactly.
    """
    sf_loss, grad_X, grad_W = sphereface_loss(batch, sf)
    if cc.weight == 0.0 or batch.size < 2:
        return sf_loss, grad_X, grad_W

    pairs = mine_pairs(batch.embeddings, batch.labels)
    c_loss, grad_sp, grad_sn = circle_loss(pairs, cc, alphas=frozen_alphas)
    total = sf_loss + cc.weight * c_loss
    if c_loss == 0.0:
        return total, grad_X, grad_W

    Xh, xn = _normalize_rows(batch.embeddings)
    _chain_pair_grads_to_rows(grad_X, cc.weight * grad_sp, pairs.pos_pairs, Xh, xn)
    _chain_pair_grads_to_rows(grad_X, cc.weight * grad_sn, pairs.neg_pairs, Xh, xn)
    return total, grad_X, grad_W


@dataclass
class GradCheckReport:
    """Outcome of a central finite-difference gradient comparison."""

    passed: bool
    max_rel_error: float
    n_checked: int
    n_excluded: int
    step: float
    tol: float
    failures: list = field(default_factory=list)
    excluded_indices: list = field(default_factory=list)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"grad_check {status}: max_rel_error={self.max_rel_error:.3e} "
            f"checked={self.n_checked} excluded={self.n_excluded} "
            f"step={self.step:g} tol={self.tol:g}"
        )


def grad_check(f, point, step=1e-5, tol=1e-4, exclude=None):
    """Compare an analytic gradient with central finite differences.

    `f(x)` must return (scalar_value, gradient) with the gradient shaped
    like x. `exclude` is an optional boolean mask of coordinates to skip
    (e.g. where a clamp or hinge is active and the derivative is not
    defined); excluded coordinates are reported, not checked.

    The relative error per coordinate is |a - n| / max(1, |a|, |n|).
    """
    point = np.asarray(point, dtype=np.float64)
    _, analytic = f(point)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ValueError("gradient shape does not match point shape")
    if exclude is None:
        exclude = np.zeros(point.shape, dtype=bool)
    else:
        exclude = np.asarray(exclude, dtype=bool)

    flat = point.ravel()
    a_flat = analytic.ravel()
    ex_flat = exclude.ravel()
    failures = []
    excluded = []
    max_rel = 0.0
    n_checked = 0
    for k in range(flat.size):
        if ex_flat[k]:
            excluded.append(k)
            continue
        x_plus = flat.copy()
        x_minus = flat.copy()
        x_plus[k] += step
        x_minus[k] -= step
        f_plus, _ = f(x_plus.reshape(point.shape))
        f_minus, _ = f(x_minus.reshape(point.shape))
        numeric = (f_plus - f_minus) / (2.0 * step)
        denom = max(1.0, abs(a_flat[k]), abs(numeric))
        rel = abs(a_flat[k] - numeric) / denom
        n_checked += 1
        if rel > max_rel:
            max_rel = rel
        if rel > tol:
            failures.append((k, float(a_flat[k]), float(numeric), float(rel)))
    return GradCheckReport(
        passed=not failures,
        max_rel_error=max_rel,
        n_checked=n_checked,
        n_excluded=len(excluded),
        step=step,
        tol=tol,
        failures=failures,
        excluded_indices=excluded,
    )
