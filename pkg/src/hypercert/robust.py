"""Region sampling and gradient attacks feeding adversarial training.

Sampling is uniform over a region set (boxes weighted by volume) or over the
complement of a set within an envelope box. Attacks are FGSM and projected
gradient ascent with three radius modes:

* fixed: classic l-infinity ball of radius epsilon around the start point;
* adaptive: per-dimension epsilon set to a fraction of the enclosing box's
  width in that dimension, projecting into the box each step;
* clip: unconstrained steps (sized from box widths) clipped into the box at
  the end.

Attacks on rotated region sets run in the rotated coordinates the boxes live
in; gradients map through the rotation as g_z = g_x @ Q. Every emitted point
satisfies its declared constraint, re-checked in input coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry
from .errors import BadSpec, ConstraintViolation, RejectionExhausted
from .geometry import Hyperrectangle, RegionSet, region_contains_batch
from .network import MlpNetwork, _forward_trace, input_gradient, log_sum_exp, softmax

ATTACK_MODES = ("fixed", "adaptive", "clip")


@dataclass(frozen=True)
class AttackConfig:
    steps: int
    mode: str = "adaptive"
    epsilon: Optional[float] = None   # fixed mode radius
    fraction: float = 0.05            # adaptive/clip: epsilon[i] = fraction * width[i]
    step_scale: float = 2.5           # step[i] = epsilon[i] * step_scale / steps

    def __post_init__(self):
        if self.steps < 1:
            raise BadSpec(f"steps must be >= 1, got {self.steps}")
        if self.mode not in ATTACK_MODES:
            raise BadSpec(f"unknown attack mode {self.mode!r}")
        if self.mode == "fixed":
            if self.epsilon is None or self.epsilon <= 0:
                raise BadSpec(f"fixed mode needs epsilon > 0, got {self.epsilon}")
        if not 0.0 < self.fraction <= 1.0:
            raise BadSpec(f"fraction must be in (0, 1], got {self.fraction}")
        if self.step_scale <= 0:
            raise BadSpec(f"step_scale must be positive, got {self.step_scale}")


@dataclass(frozen=True)
class AugmentConfig:
    n_positive: int
    n_negative: int
    seed: int = 0

    def __post_init__(self):
        if self.n_positive < 0 or self.n_negative < 0:
            raise BadSpec("augmentation counts must be >= 0")


# ---------------------------------------------------------------------------
# Sampling


def sample_inside(regions: RegionSet, n: int, seed: int) -> np.ndarray:
    """n points uniform over the region set, in input coordinates.

    Samples are re-checked with region_contains after mapping out of rotated
    coordinates; the rare boundary sample that fails the closed containment
    check due to round-off is redrawn.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    out = np.empty((n, regions.dim))
    if n == 0:
        return out
    round_seeds = np.random.default_rng(seed).integers(2 ** 63, size=100)
    pending = np.arange(n)
    for round_seed in round_seeds:
        Z, _ = geometry.sample_in_boxes(regions, pending.size, int(round_seed))
        X = regions.rotation.to_input(Z) if regions.rotation is not None else Z
        ok = region_contains_batch(regions, X)
        out[pending[ok]] = X[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return out
    raise RejectionExhausted("could not place samples inside the region set")


def sample_complement(regions: RegionSet, envelope: Hyperrectangle, n: int,
                      seed: int) -> np.ndarray:
    """n points uniform on the envelope minus the region set.

    Rejection sampling; fails when fewer than 0.1% of draws are accepted
    over a 100,000-draw window (the set nearly fills the envelope).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if envelope.dim != regions.dim:
        raise ValueError(f"envelope dim {envelope.dim} vs region dim {regions.dim}")
    out = np.empty((n, regions.dim))
    if n == 0:
        return out
    rng = np.random.default_rng(seed)
    filled = 0
    window_draws = 0
    window_accepts = 0
    while filled < n:
        chunk = max(4096, 2 * (n - filled))
        X = envelope.lower + rng.random((chunk, envelope.dim)) * envelope.widths
        keep = X[~region_contains_batch(regions, X)]
        take = min(keep.shape[0], n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
        window_draws += chunk
        window_accepts += keep.shape[0]
        if window_draws >= 100_000:
            if window_accepts < 0.001 * window_draws:
                raise RejectionExhausted(
                    f"complement acceptance rate {window_accepts / window_draws:.2e} "
                    f"below 0.1% (region set nearly fills the envelope)"
                )
            window_draws = 0
            window_accepts = 0
    return out


def settle_into_region(regions: RegionSet, Z: np.ndarray,
                       box_idx: np.ndarray) -> np.ndarray:
    """Map box-coordinate points to input coordinates, guaranteeing containment.

    Rotated round trips can push a boundary point just outside the closed box;
    offenders are nudged toward their box's center until containment holds.
    """
    if regions.rotation is None:
        return Z.copy()
    lowers = np.stack([regions.boxes[b].lower for b in box_idx])
    uppers = np.stack([regions.boxes[b].upper for b in box_idx])
    centers = 0.5 * (lowers + uppers)
    Z = Z.copy()
    X = regions.rotation.to_input(Z)
    bad = ~region_contains_batch(regions, X)
    factor = 1e-12
    while bad.any() and factor <= 1e-3:
        Z[bad] = centers[bad] + (Z[bad] - centers[bad]) * (1.0 - factor)
        X[bad] = regions.rotation.to_input(Z[bad])
        bad = ~region_contains_batch(regions, X)
        factor *= 100.0
    if bad.any():
        raise ConstraintViolation("could not settle attacked points into the region set")
    return X


# ---------------------------------------------------------------------------
# Attacks


def fgsm(net: MlpNetwork, X, y, epsilon) -> np.ndarray:
    """Single signed-gradient step: x' = x + epsilon * sign(dL/dx)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    eps = np.asarray(epsilon, dtype=np.float64)
    if np.any(eps < 0):
        raise ValueError("epsilon components must be >= 0")
    g = input_gradient(net, X, y)
    out = X + eps * np.sign(g)
    return out[0] if single else out


def _ce_objective(y: np.ndarray):
    y = np.asarray(y, dtype=np.int64)

    def value(logits):
        return log_sum_exp(logits) - logits[np.arange(logits.shape[0]), y]

    def dlogits(logits):
        d = softmax(logits)
        d[np.arange(logits.shape[0]), y] -= 1.0
        return d

    return value, dlogits


def _logit_diff_objective(target: int, other: int):
    def value(logits):
        return logits[:, other] - logits[:, target]

    def dlogits(logits):
        d = np.zeros_like(logits)
        d[:, other] = 1.0
        d[:, target] = -1.0
        return d

    return value, dlogits


def _eval_objective(net: MlpNetwork, X: np.ndarray, objective) -> tuple:
    """Per-sample objective values and the input-space ascent gradient."""
    value_fn, dlogits_fn = objective
    pre, acts = _forward_trace(net, X)
    values = value_fn(pre[-1])
    dz = dlogits_fn(pre[-1])
    for i in range(len(net.layers) - 1, 0, -1):
        da = dz @ net.layers[i].weights
        prev = net.layers[i - 1]
        dz = da * (pre[i - 1] > 0.0) if prev.activation == "relu" else da
    return values, dz @ net.layers[0].weights


def _pgd_core(net: MlpNetwork, Z0: np.ndarray, lo, hi, step, steps: int,
              rotation, objective, project_each_step: bool) -> np.ndarray:
    """Projected ascent in box coordinates; returns the best valid iterate."""

    def to_input(Z):
        return rotation.to_input(Z) if rotation is not None else Z

    def rotate_grad(g):
        return g @ rotation.matrix if rotation is not None else g

    Z = Z0.copy()
    values, grad = _eval_objective(net, to_input(Z), objective)
    grad = rotate_grad(grad)
    best = Z0.copy()
    best_values = values.copy()
    for _ in range(steps):
        Z = Z + step * np.sign(grad)
        if project_each_step:
            Z = np.clip(Z, lo, hi)
        values, grad = _eval_objective(net, to_input(Z), objective)
        grad = rotate_grad(grad)
        if project_each_step:
            better = values > best_values
            best[better] = Z[better]
            best_values[better] = values[better]
    if not project_each_step:
        Z = np.clip(Z, lo, hi)
        values, _ = _eval_objective(net, to_input(Z), objective)
        better = values > best_values
        best[better] = Z[better]
    return best


def pgd(net: MlpNetwork, X, y, config: AttackConfig,
        box: Optional[Hyperrectangle] = None,
        rotation=None, objective=None) -> np.ndarray:
    """Projected gradient ascent from X (input coordinates).

    Fixed mode constrains iterates to the l-infinity ball around each start
    point (intersected with the box when one is given); adaptive and clip
    modes require a box. With a rotation, the box and the ball both live in
    rotated coordinates. The result's objective value never falls below the
    start point's.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if objective is None:
        objective = _ce_objective(np.atleast_1d(np.asarray(y, dtype=np.int64)))

    Z0 = rotation.to_rotated(X) if rotation is not None else X
    if box is not None:
        inside = np.all((Z0 >= box.lower) & (Z0 <= box.upper), axis=1)
        if not inside.all():
            raise ConstraintViolation(
                f"{int((~inside).sum())} start point(s) outside the attack box"
            )
    if config.mode == "fixed":
        eps = np.full(X.shape[1], config.epsilon)
        lo = Z0 - eps
        hi = Z0 + eps
        if box is not None:
            lo = np.maximum(lo, box.lower)
            hi = np.minimum(hi, box.upper)
        project = True
    else:
        if box is None:
            raise ValueError(f"{config.mode} mode needs an enclosing box")
        eps = config.fraction * box.widths
        lo = box.lower
        hi = box.upper
        project = config.mode == "adaptive"
    step = eps * (config.step_scale / config.steps)
    bestZ = _pgd_core(net, Z0, lo, hi, step, config.steps, rotation, objective, project)
    out = rotation.to_input(bestZ) if rotation is not None else bestZ
    return out[0] if single else out


def make_adversary(regions: RegionSet, config: AttackConfig, n_samples: int):
    """A training adversary: fresh region samples perturbed by PGD each step.

    Returns a callable (net, seed) -> (X_adv, y_adv) whose outputs always
    satisfy region_contains; labels are the positive class (index 0).
    """
    if n_samples < 1:
        raise BadSpec(f"adversary sample count must be >= 1, got {n_samples}")

    def adversary(net: MlpNetwork, seed: int) -> tuple:
        Z, box_idx = geometry.sample_in_boxes(regions, n_samples, seed)
        y = np.zeros(n_samples, dtype=np.int64)
        out = np.empty_like(Z)
        for b in np.unique(box_idx):
            mask = box_idx == b
            objective = _ce_objective(y[mask])
            box = regions.boxes[b]
            Zg = Z[mask]
            if config.mode == "fixed":
                lo = np.maximum(Zg - config.epsilon, box.lower)
                hi = np.minimum(Zg + config.epsilon, box.upper)
                eps = np.full(regions.dim, config.epsilon)
                project = True
            else:
                lo, hi = box.lower, box.upper
                eps = config.fraction * box.widths
                project = config.mode == "adaptive"
            step = eps * (config.step_scale / config.steps)
            out[mask] = _pgd_core(net, Zg, lo, hi, step, config.steps,
                                  regions.rotation, objective, project)
        X = settle_into_region(regions, out, box_idx)
        return X, y

    return adversary


def augment_from_regions(regions: RegionSet, envelope: Hyperrectangle,
                         config: AugmentConfig) -> tuple:
    """One-time augmentation set: positives sampled inside the region set,
    negatives from the envelope's complement of it. Returns (X, y)."""
    seed_pos, seed_neg = np.random.default_rng(config.seed).integers(2 ** 63, size=2)
    X_pos = sample_inside(regions, config.n_positive, int(seed_pos))
    X_neg = sample_complement(regions, envelope, config.n_negative, int(seed_neg))
    X = np.concatenate([X_pos, X_neg], axis=0)
    y = np.concatenate([
        np.zeros(config.n_positive, dtype=np.int64),
        np.ones(config.n_negative, dtype=np.int64),
    ])
    return X, y
