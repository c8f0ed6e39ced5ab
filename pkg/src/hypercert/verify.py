"""Sound, incomplete verification of boxes and epsilon-balls.

Interval bound propagation with a last-layer refinement: intervals are
pushed through all layers but the last with sign-split affine arithmetic
(exact per layer), then the functional logit_target - logit_other is bounded
as a single affine form over the penultimate interval. A positive certified
margin proves the whole region classifies as the target; otherwise a
projected-gradient falsifier hunts for a concrete counterexample, and the
query comes back Unknown when neither side lands within budget.

Monotonicity note: the affine bound computation is coordinatewise monotone
even in floating point (rounding is monotone and equal-shape reductions share
one evaluation order), so nested boxes get nested intervals and the epsilon
binary search below is well-defined.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimMismatch, MisclassifiedPoint
from .geometry import Hyperrectangle, RegionSet, region_contains
from .network import Layer, MlpNetwork, logits_batch
from .robust import AttackConfig, _logit_diff_objective, _pgd_core, settle_into_region

VERIFIED = "verified"
FALSIFIED = "falsified"
UNKNOWN = "unknown"


@dataclass(eq=False)
class IntervalVector:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimMismatch(f"interval shapes differ: {lo.shape} vs {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("interval bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("interval lo exceeds hi")
        self.lo = lo
        self.hi = hi

    @property
    def dim(self) -> int:
        return self.lo.shape[0]


@dataclass
class VerificationResult:
    status: str
    margin: float                       # certified lower bound of the logit gap
    counterexample: Optional[np.ndarray] = None
    per_box: Optional[list] = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class VerifyOptions:
    attack: AttackConfig = field(
        default_factory=lambda: AttackConfig(steps=30, mode="adaptive", fraction=0.1)
    )
    restarts: int = 10
    presamples: int = 512
    seed: int = 0
    budget_s: float = 60.0   # falsification wall-clock budget per box
    strict: bool = False     # widen affine bounds for floating-point soundness


def ball(x, eps: float) -> Hyperrectangle:
    """The closed l-infinity ball B(x, eps) as a box."""
    x = np.asarray(x, dtype=np.float64)
    return Hyperrectangle(x - eps, x + eps)


def _bounds_of(region) -> tuple:
    if isinstance(region, Hyperrectangle):
        return region.lower, region.upper
    if isinstance(region, IntervalVector):
        return region.lo, region.hi
    raise TypeError(f"expected Hyperrectangle or IntervalVector, got {type(region).__name__}")


# ---------------------------------------------------------------------------
# Interval bound propagation


def _affine_bounds(layer: Layer, lo: np.ndarray, hi: np.ndarray, strict: bool) -> tuple:
    """Exact interval image of an affine layer, via sign-split weights.

    Rows may be batched: lo/hi of shape (d,) or (n, d). In strict mode each
    bound is widened by 4 ulps per accumulation term for float soundness.
    """
    Wp = np.maximum(layer.weights, 0.0)
    Wn = np.minimum(layer.weights, 0.0)
    new_lo = lo @ Wp.T + hi @ Wn.T + layer.bias
    new_hi = hi @ Wp.T + lo @ Wn.T + layer.bias
    if strict:
        slack = 4.0 * (layer.in_dim + 1)
        new_lo = new_lo - slack * np.spacing(np.abs(new_lo))
        new_hi = new_hi + slack * np.spacing(np.abs(new_hi))
    return new_lo, new_hi


def ibp_forward_batch(net: MlpNetwork, Lo, Hi, strict: bool = False) -> tuple:
    """Logit intervals for a batch of boxes; rows are independent queries."""
    Lo = np.asarray(Lo, dtype=np.float64)
    Hi = np.asarray(Hi, dtype=np.float64)
    if Lo.shape != Hi.shape or Lo.shape[-1] != net.in_dim:
        raise DimMismatch(f"interval shapes {Lo.shape}/{Hi.shape}, network expects {net.in_dim}")
    lo, hi = Lo, Hi
    for layer in net.layers:
        lo, hi = _affine_bounds(layer, lo, hi, strict)
        if layer.activation == "relu":
            lo = np.maximum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
    return lo, hi


def ibp_forward(net: MlpNetwork, interval: IntervalVector, strict: bool = False) -> IntervalVector:
    """Sound enclosure of the network's logits over an input interval."""
    lo, hi = ibp_forward_batch(net, interval.lo.reshape(1, -1),
                               interval.hi.reshape(1, -1), strict)
    return IntervalVector(lo[0], hi[0])


def fold_rotation(net: MlpNetwork, rotation) -> MlpNetwork:
    """Compose x = Q z + c into the first layer: W' = W Q, b' = W c + b.

    Affine composed with affine stays affine, so verification over the
    rotated box is exactly verification of the folded network over z.
    """
    first = net.layers[0]
    folded = Layer(first.weights @ rotation.matrix,
                   first.weights @ rotation.center + first.bias,
                   first.activation)
    return MlpNetwork((folded,) + net.layers[1:])


def fold_identity_layers(net: MlpNetwork) -> MlpNetwork:
    """Merge affine layers that feed straight into the next layer.

    On networks with no ReLU this collapses everything into one affine map,
    which makes the last-layer difference bound exact.
    """
    layers = list(net.layers)
    i = 0
    while i < len(layers) - 1:
        if layers[i].activation == "identity":
            a, b = layers[i], layers[i + 1]
            layers[i:i + 2] = [Layer(b.weights @ a.weights,
                                     b.weights @ a.bias + b.bias,
                                     b.activation)]
        else:
            i += 1
    return MlpNetwork(tuple(layers))


def certified_margin(net: MlpNetwork, lo, hi, target: int, strict: bool = False) -> float:
    """Certified lower bound of min over the region of
    (logit_target - max_other logit_other).

    Intervals stop at the penultimate layer; the final logit difference is
    bounded as one affine functional w_target - w_other, which is tighter
    than differencing two independently-bounded logits.
    """
    net = fold_identity_layers(net)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    for layer in net.layers[:-1]:
        lo, hi = _affine_bounds(layer, lo, hi, strict)
        if layer.activation == "relu":
            lo = np.maximum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
    last = net.layers[-1]
    margins = []
    for other in range(last.out_dim):
        if other == target:
            continue
        d = last.weights[target] - last.weights[other]
        db = last.bias[target] - last.bias[other]
        dp = np.maximum(d, 0.0)
        dn = np.minimum(d, 0.0)
        m = float(dp @ lo + dn @ hi + db)
        if strict:
            m -= 4.0 * (d.shape[0] + 1) * np.spacing(abs(m))
        margins.append(m)
    return min(margins)


# ---------------------------------------------------------------------------
# Falsification


def falsify(net: MlpNetwork, box: Hyperrectangle, target: int,
            attack: AttackConfig, restarts: int, presamples: int,
            seed: int, budget_s: float = 60.0) -> Optional[np.ndarray]:
    """Search the box for a point the network classifies off-target.

    A uniform pre-pass checks cheap candidates (samples plus both corners),
    then multi-restart projected ascent maximizes the adversary's logit gap.
    Any hit is re-checked by an exact forward pass before being returned.
    """
    deadline = time.monotonic() + budget_s
    rng = np.random.default_rng(seed)

    def misclassified(X: np.ndarray) -> Optional[np.ndarray]:
        if X.shape[0] == 0:
            return None
        pred = logits_batch(net, X).argmax(axis=1)
        hits = np.flatnonzero(pred != target)
        return X[hits[0]].copy() if hits.size else None

    n_pre = max(presamples, 0)
    if n_pre:
        X = box.lower + rng.random((n_pre, box.dim)) * box.widths
        X = np.concatenate([X, box.lower.reshape(1, -1), box.upper.reshape(1, -1)])
        hit = misclassified(X)
        if hit is not None:
            return hit
    if restarts < 1 or time.monotonic() > deadline:
        return None

    starts = box.lower + rng.random((restarts, box.dim)) * box.widths
    eps = attack.fraction * box.widths if attack.mode != "fixed" else np.full(box.dim, attack.epsilon)
    lo, hi = box.lower, box.upper
    if attack.mode == "fixed":
        lo = np.maximum(starts - attack.epsilon, box.lower)
        hi = np.minimum(starts + attack.epsilon, box.upper)
    step = eps * (attack.step_scale / attack.steps)
    out_dim = net.out_dim
    for other in range(out_dim):
        if other == target:
            continue
        if time.monotonic() > deadline:
            return None
        objective = _logit_diff_objective(target, other)
        ends = _pgd_core(net, starts, lo, hi, step, attack.steps, None,
                         objective, attack.mode != "clip")
        if attack.mode == "clip":
            ends = np.clip(ends, box.lower, box.upper)
        hit = misclassified(ends)
        if hit is not None:
            return hit
    return None


# ---------------------------------------------------------------------------
# Verification queries


def verify_region(net: MlpNetwork, region, target: int,
                  options: Optional[VerifyOptions] = None) -> VerificationResult:
    """Verify that every point of a box classifies as the target class.

    Verified iff the certified margin is positive. Otherwise falsification
    runs under its budget, and the query is Unknown when it comes up empty.
    """
    options = options or VerifyOptions()
    t0 = time.monotonic()
    lo, hi = _bounds_of(region)
    margin = certified_margin(net, lo, hi, target, options.strict)
    if margin > 0.0:
        return VerificationResult(VERIFIED, margin, wall_time=time.monotonic() - t0)
    box = region if isinstance(region, Hyperrectangle) else Hyperrectangle(lo, hi)
    cx = None
    if options.restarts > 0 or options.presamples > 0:
        cx = falsify(net, box, target, options.attack, options.restarts,
                     options.presamples, options.seed, options.budget_s)
    if cx is not None:
        # the postcondition re-checked directly: inside and misclassified
        inside = bool(np.all(box.lower <= cx) and np.all(cx <= box.upper))
        wrong = int(logits_batch(net, cx.reshape(1, -1)).argmax()) != target
        if inside and wrong:
            return VerificationResult(FALSIFIED, margin, counterexample=cx,
                                      wall_time=time.monotonic() - t0)
    return VerificationResult(UNKNOWN, margin, wall_time=time.monotonic() - t0)


def verify_region_set(net: MlpNetwork, regions: RegionSet, target: int,
                      options: Optional[VerifyOptions] = None,
                      workers: int = 1) -> VerificationResult:
    """Verify every box of a region set; aggregate Verified iff all boxes are.

    Rotated sets fold the rotation into the first layer as an exact affine
    prefix; per-box results (and counterexamples) are in box coordinates,
    while the aggregate counterexample is mapped back to input coordinates
    and re-checked against the original network. Boxes are independent pure
    queries, so the result does not depend on the worker count.
    """
    options = options or VerifyOptions()
    t0 = time.monotonic()
    boxed_net = fold_rotation(net, regions.rotation) if regions.rotation is not None else net
    box_seeds = np.random.default_rng(options.seed).integers(2 ** 63, size=len(regions.boxes))
    queries = [(box, replace(options, seed=int(s))) for box, s in zip(regions.boxes, box_seeds)]
    if workers > 1 and len(queries) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_box = list(pool.map(
                lambda q: verify_region(boxed_net, q[0], target, q[1]), queries
            ))
    else:
        per_box = [verify_region(boxed_net, box, target, opts) for box, opts in queries]
    margin = min(r.margin for r in per_box)
    counterexample = None
    status = VERIFIED if all(r.status == VERIFIED for r in per_box) else UNKNOWN
    for i, result in enumerate(per_box):
        if result.status != FALSIFIED:
            continue
        z = result.counterexample
        if regions.rotation is not None:
            x = settle_into_region(regions, z.reshape(1, -1), np.array([i]))[0]
        else:
            x = z
        # re-check under the original network: the fold is exact only up to
        # rounding, and the settled point moved by a few ulps
        wrong = int(logits_batch(net, x.reshape(1, -1)).argmax()) != target
        if wrong and region_contains(regions, x):
            status = FALSIFIED
            counterexample = x
            break
        status = UNKNOWN
    return VerificationResult(status, margin, counterexample=counterexample,
                              per_box=per_box, wall_time=time.monotonic() - t0)


def epsilon_search(net: MlpNetwork, x, target: int, eps_max: float,
                   tolerance: float, strict: bool = False) -> float:
    """Largest certified-robust l-infinity radius around x, by bisection.

    Sound thanks to IBP nestedness: a verified radius certifies every smaller
    one. Returns eps with B(x, eps) Verified and B(x, eps + tolerance) not.
    """
    if not (eps_max > tolerance > 0):
        raise ValueError(f"need eps_max > tolerance > 0, got {eps_max}, {tolerance}")
    x = np.asarray(x, dtype=np.float64)
    pred = int(logits_batch(net, x.reshape(1, -1)).argmax())
    if pred != target:
        raise MisclassifiedPoint(f"point classifies as {pred}, not target {target}")

    def verified(eps: float) -> bool:
        return certified_margin(net, x - eps, x + eps, target, strict) > 0.0

    if verified(eps_max):
        return eps_max
    lo = 0.0
    if not verified(0.0):
        return 0.0
    hi = eps_max
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if verified(mid):
            lo = mid
        else:
            hi = mid
    return lo
