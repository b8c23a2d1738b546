"""Per-feature Shapley attributions for successful predictions.

Attributions are computed on the logit of the target class against a
background set that stands in for "feature removed": the value of a
coalition S is the mean model output over composites that take x_i for
i in S and the background row's value elsewhere. Exact enumeration covers
up to 12 features (4096 coalitions); Kernel SHAP handles the rest with the
standard weighted least-squares formulation, with the efficiency constraint
eliminated by substitution so base + sum(phi) always reproduces the model
output exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EXACT_MAX_FEATURES",
    "Explanation",
    "coalition_value",
    "exact_shapley",
    "shap_kernel_weight",
    "kernel_shap",
]

EXACT_MAX_FEATURES = 12

# model_fn maps a (n, d) batch of inputs to (n, K) per-class outputs.
ModelFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Explanation:
    """One attribution vector: phi[i] is feature i's share of the output."""

    target_class: int
    phi: np.ndarray
    base_value: float
    method: str = "exact"
    n_coalitions: int = 0
    ridge_fallback: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))

    def total(self) -> float:
        """base_value + sum(phi); equals the model output on x (efficiency)."""
        return float(self.base_value + self.phi.sum())

    def pairs(self) -> tuple[tuple[int, float], ...]:
        return tuple((i, float(v)) for i, v in enumerate(self.phi))


def _composites(x: np.ndarray, background: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Stack composite rows for every (mask, background row) combination."""
    n_masks, d = masks.shape
    m = len(background)
    out = np.repeat(background[None, :, :], n_masks, axis=0)  # (n_masks, m, d)
    sel = masks.astype(bool)[:, None, :]
    out = np.where(sel, x[None, None, :], out)
    return out.reshape(n_masks * m, d)


def _coalition_values(
    model_fn: ModelFn, x: np.ndarray, background: np.ndarray, masks: np.ndarray, target: int
) -> np.ndarray:
    """v(S) for each mask row: mean target-class output over the background."""
    m = len(background)
    outputs = np.asarray(model_fn(_composites(x, background, masks)), dtype=float)
    if outputs.ndim == 1:
        outputs = outputs[:, None]
    vals = outputs[:, target].reshape(len(masks), m)
    return vals.mean(axis=1)


def coalition_value(
    model_fn: ModelFn,
    x: Sequence[float] | np.ndarray,
    background: np.ndarray,
    subset: Sequence[int],
    target_class: int,
) -> float:
    """Value of one coalition: mean model output with only ``subset`` kept."""
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    mask = np.zeros((1, x.size), dtype=bool)
    mask[0, list(subset)] = True
    return float(_coalition_values(model_fn, x, background, mask, target_class)[0])


def _all_masks(d: int) -> np.ndarray:
    ints = np.arange(2**d, dtype=np.int64)
    return (ints[:, None] >> np.arange(d)) & 1


def exact_shapley(
    model_fn: ModelFn,
    x: Sequence[float] | np.ndarray,
    background: np.ndarray,
    target_class: int,
) -> Explanation:
    """Exact Shapley values by full coalition enumeration (d <= 12).

    phi_i = sum over S not containing i of |S|!(d-|S|-1)!/d! *
    (v(S+{i}) - v(S)). Refuses larger inputs; use kernel_shap there.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    d = x.size
    if d > EXACT_MAX_FEATURES:
        raise ValueError(
            f"exact enumeration is limited to {EXACT_MAX_FEATURES} features "
            f"(got {d}); use kernel_shap instead"
        )
    masks = _all_masks(d)
    values = _coalition_values(model_fn, x, background, masks, target_class)

    sizes = masks.sum(axis=1)
    fact = [math.factorial(k) for k in range(d + 1)]
    # weight for adding player i to a coalition of size s
    w_by_size = np.array([fact[s] * fact[d - s - 1] / fact[d] for s in range(d)])

    phi = np.zeros(d)
    for i in range(d):
        without_i = (masks[:, i] == 0)
        idx = np.flatnonzero(without_i)
        gains = values[idx + (1 << i)] - values[idx]
        phi[i] = float(np.dot(w_by_size[sizes[idx]], gains))
    return Explanation(
        target_class=target_class,
        phi=phi,
        base_value=float(values[0]),
        method="exact",
        n_coalitions=len(masks),
    )


def shap_kernel_weight(num_features: int, coalition_size: int) -> float:
    """Kernel SHAP weight pi = (M-1) / (C(M,k) * k * (M-k)) for 0 < k < M."""
    M, k = num_features, coalition_size
    if not 0 < k < M:
        raise ValueError("coalition size must be strictly between 0 and M")
    return (M - 1) / (math.comb(M, k) * k * (M - k))


def _sample_coalitions(d: int, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample proper coalitions with probability proportional to pi.

    Size k is drawn with mass proportional to (M-1)/(k(M-k)) (the total
    kernel weight of size k), then a uniform subset of that size. Duplicate
    draws accumulate weight, so the WLS sees each distinct coalition once.
    """
    sizes = np.arange(1, d)
    size_mass = (d - 1) / (sizes * (d - sizes))
    size_p = size_mass / size_mass.sum()
    counts: dict[bytes, int] = {}
    masks: dict[bytes, np.ndarray] = {}
    for _ in range(n_samples):
        k = int(rng.choice(sizes, p=size_p))
        members = rng.choice(d, size=k, replace=False)
        z = np.zeros(d, dtype=np.int64)
        z[members] = 1
        key = z.tobytes()
        counts[key] = counts.get(key, 0) + 1
        if key not in masks:
            masks[key] = z
    keys = list(masks.keys())
    Z = np.vstack([masks[k] for k in keys])
    w = np.array([counts[k] for k in keys], dtype=float)
    return Z, w


def kernel_shap(
    model_fn: ModelFn,
    x: Sequence[float] | np.ndarray,
    background: np.ndarray,
    target_class: int,
    n_samples: int = 2048,
    seed: int = 0,
) -> Explanation:
    """Kernel SHAP: weighted least squares over sampled coalitions.

    The empty and full coalitions always enter as hard constraints (base
    value and efficiency; the sum constraint is eliminated by substituting
    phi_d out of the regression). When every proper coalition fits within
    ``n_samples`` the enumeration is exhaustive with exact kernel weights,
    which reproduces exact Shapley values. Deterministic given the seed; a
    singular system falls back to a ridge term (lambda=1e-8), reported on
    the Explanation.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    d = x.size
    if n_samples < 2 * d + 4:
        raise ValueError(f"n_samples must be at least 2*d+4 = {2 * d + 4}, got {n_samples}")

    endpoint_masks = np.vstack([np.zeros(d, dtype=np.int64), np.ones(d, dtype=np.int64)])
    base, full = _coalition_values(model_fn, x, background, endpoint_masks, target_class)

    if d == 1:
        return Explanation(
            target_class=target_class,
            phi=np.array([full - base]),
            base_value=float(base),
            method="kernel",
            n_coalitions=2,
        )

    n_proper = 2**d - 2
    if n_proper <= n_samples:
        Z = _all_masks(d)[1:-1]
        w = np.array([shap_kernel_weight(d, int(k)) for k in Z.sum(axis=1)])
    else:
        Z, w = _sample_coalitions(d, n_samples, np.random.default_rng(seed))
    v = _coalition_values(model_fn, x, background, Z, target_class)

    # Substitute phi_{d-1} = (full - base) - sum_{i<d-1} phi_i.
    z_last = Z[:, -1].astype(float)
    y = v - base - z_last * (full - base)
    X = Z[:, :-1].astype(float) - z_last[:, None]

    XtW = X.T * w
    A = XtW @ X
    b = XtW @ y
    ridge = False
    try:
        phi_head = np.linalg.solve(A, b)
        if not np.all(np.isfinite(phi_head)):
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError:
        ridge = True
        phi_head = np.linalg.solve(A + 1e-8 * np.eye(d - 1), b)
    phi = np.append(phi_head, (full - base) - phi_head.sum())
    return Explanation(
        target_class=target_class,
        phi=phi,
        base_value=float(base),
        method="kernel",
        n_coalitions=len(Z) + 2,
        ridge_fallback=ridge,
    )
