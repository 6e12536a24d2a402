"""Independent reference implementations used by the unit and acceptance tests."""

import math

import numpy as np

from dnnfbcc.fbnn import PARAM_NAMES, FbnnModel, forward


def tiny_mask(D=9, C=3):
    """Band-limited triangular mask with a few exact zeros."""
    mask = np.zeros((D, C))
    width = D // C + 1
    for c in range(C):
        lo = c * (D // C)
        mask[lo:lo + width, c] = np.linspace(0.2, 1.0, width)[: D - lo]
    return mask


def tiny_model(rng, D=9, C=3, H=5, K=3, scale=0.5):
    mask = tiny_mask(D, C)
    return FbnnModel(W=rng.normal(0, 1.0, (D, C)), mask=mask, W2=rng.normal(0, scale, (C, H)),
                     b2=rng.normal(0, scale, H), W3=rng.normal(0, scale, (H, K)), b3=rng.normal(0, scale, K))


def numeric_gradients(model, F, labels, eps=1e-5):
    out = {}
    for name in PARAM_NAMES:
        param = getattr(model, name)
        grad = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            saved = param[idx]
            param[idx] = saved + eps
            up = forward(model, F, labels).loss
            param[idx] = saved - eps
            down = forward(model, F, labels).loss
            param[idx] = saved
            grad[idx] = (up - down) / (2 * eps)
        out[name] = grad
    return out


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-300)


def naive_dct2_ortho(x):
    """Direct O(C^2) orthonormal DCT-II of a vector."""
    C = len(x)
    out = np.zeros(C)
    for k in range(C):
        scale = math.sqrt(1.0 / C) if k == 0 else math.sqrt(2.0 / C)
        out[k] = scale * sum(x[n] * math.cos(math.pi * k * (2 * n + 1) / (2 * C)) for n in range(C))
    return out


def naive_density(weights, means, variances, x):
    """Mixture density evaluated term by term with math.exp."""
    total = 0.0
    for w, mu, var in zip(weights, means, variances):
        comp = 1.0
        for xi, m, v in zip(x, mu, var):
            comp *= math.exp(-((xi - m) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v)
        total += w * comp
    return total


def brute_force_eer(pos, neg):
    """Loop-based EER: sweep every candidate threshold, interpolate at the crossing."""
    cands = sorted(set(pos) | set(neg)) + [float("inf")]
    pts = []
    for t in cands:
        frr = sum(1 for p in pos if p < t) / len(pos)
        far = sum(1 for n in neg if n >= t) / len(neg)
        pts.append((frr, far))
    prev = None
    for frr, far in pts:
        if frr >= far:
            if frr == far or prev is None:
                return frr
            d0, d1 = prev[0] - prev[1], frr - far
            a = -d0 / (d1 - d0)
            return prev[0] + a * (frr - prev[0])
        prev = (frr, far)
    raise AssertionError("curves never cross")


def random_sets(rng, n):
    for i in range(n):
        npos, nneg = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        if i % 3 == 0:
            # integer scores produce many ties
            yield rng.integers(-5, 6, npos).astype(float), rng.integers(-5, 6, nneg).astype(float)
        else:
            yield rng.normal(1.0, 1.0, npos), rng.normal(0.0, 1.0, nneg)


def two_sided_sum(one_sided):
    return one_sided[..., 0] + one_sided[..., -1] + 2 * one_sided[..., 1:-1].sum(axis=-1)
