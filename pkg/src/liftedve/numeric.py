"""Table arithmetic in linear or log space.

Every helper takes ``log``; with it set, tables hold natural logs and -inf
stands for zero. Linear-space helpers raise ``Overflow`` when a result
leaves the normal float range, so the engine can retry in log space.
Convention: 0 ** 0 == 1.
"""

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError

TINY = np.finfo(float).tiny


class Overflow(NumericError):
    """A linear-space result over- or underflowed."""


def _guard(res, zero):
    if not np.all(np.isfinite(res)):
        raise Overflow("table entry overflowed")
    bad = (res < TINY) & ~zero
    if np.any(bad):
        raise Overflow("table entry underflowed")
    return res


def power(t, r, log):
    if log:
        if r == 0:
            return np.zeros_like(t)
        return np.where(np.isneginf(t), -np.inf, t * r)
    with np.errstate(over="ignore", under="ignore"):
        res = np.power(t, r)
    return _guard(res, (t == 0) & (r > 0))


def multiply(a, b, log):
    """Elementwise product of two broadcastable tables."""
    if log:
        return a + b
    with np.errstate(over="ignore", under="ignore"):
        res = a * b
    return _guard(res, (a == 0) | (b == 0))


def weighted_sum(t, axis, logw, log):
    """sum_v w[v] * t[..., v, ...] along ``axis``; weights given as logs."""
    shape = [1] * t.ndim
    shape[axis] = -1
    lw = np.reshape(logw, shape)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            return logsumexp(t + lw, axis=axis)
    w = np.exp(lw)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        res = np.sum(t * w, axis=axis)
    return _guard(res, np.all(t == 0, axis=axis))


def histogram_power(t, axis, H, log):
    """Replace axis of size r by one of size K: out[k] = prod_v t[v] ** H[k, v]."""
    T = np.moveaxis(t, axis, -1)
    Hf = H.astype(float)
    used = (H > 0).T.astype(float)  # (r, K)
    if log:
        neg = np.isneginf(T)
        base = np.where(neg, 0.0, T) @ Hf.T
        hit = (neg.astype(float) @ used) > 0
        out = np.where(hit, -np.inf, base)
    else:
        zero = T == 0
        with np.errstate(divide="ignore"):
            L = np.where(zero, 0.0, np.log(np.where(zero, 1.0, T)))
        hit = (zero.astype(float) @ used) > 0
        with np.errstate(over="ignore", under="ignore"):
            out = np.where(hit, 0.0, np.exp(L @ Hf.T))
        out = _guard(out, hit)
    return np.moveaxis(out, -1, axis)


def histogram_power_onto(t, axis, hist_axis, H, log):
    """Fold axis (size r) into an existing histogram axis (size K):
    out[.., k, ..] = prod_v t[.., v, .., k, ..] ** H[k, v]."""
    T = np.moveaxis(t, (hist_axis, axis), (-2, -1))  # (..., K, r)
    used = H > 0
    if log:
        neg = np.isneginf(T) & used
        base = np.where(np.isneginf(T), 0.0, T) * H
        out = np.where(neg.any(axis=-1), -np.inf, base.sum(axis=-1))
    else:
        zero = (T == 0) & used
        with np.errstate(divide="ignore"):
            L = np.where(T == 0, 0.0, np.log(np.where(T == 0, 1.0, T)))
        hit = zero.any(axis=-1)
        with np.errstate(over="ignore", under="ignore"):
            out = np.where(hit, 0.0, np.exp((L * H).sum(axis=-1)))
        out = _guard(out, hit)
    # the histogram axis now sits last; put it back where it was
    dest = hist_axis if hist_axis < axis else hist_axis - 1
    return np.moveaxis(out, -1, dest)


def to_log(t):
    with np.errstate(divide="ignore"):
        return np.log(t)


def normalize(t, log):
    """Probability vector from a (log) table of nonnegative weights."""
    if log:
        if np.all(np.isneginf(t)):
            return None
        p = np.exp(t - np.max(t))
    else:
        p = np.asarray(t, dtype=float)
    z = p.sum()
    if not np.isfinite(z) or z <= 0:
        return None
    return p / z
