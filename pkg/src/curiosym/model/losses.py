"""Loss functions with their analytic gradients.

Each ``*_grad`` function returns ``(loss, d_loss/d_inputs...)`` so the network
backward pass can chain them without an autodiff engine.
"""

from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class DegenerateInputError(ValueError):
    """Raised when a loss is undefined for the given inputs."""


def nll_loss(mu, log_var, effect) -> float:
    """Gaussian negative log-likelihood of one effect, summed over axes."""
    mu = np.asarray(mu, dtype=float)
    log_var = np.asarray(log_var, dtype=float)
    r = np.asarray(effect, dtype=float) - mu
    return float(np.sum(0.5 * (LOG_2PI + log_var) + r * r / (2.0 * np.exp(log_var))))


def nll_batch_grad(mu, log_var, effects):
    """Batch mean of the per-sample NLL with gradients w.r.t. ``mu`` and ``log_var``."""
    n = mu.shape[0]
    inv_var = np.exp(-log_var)
    r = effects - mu
    loss = np.sum(0.5 * (LOG_2PI + log_var) + 0.5 * r * r * inv_var) / n
    d_mu = -r * inv_var / n
    d_lv = (0.5 - 0.5 * r * r * inv_var) / n
    return float(loss), d_mu, d_lv


def mse_batch_grad(pred, effects):
    """Mean squared error over all entries and its gradient."""
    r = pred - effects
    loss = np.mean(r * r)
    return float(loss), 2.0 * r / r.size


def nt_xent_loss(z, temperature: float) -> float:
    return nt_xent_grad(z, temperature)[0]


def nt_xent_grad(z, temperature: float):
    """NT-Xent over one batch with each row's self-similarity as its positive.

    Rows are L2-normalised first, so ``s_ii == 1``. Returns ``(loss, d_loss/dz)``.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise DegenerateInputError("NT-Xent needs a batch of at least two rows")
    if temperature <= 0:
        raise DegenerateInputError("temperature must be positive")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("NT-Xent is undefined for zero-norm embeddings")
    n = z.shape[0]
    zt = z / norms
    s = zt @ zt.T / temperature
    s_max = s.max(axis=1, keepdims=True)
    e = np.exp(s - s_max)
    denom = e.sum(axis=1, keepdims=True)
    log_softmax_diag = np.diag(s) - (s_max[:, 0] + np.log(denom[:, 0]))
    loss = -np.mean(log_softmax_diag)

    g = e / denom
    g[np.diag_indices(n)] -= 1.0
    g /= n
    d_zt = (g + g.T) @ zt / temperature
    d_z = (d_zt - zt * np.sum(d_zt * zt, axis=1, keepdims=True)) / norms
    return float(loss), d_z


def total_loss(nll: float, ntxent: float, coefficient: float) -> float:
    if coefficient <= 0:
        raise ValueError("loss coefficient must be positive")
    return coefficient * (nll + ntxent)
