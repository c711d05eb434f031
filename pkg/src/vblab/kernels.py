"""Hot-loop kernels with a compiled core and a pure-NumPy fallback.

The compiled extension (`vblab._core`, Cython) is selected at import time when
present; set ``VBLAB_PURE_PYTHON=1`` to force the fallback. Both backends
implement the same contracts and agree to ~1e-12 relative tolerance (floating
point summation order differs, so results are not bit-identical across
backends; each backend is individually deterministic).

``benchmarks/bench_kernels.py`` compares the two backends.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "HAVE_COMPILED",
    "ACTIVE_BACKEND",
    "gmm_resp_stats",
    "lda_token_stats",
    "gmm_resp_stats_pure",
    "lda_token_stats_pure",
]

_FORCE_PURE = os.environ.get("VBLAB_PURE_PYTHON", "").strip().lower() not in ("", "0", "false")

_core = None
if not _FORCE_PURE:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        _core = None

HAVE_COMPILED = _core is not None
ACTIVE_BACKEND = "compiled" if HAVE_COMPILED else "pure"


def gmm_resp_stats_pure(y, means, var_scales, elog_w):
    """Responsibility update plus sufficient statistics for the GMM E-step.

    logits_{ik} = elog_w_k - (||y_i - m_k||^2 + d v_k)/2, rows softmaxed.
    Returns (resp (n,K), Nk (K,), Sk (K,d), Tk (K,), entropy) where
    Tk = sum_i r_ik ||y_i||^2 and entropy = -sum r log r.
    """
    y = np.asarray(y, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    var_scales = np.asarray(var_scales, dtype=np.float64)
    elog_w = np.asarray(elog_w, dtype=np.float64)
    d = y.shape[1]
    ssq = np.sum(y * y, axis=1)
    sq = ssq[:, None] - 2.0 * (y @ means.T) + np.sum(means * means, axis=1)[None, :]
    logits = elog_w[None, :] - 0.5 * (sq + d * var_scales[None, :])
    m = np.max(logits, axis=1, keepdims=True)
    p = np.exp(logits - m)
    z = np.sum(p, axis=1, keepdims=True)
    resp = p / z
    log_resp = logits - m - np.log(z)
    entropy = -float(np.sum(resp * log_resp))
    nk = resp.sum(axis=0)
    sk = resp.T @ y
    tk = resp.T @ ssq
    return resp, nk, sk, tk, entropy


def lda_token_stats_pure(words, elog_beta, elog_theta):
    """Token responsibility update plus count statistics for LDA.

    logits_{dnk} = elog_theta_{dk} + elog_beta_{k, w_dn}, softmaxed over k.
    Returns (phi (D,N,K), doc_stats (D,K), topic_stats (K,V), entropy).
    """
    words = np.asarray(words, dtype=np.int64)
    elog_beta = np.asarray(elog_beta, dtype=np.float64)
    elog_theta = np.asarray(elog_theta, dtype=np.float64)
    n_docs, n_words = words.shape
    k, v = elog_beta.shape
    logits = np.transpose(elog_beta[:, words], (1, 2, 0)) + elog_theta[:, None, :]
    m = np.max(logits, axis=2, keepdims=True)
    p = np.exp(logits - m)
    z = np.sum(p, axis=2, keepdims=True)
    phi = p / z
    log_phi = logits - m - np.log(z)
    entropy = -float(np.sum(phi * log_phi))
    doc_stats = phi.sum(axis=1)
    topic_stats = np.zeros((v, k))
    np.add.at(topic_stats, words.reshape(-1), phi.reshape(-1, k))
    return phi, doc_stats, topic_stats.T.copy(), entropy


def _c64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def gmm_resp_stats(y, means, var_scales, elog_w):
    if _core is None:
        return gmm_resp_stats_pure(y, means, var_scales, elog_w)
    return _core.gmm_resp_stats(_c64(y), _c64(means), _c64(var_scales), _c64(elog_w))


def lda_token_stats(words, elog_beta, elog_theta):
    if _core is None:
        return lda_token_stats_pure(words, elog_beta, elog_theta)
    return _core.lda_token_stats(
        np.ascontiguousarray(words, dtype=np.int64), _c64(elog_beta), _c64(elog_theta)
    )
