"""NumPy fallback for the path-enumeration kernels (vectorized over strategies).

Layout shared with the compiled kernels: a strategy is the stage-major
concatenation of history-tree tables; entry ``offsets[t] + w * Z**t + h`` is the
input sent at stage ``t`` (0-based) by message ``w`` after feedback prefix ``h``.
"""

import numpy as np

CHUNK_CELLS = 1 << 22


def _batch_joint(strategies, offsets, M, Z, n, Qf, Qb, prior):
    S = strategies.shape[0]
    Y = Qf.shape[1]
    A = np.broadcast_to(prior[None, :, None, None], (S, M, 1, 1)).astype(float)
    for t in range(n):
        cols = offsets[t] + np.arange(M)[:, None] * Z**t + np.arange(Z**t)[None, :]
        x = strategies[:, cols]  # (S, M, Z^t)
        fy = Qf[x]  # (S, M, Z^t, Y)
        A = np.einsum("swpq,swqy,yz->swpyqz", A, fy, Qb, optimize=False)
        A = A.reshape(S, M, Y ** (t + 1), Z ** (t + 1))
    return A.sum(axis=3)  # (S, M, Y^n)


def output_joint(flat, offsets, M, Z, n, Qf, Qb, prior):
    """``P(w, y_{1:n})`` for one strategy, shape ``(M, |Y|**n)``."""
    strategies = np.asarray(flat, dtype=np.int64)[None, :]
    return _batch_joint(strategies, offsets, M, Z, n, Qf, Qb, prior)[0]


def batch_error(strategies, offsets, M, Z, n, Qf, Qb, prior):
    """ML error probability ``1 - sum_y max_w P(w, y)`` for every strategy."""
    strategies = np.asarray(strategies, dtype=np.int64)
    S = strategies.shape[0]
    Y = Qf.shape[1]
    per = max(1, CHUNK_CELLS // max(1, M * (Y * Z) ** n))
    out = np.empty(S)
    for lo in range(0, S, per):
        joint = _batch_joint(strategies[lo : lo + per], offsets, M, Z, n, Qf, Qb, prior)
        out[lo : lo + per] = 1.0 - joint.max(axis=1).sum(axis=1)
    return out
