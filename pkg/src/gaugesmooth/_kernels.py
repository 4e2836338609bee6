"""Per-cell matrix kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``GAUGESMOOTH_DISABLE_NUMBA``
is unset or ``0``.  Both paths are always importable (``numpy_impl`` and
``numba_impl``) so they can be compared directly in tests and benchmarks.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# [6/6] Pade coefficients for exp
_PADE6 = np.array([1.0, 1.0 / 2, 5.0 / 44, 1.0 / 66, 1.0 / 792, 1.0 / 15840, 1.0 / 665280])
_EXPM_THETA = 0.5


# ---------------------------------------------------------------------------
# numpy path


def _np_matmul_acc(out, a, b, sign):
    out += sign * np.matmul(a, b)


def _np_frobenius(values):
    v = values.reshape(values.shape[0], -1)
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def _np_expm(x):
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    norms = np.abs(x).sum(axis=-2).max(axis=-1)
    s = np.maximum(0, np.ceil(np.log2(np.maximum(norms, 1e-300) / _EXPM_THETA))).astype(int)
    xs = x / (2.0 ** s)[:, None, None]
    eye = np.broadcast_to(np.eye(m), x.shape)
    num = np.zeros_like(xs) + eye * _PADE6[0]
    den = num.copy()
    power = np.array(eye)
    for j in range(1, 7):
        power = np.matmul(power, xs)
        num = num + _PADE6[j] * power
        den = den + ((-1) ** j) * _PADE6[j] * power
    out = np.linalg.solve(den, num)
    for i in range(out.shape[0]):
        for _ in range(s[i]):
            out[i] = out[i] @ out[i]
    return out


def _np_tree_transport(order, parent, gen_exp, p0):
    m = p0.shape[0]
    out = np.zeros((order.shape[0], m, m))
    out[order[0]] = p0
    for t in range(1, order.shape[0]):
        v = order[t]
        out[v] = gen_exp[t] @ out[parent[v]]
    return out


def _np_loop_products(mats, loops):
    """Ordered product ``mats[loops[c, -1]] @ ... @ mats[loops[c, 0]]``."""
    m = mats.shape[1]
    out = np.broadcast_to(np.eye(m), (loops.shape[0], m, m)).copy()
    for j in range(loops.shape[1]):
        out = np.matmul(mats[loops[:, j]], out)
    return out


def _np_log_near_identity(mats, terms):
    m = mats.shape[1]
    x = mats - np.eye(m)
    out = np.zeros_like(x)
    power = np.broadcast_to(np.eye(m), x.shape).copy()
    for j in range(1, terms + 1):
        power = np.matmul(power, x)
        out += ((-1) ** (j + 1) / j) * power
    return out


numpy_impl = SimpleNamespace(
    matmul_acc=_np_matmul_acc,
    frobenius=_np_frobenius,
    expm=_np_expm,
    tree_transport=_np_tree_transport,
    loop_products=_np_loop_products,
    log_near_identity=_np_log_near_identity,
    name="numpy",
)


# ---------------------------------------------------------------------------
# numba path


def _build_numba():
    from . import _numba_kernels as nk

    return SimpleNamespace(
        matmul_acc=nk.matmul_acc,
        frobenius=nk.frobenius,
        expm=nk.expm,
        tree_transport=nk.tree_transport,
        loop_products=nk.loop_products,
        log_near_identity=nk.log_near_identity,
        name="numba",
    )


def _numba_wanted() -> bool:
    return os.environ.get("GAUGESMOOTH_DISABLE_NUMBA", "0") in ("", "0")


try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba_impl = None

active = numba_impl if (numba_impl is not None and _numba_wanted()) else numpy_impl


def backend_name() -> str:
    return active.name


def matmul_acc(out, a, b, sign=1.0):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    active.matmul_acc(out, a, b, float(sign))


def frobenius(values):
    return active.frobenius(np.ascontiguousarray(values, dtype=float))


def expm(x):
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape[0] == 0:
        return x.copy()
    return active.expm(x)


def tree_transport(order, parent, gen_exp, p0):
    return active.tree_transport(
        np.ascontiguousarray(order, dtype=np.int64),
        np.ascontiguousarray(parent, dtype=np.int64),
        np.ascontiguousarray(gen_exp, dtype=float),
        np.ascontiguousarray(p0, dtype=float),
    )


def loop_products(mats, loops):
    return active.loop_products(
        np.ascontiguousarray(mats, dtype=float),
        np.ascontiguousarray(loops, dtype=np.int64),
    )


def log_near_identity(mats, terms=12):
    return active.log_near_identity(np.ascontiguousarray(mats, dtype=float), int(terms))
