"""numba versions of the per-cell kernels.  Top-level so the on-disk JIT cache can hit."""
import numba
import numpy as np

from ._kernels import _EXPM_THETA, _PADE6

njit = numba.njit(cache=True)


@njit
def matmul_acc(out, a, b, sign):
    nc, r, q = a.shape
    c = b.shape[2]
    for cell in range(nc):
        for i in range(r):
            for j in range(c):
                acc = 0.0
                for t in range(q):
                    acc += a[cell, i, t] * b[cell, t, j]
                out[cell, i, j] += sign * acc


@njit
def frobenius(values):
    nc = values.shape[0]
    flat = values.reshape(nc, -1)
    out = np.empty(nc)
    for cell in range(nc):
        acc = 0.0
        for t in range(flat.shape[1]):
            acc += flat[cell, t] * flat[cell, t]
        out[cell] = np.sqrt(acc)
    return out


@numba.njit(inline="always", cache=True)
def _mm(a, b, out):
    # out = a @ b for small dense blocks; avoids per-cell BLAS calls
    r, q = a.shape
    c = b.shape[1]
    for i in range(r):
        for j in range(c):
            acc = 0.0
            for t in range(q):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc


@njit
def expm(x):
    nc, m, _ = x.shape
    out = np.empty_like(x)
    a = np.empty((m, m))
    power = np.empty((m, m))
    tmp = np.empty((m, m))
    num = np.empty((m, m))
    den = np.empty((m, m))
    for cell in range(nc):
        norm = 0.0
        for j in range(m):
            col = 0.0
            for i in range(m):
                col += abs(x[cell, i, j])
            norm = max(norm, col)
        s = 0
        if norm > _EXPM_THETA:
            s = int(np.ceil(np.log2(norm / _EXPM_THETA)))
        scale = 2.0 ** -s
        for i in range(m):
            for j in range(m):
                a[i, j] = x[cell, i, j] * scale
                power[i, j] = 1.0 if i == j else 0.0
                num[i, j] = _PADE6[0] * power[i, j]
                den[i, j] = num[i, j]
        sign = 1.0
        for k in range(1, 7):
            _mm(power, a, tmp)
            power[:, :] = tmp
            sign = -sign
            for i in range(m):
                for j in range(m):
                    num[i, j] += _PADE6[k] * power[i, j]
                    den[i, j] += sign * _PADE6[k] * power[i, j]
        e = np.linalg.solve(den, num)
        for _ in range(s):
            _mm(e, e, tmp)
            e[:, :] = tmp
        out[cell] = e
    return out


@njit
def tree_transport(order, parent, gen_exp, p0):
    m = p0.shape[0]
    out = np.zeros((order.shape[0], m, m))
    out[order[0]] = p0
    for t in range(1, order.shape[0]):
        v = order[t]
        _mm(gen_exp[t], out[parent[v]], out[v])
    return out


@njit
def loop_products(mats, loops):
    m = mats.shape[1]
    nl = loops.shape[0]
    out = np.empty((nl, m, m))
    acc = np.empty((m, m))
    for c in range(nl):
        for i in range(m):
            for j in range(m):
                acc[i, j] = 1.0 if i == j else 0.0
        for j in range(loops.shape[1]):
            _mm(mats[loops[c, j]], acc, out[c])
            acc[:, :] = out[c]
    return out


@njit
def log_near_identity(mats, terms):
    nl, m, _ = mats.shape
    out = np.zeros_like(mats)
    x = np.empty((m, m))
    power = np.empty((m, m))
    tmp = np.empty((m, m))
    for c in range(nl):
        for i in range(m):
            for j in range(m):
                x[i, j] = mats[c, i, j] - (1.0 if i == j else 0.0)
                power[i, j] = 1.0 if i == j else 0.0
        for k in range(1, terms + 1):
            _mm(power, x, tmp)
            power[:, :] = tmp
            coef = (-1.0) ** (k + 1) / k
            for i in range(m):
                for j in range(m):
                    out[c, i, j] += coef * power[i, j]
    return out
