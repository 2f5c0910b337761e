"""Hot loops: the coordinate sweep over predictors and per-column distance
covariances.

Each kernel exists twice: an ``@njit`` version written with explicit loops
and a numpy version written with array ops. :func:`coordinate_sweep` and
:func:`dcov_columns` dispatch on :func:`bmvs._accel.use_numba`. Both versions
consume identical pre-drawn random numbers, so they agree to rounding.
"""
import math

import numpy as np

from ._accel import njit, use_numba

__all__ = ["coordinate_sweep", "dcov_columns", "double_centered"]


@njit
def _sweep_numba(X, Y, xx, beta, z, fitted, U, lam, s2b, tau0_sq, tau1_sq,
                 logit_phi, normals, uniforms, order, zprob, collapsed):
    n = X.shape[0]
    q = Y.shape[1]
    half_q_log_ratio = 0.5 * q * (math.log(tau1_sq) - math.log(tau0_sq))
    slab_gap = 1.0 / tau0_sq - 1.0 / tau1_sq
    v0 = s2b * tau0_sq
    v1 = s2b * tau1_sq
    g = np.empty(q)
    bt = np.empty(q)
    w = np.empty(q)
    new = np.empty(q)
    flips = 0
    for idx in range(order.shape[0]):
        i = order[idx]
        xxi = xx[i]
        for j in range(q):
            g[j] = xxi * beta[i, j]
        for m in range(n):
            xm = X[m, i]
            if xm != 0.0:
                for j in range(q):
                    g[j] += xm * (Y[m, j] - fitted[m, j])
        for k in range(q):
            ug = 0.0
            for j in range(q):
                ug += U[j, k] * g[j]
            bt[k] = lam[k] * ug
        if collapsed:
            # Z_i from its distribution with beta_i integrated out
            t = logit_phi
            for k in range(q):
                a1 = xxi * lam[k] * v1
                a0 = xxi * lam[k] * v0
                t += -0.5 * (math.log1p(a1) - math.log1p(a0))
                t += 0.5 * bt[k] * bt[k] * (1.0 / (1.0 / v1 + xxi * lam[k]) - 1.0 / (1.0 / v0 + xxi * lam[k]))
            prob = _expit(t)
            zprob[i] = prob
            zi = 1 if uniforms[i] < prob else 0
            if zi != z[i]:
                flips += 1
                z[i] = zi
        prior_prec = 1.0 / v1 if z[i] == 1 else 1.0 / v0
        for k in range(q):
            d = prior_prec + xxi * lam[k]
            w[k] = bt[k] / d + normals[i, k] / math.sqrt(d)
        norm2 = 0.0
        for j in range(q):
            acc = 0.0
            for k in range(q):
                acc += U[j, k] * w[k]
            new[j] = acc
            norm2 += acc * acc
        if not math.isfinite(norm2):
            return flips, i
        for j in range(q):
            w[j] = new[j] - beta[i, j]
            beta[i, j] = new[j]
        for m in range(n):
            xm = X[m, i]
            if xm != 0.0:
                for j in range(q):
                    fitted[m, j] += xm * w[j]
        if not collapsed:
            t = logit_phi - half_q_log_ratio + 0.5 * norm2 / s2b * slab_gap
            prob = _expit(t)
            zprob[i] = prob
            zi = 1 if uniforms[i] < prob else 0
            if zi != z[i]:
                flips += 1
                z[i] = zi
    return flips, -1


@njit
def _expit(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _expit_py(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _sweep_numpy(X, Y, xx, beta, z, fitted, U, lam, s2b, tau0_sq, tau1_sq,
                 logit_phi, normals, uniforms, order, zprob, collapsed):
    q = Y.shape[1]
    half_q_log_ratio = 0.5 * q * (math.log(tau1_sq) - math.log(tau0_sq))
    slab_gap = 1.0 / tau0_sq - 1.0 / tau1_sq
    v = (s2b * tau0_sq, s2b * tau1_sq)
    flips = 0
    for i in order:
        x = X[:, i]
        g = x @ (Y - fitted) + xx[i] * beta[i]
        bt = lam * (U.T @ g)
        a = xx[i] * lam
        if collapsed:
            t = logit_phi + float(np.sum(
                -0.5 * (np.log1p(a * v[1]) - np.log1p(a * v[0]))
                + 0.5 * bt**2 * (1.0 / (1.0 / v[1] + a) - 1.0 / (1.0 / v[0] + a))
            ))
            prob = _expit_py(t)
            zprob[i] = prob
            zi = 1 if uniforms[i] < prob else 0
            if zi != z[i]:
                flips += 1
                z[i] = zi
        d = 1.0 / v[z[i]] + a
        new = U @ (bt / d + normals[i] / np.sqrt(d))
        norm2 = float(new @ new)
        if not math.isfinite(norm2):
            return flips, int(i)
        fitted += np.outer(x, new - beta[i])
        beta[i] = new
        if not collapsed:
            t = logit_phi - half_q_log_ratio + 0.5 * norm2 / s2b * slab_gap
            prob = _expit_py(t)
            zprob[i] = prob
            zi = 1 if uniforms[i] < prob else 0
            if zi != z[i]:
                flips += 1
                z[i] = zi
    return flips, -1


def coordinate_sweep(X, Y, xx, beta, z, fitted, sigma_y, s2b, tau0_sq, tau1_sq,
                     logit_phi, normals, uniforms, order, zprob, collapsed=True):
    """One pass of (beta_i, Z_i) updates over ``order``, in place.

    With ``collapsed`` each predictor draws Z_i with beta_i integrated out
    and then beta_i given Z_i; otherwise beta_i is drawn first and Z_i from
    ``P(Z_i | beta_i, sigma_beta^2)``. ``zprob[i]`` receives the probability
    Z_i was drawn from.

    ``X`` should be Fortran-ordered. ``sigma_y`` is the current response
    covariance; its eigendecomposition diagonalises every beta_i precision
    so each coordinate costs O(nq + q^2). Returns ``(flips, bad)`` where
    ``bad`` is the predictor at which a non-finite value appeared, or -1.
    """
    s, U = np.linalg.eigh(sigma_y)
    lam = 1.0 / s
    U = np.ascontiguousarray(U)
    fn = _sweep_numba if use_numba() else _sweep_numpy
    flips, bad = fn(X, Y, xx, beta, z, fitted, U, lam, float(s2b), float(tau0_sq),
                    float(tau1_sq), float(logit_phi), normals, uniforms, order, zprob, bool(collapsed))
    return int(flips), int(bad)


def double_centered(d):
    """Double-centre a distance matrix: ``a_kl - a_k. - a_.l + a_..``."""
    row = d.mean(axis=1)
    col = d.mean(axis=0)
    return d - row[:, None] - col[None, :] + d.mean()


@njit
def _dcov_numba(X, B, out_xy, out_xx):
    n, p = X.shape
    A = np.empty((n, n))
    row = np.empty(n)
    for c in range(p):
        total = 0.0
        for k in range(n):
            s = 0.0
            xk = X[k, c]
            for l in range(n):
                v = abs(xk - X[l, c])
                A[k, l] = v
                s += v
            row[k] = s / n
            total += s
        grand = total / (n * n)
        sxy = 0.0
        sxx = 0.0
        for k in range(n):
            for l in range(n):
                a = A[k, l] - row[k] - row[l] + grand
                sxy += a * B[k, l]
                sxx += a * a
        out_xy[c] = sxy / (n * n)
        out_xx[c] = sxx / (n * n)


def _dcov_numpy(X, B, out_xy, out_xx, chunk=64):
    n, p = X.shape
    for start in range(0, p, chunk):
        cols = X[:, start:start + chunk]
        d = np.abs(cols[:, None, :] - cols[None, :, :])
        row = d.mean(axis=1)
        A = d - row[:, None, :] - row[None, :, :] + row.mean(axis=0)
        out_xy[start:start + chunk] = np.einsum("klc,kl->c", A, B) / (n * n)
        out_xx[start:start + chunk] = np.einsum("klc,klc->c", A, A) / (n * n)


def dcov_columns(X, B):
    """Squared distance covariances of each column of ``X`` with a response
    whose double-centred distance matrix is ``B``.

    Returns ``(dcov2_xy, dvar2_x)``, both length ``p``.
    """
    X = np.asfortranarray(X, dtype=float)
    p = X.shape[1]
    out_xy = np.empty(p)
    out_xx = np.empty(p)
    fn = _dcov_numba if use_numba() else _dcov_numpy
    fn(X, np.ascontiguousarray(B), out_xy, out_xx)
    return out_xy, out_xx
