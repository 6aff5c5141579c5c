"""Pure numpy/scipy implementations of the hot loops.

Each function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics; ``sectorfolio.kernels`` picks one at import.
"""
import numpy as np
from scipy.signal import lfilter

NAME = "python"


def css_residuals(z, ar, ma, intercept, start):
    """Conditional-sum-of-squares residuals of an ARMA recursion.

    ``e[t] = z[t] - c - sum_i ar[i] z[t-1-i] - sum_j ma[j] e[t-1-j]`` for
    ``t >= start``; residuals before ``start`` are zero (pre-sample errors).
    """
    z = np.asarray(z, dtype=np.float64)
    ar = np.asarray(ar, dtype=np.float64)
    ma = np.asarray(ma, dtype=np.float64)
    m = z.shape[0]
    p = ar.shape[0]
    if start < p:
        raise ValueError("start must be >= AR order")
    e = np.zeros(m)
    if start >= m:
        return e
    w = z[start:] - intercept
    for i in range(p):
        w = w - ar[i] * z[start - 1 - i:m - 1 - i]
    if ma.shape[0]:
        with np.errstate(over="ignore", invalid="ignore"):
            e[start:] = lfilter([1.0], np.concatenate(([1.0], ma)), w)
    else:
        e[start:] = w
    return e


def best_split_mse(X, y, rows, features):
    """Best variance-reduction split over ``features`` for the node ``rows``.

    ``y`` should already be centred on the node mean. Returns
    ``(feature, threshold, decrease)`` with ``feature == -1`` when no split
    separates distinct values. ``decrease`` is per-row (node variance minus
    weighted child variance).
    """
    rows = np.asarray(rows, dtype=np.intp)
    n = rows.shape[0]
    yn = y[rows]
    total = 0.0
    total2 = 0.0
    for v in yn:
        total += v
        total2 += v * v
    sse_node = total2 - total * total / n
    best_f, best_t, best_dec = -1, 0.0, 0.0
    if n < 2:
        return best_f, best_t, best_dec
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    for f in features:
        vals = X[rows, f]
        order = np.argsort(vals, kind="stable")
        vs = vals[order]
        ys = yn[order]
        cs = np.cumsum(ys)[:-1]
        cs2 = np.cumsum(ys * ys)[:-1]
        sse_l = cs2 - cs * cs / n_left
        rs = total - cs
        sse_r = (total2 - cs2) - rs * rs / n_right
        dec = (sse_node - sse_l - sse_r) / n
        dec[vs[:-1] >= vs[1:]] = -np.inf
        i = int(np.argmax(dec))
        if dec[i] > best_dec:
            best_dec = float(dec[i])
            best_f = int(f)
            best_t = _midpoint(vs[i], vs[i + 1])
    return best_f, best_t, best_dec


def best_split_gini(X, codes, n_classes, rows, features):
    """Best Gini-decrease split; ``codes`` are class indices in [0, n_classes)."""
    rows = np.asarray(rows, dtype=np.intp)
    n = rows.shape[0]
    cn = codes[rows]
    counts = np.bincount(cn, minlength=n_classes).astype(np.float64)
    gini_node = 1.0 - np.sum((counts / n) ** 2)
    best_f, best_t, best_dec = -1, 0.0, 0.0
    if n < 2:
        return best_f, best_t, best_dec
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    onehot = np.zeros((n, n_classes))
    for f in features:
        vals = X[rows, f]
        order = np.argsort(vals, kind="stable")
        vs = vals[order]
        onehot[:] = 0.0
        onehot[np.arange(n), cn[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = counts[None, :] - left
        g_l = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
        g_r = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
        dec = gini_node - (n_left * g_l + n_right * g_r) / n
        dec[vs[:-1] >= vs[1:]] = -np.inf
        i = int(np.argmax(dec))
        if dec[i] > best_dec:
            best_dec = float(dec[i])
            best_f = int(f)
            best_t = _midpoint(vs[i], vs[i + 1])
    return best_f, best_t, best_dec


def hinge_gain_update(bs, xs, knots, ir, il, n_plus, n_minus, sa, sd, sc, Qnew, rs, tol):
    """Incremental RSS reduction of the hinge pair ``b*(x-t)+``, ``b*(t-x)+``.

    All row-indexed inputs (``bs``, ``xs``, ``Qnew``, ``rs``) are sorted by
    ``xs``; ``ir``/``il`` are the right/left insertion points of each knot.
    ``n_plus``/``n_minus`` hold the squared norms of the two hinge columns.
    ``sa``, ``sd`` and ``sc`` accumulate, per knot, the squared projections
    of the plus and minus columns (and their cross product) onto the basis
    seen so far; they are updated in place with the new orthonormal columns
    ``Qnew``. ``rs`` is the current residual, orthogonal to the full basis.
    Returns the gain for every knot; collinear candidates contribute 0.
    """
    bs = np.asarray(bs, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    t = np.asarray(knots, dtype=np.float64)
    n = xs.shape[0]
    V = np.column_stack([np.asarray(Qnew, dtype=np.float64).reshape(n, -1), rs])
    bv = bs[:, None] * V
    c0 = np.zeros((n + 1, V.shape[1]))
    c1 = np.zeros((n + 1, V.shape[1]))
    np.cumsum(bv, axis=0, out=c0[1:])
    np.cumsum(bv * xs[:, None], axis=0, out=c1[1:])
    tt = t[:, None]
    P = (c1[n] - c1[ir]) - tt * (c0[n] - c0[ir])
    M = tt * c0[il] - c1[il]
    qp, qm = P[:, :-1], M[:, :-1]
    sa += np.sum(qp * qp, axis=1)
    sd += np.sum(qm * qm, axis=1)
    sc += np.sum(qp * qm, axis=1)
    hp, hm = P[:, -1], M[:, -1]
    gains = np.zeros(t.shape[0])
    for k in range(t.shape[0]):
        gains[k] = _pair_gain(n_plus[k] - sa[k], n_minus[k] - sd[k], -sc[k],
                              hp[k], hm[k], n_plus[k], n_minus[k], tol)
    return gains


def _pair_gain(a, d, c, h1, h2, n1, n2, tol):
    ok1 = n1 > 0.0 and a > tol * n1
    ok2 = n2 > 0.0 and d > tol * n2
    if ok1 and ok2:
        det = a * d - c * c
        if det > tol * a * d:
            return (d * h1 * h1 - 2.0 * c * h1 * h2 + a * h2 * h2) / det
        g1 = h1 * h1 / a
        g2 = h2 * h2 / d
        return g1 if g1 >= g2 else g2
    if ok1:
        return h1 * h1 / a
    if ok2:
        return h2 * h2 / d
    return 0.0


def _midpoint(lo, hi):
    mid = 0.5 * (lo + hi)
    if mid >= hi:
        mid = lo
    return float(mid)


def _stable(coeffs, sign, radius):
    a = [sign * float(c) / radius ** (i + 1) for i, c in enumerate(coeffs)]
    for m in range(len(a), 0, -1):
        k = a[m - 1]
        if not abs(k) < 1.0:
            return False
        if m > 1:
            den = 1.0 - k * k
            a = [(a[i] - k * a[m - 2 - i]) / den for i in range(m - 1)]
    return True


def arma_css(params, z, p, q, start, ma_radius):
    """CSS of ``params = [c, ar..., ma...]``; 1e300 outside the admissible region."""
    if not (_stable(params[1:1 + p], -1.0, 1.0) and _stable(params[1 + p:1 + p + q], 1.0, ma_radius)):
        return 1e300
    e = css_residuals(z, params[1:1 + p], params[1 + p:1 + p + q], params[0], start)
    s = float(e @ e)
    return s if np.isfinite(s) and s < 1e300 else 1e300


def arma_css_minimize(z, p, q, start, x0, ma_radius, xatol, fatol, maxfev):
    """Adaptive Nelder-Mead on the ARMA conditional sum of squares.

    Returns ``(x, fval, nfev)``.
    """
    z = np.asarray(z, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    n = x0.shape[0]

    def f(x):
        return arma_css(x, z, p, q, start, ma_radius)

    rho, chi = 1.0, 1.0 + 2.0 / n
    psi, sigma = 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n
    sim = np.empty((n + 1, n))
    sim[0] = x0
    for k in range(n):
        y = x0.copy()
        y[k] = (1.05 * y[k]) if y[k] != 0 else 0.00025
        sim[k + 1] = y
    fsim = np.array([f(s) for s in sim])
    nfev = n + 1
    while nfev < maxfev:
        order = np.argsort(fsim, kind="stable")
        sim = sim[order]
        fsim = fsim[order]
        if (np.max(np.abs(sim[1:] - sim[0])) <= xatol
                and np.max(np.abs(fsim[1:] - fsim[0])) <= fatol):
            break
        xbar = np.sum(sim[:-1], axis=0) / n
        xr = (1 + rho) * xbar - rho * sim[-1]
        fxr = f(xr)
        nfev += 1
        shrink = False
        if fxr < fsim[0]:
            xe = (1 + rho * chi) * xbar - rho * chi * sim[-1]
            fxe = f(xe)
            nfev += 1
            if fxe < fxr:
                sim[-1], fsim[-1] = xe, fxe
            else:
                sim[-1], fsim[-1] = xr, fxr
        elif fxr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fxr
        elif fxr < fsim[-1]:
            xc = (1 + psi * rho) * xbar - psi * rho * sim[-1]
            fxc = f(xc)
            nfev += 1
            if fxc <= fxr:
                sim[-1], fsim[-1] = xc, fxc
            else:
                shrink = True
        else:
            xcc = (1 - psi) * xbar + psi * sim[-1]
            fxcc = f(xcc)
            nfev += 1
            if fxcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fxcc
            else:
                shrink = True
        if shrink:
            for j in range(1, n + 1):
                sim[j] = sim[0] + sigma * (sim[j] - sim[0])
                fsim[j] = f(sim[j])
            nfev += n
    i = int(np.argmin(fsim))
    return sim[i].copy(), float(fsim[i]), nfev
