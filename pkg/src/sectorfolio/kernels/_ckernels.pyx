# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; see ``_pykernels`` for the contracts."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def css_residuals(z, ar, ma, double intercept, Py_ssize_t start):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] arv = np.ascontiguousarray(ar, dtype=np.float64)
    cdef const double[::1] mav = np.ascontiguousarray(ma, dtype=np.float64)
    cdef Py_ssize_t m = zv.shape[0]
    cdef Py_ssize_t p = arv.shape[0]
    cdef Py_ssize_t q = mav.shape[0]
    if start < p:
        raise ValueError("start must be >= AR order")
    out = np.zeros(m)
    cdef double[::1] e = out
    cdef Py_ssize_t t, i, j
    cdef double acc
    with nogil:
        for t in range(start, m):
            acc = zv[t] - intercept
            for i in range(p):
                acc = acc - arv[i] * zv[t - 1 - i]
            for j in range(q):
                if t - 1 - j >= start:
                    acc = acc - mav[j] * e[t - 1 - j]
            e[t] = acc
    return out


cdef inline double _midpoint(double lo, double hi) noexcept nogil:
    cdef double mid = 0.5 * (lo + hi)
    if mid >= hi:
        mid = lo
    return mid


def best_split_mse(X, y, rows, features):
    cdef const double[:, :] Xv = np.asarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const Py_ssize_t[::1] rv = np.ascontiguousarray(rows, dtype=np.intp)
    cdef Py_ssize_t n = rv.shape[0]
    cdef Py_ssize_t best_f = -1
    cdef double best_t = 0.0, best_dec = 0.0
    if n < 2:
        return best_f, best_t, best_dec
    cdef double total = 0.0, total2 = 0.0, v
    cdef Py_ssize_t i, f
    for i in range(n):
        v = yv[rv[i]]
        total += v
        total2 += v * v
    cdef double sse_node = total2 - total * total / n
    vals_buf = np.empty(n)
    cdef double[::1] vals = vals_buf
    cdef const Py_ssize_t[::1] order
    cdef double cs, cs2, nl, nr, sse_l, sse_r, rs, dec, lo, hi
    cdef Py_ssize_t k
    for f in features:
        for i in range(n):
            vals[i] = Xv[rv[i], f]
        order = np.argsort(vals_buf, kind="stable")
        cs = 0.0
        cs2 = 0.0
        for i in range(n - 1):
            k = order[i]
            v = yv[rv[k]]
            cs += v
            cs2 += v * v
            lo = vals[k]
            hi = vals[order[i + 1]]
            if lo >= hi:
                continue
            nl = i + 1.0
            nr = n - nl
            sse_l = cs2 - cs * cs / nl
            rs = total - cs
            sse_r = (total2 - cs2) - rs * rs / nr
            dec = (sse_node - sse_l - sse_r) / n
            if dec > best_dec:
                best_dec = dec
                best_f = f
                best_t = _midpoint(lo, hi)
    return best_f, best_t, best_dec


def best_split_gini(X, codes, Py_ssize_t n_classes, rows, features):
    cdef const double[:, :] Xv = np.asarray(X, dtype=np.float64)
    cdef const Py_ssize_t[::1] cv = np.ascontiguousarray(codes, dtype=np.intp)
    cdef const Py_ssize_t[::1] rv = np.ascontiguousarray(rows, dtype=np.intp)
    cdef Py_ssize_t n = rv.shape[0]
    cdef Py_ssize_t best_f = -1
    cdef double best_t = 0.0, best_dec = 0.0
    if n < 2:
        return best_f, best_t, best_dec
    counts_buf = np.zeros(n_classes)
    left_buf = np.zeros(n_classes)
    cdef double[::1] counts = counts_buf
    cdef double[::1] left = left_buf
    cdef Py_ssize_t i, c, f, k
    for i in range(n):
        counts[cv[rv[i]]] += 1.0
    cdef double gini_node = 1.0, s, g_l, g_r, nl, nr, dec, lo, hi
    for c in range(n_classes):
        gini_node -= (counts[c] / n) * (counts[c] / n)
    vals_buf = np.empty(n)
    cdef double[::1] vals = vals_buf
    cdef const Py_ssize_t[::1] order
    for f in features:
        for i in range(n):
            vals[i] = Xv[rv[i], f]
        order = np.argsort(vals_buf, kind="stable")
        for c in range(n_classes):
            left[c] = 0.0
        for i in range(n - 1):
            k = order[i]
            left[cv[rv[k]]] += 1.0
            lo = vals[k]
            hi = vals[order[i + 1]]
            if lo >= hi:
                continue
            nl = i + 1.0
            nr = n - nl
            s = 0.0
            for c in range(n_classes):
                s += (left[c] / nl) * (left[c] / nl)
            g_l = 1.0 - s
            s = 0.0
            for c in range(n_classes):
                s += ((counts[c] - left[c]) / nr) * ((counts[c] - left[c]) / nr)
            g_r = 1.0 - s
            dec = gini_node - (nl * g_l + nr * g_r) / n
            if dec > best_dec:
                best_dec = dec
                best_f = f
                best_t = _midpoint(lo, hi)
    return best_f, best_t, best_dec


cdef inline double _pair_gain(double a, double d, double c, double h1, double h2,
                              double n1, double n2, double tol) noexcept nogil:
    cdef bint ok1 = n1 > 0.0 and a > tol * n1
    cdef bint ok2 = n2 > 0.0 and d > tol * n2
    cdef double det, g1, g2
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


def hinge_gain_update(bs, xs, knots, ir, il, n_plus, n_minus,
                      double[::1] sa, double[::1] sd, double[::1] sc, Qnew, rs, double tol):
    cdef const double[::1] bv = np.ascontiguousarray(bs, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const Py_ssize_t[::1] irv = np.ascontiguousarray(ir, dtype=np.intp)
    cdef const Py_ssize_t[::1] ilv = np.ascontiguousarray(il, dtype=np.intp)
    cdef const double[::1] npv = np.ascontiguousarray(n_plus, dtype=np.float64)
    cdef const double[::1] nmv = np.ascontiguousarray(n_minus, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], nk = kv.shape[0]
    cdef const double[:, ::1] Qv = np.ascontiguousarray(np.asarray(Qnew, dtype=np.float64).reshape(n, -1))
    cdef const double[::1] rv = np.ascontiguousarray(rs, dtype=np.float64)
    cdef Py_ssize_t c = Qv.shape[1]
    # knot insertion points are nondecreasing in k: one sweep from the right
    # collects every tail sum, one from the left every head sum
    acc_buf = np.zeros((2, c + 1))
    plus_buf = np.zeros((nk, c + 1))
    cdef double[:, ::1] acc = acc_buf
    cdef double[:, ::1] plus = plus_buf
    gains_buf = np.zeros(nk)
    cdef double[::1] gains = gains_buf
    cdef Py_ssize_t i, j, k, pos
    cdef double w, xx, bb, t, qp, qm
    with nogil:
        pos = n
        for k in range(nk - 1, -1, -1):
            while pos > irv[k]:
                pos -= 1
                bb = bv[pos]
                if bb == 0.0:
                    continue
                xx = xv[pos]
                for j in range(c):
                    w = bb * Qv[pos, j]
                    acc[0, j] += w
                    acc[1, j] += w * xx
                w = bb * rv[pos]
                acc[0, c] += w
                acc[1, c] += w * xx
            t = kv[k]
            for j in range(c + 1):
                plus[k, j] = acc[1, j] - t * acc[0, j]
        for j in range(c + 1):
            acc[0, j] = 0.0
            acc[1, j] = 0.0
        pos = 0
        for k in range(nk):
            while pos < ilv[k]:
                bb = bv[pos]
                if bb != 0.0:
                    xx = xv[pos]
                    for j in range(c):
                        w = bb * Qv[pos, j]
                        acc[0, j] += w
                        acc[1, j] += w * xx
                    w = bb * rv[pos]
                    acc[0, c] += w
                    acc[1, c] += w * xx
                pos += 1
            t = kv[k]
            for j in range(c):
                qp = plus[k, j]
                qm = t * acc[0, j] - acc[1, j]
                sa[k] += qp * qp
                sd[k] += qm * qm
                sc[k] += qp * qm
            qm = t * acc[0, c] - acc[1, c]
            gains[k] = _pair_gain(npv[k] - sa[k], nmv[k] - sd[k], -sc[k],
                                  plus[k, c], qm, npv[k], nmv[k], tol)
    return gains_buf


cdef bint _stable(const double* coeffs, Py_ssize_t k, double sign, double radius,
                  double* work) noexcept nogil:
    cdef Py_ssize_t i, m
    cdef double scale = 1.0, kk, den, tmp
    for i in range(k):
        scale = scale * radius
        work[i] = sign * coeffs[i] / scale
    m = k
    while m > 0:
        kk = work[m - 1]
        if not (kk < 1.0 and kk > -1.0):
            return False
        if m > 1:
            den = 1.0 - kk * kk
            # in-place symmetric update of a[0..m-2]
            i = 0
            while i <= (m - 2 - i):
                if i == m - 2 - i:
                    work[i] = (work[i] - kk * work[i]) / den
                else:
                    tmp = work[i]
                    work[i] = (work[i] - kk * work[m - 2 - i]) / den
                    work[m - 2 - i] = (work[m - 2 - i] - kk * tmp) / den
                i += 1
        m -= 1
    return True


cdef double _arma_css(const double* x, const double* z, Py_ssize_t nz, Py_ssize_t p,
                      Py_ssize_t q, Py_ssize_t start, double ma_radius,
                      double* e, double* work) noexcept nogil:
    cdef Py_ssize_t t, i, j
    cdef double acc, s = 0.0
    if not _stable(x + 1, p, -1.0, 1.0, work):
        return 1e300
    if not _stable(x + 1 + p, q, 1.0, ma_radius, work):
        return 1e300
    for t in range(start, nz):
        acc = z[t] - x[0]
        for i in range(p):
            acc = acc - x[1 + i] * z[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= start:
                acc = acc - x[1 + p + j] * e[t - 1 - j]
        e[t] = acc
        s += acc * acc
    if not (s < 1e300):
        return 1e300
    return s


def arma_css(params, z, Py_ssize_t p, Py_ssize_t q, Py_ssize_t start, double ma_radius):
    cdef const double[::1] xv = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    if start < p:
        raise ValueError("start must be >= AR order")
    e_buf = np.zeros(max(zv.shape[0], 1))
    w_buf = np.zeros(max(p, q, 1))
    cdef double[::1] e = e_buf
    cdef double[::1] w = w_buf
    return _arma_css(&xv[0], &zv[0], zv.shape[0], p, q, start, ma_radius, &e[0], &w[0])


def arma_css_minimize(z, Py_ssize_t p, Py_ssize_t q, Py_ssize_t start, x0,
                      double ma_radius, double xatol, double fatol, Py_ssize_t maxfev):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef Py_ssize_t n = x0v.shape[0], nz = zv.shape[0]
    if start < p:
        raise ValueError("start must be >= AR order")
    if n != 1 + p + q:
        raise ValueError("x0 must have 1 + p + q entries")
    sim_buf = np.empty((n + 1, n))
    fsim_buf = np.empty(n + 1)
    trial_buf = np.empty((4, n))
    e_buf = np.zeros(max(nz, 1))
    w_buf = np.zeros(max(p, q, 1))
    cdef double[:, ::1] sim = sim_buf
    cdef double[::1] fsim = fsim_buf
    cdef double[:, ::1] tr = trial_buf
    cdef double[::1] e = e_buf
    cdef double[::1] w = w_buf
    cdef double rho = 1.0, chi = 1.0 + 2.0 / n
    cdef double psi = 0.75 - 1.0 / (2.0 * n), sigma = 1.0 - 1.0 / n
    cdef Py_ssize_t i, j, k, nfev, best
    cdef double fxr, fxe, fxc, fxcc, dmax, ftmp, v
    cdef bint shrink
    with nogil:
        for k in range(n + 1):
            for j in range(n):
                sim[k, j] = x0v[j]
        for k in range(n):
            if sim[k + 1, k] != 0:
                sim[k + 1, k] = 1.05 * sim[k + 1, k]
            else:
                sim[k + 1, k] = 0.00025
        for k in range(n + 1):
            fsim[k] = _arma_css(&sim[k, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
        nfev = n + 1
        while nfev < maxfev:
            # stable insertion sort of the simplex by objective
            for i in range(1, n + 1):
                ftmp = fsim[i]
                for j in range(n):
                    tr[3, j] = sim[i, j]
                k = i - 1
                while k >= 0 and fsim[k] > ftmp:
                    fsim[k + 1] = fsim[k]
                    for j in range(n):
                        sim[k + 1, j] = sim[k, j]
                    k -= 1
                fsim[k + 1] = ftmp
                for j in range(n):
                    sim[k + 1, j] = tr[3, j]
            dmax = 0.0
            for i in range(1, n + 1):
                for j in range(n):
                    v = sim[i, j] - sim[0, j]
                    if v < 0:
                        v = -v
                    if v > dmax:
                        dmax = v
            if dmax <= xatol:
                dmax = 0.0
                for i in range(1, n + 1):
                    v = fsim[i] - fsim[0]
                    if v < 0:
                        v = -v
                    if v > dmax:
                        dmax = v
                if dmax <= fatol:
                    break
            # tr[0] = centroid, tr[1] = reflection, tr[2] = expansion/contraction
            for j in range(n):
                v = 0.0
                for i in range(n):
                    v += sim[i, j]
                tr[0, j] = v / n
                tr[1, j] = (1 + rho) * tr[0, j] - rho * sim[n, j]
            fxr = _arma_css(&tr[1, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
            nfev += 1
            shrink = False
            if fxr < fsim[0]:
                for j in range(n):
                    tr[2, j] = (1 + rho * chi) * tr[0, j] - rho * chi * sim[n, j]
                fxe = _arma_css(&tr[2, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
                nfev += 1
                if fxe < fxr:
                    for j in range(n):
                        sim[n, j] = tr[2, j]
                    fsim[n] = fxe
                else:
                    for j in range(n):
                        sim[n, j] = tr[1, j]
                    fsim[n] = fxr
            elif fxr < fsim[n - 1]:
                for j in range(n):
                    sim[n, j] = tr[1, j]
                fsim[n] = fxr
            elif fxr < fsim[n]:
                for j in range(n):
                    tr[2, j] = (1 + psi * rho) * tr[0, j] - psi * rho * sim[n, j]
                fxc = _arma_css(&tr[2, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
                nfev += 1
                if fxc <= fxr:
                    for j in range(n):
                        sim[n, j] = tr[2, j]
                    fsim[n] = fxc
                else:
                    shrink = True
            else:
                for j in range(n):
                    tr[2, j] = (1 - psi) * tr[0, j] + psi * sim[n, j]
                fxcc = _arma_css(&tr[2, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
                nfev += 1
                if fxcc < fsim[n]:
                    for j in range(n):
                        sim[n, j] = tr[2, j]
                    fsim[n] = fxcc
                else:
                    shrink = True
            if shrink:
                for i in range(1, n + 1):
                    for j in range(n):
                        sim[i, j] = sim[0, j] + sigma * (sim[i, j] - sim[0, j])
                    fsim[i] = _arma_css(&sim[i, 0], &zv[0], nz, p, q, start, ma_radius, &e[0], &w[0])
                nfev += n
        best = 0
        for i in range(1, n + 1):
            if fsim[i] < fsim[best]:
                best = i
    return sim_buf[best].copy(), float(fsim[best]), nfev
