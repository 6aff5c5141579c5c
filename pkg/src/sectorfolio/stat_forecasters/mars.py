"""Multivariate adaptive regression splines.

Forward pass: greedy addition of reflected hinge pairs, scored through an
orthonormal basis of the current design. Projections of every candidate
hinge onto that basis are cached and only extended as columns are added. Backward pass: one-at-a-time deletion with the
model of lowest generalized cross-validation kept.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr_delete, solve_triangular

from .. import kernels
from ..market_data import FeatureFrame

logger = logging.getLogger(__name__)

GCV_PENALTY = 3.0
MAX_KNOTS = 50
# candidates whose new direction holds less than this fraction of its own
# norm (after projecting out the current basis) are treated as collinear
COLLINEAR_TOL = 1e-10
# the forward pass stops once the best pair removes less than this
# fraction of the total sum of squares
MIN_RELATIVE_GAIN = 1e-10


class MarsError(ValueError):
    pass


@dataclass(frozen=True)
class Hinge:
    column: str
    knot: float
    direction: int  # +1 -> max(0, x - knot), -1 -> max(0, knot - x)

    def evaluate(self, x):
        return np.maximum(0.0, self.direction * (x - self.knot))

    def to_dict(self):
        return {"column": self.column, "knot": self.knot, "direction": self.direction}


@dataclass(frozen=True)
class BasisTerm:
    factors: tuple
    coefficient: float

    @property
    def degree(self):
        return len(self.factors)

    def to_dict(self):
        return {"factors": [f.to_dict() for f in self.factors], "coefficient": self.coefficient}


@dataclass(frozen=True)
class MarsModel:
    intercept: float
    basis_terms: tuple
    gcv: float
    max_terms: int = 300
    max_degree: int = 3
    forward_terms: int = 1
    forward_gcv: float = math.nan
    columns: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "basis_terms": [t.to_dict() for t in self.basis_terms],
            "gcv": self.gcv,
            "forward_gcv": self.forward_gcv,
            "forward_terms": self.forward_terms,
            "max_terms": self.max_terms,
            "max_degree": self.max_degree,
        }


def gcv(rss: float, n: int, n_terms: int, penalty: float = GCV_PENALTY) -> float:
    """Generalized cross-validation with effective parameters M + penalty*(M-1)/2."""
    c = n_terms + penalty * (n_terms - 1) / 2.0
    denom = 1.0 - c / n
    if denom <= 0:
        return math.inf
    return (rss / n) / (denom * denom)


def _knot_candidates(x, mask):
    vals = np.unique(x[mask])
    if vals.shape[0] > MAX_KNOTS:
        idx = np.unique(np.linspace(0, vals.shape[0] - 1, MAX_KNOTS).round().astype(int))
        vals = vals[idx]
    return vals


def _orthogonalize(col, Q):
    """Component of ``col`` orthogonal to span(Q), with one re-orthogonalization."""
    v = col - Q @ (Q.T @ col)
    v = v - Q @ (Q.T @ v)
    return v


class _Candidate:
    """Sorted view of one (parent term, variable) pair plus running projections.

    Basis columns are never modified once added, so the projections of the
    hinge columns onto them are accumulated incrementally: each forward step
    only has to account for the newly added columns.
    """

    __slots__ = ("order", "bs", "xs", "knots", "ir", "il", "n_plus", "n_minus",
                 "sa", "sd", "sc", "seen")

    def __init__(self, b, x, knots):
        self.order = np.argsort(x, kind="stable")
        self.bs = b[self.order]
        self.xs = x[self.order]
        self.knots = knots
        self.ir = np.searchsorted(self.xs, knots, side="right")
        self.il = np.searchsorted(self.xs, knots, side="left")
        n = self.xs.shape[0]
        b2 = self.bs * self.bs
        cum = np.zeros((3, n + 1))
        np.cumsum(b2, out=cum[0, 1:])
        np.cumsum(b2 * self.xs, out=cum[1, 1:])
        np.cumsum(b2 * self.xs * self.xs, out=cum[2, 1:])
        t = knots
        tail = cum[:, n:n + 1] - cum[:, self.ir]
        head = cum[:, self.il]
        self.n_plus = tail[2] - 2 * t * tail[1] + t * t * tail[0]
        self.n_minus = head[2] - 2 * t * head[1] + t * t * head[0]
        self.sa = np.zeros(knots.shape[0])
        self.sd = np.zeros(knots.shape[0])
        self.sc = np.zeros(knots.shape[0])
        self.seen = 0

    def gains(self, Q, r):
        new = Q[self.order, self.seen:]
        self.seen = Q.shape[1]
        return kernels.hinge_gain_update(
            self.bs, self.xs, self.knots, self.ir, self.il, self.n_plus, self.n_minus,
            self.sa, self.sd, self.sc, new, r[self.order], COLLINEAR_TOL)


def _forward(Z, y, max_terms, max_degree):
    """Return (basis columns, factor lists, orthonormal basis) in standardized units."""
    n, nv = Z.shape
    B = [np.ones(n)]
    factors = [()]
    Q = np.ones((n, 1)) / math.sqrt(n)
    r = y - Q[:, 0] * (Q[:, 0] @ y)
    tss = float(r @ r)
    scale = float(np.max(np.abs(y))) if n else 0.0
    if tss <= n * (1e-13 * scale) ** 2:
        return B, factors, Q
    cands = {}
    while len(B) + 2 <= max_terms and len(B) + 2 <= n:
        best = None
        for m, (b, fac) in enumerate(zip(B, factors)):
            if len(fac) >= max_degree:
                continue
            used = {f[0] for f in fac}
            for v in range(nv):
                if v in used:
                    continue
                cand = cands.get((m, v))
                if cand is None:
                    knots = _knot_candidates(Z[:, v], b != 0)
                    cand = cands[(m, v)] = _Candidate(b, Z[:, v], knots) if knots.shape[0] else False
                if cand is False:
                    continue
                gains = cand.gains(Q, r)
                k = int(np.argmax(gains))
                if best is None or gains[k] > best[0]:
                    best = (float(gains[k]), m, v, float(cand.knots[k]))
        if best is None or best[0] < MIN_RELATIVE_GAIN * tss:
            break
        _, m, v, t = best
        added = 0
        for direction in (1, -1):
            col = B[m] * np.maximum(0.0, direction * (Z[:, v] - t))
            norm2 = float(col @ col)
            w = _orthogonalize(col, Q)
            w2 = float(w @ w)
            if norm2 <= 0 or w2 <= COLLINEAR_TOL * norm2:
                continue
            q = w / math.sqrt(w2)
            Q = np.column_stack([Q, q])
            r = r - q * (q @ r)
            B.append(col)
            factors.append(factors[m] + ((v, t, direction),))
            added += 1
        if added == 0:
            break
    return B, factors, Q


def _lstsq_rss(X, y):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def _backward(B, Q, y, tol):
    """Return (kept column indices, gcv, forward gcv).

    Deletions are done on the triangular factor ``R = Q^T B`` with QR
    downdating, so each step costs O(M^2) instead of a fresh solve. A
    deletion that leaves GCV within ``tol`` of the best so far counts as
    neutral and is accepted, so rounding noise cannot keep dead terms.
    """
    n = y.shape[0]
    X = np.column_stack(B)
    R = np.triu(Q.T @ X)
    z = Q.T @ y
    resid = y - Q @ z
    rss = float(resid @ resid)
    active = list(range(len(B)))
    forward_gcv = gcv(rss, n, len(active))
    best = (forward_gcv, list(active))
    while len(active) > 1:
        m = len(active)
        beta = solve_triangular(R, z)
        Rinv = solve_triangular(R, np.eye(m))
        diag = np.sum(Rinv * Rinv, axis=1)[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            cost = np.where(diag > 0, beta[1:] ** 2 / diag, 0.0)
        j = 1 + int(np.argmin(cost))
        G, R1 = qr_delete(np.eye(m), R, j, which="col")
        z1 = G.T @ z
        rss += float(z1[m - 1] ** 2)
        R, z = np.triu(R1[:m - 1]), z1[:m - 1]
        del active[j]
        value = gcv(rss, n, len(active))
        if value <= best[0] + tol:
            best = (min(value, best[0]), list(active))
    return best[1], best[0], forward_gcv


def mars_fit(frame: FeatureFrame, max_terms: int = 300, max_degree: int = 3) -> MarsModel:
    """Fit a MARS model to ``frame.target``.

    Knots are searched on standardized predictors and reported in the
    original units. Categorical columns are expanded to dummies first.
    """
    if max_degree < 1:
        raise MarsError("max_degree must be >= 1")
    if max_terms < 1:
        raise MarsError("max_terms must be >= 1")
    fr = frame.dummify() if frame.categorical else frame
    names = fr.names
    X = fr.matrix(names)
    y = np.asarray(fr.target, dtype=np.float64)
    n = X.shape[0]
    if n < 10:
        raise MarsError("MARS needs at least 10 rows")

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = np.flatnonzero(sd > 0)
    Z = (X[:, live] - mu[live]) / sd[live]

    B, factors, Q = _forward(Z, y, max_terms, max_degree)
    yc = y - y.mean()
    null_gcv = gcv(float(yc @ yc), n, 1)
    keep, best_gcv, forward_gcv = _backward(B, Q, y, 1e-10 * null_gcv)
    beta, rss = _lstsq_rss(np.column_stack([B[i] for i in keep]), y)
    best_gcv = gcv(rss, n, len(keep))

    terms = []
    for coef, i in zip(beta[1:], keep[1:]):
        hinges, scale = [], 1.0
        for v, t, direction in factors[i]:
            col = int(live[v])
            hinges.append(Hinge(names[col], float(mu[col] + t * sd[col]), direction))
            scale *= sd[col]
        terms.append(BasisTerm(tuple(hinges), float(coef / scale)))
    logger.debug("mars_fit: %d forward terms, %d kept", len(B), len(keep))
    return MarsModel(float(beta[0]), tuple(terms), float(best_gcv), max_terms, max_degree,
                     len(B), float(forward_gcv), tuple(names))


def mars_predict(model: MarsModel, frame: FeatureFrame) -> np.ndarray:
    fr = frame.dummify() if frame.categorical else frame
    needed = {h.column for t in model.basis_terms for h in t.factors}
    missing = sorted(needed - set(fr.columns))
    if missing:
        raise KeyError(f"frame is missing columns {missing}")
    out = np.full(len(fr), model.intercept)
    for term in model.basis_terms:
        val = np.full(len(fr), term.coefficient)
        for h in term.factors:
            val = val * h.evaluate(np.asarray(fr.columns[h.column], dtype=np.float64))
        out = out + val
    return out
