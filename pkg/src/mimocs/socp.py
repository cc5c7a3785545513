"""Primal-dual interior-point method for second-order cone programs.

Solves the pair ::

    minimize    c'x                 maximize    -h'z
    subject to  G x + s = h         subject to  G'z + c = 0
                s in K                          z in K

where ``K`` is a product of ``m`` second-order cones of a common dimension
``q``: ``{(u0, u1) : u0 >= ||u1||}``.  The iteration is the infeasible-start
Mehrotra predictor-corrector scheme with Nesterov-Todd scaling (the same
scheme as CVXOPT's ``coneqp`` restricted to linear objectives).  Every cone
has the same dimension, so all cone arithmetic is vectorized over an
``(m, q)`` array.

Problems here are small and dense (a few hundred variables at most), so the
Newton system is reduced to the normal equations ``G' W^-2 G dx = rhs`` and
factored with a dense Cholesky.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class ConeSolverError(RuntimeError):
    """Raised when the interior-point iteration fails to reach its tolerances.

    The best iterate seen and its residuals travel with the exception so the
    caller can decide whether the point is usable.
    """

    def __init__(self, message, x=None, residuals=None):
        super().__init__(message)
        self.x = x
        self.residuals = residuals or {}


@dataclass
class ConeSolution:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int

    @property
    def relative_gap(self):
        denom = max(abs(self.primal_objective), abs(self.dual_objective), 1e-300)
        return self.gap / denom


def _jdot(u, v):
    """Row-wise J-inner product u0 v0 - u1.v1."""
    return u[:, 0] * v[:, 0] - np.sum(u[:, 1:] * v[:, 1:], axis=1)


def _jdet(u):
    """u0^2 - ||u1||^2 evaluated without cancellation."""
    r = np.linalg.norm(u[:, 1:], axis=1)
    return (u[:, 0] - r) * (u[:, 0] + r)


def _jprod(u, v):
    """Jordan product u o v = (u'v, u0 v1 + v0 u1), row-wise."""
    out = np.empty_like(u)
    out[:, 0] = np.sum(u * v, axis=1)
    out[:, 1:] = u[:, :1] * v[:, 1:] + v[:, :1] * u[:, 1:]
    return out


def _jdiv(lam, b):
    """Solve lam o x = b for x, row-wise (lam in the cone interior)."""
    det = _jdet(lam)
    x = np.empty_like(b)
    x[:, 0] = (lam[:, 0] * b[:, 0] - np.sum(lam[:, 1:] * b[:, 1:], axis=1)) / det
    x[:, 1:] = (b[:, 1:] - x[:, :1] * lam[:, 1:]) / lam[:, :1]
    return x


def _max_step(u, d):
    """Largest alpha >= 0 with u + alpha d in the cone, per row (inf if unbounded)."""
    a = _jdot(d, d)
    b = 2 * _jdot(u, d)
    c = _jdet(u)
    steps = np.full(len(u), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        # numerically stable pair of roots
        qq = -0.5 * (b + np.copysign(sq, b))
        r1 = qq / a
        r2 = c / qq
        lin = -c / b
    quad = np.abs(a) > 1e-14 * (np.abs(b) + np.abs(c) + 1e-300)
    for roots in (np.where(quad & (disc >= 0), r1, np.inf),
                  np.where(quad & (disc >= 0), r2, np.inf),
                  np.where(~quad & (b < 0), lin, np.inf)):
        roots = np.where(np.isfinite(roots) & (roots > 0), roots, np.inf)
        steps = np.minimum(steps, roots)
    with np.errstate(divide="ignore", invalid="ignore"):
        axis = np.where(d[:, 0] < 0, -u[:, 0] / d[:, 0], np.inf)
    return np.minimum(steps, axis)


class _Scaling:
    """Nesterov-Todd scaling W = beta (2 v v' - J) for each cone."""

    def __init__(self, s, z):
        a = np.sqrt(_jdet(s))
        b = np.sqrt(_jdet(z))
        if not (np.all(a > 0) and np.all(b > 0)):
            raise FloatingPointError("iterate left the cone interior")
        sb = s / a[:, None]
        zb = z / b[:, None]
        gamma = np.sqrt((1 + np.sum(sb * zb, axis=1)) / 2)
        wb = sb.copy()
        wb[:, 0] += zb[:, 0]
        wb[:, 1:] -= zb[:, 1:]
        wb /= 2 * gamma[:, None]
        self.beta = np.sqrt(a / b)
        self.v = wb.copy()
        self.v[:, 0] += 1
        self.v /= np.sqrt(2 * (wb[:, 0] + 1))[:, None]
        q = s.shape[1]
        J = np.diag(np.r_[1.0, -np.ones(q - 1)])
        vv = np.einsum("ki,kj->kij", self.v, self.v)
        self.W = self.beta[:, None, None] * (2 * vv - J)
        Jv = self.v * np.r_[1.0, -np.ones(q - 1)]
        self.Winv = (2 * np.einsum("ki,kj->kij", Jv, Jv) - J) / self.beta[:, None, None]

    def apply(self, u):
        return np.einsum("kij,kj->ki", self.W, u)

    def apply_inv(self, u):
        return np.einsum("kij,kj->ki", self.Winv, u)


def _initial_point(G, h, c, m, q):
    GtG = G.T @ G
    cho = sla.cho_factor(GtG)
    x = sla.cho_solve(cho, G.T @ h)
    s = (h - G @ x).reshape(m, q)
    z = (-G @ sla.cho_solve(cho, c)).reshape(m, q)
    for u in (s, z):
        margin = np.max(np.linalg.norm(u[:, 1:], axis=1) - u[:, 0])
        if margin >= 0:
            u[:, 0] += 1 + margin
    return x, s, z


def solve_socp(c, G, h, cone_dim, max_iter=200, feastol=1e-9, abstol=1e-10,
               reltol=1e-9, step_fraction=0.99, refinement=2):
    """Solve the cone program described in the module docstring.

    Args:
        c: objective vector, length n.
        G: (m*q) x n constraint matrix; rows grouped cone by cone.
        h: right-hand side, length m*q.
        cone_dim: common cone dimension q (>= 2).
        max_iter: iteration budget.
        feastol: bound on the scaled primal and dual residuals.
        abstol, reltol: absolute and relative duality-gap targets.
        refinement: iterative-refinement passes on each Newton solve.

    Returns:
        ConeSolution.

    Raises:
        ConeSolverError: tolerances not met within ``max_iter`` iterations or
            the Newton system broke down.
    """
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    q = int(cone_dim)
    if G.shape[0] % q or h.shape[0] != G.shape[0] or c.shape[0] != G.shape[1]:
        raise ValueError("inconsistent cone program dimensions")
    m = G.shape[0] // q
    e = np.zeros((m, q))
    e[:, 0] = 1.0

    x, s, z = _initial_point(G, h, c, m, q)
    resx0 = max(1.0, np.linalg.norm(c))
    resz0 = max(1.0, np.linalg.norm(h))
    best = None

    for it in range(max_iter + 1):
        rx = G.T @ z.ravel() + c
        rz = G @ x + s.ravel() - h
        gap = float(np.sum(s * z))
        pcost = float(c @ x)
        dcost = float(-h @ z.ravel())
        pres = np.linalg.norm(rz) / resz0
        dres = np.linalg.norm(rx) / resx0
        if pcost < 0:
            relgap = gap / -pcost
        elif dcost > 0:
            relgap = gap / dcost
        else:
            relgap = np.inf
        score = max(pres, dres, min(gap, relgap))
        if best is None or score < best[0]:
            best = (score, x.copy(), dict(primal=pres, dual=dres, gap=gap))
        if pres <= feastol and dres <= feastol and (gap <= abstol or relgap <= reltol):
            return ConeSolution(x, s.ravel(), z.ravel(), pcost, dcost, gap, pres, dres, it)
        if it == max_iter:
            break

        try:
            W = _Scaling(s, z)
            lam = W.apply(z)
            # G' W^-2 G, with W^-1 applied cone-block-wise to the rows of G
            Gs = np.einsum("kij,kjn->kin", W.Winv, G.reshape(m, q, -1)).reshape(m * q, -1)
            H = Gs.T @ Gs
            cho = sla.cho_factor(H + 1e-14 * np.trace(H) / len(H) * np.eye(len(H)))
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise ConeSolverError(f"Newton system breakdown at iteration {it}: {exc}",
                                  best[1], best[2]) from exc

        def solve_q(bx, bz, qv):
            # G' dz = bx;  G dx + ds = bz;  W dz + W^-1 ds = qv
            wq = W.apply(qv)
            t = W.apply_inv(W.apply_inv(bz - wq))
            dx = sla.cho_solve(cho, bx + G.T @ t.ravel())
            dz = W.apply_inv(W.apply_inv((G @ dx).reshape(m, q) - bz + wq))
            ds = wq - W.apply(W.apply(dz))
            return dx, ds, dz

        def newton(bx, bz, bs):
            # lam o (W dz + W^-1 ds) = bs, then iterative refinement
            bz = bz.reshape(m, q)
            qv = _jdiv(lam, bs)
            dx, ds, dz = solve_q(bx, bz, qv)
            for _ in range(refinement):
                ex, es, ez = solve_q(bx - G.T @ dz.ravel(),
                                     bz - (G @ dx).reshape(m, q) - ds,
                                     qv - W.apply(dz) - W.apply_inv(ds))
                dx, ds, dz = dx + ex, ds + es, dz + ez
            return dx, ds, dz

        mu = gap / m
        # affine-scaling predictor
        dx, ds, dz = newton(-rx, -rz, -_jprod(lam, lam))
        alpha = min(1.0, _max_step(s, ds).min(), _max_step(z, dz).min())
        sigma = min(1.0, max(0.0, 1 - alpha + alpha ** 2 * np.sum(ds * dz) / gap)) ** 3
        # combined corrector
        ds_s = W.apply_inv(ds)
        dz_s = W.apply(dz)
        bs = -_jprod(lam, lam) - _jprod(ds_s, dz_s) + sigma * mu * e
        dx, ds, dz = newton(-rx, -rz, bs)
        alpha = min(_max_step(s, ds).min(), _max_step(z, dz).min())
        alpha = min(1.0, step_fraction * alpha)
        x = x + alpha * dx
        s = s + alpha * ds
        z = z + alpha * dz
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(z))):
            raise ConeSolverError("iterates diverged", best[1], best[2])

    raise ConeSolverError(f"no convergence within {max_iter} iterations", best[1], best[2])
