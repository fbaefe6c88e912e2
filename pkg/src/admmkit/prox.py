"""Proximal operators, projections and cached regularized quadratic solves.

Every subproblem oracle used by the splitting solvers evaluates

    argmin_x  f(x) + (gamma/2) ||A x - w||^2

for a fixed function f and a fixed linear map A (A = identity for the
plain proximal maps).  Oracles are deterministic and, once built, hold no
mutable state, so they are safe to share across concurrent solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg


class OverlappingGroups(ValueError):
    """Group index sets do not form a partition."""


class SvdFailure(RuntimeError):
    """Singular value decomposition did not converge."""


class EmptyBox(ValueError):
    """Box constraint with some lower bound above the upper bound."""


class RankDeficient(RuntimeError):
    """K K^T is numerically singular; K has no full row rank."""


class NotSymmetric(ValueError):
    """Quadratic form matrix is not symmetric."""


class LinearMap:
    """Linear operator with an explicit adjoint.

    Wraps either a dense matrix or a pair of callables (for structured
    operators such as the discrete image gradient).
    """

    def __init__(self, apply, apply_adjoint, rows, cols, tag="structured"):
        self._apply = apply
        self._adjoint = apply_adjoint
        self.rows = int(rows)
        self.cols = int(cols)
        self.tag = tag

    def apply(self, v):
        return self._apply(v)

    def apply_adjoint(self, v):
        return self._adjoint(v)

    @classmethod
    def dense(cls, M, tag="dense"):
        M = np.asarray(M, dtype=float)
        return cls(lambda v: M @ v, lambda v: M.T @ v, M.shape[0], M.shape[1], tag)

    @classmethod
    def identity(cls, n):
        return cls(lambda v: v, lambda v: v, n, n, tag="identity")

    @classmethod
    def scaled_identity(cls, n, scale):
        s = float(scale)
        return cls(lambda v: s * v, lambda v: s * v, n, n, tag="scaled-identity")


@dataclass(frozen=True)
class ProxOracle:
    """Subproblem oracle: evaluate(w, gamma) -> argmin f + (gamma/2)||Ax - w||^2."""

    evaluate: Callable[[np.ndarray, float], np.ndarray]
    dim: int
    name: str = "prox"

    def __call__(self, w, gamma):
        return self.evaluate(w, gamma)


def soft_threshold_l1(w, tau):
    """Componentwise shrinkage sign(w) * max(|w| - tau, 0), the prox of tau*||.||_1."""
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)


def prox_group_l12(w, groups, tau):
    """Blockwise shrinkage w_g * max(1 - tau/||w_g||, 0), the prox of tau*||.||_{1,2}.

    `groups` is a sequence of index arrays that must partition all
    coordinates of `w`; a zero-norm block maps to the zero vector.
    """
    w = np.asarray(w, dtype=float)
    seen = np.concatenate([np.asarray(g, dtype=int) for g in groups]) if groups else np.array([], int)
    if len(seen) != w.size or len(np.unique(seen)) != w.size or seen.min(initial=0) < 0 \
            or seen.max(initial=-1) >= w.size:
        raise OverlappingGroups("group index sets must partition all coordinates")
    out = np.zeros_like(w)
    for g in groups:
        g = np.asarray(g, dtype=int)
        ng = np.linalg.norm(w[g])
        if ng > 0.0:
            out[g] = w[g] * max(1.0 - tau / ng, 0.0)
    return out


def prox_nuclear(W, tau):
    """Singular value soft thresholding, the prox of tau*||.||_* on matrices."""
    W = np.asarray(W, dtype=float)
    try:
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(f"SVD did not converge on a {W.shape} matrix") from exc
    return (U * np.maximum(s - tau, 0.0)) @ Vt


def project_box(w, lo, hi):
    """Componentwise clamp onto {x : lo <= x <= hi}."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise EmptyBox("some lower bound exceeds its upper bound")
    return np.clip(np.asarray(w, dtype=float), lo, hi)


class AffineProjectionCache:
    """Cholesky factor of K K^T, built once and reused by project_affine."""

    def __init__(self, K):
        K = np.asarray(K, dtype=float)
        try:
            self.factor = scipy.linalg.cho_factor(K @ K.T)
        except scipy.linalg.LinAlgError as exc:
            raise RankDeficient("K K^T is singular; K must have full row rank") from exc


def project_affine(w, K, f, cache=None):
    """Orthogonal projection of w onto {x : K x = f}.

    The projection is w - K^T (K K^T)^{-1} (K w - f).  Pass a prebuilt
    `AffineProjectionCache` to reuse the K K^T factorization across calls.
    """
    K = np.asarray(K, dtype=float)
    if cache is None:
        cache = AffineProjectionCache(K)
    return w - K.T @ scipy.linalg.cho_solve(cache.factor, K @ w - f)


class QuadraticSolveCache:
    """Per-matrix cache of Cholesky factors of Q + gamma*I, keyed on gamma."""

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if np.abs(Q - Q.T).max(initial=0.0) > 1e-10:
            raise NotSymmetric("Q must be symmetric")
        self.Q = Q
        self._factors: dict[float, tuple] = {}

    def factor(self, gamma):
        key = float(gamma)
        if key not in self._factors:
            n = self.Q.shape[0]
            self._factors[key] = scipy.linalg.cho_factor(self.Q + key * np.eye(n))
        return self._factors[key]


def solve_regularized_quadratic(Q, q, gamma, w, cache=None):
    """Solve (Q + gamma*I) x = gamma*w - q for symmetric positive semidefinite Q.

    This is the x-update of quadratic-plus-prox splittings; the cache keeps
    one Cholesky factor per gamma so repeated solves cost one backsubstitution.
    """
    if cache is None:
        cache = QuadraticSolveCache(Q)
    return scipy.linalg.cho_solve(cache.factor(gamma), gamma * np.asarray(w, float) - q)


def moreau_conjugate_prox(prox_f, z, gamma):
    """prox of gamma*f^* at z via the Moreau identity z = prox_{gamma f*}(z) + gamma*prox_{f/gamma}(z/gamma).

    `prox_f` must be the oracle of f with A = identity, whose evaluate(w, gamma)
    is exactly prox_{f/gamma}(w).
    """
    z = np.asarray(z, dtype=float)
    return z - gamma * prox_f.evaluate(z / gamma, gamma)


# ---------------------------------------------------------------------------
# oracle constructors

def l1_oracle(n, mu=1.0, name="l1"):
    """Oracle of f = mu*||.||_1 with A = identity."""
    return ProxOracle(lambda w, gamma: soft_threshold_l1(w, mu / gamma), n, name)


def group_l12_oracle(n, groups, mu=1.0, name="l12"):
    """Oracle of f = mu*||.||_{1,2} with A = identity."""
    groups = [np.asarray(g, dtype=int) for g in groups]
    return ProxOracle(lambda w, gamma: prox_group_l12(w, groups, mu / gamma), n, name)


def nuclear_oracle(shape, mu=1.0, name="nuclear"):
    """Oracle of f = mu*||.||_* acting on vectorized (rows x cols) matrices."""
    rows, cols = shape

    def evaluate(w, gamma):
        return prox_nuclear(w.reshape(rows, cols), mu / gamma).ravel()

    return ProxOracle(evaluate, rows * cols, name)


def box_oracle(lo, hi, name="box"):
    """Oracle of the box indicator with A = identity."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise EmptyBox("some lower bound exceeds its upper bound")
    return ProxOracle(lambda w, gamma: np.clip(w, lo, hi), lo.size, name)


def affine_oracle(K, f, name="affine"):
    """Oracle of the indicator of {x : K x = f} with A = identity."""
    K = np.asarray(K, dtype=float)
    cache = AffineProjectionCache(K)
    return ProxOracle(lambda w, gamma: project_affine(w, K, f, cache), K.shape[1], name)


def subspace_oracle(basis, name="subspace"):
    """Oracle of the indicator of span(basis) with A = identity; basis columns orthonormal."""
    U = np.asarray(basis, dtype=float)
    return ProxOracle(lambda w, gamma: U @ (U.T @ w), U.shape[0], name)


def quadratic_oracle(Q, q, name="quadratic"):
    """Oracle of f = 0.5 x'Qx + q'x with A = identity, using a cached solve."""
    cache = QuadraticSolveCache(Q)
    q = np.asarray(q, dtype=float)
    return ProxOracle(
        lambda w, gamma: solve_regularized_quadratic(cache.Q, q, gamma, w, cache),
        q.size, name)


def zero_oracle(n, name="zero"):
    """Oracle of f = 0 (the identity map)."""
    return ProxOracle(lambda w, gamma: np.asarray(w, dtype=float), n, name)


def zero_point_oracle(n, name="point-zero"):
    """Oracle of the indicator of {0}."""
    return ProxOracle(lambda w, gamma: np.zeros(n), n, name)
