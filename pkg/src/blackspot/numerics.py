"""Numerical building blocks: seeded random streams, Beta sampling, Adam,
PCA, RBF kernels, finite differences and a limited-memory BFGS minimiser.

Matrices are plain ``numpy.ndarray`` objects (row-major float64); use
:func:`as_matrix` at module boundaries to enforce shape and finiteness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, ParameterError, ShapeError


# ---------------------------------------------------------------------------
# arrays


def as_matrix(X, name="X"):
    """Return ``X`` as a finite 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError(f"{name} contains NaN or infinite entries")
    return X


# ---------------------------------------------------------------------------
# random streams


def child_seed(seed: int, *labels) -> int:
    """Derive a 64-bit seed from a parent seed and a path of labels.

    The derivation hashes the textual path, so it does not depend on call
    order or on how many other streams were split off before.
    """
    key = "/".join([str(int(seed))] + [str(label) for label in labels])
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")


def make_rng(seed: int, *labels) -> np.random.Generator:
    """PCG64 generator for ``seed`` (optionally split by ``labels``)."""
    if labels:
        seed = child_seed(seed, *labels)
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


_BELOW_ONE = np.nextafter(1.0, 0.0)


def beta_sample(rng: np.random.Generator, alpha: float, beta: float, size=None):
    """Draw from Beta(alpha, beta); every value lies strictly inside (0, 1).

    Shapes below one use Johnk's rejection method evaluated in log space (the
    plain form underflows for shapes like 0.2); otherwise the ratio of two
    Gamma variates is used.
    """
    if not (alpha > 0 and beta > 0):
        raise ParameterError(f"Beta shapes must be positive, got ({alpha}, {beta})")
    n = 1 if size is None else int(np.prod(size))
    if alpha < 1 and beta < 1:
        out = _johnk(rng, alpha, beta, n)
    else:
        ga = rng.standard_gamma(alpha, n)
        gb = rng.standard_gamma(beta, n)
        out = ga / (ga + gb)
    out = np.clip(out, np.finfo(float).tiny, _BELOW_ONE)
    if size is None:
        return float(out[0])
    return out.reshape(size)


def _johnk(rng, alpha, beta, n):
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        batch = need + need // 8 + 16
        log_x = np.log(rng.random(batch)) / alpha
        log_y = np.log(rng.random(batch)) / beta
        log_s = np.logaddexp(log_x, log_y)
        ok = log_s <= 0.0
        accepted = np.exp(log_x[ok] - log_s[ok])[:need]
        out[filled:filled + accepted.size] = accepted
        filled += accepted.size
    return out


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper):
        params = np.asarray(params, dtype=np.float64)
        return cls(np.zeros_like(params), np.zeros_like(params), **hyper)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(f"params {params.shape}, grads {grads.shape}, moments {state.m.shape} differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_params, new_state


class Adam:
    """In-place Adam over a single flat parameter buffer (training hot path).

    Produces the same iterates as repeated :func:`adam_step` calls.
    """

    def __init__(self, params: np.ndarray, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros_like(params)
        self.v = np.zeros_like(params)
        self.t = 0
        self._buf = np.empty_like(params)

    def step(self, grads: np.ndarray):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grads
        self.v *= b2
        np.multiply(grads, 1.0 - b2, out=self._buf)
        self._buf *= grads
        self.v += self._buf
        # p -= lr * m_hat / (sqrt(v_hat) + eps), same operation order as adam_step
        np.divide(self.v, 1.0 - b2**self.t, out=self._buf)
        np.sqrt(self._buf, out=self._buf)
        self._buf += self.eps
        np.divide(self.lr * (self.m / (1.0 - b1**self.t)), self._buf, out=self._buf)
        self.params -= self._buf


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def n_components(self):
        return self.components.shape[0]


def pca_fit(X, k: int) -> PcaModel:
    """Top-``k`` principal axes of the column-centred sample covariance.

    Eigenvectors are sign-normalised so that the entry of largest magnitude
    in each component is positive, which makes the fit reproducible across
    LAPACK builds.
    """
    X = as_matrix(X)
    n, d = X.shape
    if not 1 <= k <= d:
        raise ParameterError(f"k must be in [1, {d}], got {k}")
    if n < 2:
        raise ParameterError("PCA needs at least two rows")
    mean = X.mean(axis=0)
    centred = X - mean
    cov = centred.T @ centred / (n - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval, kind="stable")[::-1][:k]
    values = np.clip(eigval[order], 0.0, None)
    comps = eigvec[:, order].T.copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PcaModel(mean, comps, values)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = as_matrix(X)
    if X.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Z) -> np.ndarray:
    return np.asarray(Z, dtype=np.float64) @ model.components + model.mean


# ---------------------------------------------------------------------------
# kernels


def gamma_from_length_scale(length_scale: float) -> float:
    """RBF precision for a length scale: 1 / (2 l^2)."""
    if length_scale <= 0:
        raise ParameterError("length scale must be positive")
    return 1.0 / (2.0 * length_scale**2)


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"vector shapes differ: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def sq_distances(A, B) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    d2 = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * |A_i - B_j|^2)``."""
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    return np.exp(-gamma * sq_distances(A, B))


# ---------------------------------------------------------------------------
# finite differences


def finite_difference_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = f(x)
        flat_x[i] = orig - h
        f_minus = f(x)
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# L-BFGS


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    history: list = field(default_factory=list)


def lbfgs_minimize(fun_grad, x0, tol=1e-5, max_iter=500, memory=10) -> LbfgsResult:
    """Minimise a smooth function with limited-memory BFGS.

    ``fun_grad(x)`` returns ``(value, gradient)``. The search direction comes
    from the two-loop recursion over the last ``memory`` curvature pairs; step
    lengths use Armijo backtracking, so accepted objective values never
    increase. Stops once the max-norm of the gradient drops to ``tol``.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun_grad(x)
    history = [float(f)]
    s_list, y_list, rho_list = [], [], []
    for it in range(max_iter + 1):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol:
            return LbfgsResult(x, float(f), gnorm, it, history)
        if it == max_iter:
            break

        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if s_list:
            q *= np.dot(s_list[-1], y_list[-1]) / np.dot(y_list[-1], y_list[-1])
        else:
            q /= max(1.0, np.linalg.norm(g))
        for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        direction = -q
        slope = float(np.dot(g, direction))
        if slope >= 0:
            # lost descent; restart from steepest descent
            s_list.clear(), y_list.clear(), rho_list.clear()
            direction = -g / max(1.0, np.linalg.norm(g))
            slope = float(np.dot(g, direction))

        step = 1.0
        for _ in range(60):
            x_new = x + step * direction
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            raise ConvergenceError("line search failed", gnorm)

        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.dot(y, y)):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0), y_list.pop(0), rho_list.pop(0)
        x, f, g = x_new, f_new, g_new
        history.append(float(f))
    raise ConvergenceError(f"L-BFGS did not converge in {max_iter} iterations", gnorm)
