"""Continuous-depth hypergraph propagation.

The dynamics are linear in the hidden state: dX/dt = X0 + (1/K) sum_k
[ L(A^k) x_1 X + L(U_k) x_2 X + L(Q_k) x_3 X ], where L is either the
exact matrix logarithm (symmetric case, used by test oracles) or its
first-order Taylor surrogate L(M) = M - I (the trainable default).
Integration is fixed-step explicit Euler/RK4 with gradients flowing
through every step.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, mode_product, scale


class OracleError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


def _mode_apply(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)


def _sym_eig(m: np.ndarray, what: str):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise OracleError(f"{what} must be square")
    if not np.allclose(m, m.T, atol=1e-10):
        raise OracleError(f"{what} must be symmetric")
    lam, vec = np.linalg.eigh(m)
    return lam, vec


def matrix_log(m: np.ndarray) -> np.ndarray:
    """Principal logarithm of a symmetric positive-definite matrix."""
    lam, vec = _sym_eig(m, "matrix_log input")
    if np.any(lam <= 0):
        raise OracleError(f"matrix_log needs positive eigenvalues, min is {lam.min():g}")
    return (vec * np.log(lam)) @ vec.T


def matrix_fractional_power(m: np.ndarray, s: float) -> np.ndarray:
    """M^s via eigendecomposition; requires symmetric positive-definite M."""
    lam, vec = _sym_eig(m, "matrix_fractional_power input")
    if np.any(lam <= 0):
        raise OracleError(f"needs positive eigenvalues, min is {lam.min():g}")
    return (vec * lam ** s) @ vec.T


def _as_log(m, ln_mode: str):
    if ln_mode == "taylor":
        m = as_tensor(m)
        return m - Tensor(np.eye(m.shape[0]))
    if ln_mode == "exact":
        data = m.data if isinstance(m, Tensor) else m
        return Tensor(matrix_log(data))
    raise ValueError(f"unknown ln_mode {ln_mode!r}")


class SpatialOdeDynamics:
    """MixHop right-hand side over K powers of the propagation transform.

    a_tilde may be a Tensor (adaptive, trainable path) or an ndarray;
    u_mats / q_mats are the K time- and feature-axis transforms with
    entries already constrained to [0, 1).
    """

    def __init__(self, a_tilde, u_mats, q_mats, x0, ln_mode: str = "taylor"):
        self.k_depth = len(u_mats)
        if len(q_mats) != self.k_depth:
            raise ValueError("u_mats and q_mats must have equal length K")
        a = as_tensor(a_tilde)
        self.a_pows = []
        p = a
        for _ in range(self.k_depth):
            self.a_pows.append(p)
            p = p @ a
        self.u_mats = [as_tensor(u) for u in u_mats]
        self.q_mats = [as_tensor(q) for q in q_mats]
        self.x0 = as_tensor(x0)
        self.ln_mode = ln_mode
        self.log_a = [_as_log(m, ln_mode) for m in self.a_pows]
        self.log_u = [_as_log(m, ln_mode) for m in self.u_mats]
        self.log_q = [_as_log(m, ln_mode) for m in self.q_mats]

    def __call__(self, x: Tensor, t: float) -> Tensor:
        acc = None
        for la, lu, lq in zip(self.log_a, self.log_u, self.log_q):
            term = mode_product(x, la, 1) + mode_product(x, lu, 2) + mode_product(x, lq, 3)
            acc = term if acc is None else acc + term
        return self.x0 + scale(acc, 1.0 / self.k_depth)

    def discrete_propagation(self, x: Tensor) -> Tensor:
        """One step of the discrete MixHop scheme (the w/o-ode variant)."""
        acc = None
        for a, u, q in zip(self.a_pows, self.u_mats, self.q_mats):
            term = mode_product(mode_product(mode_product(x, a, 1), u, 2), q, 3)
            acc = term if acc is None else acc + term
        return acc + self.x0


class TemporalOdeDynamics(SpatialOdeDynamics):
    """Single-transform (K=1) dynamics over the temporal hypergraph."""

    def __init__(self, a_te, u, q, x0, ln_mode: str = "taylor"):
        super().__init__(a_te, [u], [q], x0, ln_mode=ln_mode)


def integrate(rhs, x_init, t_end: float, steps: int, method: str = "euler") -> Tensor:
    """Fixed-step explicit integration from t=0 to t_end, differentiable
    through every step (discretize-then-optimize)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    x = as_tensor(x_init)
    dt = t_end / steps
    for i in range(steps):
        t = i * dt
        if method == "euler":
            x = x + scale(rhs(x, t), dt)
        else:
            k1 = rhs(x, t)
            k2 = rhs(x + scale(k1, dt / 2), t + dt / 2)
            k3 = rhs(x + scale(k2, dt / 2), t + dt / 2)
            k4 = rhs(x + scale(k3, dt), t + dt)
            x = x + scale(k1 + scale(k2, 2.0) + scale(k3, 2.0) + k4, dt / 6)
        if not np.all(np.isfinite(x.data)):
            raise IntegrationError(f"non-finite state at step {i}")
    return x


def analytic_oracle(a: np.ndarray, u: np.ndarray, q: np.ndarray,
                    x0: np.ndarray, t: float) -> np.ndarray:
    """Closed-form X(t) = int_0^{t+1} A^s x_1 X0 x_2 U^s x_3 Q^s ds for
    symmetric PD transforms with spectra in (0, 1); test oracle only."""
    decomps = []
    for m, what in ((a, "A"), (u, "U"), (q, "Q")):
        lam, vec = _sym_eig(m, what)
        if np.any(lam <= 0) or np.any(lam >= 1):
            raise OracleError(f"{what} eigenvalues must lie in (0, 1)")
        decomps.append((lam, vec))
    x0 = np.asarray(x0, dtype=np.float64)
    c = x0
    for axis, (lam, vec) in enumerate(decomps):
        c = _mode_apply(vec.T, c, axis)
    (la, va), (lu, vu), (lq, vq) = decomps
    mu = la[:, None, None] * lu[None, :, None] * lq[None, None, :]
    integral = (mu ** (t + 1.0) - 1.0) / np.log(mu)
    y = c * integral
    for axis, vec in enumerate((va, vu, vq)):
        y = _mode_apply(vec, y, axis)
    return y
