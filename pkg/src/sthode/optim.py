"""Adam optimizer and finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter, Tensor


class TrainingError(RuntimeError):
    pass


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


class Adam:
    """Bias-corrected Adam over a list of named Parameters."""

    def __init__(self, params: list[Parameter], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for p in self.params:
            self.state.first_moment[p.name] = np.zeros_like(p.tensor.data)
            self.state.second_moment[p.name] = np.zeros_like(p.tensor.data)

    def zero_grad(self):
        for p in self.params:
            p.tensor.grad = None

    def step(self):
        s = self.state
        s.step_count += 1
        bc1 = 1.0 - s.beta1 ** s.step_count
        bc2 = 1.0 - s.beta2 ** s.step_count
        for p in self.params:
            g = p.tensor.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
            m = s.first_moment[p.name]
            v = s.second_moment[p.name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g * g
            p.tensor.data -= s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple  # (argument index, flat coordinate)
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def grad_check_params(loss_fn, params: list[Parameter], h: float = 1e-5,
                      tol: float = 1e-3) -> GradCheckReport:
    """Finite-difference check of d loss_fn() / d params.

    loss_fn rebuilds the scalar loss from the params' current values, so
    perturbing a parameter in place changes the result.
    """
    for p in params:
        p.tensor.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [p.tensor.grad.copy() for p in params]

    max_err, worst = 0.0, (0, 0)
    for pi, p in enumerate(params):
        flat = p.tensor.data.reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + h
            fp = loss_fn().item()
            flat[ci] = orig - h
            fm = loss_fn().item()
            flat[ci] = orig
            fd = (fp - fm) / (2.0 * h)
            an = analytic[pi].reshape(-1)[ci]
            err = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
            if err > max_err:
                max_err, worst = err, (pi, ci)
    return GradCheckReport(max_rel_error=max_err, worst=worst, tol=tol)


def grad_check(f, points: list[np.ndarray], h: float = 1e-5,
               tol: float = 1e-4) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar f against central differences.

    f takes len(points) Tensors and returns a scalar Tensor.
    """
    points = [np.asarray(p, dtype=np.float64) for p in points]
    args = [Tensor(p.copy(), requires_grad=True) for p in points]
    out = f(*args)
    out.backward()
    analytic = [a.grad.copy() for a in args]

    max_err, worst = 0.0, (0, 0)
    for ai, p in enumerate(points):
        flat = p.reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + h
            fp = f(*[Tensor(q) for q in points]).item()
            flat[ci] = orig - h
            fm = f(*[Tensor(q) for q in points]).item()
            flat[ci] = orig
            fd = (fp - fm) / (2.0 * h)
            an = analytic[ai].reshape(-1)[ci]
            err = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
            if err > max_err:
                max_err, worst = err, (ai, ci)
    return GradCheckReport(max_rel_error=max_err, worst=worst, tol=tol)
