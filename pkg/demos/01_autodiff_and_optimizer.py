"""Walk through the tensor autodiff core: build a small computation,
backpropagate, verify against finite differences, then fit a line with Adam."""

import numpy as np

from sthode.optim import Adam, grad_check
from sthode.tensor import Parameter, Tensor, matmul, relu, tmean, tsum

# --- a tiny graph by hand ---------------------------------------------------
x = Tensor(np.array([[1.0, -2.0], [3.0, 0.5]]), requires_grad=True)
w = Tensor(np.array([[0.3], [-0.7]]), requires_grad=True)
loss = tsum(relu(matmul(x, w)))
loss.backward()
print("loss", loss.item())
print("dloss/dw\n", w.grad)

# the same gradient from central differences
rep = grad_check(lambda a, b: tsum(relu(matmul(a, b))), [x.data, w.data])
print("finite-difference agreement: max rel err %.2e" % rep.max_rel_error)

# --- least squares with Adam ------------------------------------------------
rng = np.random.default_rng(0)
true_w = np.array([[2.0], [-1.0]])
xs = rng.normal(size=(64, 2))
ys = xs @ true_w + 0.01 * rng.normal(size=(64, 1))

w = Parameter("w", rng.normal(size=(2, 1)))
opt = Adam([w], lr=0.05)
for step in range(200):
    opt.zero_grad()
    err = matmul(Tensor(xs), w.tensor) + Tensor(-ys)
    loss = tmean(err * err)
    loss.backward()
    opt.step()
    if step % 50 == 0:
        print(f"step {step:3d}  mse {loss.item():.5f}")
print("recovered weights", w.tensor.data.ravel(), "(true", true_w.ravel(), ")")
