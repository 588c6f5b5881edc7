"""A short tour of the reverse-mode tensor library."""

import numpy as np

from colorvit import autodiff as ad

# scalars flow the same way arrays do
x = ad.Tensor(np.array([1.0, 2.0, 3.0]))
w = ad.Tensor(np.array([0.5, -1.0, 2.0]), requires_grad=True)
loss = ((x * w).sum() ** 2.0)
ad.backward(loss)
print("loss", loss.item())
print("dloss/dw", w.grad)          # 2 * (x.w) * x = 2*4.5*[1,2,3]

# a two-layer network reduced to a scalar
rng = np.random.default_rng(0)
a = ad.Tensor(rng.normal(size=(4, 3)))
w1 = ad.Tensor(rng.normal(size=(3, 5)), requires_grad=True)
w2 = ad.Tensor(rng.normal(size=(5, 2)), requires_grad=True)
h = ad.gelu(ad.matmul(a, w1))
out = ad.softmax(ad.matmul(h, w2), axis=-1)
scalar = out.log().sum()
ad.backward(scalar)

# finite-difference spot check of one weight entry
eps = 1e-6
w1.data[0, 0] += eps
plus = ad.softmax(ad.matmul(ad.gelu(ad.matmul(a, w1)), w2), axis=-1).log().sum().item()
w1.data[0, 0] -= 2 * eps
minus = ad.softmax(ad.matmul(ad.gelu(ad.matmul(a, w1)), w2), axis=-1).log().sum().item()
w1.data[0, 0] += eps
numeric = (plus - minus) / (2 * eps)
print(f"analytic {w1.grad[0, 0]:.8f} vs numeric {numeric:.8f}")

# softmax ignores a constant shift of its inputs
z = ad.Tensor(np.array([[1.0, 2.0, 3.0]]))
z_shift = ad.Tensor(np.array([[1.0, 2.0, 3.0]]) + 100.0)
print("shift drift", np.abs(ad.softmax(z, -1).data - ad.softmax(z_shift, -1).data).max())

# every op refuses to emit non-finite values rather than poisoning the graph
try:
    ad.Tensor(np.array([700.0, 710.0])).exp()
except ad.NonFiniteError as err:
    print("caught:", err)
