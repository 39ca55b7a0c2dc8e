#!/usr/bin/env python3
"""Tour of the tensor engine: build a graph, take gradients, verify one
against central finite differences, then fit a tiny conv layer with Adam.
"""

import numpy as np

from controlres import tensor as T
from controlres.tensor import Tensor
from controlres.optim import Adam


def main():
    print("== scalar graph ==")
    x = Tensor(np.array([2.0, -3.0]), requires_grad=True)
    y = (x * x + 1.0).sum()
    T.backward(y)
    print(f"d/dx sum(x^2 + 1) at {x.data} -> {x.grad}   (expect 2x)")

    print("\n== conv gradient vs finite differences ==")
    rng = np.random.default_rng(0)
    img = Tensor(rng.uniform(-1, 1, (1, 1, 6, 6)), requires_grad=True)
    w = Tensor(rng.uniform(-1, 1, (1, 1, 3, 3)), requires_grad=True)
    loss = (T.conv2d(img, w, pad=1) ** 2).mean()
    T.backward(loss)
    h = 1e-5
    i = (0, 0, 1, 2)
    saved = w.data.copy()
    w.data = saved.copy(); w.data[i] += h
    up = float((T.conv2d(img, w, pad=1) ** 2).mean().data)
    w.data = saved.copy(); w.data[i] -= h
    down = float((T.conv2d(img, w, pad=1) ** 2).mean().data)
    w.data = saved
    fd = (up - down) / (2 * h)
    print(f"autodiff {w.grad[i]:+.8f}  finite-diff {fd:+.8f}")

    print("\n== fit a 3x3 kernel to a blur target ==")
    target_kernel = np.zeros((1, 1, 3, 3), dtype=np.float32)
    target_kernel[0, 0] = 1.0 / 9.0
    data = rng.uniform(0, 1, (8, 1, 12, 12)).astype(np.float32)
    targets = T.conv2d(Tensor(data), Tensor(target_kernel), pad=1).data
    west = Tensor(rng.normal(0, 0.1, (1, 1, 3, 3)).astype(np.float32), requires_grad=True)
    opt = Adam([west], lr=5e-3)
    for step in range(400):
        pred = T.conv2d(Tensor(data), west, pad=1)
        diff = pred - Tensor(targets)
        loss = (diff * diff).mean()
        opt.zero_grad()
        T.backward(loss, leaves=[west])
        opt.step()
        if step % 100 == 0 or step == 399:
            print(f"step {step:3d}  mse {float(loss.data):.3e}")
    print("recovered kernel:\n", np.round(west.data[0, 0], 3))


if __name__ == "__main__":
    main()
