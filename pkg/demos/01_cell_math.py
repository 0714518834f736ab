"""One LSTM cell by hand: a forward step, both output rules, and a
finite-difference check of the backward pass."""

import numpy as np

from gridcast.lstm import LstmState, init_params, lstm_backward, lstm_forward, lstm_step

p = init_params(d=3, input_dim=1, seed=0)
print("packed weights", p.W.shape, "biases", p.b.shape)

# one step from a zero state
x = np.array([[0.7]])
for variant in ("paper", "standard"):
    state, rec = lstm_step(p, x, LstmState.zeros(3), variant)
    print(f"{variant:>8}: h = {state.h.ravel().round(5)}  m = {state.m.ravel().round(5)}")

# a short sequence, then d(sum h_T)/dW by backprop and by central differences
xs = np.random.default_rng(1).uniform(size=(6, 1, 1))


def objective():
    state, _ = lstm_forward(p, xs)
    return state.h.sum()


_, cache = lstm_forward(p, xs)
grads, _ = lstm_backward(p, cache, grad_h_final=np.ones((3, 1)))

r, c, step = 5, 2, 1e-5
orig = p.W[r, c]
p.W[r, c] = orig + step
up = objective()
p.W[r, c] = orig - step
down = objective()
p.W[r, c] = orig
print(f"dW[{r},{c}] backprop {grads.W[r, c]:.10f}  numeric {(up - down) / (2 * step):.10f}")
