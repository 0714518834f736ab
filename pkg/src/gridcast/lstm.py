"""LSTM cell, sequence forward pass and backpropagation through time.

Gate weights are packed into one matrix ``W`` of shape ``(4d, input_dim + d)``
whose row blocks are, in order, the input gate, forget gate, output gate and
candidate (``c``) weights.  ``b`` is packed the same way.  ``W`` multiplies the
concatenation ``[x; h_prev]``, so the input projection is folded into the
first ``input_dim`` columns.

All arrays are column-batched: ``x`` is ``(input_dim, B)`` and the states are
``(d, B)``.  A single sequence is the ``B == 1`` case.

Two output rules are supported:

``"paper"``
    ``h' = tanh(o * m')``
``"standard"``
    ``h' = o * tanh(m')``
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, as_matrix, sigmoid

VARIANTS = ("paper", "standard")


@dataclass
class LstmParams:
    d: int
    input_dim: int
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = as_matrix(self.W)
        self.b = as_matrix(self.b)
        if self.W.shape != (4 * self.d, self.input_dim + self.d):
            raise ShapeError(f"W has shape {self.W.shape}, expected "
                             f"{(4 * self.d, self.input_dim + self.d)}")
        if self.b.shape != (4 * self.d, 1):
            raise ShapeError(f"b has shape {self.b.shape}, expected "
                             f"{(4 * self.d, 1)}")

    def arrays(self):
        return [self.W, self.b]

    def copy(self):
        return LstmParams(self.d, self.input_dim, self.W.copy(), self.b.copy())


@dataclass
class LstmState:
    h: np.ndarray
    m: np.ndarray

    @classmethod
    def zeros(cls, d, batch=1):
        return cls(np.zeros((d, batch)), np.zeros((d, batch)))


@dataclass
class StepRecord:
    H: np.ndarray       # [x; h_prev]
    z: np.ndarray       # pre-activations, packed like b
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    c: np.ndarray
    m_prev: np.ndarray
    m: np.ndarray
    h: np.ndarray
    squash: np.ndarray  # tanh(o*m) for "paper", tanh(m) for "standard"


@dataclass
class ForwardCache:
    d: int
    input_dim: int
    variant: str
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown cell variant {variant!r}; "
                         f"expected one of {VARIANTS}")


def init_params(d, input_dim, seed):
    """Draw weights from U(-s, s) with ``s = 1/sqrt(input_dim + d)``; zero biases."""
    if d < 1 or input_dim < 1:
        raise ValueError(f"d and input_dim must be >= 1, got d={d}, "
                         f"input_dim={input_dim}")
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(input_dim + d)
    W = rng.uniform(-s, s, size=(4 * d, input_dim + d))
    return LstmParams(d, input_dim, W, np.zeros((4 * d, 1)))


def lstm_step(p, x, prev, variant="paper"):
    """Advance one time step; returns ``(LstmState, StepRecord)``."""
    _check_variant(variant)
    x = as_matrix(x, rows=p.input_dim)
    if prev.h.shape != (p.d, x.shape[1]) or prev.m.shape != (p.d, x.shape[1]):
        raise ShapeError(f"state shapes {prev.h.shape}/{prev.m.shape} do not "
                         f"match d={p.d}, batch={x.shape[1]}")
    return _step(p, x, prev.h, prev.m, variant)


def _step(p, x, h_prev, m_prev, variant):
    d = p.d
    H = np.concatenate((x, h_prev))
    z = p.W @ H
    z += p.b
    gates = sigmoid(z[:3 * d])
    i, f, o = gates[:d], gates[d:2 * d], gates[2 * d:]
    c = np.tanh(z[3 * d:])
    m = f * m_prev
    m += i * c
    if variant == "paper":
        squash = np.tanh(o * m)
        h = squash
    else:
        squash = np.tanh(m)
        h = o * squash
    return LstmState(h, m), StepRecord(H, z, i, f, o, c, m_prev, m, h, squash)


def lstm_forward(p, xs, init=None, variant="paper"):
    """Run the cell over ``xs`` left to right.

    ``xs`` is a sequence of ``(input_dim, B)`` arrays, or a single array of
    shape ``(T, input_dim, B)``.  Returns ``(final_state, ForwardCache)``.
    """
    _check_variant(variant)
    if len(xs) == 0:
        raise ValueError("lstm_forward needs a non-empty input sequence")
    xs = [as_matrix(x, rows=p.input_dim) for x in xs]
    batch = xs[0].shape[1]
    state = init if init is not None else LstmState.zeros(p.d, batch)
    if state.h.shape != (p.d, batch) or state.m.shape != (p.d, batch):
        raise ShapeError(f"initial state shapes {state.h.shape}/{state.m.shape} "
                         f"do not match d={p.d}, batch={batch}")
    cache = ForwardCache(p.d, p.input_dim, variant)
    h, m = state.h, state.m
    for x in xs:
        state, rec = _step(p, x, h, m, variant)
        h, m = state.h, state.m
        cache.steps.append(rec)
    return state, cache


def lstm_backward(p, cache, grad_h_final=None, variant="paper", grad_h_seq=None):
    """Reverse-mode gradients through the whole unrolled sequence.

    Differentiates ``sum_t <grad_h_seq[t], h_t> + <grad_h_final, h_T>``, i.e.
    the upstream gradient may arrive at the final hidden state only (a single
    layer feeding a dense head) or at every step (a layer feeding another LSTM
    layer).  Gradients are summed over the batch columns.

    Returns
    -------
    grads : LstmParams
        Gradients with the same packing as ``p``.
    dxs : list of ndarray
        Gradient with respect to each input ``x_t``.
    """
    _check_variant(variant)
    if (cache.d, cache.input_dim) != (p.d, p.input_dim):
        raise ValueError(f"cache built for d={cache.d}, input_dim="
                         f"{cache.input_dim} but params have d={p.d}, "
                         f"input_dim={p.input_dim}")
    if cache.variant != variant:
        raise ValueError(f"cache built with variant {cache.variant!r}, "
                         f"backward called with {variant!r}")
    if len(cache) == 0:
        raise ValueError("empty forward cache")
    d, nin = p.d, p.input_dim
    T = len(cache)
    batch = cache.steps[0].H.shape[1]
    if grad_h_seq is not None and len(grad_h_seq) != T:
        raise ValueError(f"grad_h_seq has {len(grad_h_seq)} entries, "
                         f"sequence has {T}")

    dxs = [None] * T
    dzs = [None] * T
    dh_next = np.zeros((d, batch))
    if grad_h_final is not None:
        dh_next = dh_next + as_matrix(grad_h_final, rows=d)
    dm_next = np.zeros((d, batch))
    WT = p.W.T
    for t in range(T - 1, -1, -1):
        r = cache.steps[t]
        dh = dh_next if grad_h_seq is None else dh_next + grad_h_seq[t]
        if variant == "paper":
            du = dh * (1.0 - r.squash * r.squash)
            do = du * r.m
            dm = du * r.o
            dm += dm_next
        else:
            do = dh * r.squash
            dm = dh * r.o * (1.0 - r.squash * r.squash)
            dm += dm_next
        dz = np.concatenate((
            dm * r.c * r.i * (1.0 - r.i),
            dm * r.m_prev * r.f * (1.0 - r.f),
            do * r.o * (1.0 - r.o),
            dm * r.i * (1.0 - r.c * r.c),
        ))
        dzs[t] = dz
        dH = WT @ dz
        dxs[t] = dH[:nin]
        dh_next = dH[nin:]
        dm_next = dm * r.f
    DZ = np.concatenate(dzs, axis=1)
    HH = np.concatenate([r.H for r in cache.steps], axis=1)
    dW = DZ @ HH.T
    db = DZ.sum(axis=1, keepdims=True)
    return LstmParams(d, nin, dW, db), dxs
