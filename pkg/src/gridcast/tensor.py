"""Dense linear algebra helpers and activations.

Every numeric container in the package is a 2-D ``float64`` numpy array.
Vectors are single-column arrays; a batch of vectors is stored column-wise,
so an ``(n, B)`` array holds ``B`` independent column vectors.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(x, rows=None, cols=None):
    """Return ``x`` as a 2-D float64 array, promoting 1-D input to a column."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {a.ndim}-D array")
    if rows is not None and a.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got shape {a.shape}")
    if cols is not None and a.shape[1] != cols:
        raise ShapeError(f"expected {cols} columns, got shape {a.shape}")
    return a


def identity(n):
    return np.eye(n, dtype=np.float64)


def zeros(rows, cols=1):
    return np.zeros((rows, cols), dtype=np.float64)


def matmul(a, b):
    """Matrix product with an explicit shape check.

    Raises
    ------
    ShapeError
        If ``a.cols != b.rows``; the message names both shapes.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by "
                         f"{b.shape[0]}x{b.shape[1]}")
    return a @ b


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite input.

    Uses ``1/(1+e^-x)`` for ``x >= 0`` and ``e^x/(1+e^x)`` otherwise; both
    branches are written in terms of ``e^-|x|`` so nothing overflows.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0, e) / (1.0 + e)


def tanh_el(x):
    return np.tanh(np.asarray(x, dtype=np.float64))
