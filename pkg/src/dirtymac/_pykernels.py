"""NumPy fallback for the compiled lattice kernels (same arithmetic order)."""
import numpy as np


def quantize(x, step):
    return step * np.ceil(x / step - 0.5)


def mod(x, step):
    return x - step * np.ceil(x / step - 0.5)


def encode(v, s_est, d, alpha, step):
    t = v - alpha * s_est
    t = t + d
    return t - step * np.ceil(t / step - 0.5)


def decode(y, d1, d2, alpha_r, gamma, beta, step):
    t = alpha_r * y - gamma * d1
    t = t - beta * d2
    return t - step * np.ceil(t / step - 0.5)


def nearest_index(y, step, m):
    fine = step / m
    k = np.ceil(y / fine - 0.5).astype(np.int64)
    return np.mod(k, m)
