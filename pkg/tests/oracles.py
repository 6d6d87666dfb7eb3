"""Independent oracle implementations used by the test suite.

Everything here recomputes quantities by a different route than the
library: direct summations, brute-force averages, finite differences,
eigendecompositions, and series with a different parameterization.
"""

import math

import numpy as np


def direct_wht_oracle(v):
    """O(4^N) summation: out[i] = sum_j (-1)^{popcount(i & j)} v[j]."""
    m = len(v)
    out = np.zeros(m)
    for i in range(m):
        for j in range(m):
            sign = -1.0 if bin(i & j).count("1") % 2 else 1.0
            out[i] += sign * v[j]
    return out


def naive_multilinear(coeffs, x):
    """Direct 2^N-term evaluation of sum_S c[S] prod_{i in S} x_i."""
    total = 0.0
    for mask in range(len(coeffs)):
        term = coeffs[mask]
        for i in range(len(x)):
            if mask >> i & 1:
                term *= x[i]
        total += term
    return total


def point_of_index(j, n_vars):
    """The +-1 point encoded by index j: bit i set means coordinate i is -1."""
    return np.array([-1.0 if j >> i & 1 else 1.0 for i in range(n_vars)])


def brute_force_coefficients(table):
    """Averaging oracle: c[S] = 2^{-N} sum_x f(x) prod_{i in S} x_i."""
    m = len(table)
    n_vars = m.bit_length() - 1
    coeffs = np.zeros(m)
    for mask in range(m):
        acc = 0.0
        for j in range(m):
            x = point_of_index(j, n_vars)
            prod = 1.0
            for i in range(n_vars):
                if mask >> i & 1:
                    prod *= x[i]
            acc += table[j] * prod
        coeffs[mask] = acc / m
    return coeffs


def fd_derivative(func, x, subset, h):
    """Iterated forward finite difference over the variables in ``subset``.

    Exact for multilinear functions at any h != 0.
    """
    subset = list(subset)
    if not subset:
        return func(x)
    i, rest = subset[0], subset[1:]
    e = np.zeros(len(x))
    e[i] = h
    return (fd_derivative(func, x + e, rest, h) - fd_derivative(func, x, rest, h)) / h


def theta_series_exit_probability(barrier, horizon, terms=60):
    """P[sup_{t <= horizon} |B_t| >= barrier] for standard 1-D BM.

    Uses the theta-series form of the survival probability,
    P[sup |B| < a] = (4/pi) sum_{k odd} ((-1)^{(k-1)/2} / k)
                     exp(-k^2 pi^2 horizon / (8 a^2)),
    a different parameterization than the reflection series in the library.
    """
    if horizon <= 0:
        return 0.0
    survive = 0.0
    for k in range(1, 2 * terms, 2):
        sign = 1.0 if (k - 1) // 2 % 2 == 0 else -1.0
        survive += (sign / k) * math.exp(-(k * k) * math.pi**2 * horizon / (8 * barrier**2))
    return 1.0 - 4.0 / math.pi * survive


def dense_sqrt_oracle(mat):
    """Symmetric PSD square root through a full eigendecomposition.

    Eigenvalues below 1e-12 are treated as exact zeros; the square root
    would otherwise amplify their roundoff to ~1e-8.
    """
    vals, vecs = np.linalg.eigh(mat)
    vals[vals < 1e-12] = 0.0
    return (vecs * np.sqrt(vals)) @ vecs.T
