"""Small dense linear algebra for 3x3 problems."""

from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(float).eps


def symmetric_eig3(A, max_sweeps: int = 30):
    """Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching unit
    eigenvectors as columns.
    """
    a = np.array(A, dtype=float)
    if a.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    a = (0.5 * (a + a.T)).tolist()
    v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    total = sum(x * x for row in a for x in row)
    for _ in range(max_sweeps):
        off = a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2
        if off <= 1e-2 * _EPS * _EPS * total:
            break
        for p, q, r in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            apq = a[p][q]
            if apq == 0.0:
                continue
            theta = (a[q][q] - a[p][p]) / (2.0 * apq)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            a[p][p] -= t * apq
            a[q][q] += t * apq
            a[p][q] = a[q][p] = 0.0
            arp, arq = a[r][p], a[r][q]
            a[r][p] = a[p][r] = c * arp - s * arq
            a[r][q] = a[q][r] = s * arp + c * arq
            for row in v:
                vp, vq = row[p], row[q]
                row[p] = c * vp - s * vq
                row[q] = s * vp + c * vq
    w = np.array([a[0][0], a[1][1], a[2][2]])
    order = np.argsort(-w, kind="stable")
    return w[order], np.array(v)[:, order]


def polar_factor(A) -> np.ndarray:
    """Orthogonal factor ``W V^T`` of ``A = W S V^T``."""
    W, _, Vt = np.linalg.svd(np.asarray(A, dtype=float))
    return W @ Vt
