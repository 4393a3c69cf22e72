"""Sparse direct solves for saddle-point systems and discrete Riesz maps."""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError


def _factor(A, what):
    A = sp.csc_matrix(A)
    # symmetric minimum-degree ordering without pivoting is several times
    # faster on these symmetric systems; verify it and fall back if needed
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
        b = np.ones(A.shape[0])
        x = lu.solve(b)
        if np.all(np.isfinite(x)) and np.linalg.norm(A @ x - b) <= 1e-8 * (1 + abs(A).max() * np.linalg.norm(x)):
            return lu
    except RuntimeError:
        pass
    try:
        return splu(A)
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise ConfigError(f"{what} is singular: {exc}") from exc


class SaddleSolver:
    """Factorised block system for ``K u - B^T p = f``, ``-B u = g``.

    Only free velocity rows/columns enter.  With ``gauge`` (a vector of
    pressure-mass row sums) a scalar multiplier imposes ``gauge . p = 0``.
    """

    def __init__(self, K_ff, B_f, gauge=None):
        self.nu = K_ff.shape[0]
        self.np = B_f.shape[0]
        blocks = [[K_ff, -B_f.T], [-B_f, None]]
        if gauge is not None:
            g = sp.csr_matrix(np.asarray(gauge, dtype=float).reshape(-1, 1))
            blocks = [[K_ff, -B_f.T, None], [-B_f, None, g], [None, g.T, None]]
        self.K = K_ff
        self.matrix = sp.bmat(blocks, format="csc")
        self.gauge = gauge
        self.lu = _factor(self.matrix, "saddle-point system (check the pressure gauge)")

    def solve(self, f_u, g_p=None):
        rhs = np.zeros(self.matrix.shape[0])
        rhs[: self.nu] = f_u
        if g_p is not None:
            rhs[self.nu: self.nu + self.np] = g_p
        x = self.lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise ConfigError("saddle-point solve produced non-finite values")
        return x[: self.nu], x[self.nu: self.nu + self.np]


class RieszMap:
    """Inverse of an SPD Gram matrix, used to evaluate dual norms."""

    def __init__(self, gram):
        self.lu = _factor(gram, "Gram matrix")

    def apply(self, r):
        return self.lu.solve(np.asarray(r, dtype=float))

    def dual_norm(self, r):
        r = np.asarray(r, dtype=float)
        return float(np.sqrt(max(r @ self.apply(r), 0.0)))
