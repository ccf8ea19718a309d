"""Block-tridiagonal symmetric matrices with an O(n) Cholesky.

Stores the n diagonal 6x6 blocks and the n-1 super-diagonal blocks; the
sub-diagonal is the transpose of the super-diagonal by symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NotPositiveDefiniteError


@dataclass(frozen=True, eq=False)
class BlockTridiagonal:
    """Symmetric block-tridiagonal matrix of n square blocks of size b."""

    diag: np.ndarray  # (n, b, b)
    off: np.ndarray   # (n - 1, b, b), super-diagonal blocks (i, i+1)

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        off = np.asarray(self.off, dtype=float)
        if diag.ndim != 3 or diag.shape[1] != diag.shape[2]:
            raise InvalidArgumentError("diag must be (n, b, b)")
        if off.shape != (max(diag.shape[0] - 1, 0), diag.shape[1], diag.shape[2]):
            raise InvalidArgumentError("off must be (n - 1, b, b)")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)

    @property
    def n_blocks(self) -> int:
        return self.diag.shape[0]

    @property
    def block_size(self) -> int:
        return self.diag.shape[1]

    @property
    def dim(self) -> int:
        return self.n_blocks * self.block_size

    def to_dense(self) -> np.ndarray:
        n, b = self.n_blocks, self.block_size
        A = np.zeros((n * b, n * b))
        for i in range(n):
            A[i * b:(i + 1) * b, i * b:(i + 1) * b] = self.diag[i]
        for i in range(n - 1):
            A[i * b:(i + 1) * b, (i + 1) * b:(i + 2) * b] = self.off[i]
            A[(i + 1) * b:(i + 2) * b, i * b:(i + 1) * b] = self.off[i].T
        return A

    def cholesky(self):
        """Block Cholesky A = L L^T; returns (L_diag (n,b,b), L_sub (n-1,b,b)).

        L is block lower-bidiagonal.  Raises NotPositiveDefiniteError if any
        Schur complement fails to factor.
        """
        n, b = self.n_blocks, self.block_size
        L_diag = np.zeros((n, b, b))
        L_sub = np.zeros((max(n - 1, 0), b, b))
        try:
            L_diag[0] = np.linalg.cholesky(self.diag[0])
            for i in range(1, n):
                # A[i, i-1] = L_sub[i-1] @ L_diag[i-1]^T
                L_sub[i - 1] = np.linalg.solve(
                    L_diag[i - 1], self.off[i - 1]
                ).T
                S = self.diag[i] - L_sub[i - 1] @ L_sub[i - 1].T
                L_diag[i] = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "block-tridiagonal matrix is not positive definite"
            ) from exc
        return L_diag, L_sub

    def sample_gaussian(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw x ~ N(0, A^{-1}) treating this matrix as a precision.

        Factors A = L L^T and solves L^T x = z for standard-normal z by block
        back-substitution; returns (count, dim).
        """
        n, b = self.n_blocks, self.block_size
        L_diag, L_sub = self.cholesky()
        z = rng.standard_normal((count, n, b))
        x = np.empty_like(z)
        x[:, n - 1] = np.linalg.solve(L_diag[n - 1].T, z[:, n - 1].T).T
        for i in range(n - 2, -1, -1):
            rhs = z[:, i] - x[:, i + 1] @ L_sub[i]  # (L_sub^T x)^T = x^T L_sub
            x[:, i] = np.linalg.solve(L_diag[i].T, rhs.T).T
        return x.reshape(count, n * b)

    def inverse_dense(self) -> np.ndarray:
        """Dense inverse via the block factorization (symmetrized)."""
        n, b = self.n_blocks, self.block_size
        L_diag, L_sub = self.cholesky()
        dim = n * b
        # Solve L L^T X = I column-block-wise.
        Y = np.zeros((dim, dim))
        eye = np.eye(dim).reshape(n, b, dim)
        Y = Y.reshape(n, b, dim)
        Y[0] = np.linalg.solve(L_diag[0], eye[0])
        for i in range(1, n):
            Y[i] = np.linalg.solve(L_diag[i], eye[i] - L_sub[i - 1] @ Y[i - 1])
        X = np.zeros((n, b, dim))
        X[n - 1] = np.linalg.solve(L_diag[n - 1].T, Y[n - 1])
        for i in range(n - 2, -1, -1):
            X[i] = np.linalg.solve(L_diag[i].T, Y[i] - L_sub[i].T @ X[i + 1])
        A_inv = X.reshape(dim, dim)
        return 0.5 * (A_inv + A_inv.T)
