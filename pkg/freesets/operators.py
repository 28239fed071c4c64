from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True, eq=False)
class EquivariantOperator:
    """
    A linear map between two sequence levels, V_n -> U_N, in canonical bases.

    ``matrix`` acts on coordinate vectors; the metric weights of both sides
    come from the sequences, so the adjoint is a rescaled transpose.
    """

    source: object
    target: object
    source_level: int
    target_level: int
    matrix: sparse.csr_matrix

    def __post_init__(self):
        object.__setattr__(self, 'matrix', sparse.csr_matrix(self.matrix))
        expected = (self.target.dim(self.target_level), self.source.dim(self.source_level))
        if self.matrix.shape != expected:
            raise ValueError(f'operator shape {self.matrix.shape} does not match {expected}')

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return np.asarray(self.matrix @ np.asarray(x, dtype=float)).ravel()

    def __matmul__(self, other):
        if isinstance(other, EquivariantOperator):
            return self.compose(other)
        return self.matrix @ other

    def compose(self, other):
        """self ∘ other."""
        return EquivariantOperator(
            other.source, self.target, other.source_level, self.target_level,
            self.matrix @ other.matrix,
        )

    def adjoint(self):
        w_src = self.source.weights(self.source_level)
        w_tgt = self.target.weights(self.target_level)
        matrix = sparse.diags(1.0 / w_src) @ self.matrix.T @ sparse.diags(w_tgt)
        return EquivariantOperator(
            self.target, self.source, self.target_level, self.source_level, matrix
        )

    def toarray(self):
        return self.matrix.toarray()

    def frobenius_norm(self):
        """Norm in the metric-weighted Frobenius inner product."""
        w_src = self.source.weights(self.source_level)
        w_tgt = self.target.weights(self.target_level)
        coo = self.matrix.tocoo()
        return float(np.sqrt(np.sum(coo.data**2 * w_tgt[coo.row] / w_src[coo.col])))

    def __repr__(self):
        return (
            f'EquivariantOperator({self.source}@{self.source_level} -> '
            f'{self.target}@{self.target_level}, nnz={self.matrix.nnz})'
        )
