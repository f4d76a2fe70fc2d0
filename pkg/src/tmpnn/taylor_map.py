"""The shared-weight polynomial map and its exact derivatives.

One map application sends a state z to W0 + W1 z + W2 z^[2] + ... + Wk z^[k],
with the Kronecker powers represented in the reduced monomial basis.  All
coefficients live in a single (basis.size, dim) matrix whose rows follow the
basis ordering, so column j holds every coefficient feeding output j and the
degree-q row block is the classical W_q.

Internally the matrix is stored as its deviation from the identity map
(``delta``), i.e. W equals delta plus ones at the degree-1 diagonal.  The
identity map is then exactly zeros, and the conversions to and from the
equivalent ODE coefficient matrix (see odeview) are single multiplications,
which keeps those round trips bit-exact.  The literal matrix is available
as the ``W`` property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import MonomialBasis, build_basis, eval_monomials, eval_monomial_jacobian
from .errors import DivergenceError


def _degree1_indices(basis: MonomialBasis) -> np.ndarray:
    """Row indices of the degree-1 monomials z_0, ..., z_{d-1} in order."""
    block = basis.degree_slice(1)
    rows = np.arange(block.start, block.stop)
    # degree-1 block enumerates variables in ascending index order
    return rows


@dataclass(eq=False)
class TaylorMapWeights:
    """Coefficients of one order-k polynomial map on a dim-dimensional state.

    Attributes:
        basis: monomial basis fixing dim, order, and the row layout.
        delta: (basis.size, dim) float array, the stored parameters.
            delta is W minus the identity map's matrix, so identity
            initialization is all zeros.
    """

    basis: MonomialBasis
    delta: np.ndarray

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64)
        expected = (self.basis.size, self.basis.dim)
        if self.delta.shape != expected:
            raise ValueError(f"weight matrix has shape {self.delta.shape}, "
                             f"expected {expected}")
        if not np.all(np.isfinite(self.delta)):
            raise ValueError("weight matrix contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def W(self) -> np.ndarray:
        """The literal coefficient matrix (a fresh array each call)."""
        w = self.delta.copy()
        rows = _degree1_indices(self.basis)
        w[rows, np.arange(self.basis.dim)] += 1.0
        return w

    @classmethod
    def from_matrix(cls, basis: MonomialBasis, w: np.ndarray) -> "TaylorMapWeights":
        """Build from a literal coefficient matrix W."""
        w = np.asarray(w, dtype=np.float64)
        delta = w.copy()
        rows = _degree1_indices(basis)
        delta[rows, np.arange(basis.dim)] -= 1.0
        return cls(basis=basis, delta=delta)

    def copy(self) -> "TaylorMapWeights":
        return TaylorMapWeights(basis=self.basis, delta=self.delta.copy())


def identity_weights(dim: int, order: int) -> TaylorMapWeights:
    """The identity map: W1 = I, all other coefficients zero.

    Applying it returns the input unchanged, so an untrained model built on
    it predicts the initial target slots verbatim.
    """
    basis = build_basis(dim, order)
    return TaylorMapWeights(basis=basis, delta=np.zeros((basis.size, dim)))


def apply(weights: TaylorMapWeights, z) -> np.ndarray:
    """Apply the map once to a single state vector.

    Args:
        weights: the map coefficients.
        z: state vector of length weights.dim, finite entries.

    Returns:
        The next state, W^T phi(z), of length weights.dim.

    Raises:
        ValueError: on bad shape or non-finite input.
        DivergenceError: if the output overflows to non-finite values; the
            offending input is attached to the error.
    """
    z = np.asarray(z, dtype=np.float64)
    phi = eval_monomials(weights.basis, z)
    # overflow surfaces as a structured DivergenceError, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        out = z + phi @ weights.delta
    if not np.all(np.isfinite(out)):
        raise DivergenceError("map application produced non-finite values",
                              state=z)
    return out


def apply_with_grads(weights: TaylorMapWeights, z):
    """Apply the map and return both Jacobians.

    Args:
        weights: the map coefficients.
        z: state vector of length weights.dim.

    Returns:
        (output, d_out_d_z, phi) where output is apply(weights, z),
        d_out_d_z is the (dim, dim) Jacobian with entry (i, j) equal to
        d output_i / d z_j, and phi is the monomial vector at z: the
        sensitivity of output j to the coefficient in row i, column j is
        phi[i], and coefficients in other columns do not affect output j.

    Raises:
        ValueError, DivergenceError: as apply.
    """
    z = np.asarray(z, dtype=np.float64)
    phi = eval_monomials(weights.basis, z)
    out = z + phi @ weights.delta
    if not np.all(np.isfinite(out)):
        raise DivergenceError("map application produced non-finite values",
                              state=z)
    jac = eval_monomial_jacobian(weights.basis, z)
    d_out_d_z = np.eye(weights.dim) + weights.delta.T @ jac
    return out, d_out_d_z, phi
