"""Reduced monomial basis for Kronecker powers of a state vector.

A state vector z of dimension d has Kronecker powers z, z^[2], ..., z^[k]
whose entries repeat: z1*z2 and z2*z1 are the same number.  This module
enumerates each distinct monomial of total degree <= k exactly once, in a
fixed deterministic order, and evaluates monomial vectors and their
Jacobians.  Everything downstream (weight layout, serialization, the ODE
view) depends on this ordering, so it is part of the package contract:

    degree ascending; within a degree, descending lexicographic order on
    the exponent vector, i.e. higher exponents on earlier variables first.

For d=2, k=2 the order is [1, z1, z2, z1^2, z1*z2, z2^2].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """All distinct monomials of degree <= order in dim variables.

    Attributes:
        dim: number of state variables d (>= 1).
        order: maximal total degree k (>= 1).
        exponents: (size, dim) int array; row i is the exponent vector of
            monomial i.  Row 0 is the all-zeros constant term.
        degrees: (size,) int array of total degrees, non-decreasing.
        parent: (size,) int array; for a non-constant monomial i,
            exponents[i] == exponents[parent[i]] + e_{parent_var[i]}.
            Lets monomials be built degree by degree from one product each.
        parent_var: (size,) int array, see parent.  0 for the constant.
        decrement: (size, dim) int array; decrement[i, j] is the index of
            the monomial with exponents[i] - e_j when exponents[i, j] > 0,
            else 0 (the entry is only ever used multiplied by a zero
            exponent).  Drives Jacobian evaluation.
        jac_rows, jac_parents, jac_exps: per-variable sparse view of the
            same derivative structure; jac_rows[j] lists the monomials
            that contain variable j, jac_parents[j] their lowered-exponent
            indices, jac_exps[j] the exponent factors as floats.  Lets
            batched backpropagation skip the zero entries.
    """

    dim: int
    order: int
    exponents: np.ndarray
    degrees: np.ndarray
    parent: np.ndarray
    parent_var: np.ndarray
    decrement: np.ndarray
    jac_rows: tuple[np.ndarray, ...]
    jac_parents: tuple[np.ndarray, ...]
    jac_exps: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        """Number of monomials, sum over q <= order of C(dim-1+q, dim-1)."""
        return self.exponents.shape[0]

    def degree_slice(self, q: int) -> slice:
        """Contiguous index range of the degree-q monomials."""
        if not 0 <= q <= self.order:
            raise ValueError(f"degree {q} outside [0, {self.order}]")
        start = sum(comb(self.dim - 1 + j, self.dim - 1) for j in range(q))
        return slice(start, start + comb(self.dim - 1 + q, self.dim - 1))


@lru_cache(maxsize=None)
def build_basis(dim: int, order: int) -> MonomialBasis:
    """Enumerate the reduced monomial basis for (dim, order).

    Args:
        dim: state dimension, positive integer.
        order: maximal total degree, positive integer.

    Returns:
        A MonomialBasis.  Calls with equal arguments return the same
        (immutable) object.

    Raises:
        ValueError: if dim < 1 or order < 1.

    Example:
        >>> build_basis(2, 2).exponents.tolist()
        [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")

    combos: list[tuple[int, ...]] = []
    for q in range(order + 1):
        combos.extend(itertools.combinations_with_replacement(range(dim), q))

    size = len(combos)
    exponents = np.zeros((size, dim), dtype=np.int64)
    for i, combo in enumerate(combos):
        for var in combo:
            exponents[i, var] += 1
    degrees = exponents.sum(axis=1)

    index_of = {tuple(row): i for i, row in enumerate(exponents.tolist())}

    parent = np.zeros(size, dtype=np.int64)
    parent_var = np.zeros(size, dtype=np.int64)
    decrement = np.zeros((size, dim), dtype=np.int64)
    for i in range(1, size):
        row = exponents[i]
        first = int(np.nonzero(row)[0][0])
        reduced = row.copy()
        reduced[first] -= 1
        parent[i] = index_of[tuple(reduced.tolist())]
        parent_var[i] = first
        for j in range(dim):
            if row[j] > 0:
                reduced = row.copy()
                reduced[j] -= 1
                decrement[i, j] = index_of[tuple(reduced.tolist())]

    jac_rows = []
    jac_parents = []
    jac_exps = []
    for j in range(dim):
        rows = np.nonzero(exponents[:, j])[0]
        jac_rows.append(rows)
        jac_parents.append(decrement[rows, j])
        jac_exps.append(exponents[rows, j].astype(np.float64))

    for arr in (exponents, degrees, parent, parent_var, decrement,
                *jac_rows, *jac_parents, *jac_exps):
        arr.setflags(write=False)
    return MonomialBasis(dim=int(dim), order=int(order), exponents=exponents,
                         degrees=degrees, parent=parent, parent_var=parent_var,
                         decrement=decrement, jac_rows=tuple(jac_rows),
                         jac_parents=tuple(jac_parents), jac_exps=tuple(jac_exps))


def _check_state(basis: MonomialBasis, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (basis.dim,):
        raise ValueError(f"state has shape {z.shape}, expected ({basis.dim},)")
    if not np.all(np.isfinite(z)):
        raise ValueError("state vector contains non-finite entries")
    return z


def eval_monomials_batch(basis: MonomialBasis, Z: np.ndarray) -> np.ndarray:
    """Evaluate all monomials at each row of Z.

    Args:
        basis: the monomial basis.
        Z: (N, dim) array of state vectors.  Finiteness is not checked
            here; batched callers validate states once per layer.

    Returns:
        (N, size) array; column i holds monomial i at every row.
    """
    n = Z.shape[0]
    phi = np.empty((n, basis.size), dtype=np.float64)
    phi[:, 0] = 1.0
    for q in range(1, basis.order + 1):
        block = basis.degree_slice(q)
        phi[:, block] = phi[:, basis.parent[block]] * Z[:, basis.parent_var[block]]
    return phi


def eval_monomials(basis: MonomialBasis, z) -> np.ndarray:
    """Evaluate every basis monomial at a single state vector.

    Args:
        basis: the monomial basis.
        z: state vector of length basis.dim with finite entries.

    Returns:
        Vector of length basis.size; entry i is the product over j of
        z[j] ** exponents[i, j].  Entry 0 is always 1.

    Raises:
        ValueError: on shape mismatch or non-finite entries.

    Example:
        >>> eval_monomials(build_basis(2, 2), [2.0, 3.0])
        array([1., 2., 3., 4., 6., 9.])
    """
    z = _check_state(basis, z)
    return eval_monomials_batch(basis, z[None, :])[0]


def eval_monomial_jacobian(basis: MonomialBasis, z) -> np.ndarray:
    """Partial derivatives of every monomial with respect to every variable.

    Args:
        basis: the monomial basis.
        z: state vector of length basis.dim with finite entries.

    Returns:
        (size, dim) array J with J[i, j] = d(monomial_i)/d(z_j) at z.
        The constant monomial's row is all zeros.

    Raises:
        ValueError: on shape mismatch or non-finite entries.
    """
    z = _check_state(basis, z)
    phi = eval_monomials(basis, z)
    # d/dz_j of prod z^e = e_j * (monomial with e_j lowered by one)
    return basis.exponents * phi[basis.decrement]
