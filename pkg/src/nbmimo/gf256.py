"""Arithmetic over GF(2^8) with log/antilog tables.

Field elements are plain ``int`` values in ``[0, 255]`` read as binary
polynomials of degree < 8. Addition is XOR; multiplication goes through the
power-of-primitive-element tables built from the field's primitive
polynomial.
"""

from __future__ import annotations

import numpy as np

DEFAULT_POLYNOMIAL = 0x11D
FIELD_SIZE = 256


class FieldParams:
    """Lookup tables for GF(2^m) generated from a primitive polynomial.

    Parameters
    ----------
    primitive_polynomial : int
        Polynomial with bit ``m`` set, e.g. ``0x11D`` for x^8+x^4+x^3+x^2+1.

    Raises
    ------
    ValueError
        If the polynomial does not generate the full multiplicative group.
    """

    def __init__(self, primitive_polynomial: int = DEFAULT_POLYNOMIAL):
        degree = primitive_polynomial.bit_length() - 1
        if degree < 1 or degree > 16:
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.primitive_polynomial = primitive_polynomial
        self.m = degree
        self.size = 1 << degree
        order = self.size - 1

        antilog = np.zeros(2 * order, dtype=np.int64)
        log = np.full(self.size, -1, dtype=np.int64)
        x = 1
        for i in range(order):
            if log[x] != -1:
                raise ValueError(f"polynomial {primitive_polynomial:#x} is not primitive")
            antilog[i] = x
            log[x] = i
            x <<= 1
            if x & self.size:
                x ^= primitive_polynomial
        if x != 1:
            raise ValueError(f"polynomial {primitive_polynomial:#x} is not primitive")
        antilog[order:] = antilog[:order]

        self.log_table = log
        self.antilog_table = antilog
        self.log_table.flags.writeable = False
        self.antilog_table.flags.writeable = False
        self._mul_table: np.ndarray | None = None
        self._inv_table: np.ndarray | None = None

    def __repr__(self) -> str:
        return f"FieldParams(primitive_polynomial={self.primitive_polynomial:#x})"

    def _check(self, a: int) -> None:
        if not 0 <= a < self.size:
            raise ValueError(f"{a} is not an element of GF(2^{self.m})")

    def add(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        if a == 0 or b == 0:
            return 0
        return int(self.antilog_table[self.log_table[a] + self.log_table[b]])

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self.antilog_table[(self.size - 1 - self.log_table[a]) % (self.size - 1)])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    @property
    def mul_table(self) -> np.ndarray:
        """Full ``size x size`` product table (uint8 for m = 8), built lazily."""
        if self._mul_table is None:
            order = self.size - 1
            logs = self.log_table
            idx = (logs[:, None] + logs[None, :]) % order
            table = self.antilog_table[idx]
            table[0, :] = 0
            table[:, 0] = 0
            dtype = np.uint8 if self.m <= 8 else np.uint16
            table = table.astype(dtype)
            table.flags.writeable = False
            self._mul_table = table
        return self._mul_table

    @property
    def inv_table(self) -> np.ndarray:
        """Inverse of every element; entry 0 is a placeholder 0."""
        if self._inv_table is None:
            order = self.size - 1
            inv = np.zeros(self.size, dtype=self.mul_table.dtype)
            inv[1:] = self.antilog_table[(order - self.log_table[1:]) % order]
            inv.flags.writeable = False
            self._inv_table = inv
        return self._inv_table


def carryless_mul(a: int, b: int, polynomial: int = DEFAULT_POLYNOMIAL) -> int:
    """Shift-and-add product reduced modulo ``polynomial`` (reference path)."""
    product = 0
    while b:
        if b & 1:
            product ^= a
        a <<= 1
        b >>= 1
    degree = polynomial.bit_length() - 1
    for bit in range(product.bit_length() - 1, degree - 1, -1):
        if product >> bit & 1:
            product ^= polynomial << (bit - degree)
    return product


DEFAULT_FIELD = FieldParams(DEFAULT_POLYNOMIAL)


def gf_add(a: int, b: int, field: FieldParams = DEFAULT_FIELD) -> int:
    return field.add(a, b)


def gf_mul(a: int, b: int, field: FieldParams = DEFAULT_FIELD) -> int:
    return field.mul(a, b)


def gf_inv(a: int, field: FieldParams = DEFAULT_FIELD) -> int:
    """Multiplicative inverse; raises ``ZeroDivisionError`` for 0."""
    return field.inv(a)


def gf_matvec(matrix: np.ndarray, vector: np.ndarray, field: FieldParams = DEFAULT_FIELD) -> np.ndarray:
    """Matrix-vector product over the field, arrays of element values."""
    products = field.mul_table[np.asarray(matrix), np.asarray(vector)[None, :]]
    return np.bitwise_xor.reduce(products, axis=1)


def gf_rank(matrix: np.ndarray, field: FieldParams = DEFAULT_FIELD) -> int:
    """Row rank by Gaussian elimination over the field."""
    a = np.array(matrix, dtype=field.mul_table.dtype)
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        nz = np.flatnonzero(a[rank:, col])
        if nz.size == 0:
            continue
        pivot = rank + nz[0]
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        a[rank] = field.mul_table[field.inv_table[a[rank, col]], a[rank]]
        others = np.flatnonzero(a[:, col])
        others = others[others != rank]
        if others.size:
            a[others] ^= field.mul_table[a[others, col][:, None], a[rank][None, :]]
        rank += 1
    return rank
