"""Truncated power series with real or complex coefficients.

A :class:`TruncatedSeries` holds the Taylor coefficients ``c_0..c_K`` of
``sum_j c_j (z - center)^j``.  Coefficient arrays may carry leading batch
dimensions, so one object can represent the expansions around many centres at
once (the residue engine expands around every root simultaneously).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = ["TruncatedSeries"]


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    center: NDArray | float
    coeffs: NDArray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs)
        if coeffs.ndim == 0 or coeffs.shape[-1] == 0:
            raise ValueError("a series needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.shape[-1] - 1

    @classmethod
    def variable(cls, center: ArrayLike, order: int) -> "TruncatedSeries":
        """The series of ``z`` itself around ``center``."""
        center = np.asarray(center, dtype=np.float64)
        coeffs = np.zeros(center.shape + (order + 1,))
        coeffs[..., 0] = center
        if order >= 1:
            coeffs[..., 1] = 1.0
        return cls(center, coeffs)

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise ValueError(f"cannot extend a series of order {self.order} to {order}")
        return TruncatedSeries(self.center, self.coeffs[..., : order + 1])

    def _coerce(self, other) -> NDArray:
        if isinstance(other, TruncatedSeries):
            k = min(self.order, other.order)
            return other.coeffs[..., : k + 1]
        c = np.zeros_like(self.coeffs, dtype=np.result_type(self.coeffs, np.asarray(other)))
        c[..., 0] = other
        return c

    def __add__(self, other) -> "TruncatedSeries":
        b = self._coerce(other)
        k = b.shape[-1]
        return TruncatedSeries(self.center, self.coeffs[..., :k] + b)

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.center, -self.coeffs)

    def __sub__(self, other) -> "TruncatedSeries":
        return self + (-other if isinstance(other, TruncatedSeries) else -np.asarray(other))

    def __rsub__(self, other) -> "TruncatedSeries":
        return (-self) + other

    def __mul__(self, other) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.center, self.coeffs * np.asarray(other)[..., None])
        k = min(self.order, other.order)
        a = self.coeffs[..., : k + 1]
        b = other.coeffs[..., : k + 1]
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
        for i in range(k + 1):
            out[..., i:] += a[..., i : i + 1] * b[..., : k + 1 - i]
        return TruncatedSeries(self.center, out)

    __rmul__ = __mul__

    def reciprocal(self) -> "TruncatedSeries":
        a = self.coeffs
        if np.any(a[..., 0] == 0):
            raise ZeroDivisionError("series with zero constant term is not invertible")
        b = np.zeros_like(a, dtype=np.result_type(a, 1.0))
        b[..., 0] = 1.0 / a[..., 0]
        for k in range(1, self.order + 1):
            acc = np.sum(a[..., 1 : k + 1] * b[..., k - 1 :: -1][..., :k], axis=-1)
            b[..., k] = -acc * b[..., 0]
        return TruncatedSeries(self.center, b)

    def __truediv__(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return self * other.reciprocal()
        return TruncatedSeries(self.center, self.coeffs / np.asarray(other)[..., None])

    def __rtruediv__(self, other) -> "TruncatedSeries":
        return self.reciprocal() * other

    def __pow__(self, power: int) -> "TruncatedSeries":
        if int(power) != power:
            raise ValueError("only integer powers are supported")
        power = int(power)
        base = self if power >= 0 else self.reciprocal()
        power = abs(power)
        result = TruncatedSeries(self.center, np.zeros_like(base.coeffs))
        result.coeffs[..., 0] = 1.0
        while power:
            if power & 1:
                result = result * base
            power >>= 1
            if power:
                base = base * base
        return result

    def derivative(self) -> "TruncatedSeries":
        """Termwise derivative; the result has one order less."""
        if self.order == 0:
            return TruncatedSeries(self.center, np.zeros_like(self.coeffs))
        k = np.arange(1, self.order + 1)
        return TruncatedSeries(self.center, self.coeffs[..., 1:] * k)

    def shift_down(self) -> "TruncatedSeries":
        """Divide by ``(z - center)``; requires a vanishing constant term (dropped)."""
        return TruncatedSeries(self.center, self.coeffs[..., 1:])

    def __getitem__(self, j: int) -> NDArray:
        return self.coeffs[..., j]

    def __call__(self, z):
        """Evaluate the truncated polynomial at ``z``."""
        dz = np.asarray(z) - self.center
        out = np.zeros_like(self.coeffs[..., 0] * dz)
        for c in np.moveaxis(self.coeffs[..., ::-1], -1, 0):
            out = out * dz + c
        return out
