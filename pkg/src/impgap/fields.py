"""Polynomial field catalog.

Every vector field, constraint piece and endpoint cost in a problem is a
polynomial in a fixed list of variables.  Polynomials are stored as monomial
tables (coefficient plus integer exponent row), which makes evaluation,
gradients and serialization exact and cheap, and lets the numba kernels in
:mod:`impgap._kernels` consume the same arrays.
"""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["Poly", "PolyMap"]


class Poly:
    """Scalar polynomial in ``nvars`` variables.

    Parameters
    ----------
    nvars
        Number of variables.
    terms
        Iterable of ``(coef, exponents)`` pairs.  Repeated exponent rows are
        merged and zero coefficients dropped.
    """

    def __init__(self, nvars: int, terms: Iterable[tuple[float, Sequence[int]]] = ()):
        self.nvars = int(nvars)
        merged: dict[tuple[int, ...], float] = {}
        for coef, exps in terms:
            key = tuple(int(e) for e in exps)
            if len(key) != self.nvars:
                raise ValueError(f"exponent row {key} does not have {self.nvars} entries")
            if any(e < 0 for e in key):
                raise ValueError("negative exponents are not polynomial")
            merged[key] = merged.get(key, 0.0) + float(coef)
        keys = sorted(k for k, c in merged.items() if c != 0.0)
        self.coefs = np.array([merged[k] for k in keys], dtype=float)
        self.exps = np.array(keys, dtype=np.int64).reshape(len(keys), self.nvars)

    # construction helpers
    @classmethod
    def constant(cls, nvars: int, value: float) -> "Poly":
        return cls(nvars, [(value, [0] * nvars)])

    @classmethod
    def variable(cls, nvars: int, index: int, coef: float = 1.0) -> "Poly":
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, [(coef, exps)])

    @classmethod
    def affine(cls, nvars: int, const: float = 0.0, linear: Sequence[float] | None = None) -> "Poly":
        terms = [(const, [0] * nvars)]
        if linear is not None:
            if len(linear) != nvars:
                raise ValueError("linear part has the wrong length")
            for j, c in enumerate(linear):
                exps = [0] * nvars
                exps[j] = 1
                terms.append((c, exps))
        return cls(nvars, terms)

    @property
    def terms(self) -> list[tuple[float, tuple[int, ...]]]:
        return [(float(c), tuple(int(e) for e in row)) for c, row in zip(self.coefs, self.exps)]

    # algebra
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Poly.constant(self.nvars, float(other))

    def __add__(self, other) -> "Poly":
        other = self._coerce(other)
        return Poly(self.nvars, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, [(-c, e) for c, e in self.terms])

    def __sub__(self, other) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Poly":
        other = self._coerce(other)
        terms = []
        for c1, e1 in self.terms:
            for c2, e2 in other.terms:
                terms.append((c1 * c2, [a + b for a, b in zip(e1, e2)]))
        return Poly(self.nvars, terms)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms and self.nvars == other.nvars

    def __repr__(self) -> str:
        return f"Poly(nvars={self.nvars}, terms={self.terms})"

    # evaluation
    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.nvars:
            raise ValueError(f"expected trailing dimension {self.nvars}, got {z.shape}")
        if self.coefs.size == 0:
            return np.zeros(z.shape[:-1])
        mono = np.prod(z[..., None, :] ** self.exps, axis=-1)
        return mono @ self.coefs

    def grad(self, z) -> np.ndarray:
        """Gradient with shape ``z.shape``."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape)
        for j in range(self.nvars):
            ej = self.exps[:, j]
            mask = ej > 0
            if not np.any(mask):
                continue
            exps = self.exps[mask].copy()
            exps[:, j] -= 1
            mono = np.prod(z[..., None, :] ** exps, axis=-1)
            out[..., j] = mono @ (self.coefs[mask] * ej[mask])
        return out

    def depends_on(self, index: int) -> bool:
        return bool(np.any(self.exps[:, index] > 0)) if self.coefs.size else False

    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if self.coefs.size else 0

    # serialization
    def to_json(self) -> dict:
        return {"terms": [[c, list(e)] for c, e in self.terms]}

    @classmethod
    def from_json(cls, nvars: int, data: Mapping) -> "Poly":
        if not isinstance(data, Mapping) or len(data) != 1:
            raise ValueError(f"a polynomial must be a single-key object, got {data!r}")
        (tag, body), = data.items()
        if tag == "const":
            return cls.constant(nvars, float(body))
        if tag == "affine":
            unknown = set(body) - {"const", "linear"}
            if unknown:
                raise ValueError(f"unknown affine keys {sorted(unknown)}")
            return cls.affine(nvars, float(body.get("const", 0.0)), body.get("linear"))
        if tag in ("terms", "poly"):
            return cls(nvars, [(float(c), e) for c, e in body])
        raise ValueError(f"unknown polynomial tag {tag!r}")


class PolyMap:
    """Vector of polynomials sharing one variable list."""

    def __init__(self, polys: Sequence[Poly]):
        polys = list(polys)
        if not polys:
            raise ValueError("empty polynomial map")
        nv = {p.nvars for p in polys}
        if len(nv) != 1:
            raise ValueError("components disagree on the variable count")
        self.polys = polys
        self.nvars = nv.pop()
        self.dim = len(polys)
        comp, coef, exps = [], [], []
        for i, p in enumerate(polys):
            comp.extend([i] * p.coefs.size)
            coef.extend(p.coefs.tolist())
            exps.extend(p.exps.tolist())
        self.comp = np.array(comp, dtype=np.int64)
        self.coef = np.array(coef, dtype=float)
        self.exps = np.array(exps, dtype=np.int64).reshape(len(coef), self.nvars)

    def __call__(self, z) -> np.ndarray:
        return np.stack([p(z) for p in self.polys], axis=-1)

    def jac(self, z) -> np.ndarray:
        """Jacobian with shape ``z.shape[:-1] + (dim, nvars)``."""
        return np.stack([p.grad(z) for p in self.polys], axis=-2)

    def depends_on(self, index: int) -> bool:
        return any(p.depends_on(index) for p in self.polys)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.comp, self.coef, self.exps

    def to_json(self) -> list:
        return [p.to_json() for p in self.polys]
