"""Cosine eigenbasis on the unit cube and sparse cosine series.

The Laplacian with homogeneous Neumann data on [0,1]^d has eigenfunctions
prod_i cos(pi k_i x_i) indexed by nonnegative multi-indices k, with
eigenvalue pi^2 |k|_2^2, so sources and exact solutions are finite cosine
series and the PDE inverts termwise.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class CosineSeries:
    """Finite cosine series: sparse map multi-index -> coefficient.

    Terms are stored in lexicographic order so iteration (and therefore
    summation) is deterministic. Treat instances as immutable.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[Sequence[int], float] | Iterable):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        items = terms.items() if isinstance(terms, Mapping) else terms
        canon: dict[MultiIndex, float] = {}
        for k, coef in items:
            key = tuple(int(v) for v in k)
            if len(key) != dim:
                raise ValueError(f"multi-index {key} does not have length {dim}")
            if any(v < 0 for v in key):
                raise ValueError(f"multi-index {key} has negative entries")
            canon[key] = canon.get(key, 0.0) + float(coef)
        self.dim = dim
        self.terms = dict(sorted(canon.items()))

    @property
    def mean_zero(self) -> bool:
        return (0,) * self.dim not in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CosineSeries)
                and self.dim == other.dim and self.terms == other.terms)

    def __repr__(self) -> str:
        return f"CosineSeries(dim={self.dim}, terms={self.terms})"

    def eval(self, x) -> float | np.ndarray:
        return series_eval(self, x)


def eigenfunction(k: Sequence[int], x) -> float | np.ndarray:
    """prod_i cos(pi k_i x_i); x is a point (d,) or a batch (n, d)."""
    k = np.asarray(k, dtype=float)
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != k.shape[0]:
        raise ValueError("dimension mismatch between multi-index and point")
    vals = np.cos(np.pi * pts * k).prod(axis=-1)
    return float(vals) if pts.ndim == 1 else vals


def series_eval(s: CosineSeries, x) -> float | np.ndarray:
    """Sum of coefficient * eigenfunction over the series terms."""
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != s.dim:
        raise ValueError("dimension mismatch between series and point")
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.zeros(pts.shape[0])
    for k, coef in s.terms.items():
        out += coef * np.cos(np.pi * pts * np.asarray(k, dtype=float)).prod(axis=1)
    return float(out[0]) if single else out


def barron_norm(s: CosineSeries, order: float) -> float:
    """Sum of (1 + pi^order |k|_1^order) |coef|.

    Order-0 convention: the weight is 2 for k != 0 and 1 for k = 0, which
    sidesteps the 0^0 ambiguity (mean-zero sources never carry k = 0).
    """
    total = 0.0
    for k, coef in s.terms.items():
        l1 = float(sum(k))
        weight = 1.0 if l1 == 0.0 else 1.0 + math.pi ** order * l1 ** order
        total += weight * abs(coef)
    return total


def laplacian_symbol(k: Sequence[int]) -> float:
    """pi^2 |k|_2^2, the Neumann Laplacian eigenvalue of the k-th mode."""
    return math.pi ** 2 * float(sum(v * v for v in k))


def make_source(k: Sequence[int]) -> CosineSeries:
    """Single-mode source pi^2 |k|_2^2 prod cos(pi k_i x_i) with exact solution phi_k."""
    key = tuple(int(v) for v in k)
    if all(v == 0 for v in key):
        raise ValueError("k = 0 violates the zero-mean compatibility condition")
    return CosineSeries(len(key), {key: laplacian_symbol(key)})


def exact_solution(f: CosineSeries) -> CosineSeries:
    """Termwise spectral inversion coef -> coef / (pi^2 |k|_2^2)."""
    if not f.mean_zero:
        raise ValueError("source has a k = 0 term; the Neumann problem needs zero mean")
    return CosineSeries(f.dim, {k: coef / laplacian_symbol(k)
                                for k, coef in f.terms.items()})


def mixed_source(d: int) -> CosineSeries:
    """Sum of 2 pi^2 cos(pi x_k) cos(pi x_{k+1}) over the d-1 adjacent pairs."""
    if d < 2:
        raise ValueError("mixed source needs d >= 2")
    terms = {}
    for j in range(d - 1):
        k = [0] * d
        k[j] = 1
        k[j + 1] = 1
        terms[tuple(k)] = 2.0 * math.pi ** 2
    return CosineSeries(d, terms)


def series_l2_norm(s: CosineSeries) -> float:
    """Exact L2([0,1]^d) norm: each squared cosine integrates to 1/2 per active axis."""
    total = 0.0
    for k, coef in s.terms.items():
        nnz = sum(1 for v in k if v != 0)
        total += coef * coef * 0.5 ** nnz
    return math.sqrt(total)


def save_series(s: CosineSeries, path) -> None:
    """One line per term: k_1 ... k_d coefficient."""
    with open(path, "w") as fh:
        for k, coef in s.terms.items():
            fh.write(" ".join(str(v) for v in k) + f" {coef!r}\n")


def load_series(path) -> CosineSeries:
    terms = {}
    dim = None
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"malformed series line: {line!r}")
            k = tuple(int(v) for v in parts[:-1])
            if dim is None:
                dim = len(k)
            terms[k] = float(parts[-1])
    if dim is None:
        raise ValueError("empty series file")
    return CosineSeries(dim, terms)
