"""LIBSVM text ingestion, partitioning into components, and synthetic fixtures."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.special import expit

from .errors import ParseError, ValidationError
from .problems import GlmProblem, QuadraticProblem


@dataclass(frozen=True)
class SparseDataset:
    """Rows of ``(index, value)`` pairs with 1-based, strictly increasing indices.

    ``indices[r]`` and ``values[r]`` are parallel arrays for row ``r``; ``d``
    is at least the largest index present.
    """

    indices: tuple
    values: tuple
    labels: np.ndarray
    d: int

    def __post_init__(self):
        if len(self.indices) != len(self.values) or len(self.indices) != len(self.labels):
            raise ValidationError("indices, values and labels must have one entry per row")
        for r, idx in enumerate(self.indices):
            if len(idx) and (idx[0] < 1 or np.any(np.diff(idx) <= 0) or idx[-1] > self.d):
                raise ValidationError(f"row {r}: indices must be increasing and within [1, {self.d}]")

    @property
    def rows(self) -> int:
        return len(self.labels)

    @property
    def nnz(self) -> int:
        return sum(len(idx) for idx in self.indices)

    def to_dense(self) -> np.ndarray:
        X = np.zeros((self.rows, self.d))
        for r, (idx, val) in enumerate(zip(self.indices, self.values)):
            X[r, idx - 1] = val
        return X

    def with_dim(self, d: int) -> "SparseDataset":
        """Same data with an overridden feature dimension (e.g. a published one)."""
        return SparseDataset(self.indices, self.values, self.labels, int(d))

    def take(self, rows) -> "SparseDataset":
        rows = list(rows)
        return SparseDataset(tuple(self.indices[r] for r in rows),
                             tuple(self.values[r] for r in rows),
                             self.labels[rows], self.d)

    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (self.d == other.d and np.array_equal(self.labels, other.labels)
                and len(self.indices) == len(other.indices)
                and all(np.array_equal(a, b) for a, b in zip(self.indices, other.indices))
                and all(np.array_equal(a, b) for a, b in zip(self.values, other.values)))


def _lines(text) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_libsvm(text: Union[str, Iterable[str]], d: Optional[int] = None) -> SparseDataset:
    """Parse LIBSVM lines ``label idx:val idx:val ...``.

    ``text`` is either the whole file contents or an iterable of lines.  A
    ``#`` starts a comment; blank lines are skipped.  ``d`` overrides the
    feature dimension, which otherwise is the largest index seen.
    """
    indices, values, labels = [], [], []
    max_idx = 0
    for lineno, line in enumerate(_lines(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, *pairs = line.split()
        try:
            labels.append(float(head))
        except ValueError:
            raise ParseError(f"bad label {head!r}", lineno) from None
        idx = np.empty(len(pairs), dtype=np.int64)
        val = np.empty(len(pairs))
        for j, pair in enumerate(pairs):
            k, sep, v = pair.partition(":")
            if not sep:
                raise ParseError(f"malformed pair {pair!r} (missing ':')", lineno)
            try:
                idx[j] = int(k)
                val[j] = float(v)
            except ValueError:
                raise ParseError(f"malformed pair {pair!r}", lineno) from None
            if idx[j] < 1:
                raise ParseError(f"feature index {idx[j]} < 1", lineno)
            if j and idx[j] <= idx[j - 1]:
                raise ParseError("indices not strictly increasing", lineno)
        if len(idx):
            max_idx = max(max_idx, int(idx[-1]))
        indices.append(idx)
        values.append(val)
    if d is None:
        d = max_idx
    elif d < max_idx:
        raise ValidationError(f"dimension override {d} is below the largest index {max_idx}")
    return SparseDataset(tuple(indices), tuple(values), np.array(labels, dtype=float), int(d))


def load_libsvm(path: Union[str, os.PathLike], d: Optional[int] = None) -> SparseDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, d=d)


def dump_libsvm(dataset: SparseDataset) -> str:
    """Serialize back to LIBSVM text; ``repr`` keeps floats round-trippable."""
    out = []
    for lab, idx, val in zip(dataset.labels, dataset.indices, dataset.values):
        pairs = " ".join(f"{int(k)}:{float(v)!r}" for k, v in zip(idx, val))
        out.append(f"{float(lab)!r} {pairs}".rstrip())
    return "\n".join(out) + "\n"


def partition(dataset: SparseDataset, parts: int, loss: str = "logistic", lam: float = 0.0,
              shuffle: bool = False, seed: Optional[int] = None) -> GlmProblem:
    """Split rows into ``parts`` contiguous blocks, one component per block.

    Block sizes differ by at most one, larger blocks first.  With
    ``shuffle=True`` the rows are permuted by a seeded generator before
    splitting.
    """
    parts = int(parts)
    if parts < 1:
        raise ValidationError("parts must be positive")
    if parts > dataset.rows:
        raise ValidationError(f"cannot split {dataset.rows} rows into {parts} parts")
    order = np.arange(dataset.rows)
    if shuffle:
        order = np.random.default_rng(seed).permutation(dataset.rows)
    blocks = np.array_split(order, parts)
    return GlmProblem(dataset.to_dense(), dataset.labels, lam, loss=loss, blocks=blocks)


def synth_quadratic(seed: int, n: int, d: int, mu: float, L: float) -> QuadraticProblem:
    """Random quadratic finite sum with every spectrum inside ``[mu, L]``.

    Each ``A_i = Q diag(e) Q^T`` with ``Q`` from a QR factorization of a
    Gaussian matrix and ``e`` uniform on ``[mu, L]``; centers are standard
    normal.  The problem has ``hess_lip = 0`` and an exact ``x_star``.
    """
    if not mu > 0:
        raise ValidationError("mu must be positive")
    if L < mu:
        raise ValidationError("need mu <= L")
    rng = np.random.default_rng(seed)
    As = np.empty((n, d, d))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        e = rng.uniform(mu, L, size=d)
        As[i] = (Q * e) @ Q.T
    cs = rng.standard_normal((n, d))
    return QuadraticProblem(As, cs)


def synth_dataset(seed: int, rows: int, d: int) -> SparseDataset:
    """The documented logistic generator, as a dataset.

    With ``rng = numpy.random.default_rng(seed)``, draws in this order:

    1. ``x_true = rng.standard_normal(d)``
    2. ``A = rng.uniform(-1, 1, size=(rows, d))``
    3. ``u = rng.uniform(size=rows)``; label ``+1`` iff ``u < expit(A @ x_true)``.

    Every feature is stored explicitly (a dense dataset in sparse form).
    """
    if rows < 1 or d < 1:
        raise ValidationError("rows and d must be at least 1")
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(d)
    A = rng.uniform(-1.0, 1.0, size=(rows, d))
    u = rng.uniform(size=rows)
    b = np.where(u < expit(A @ x_true), 1.0, -1.0)
    idx = np.arange(1, d + 1)
    return SparseDataset(tuple(idx.copy() for _ in range(rows)), tuple(A), b, d)


def synth_binary_dataset(seed: int, rows: int, d: int, density: float = 0.1) -> SparseDataset:
    """Sparse 0/1 features in the style of the a8a benchmark.

    With ``rng = numpy.random.default_rng(seed)``, draws in this order:

    1. ``x_true = rng.standard_normal(d)``
    2. ``mask = rng.uniform(size=(rows, d)) < density`` (the stored ones)
    3. ``u = rng.uniform(size=rows)``; label ``+1`` iff ``u < expit(A @ x_true)``.

    Rows with no ones are allowed (they store no features).
    """
    if rows < 1 or d < 1:
        raise ValidationError("rows and d must be at least 1")
    if not 0.0 < density <= 1.0:
        raise ValidationError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(d)
    mask = rng.uniform(size=(rows, d)) < density
    u = rng.uniform(size=rows)
    b = np.where(u < expit(mask.astype(float) @ x_true), 1.0, -1.0)
    idx = tuple(np.flatnonzero(row) + 1 for row in mask)
    return SparseDataset(idx, tuple(np.ones(len(i)) for i in idx), b, d)


def synth_logistic(seed: int, n: int, d: int, lam: float, rows: Optional[int] = None) -> GlmProblem:
    """Synthetic logistic regression with ``n`` components.

    By default one sample per component; pass ``rows > n`` to draw more
    samples and group them into ``n`` contiguous blocks.
    """
    if n < 1 or d < 1:
        raise ValidationError("n and d must be at least 1")
    return partition(synth_dataset(seed, rows or n, d), n, "logistic", lam)
