"""Dataset loading: LIBSVM text files and a synthetic logistic generator."""

from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp

from .problems import Dataset

_TOKEN = re.compile(r"\S+")


class LibsvmFormatError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def parse_libsvm(path: str, n_features: int | None = None) -> Dataset:
    """Parse 'label idx:val idx:val ...' lines into a sparse Dataset.

    Indices are 1-based in the file and 0-based in memory. d is the largest
    index seen unless `n_features` overrides it. Labels are kept as-is when
    already in {-1,+1}; otherwise the common encodings 0 -> -1 and 2 -> -1
    are applied (1 stays +1), and anything else is rejected.
    """
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = _TOKEN.finditer(line)
            first = next(tokens, None)
            if first is None:
                continue
            try:
                label = float(first.group())
            except ValueError:
                raise LibsvmFormatError(lineno, first.start() + 1,
                                        f"bad label {first.group()!r}") from None
            row = len(labels)
            labels.append(label)
            for m in tokens:
                tok = m.group()
                col0 = m.start() + 1
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise LibsvmFormatError(lineno, col0, f"expected idx:val, got {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise LibsvmFormatError(lineno, col0, f"bad index {idx_s!r}") from None
                if idx < 1:
                    raise LibsvmFormatError(lineno, col0, "indices are 1-based")
                try:
                    val = float(val_s)
                except ValueError:
                    raise LibsvmFormatError(
                        lineno, col0 + len(idx_s) + 1, f"bad value {val_s!r}"
                    ) from None
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
                max_idx = max(max_idx, idx)
    if not labels:
        raise LibsvmFormatError(0, 0, "empty file")
    if n_features is not None:
        if max_idx > n_features:
            raise ValueError(f"index {max_idx} exceeds n_features={n_features}")
        d = n_features
    else:
        d = max(max_idx, 1)

    b = np.array(labels)
    present = np.unique(b)
    if not np.all(np.isin(present, (-1.0, 1.0))):
        mapped = {0.0: -1.0, 2.0: -1.0, 1.0: 1.0, -1.0: -1.0}
        unknown = [v for v in present if v not in mapped]
        if unknown:
            raise ValueError(f"cannot map labels {unknown} to {{-1,+1}}")
        b = np.array([mapped[v] for v in b])

    A = sp.csr_matrix(
        (np.array(vals), (np.array(rows), np.array(cols))), shape=(len(labels), d)
    )
    return Dataset(A, b)


def synth_logistic(
    n: int, d: int, seed: int, skew: float, scale: float = 1.0
) -> Dataset:
    """Gaussian rows with one row scaled by `skew`, labels from a planted
    parameter with 10% flips. Counter-based stream, so a fixed seed gives a
    byte-identical dataset.

    `scale` sets the base row magnitude; small values keep the per-component
    curvature bounds small, which makes the concentration sample sizes bite
    below n at desk scale.
    """
    if n < 1 or d < 1:
        raise ValueError("need n, d >= 1")
    if skew <= 0.0 or scale <= 0.0:
        raise ValueError("skew and scale must be > 0")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    A = scale * rng.standard_normal((n, d))
    A[0] *= skew
    w = rng.standard_normal(d) / np.sqrt(d)
    margins = A @ w
    b = np.where(margins >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < 0.1
    b[flips] *= -1.0
    return Dataset.from_dense(A, b)
