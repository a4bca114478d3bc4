"""Variance-based gene ordering and the paired-increment (delta) sequence.

Genes are ranked by ascending sample variance (ties broken by ascending
original index; an odd gene count drops the lowest-variance gene so the
ranking pairs up evenly). The delta sequence takes consecutive pairs along
that ranking and subtracts the lower-ranked member from the higher-ranked
one, per array. Any additive per-array disturbance shared by all genes
cancels exactly in each difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import ExpressionMatrix, table_to_tsv
from .errors import ValidationError


@dataclass(frozen=True)
class GeneOrdering:
    """Ascending-variance gene ranking of even length.

    ``permutation[k]`` is the original row index of the gene at rank k;
    ``variances[k]`` is that gene's sample variance (ddof=1).
    """

    permutation: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        perm = np.asarray(self.permutation, dtype=np.int64).copy()
        var = np.asarray(self.variances, dtype=np.float64).copy()
        if perm.ndim != 1 or var.ndim != 1 or perm.shape != var.shape:
            raise ValidationError("permutation and variances must be 1-d and equal length")
        if perm.shape[0] % 2 != 0 or perm.shape[0] == 0:
            raise ValidationError("ordering must have positive even length")
        if np.unique(perm).shape[0] != perm.shape[0]:
            raise ValidationError("permutation entries must be distinct")
        if (np.diff(var) < 0).any():
            raise ValidationError("variances must be non-decreasing along the ranking")
        perm.flags.writeable = False
        var.flags.writeable = False
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "variances", var)

    @property
    def n_pairs(self) -> int:
        return self.permutation.shape[0] // 2


def variance_ordering(matrix: ExpressionMatrix | np.ndarray) -> GeneOrdering:
    """Rank rows by ascending sample variance; drop the lowest-variance row
    when the count is odd."""
    values = getattr(matrix, "values", matrix)
    values = np.asarray(values, dtype=np.float64)
    var = values.var(axis=1, ddof=1)
    order = np.argsort(var, kind="stable")
    if order.shape[0] % 2 != 0:
        order = order[1:]
    return GeneOrdering(order, var[order])


@dataclass(frozen=True)
class DeltaMatrix:
    """Per-array differences for consecutive ranked gene pairs.

    Row i is gene at rank 2i+1 minus gene at rank 2i (0-based ranks), i.e.
    the higher-variance member of the pair minus the lower. ``pair_map[i]``
    holds the original gene indices (lower-rank member, higher-rank member).
    """

    values: np.ndarray
    ordering: GeneOrdering
    pair_map: tuple[tuple[int, int], ...]
    row_ids: tuple[str, ...]
    array_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    @property
    def n_arrays(self) -> int:
        return self.values.shape[1]


def delta_sequence(matrix: ExpressionMatrix, ordering: GeneOrdering) -> DeltaMatrix:
    """Build the increment rows for ``matrix`` along ``ordering``.

    The ordering may come from a different (e.g. pooled or reference) matrix
    with the same gene universe; only index bounds are checked, so a ranking
    estimated elsewhere can be enforced here.
    """
    perm = ordering.permutation
    if perm.max() >= matrix.n_genes or perm.min() < 0:
        raise ValidationError("ordering refers to gene indices outside this matrix")
    low = perm[0::2]
    high = perm[1::2]
    values = matrix.values[high] - matrix.values[low]
    pair_map = tuple((int(a), int(b)) for a, b in zip(low, high))
    row_ids = tuple(
        f"pair{i + 1}:{matrix.gene_ids[a]}-{matrix.gene_ids[b]}"
        for i, (a, b) in enumerate(pair_map)
    )
    return DeltaMatrix(values, ordering, pair_map, row_ids, matrix.array_ids)


def even_rank_genes(ordering: GeneOrdering) -> np.ndarray:
    """Original indices of the higher-variance member of each pair."""
    return ordering.permutation[1::2].copy()


def ordering_to_csv(ordering: GeneOrdering, matrix: ExpressionMatrix) -> str:
    lines = ["rank,gene_id,variance"]
    for k, (idx, var) in enumerate(zip(ordering.permutation, ordering.variances), start=1):
        lines.append(f"{k},{matrix.gene_ids[int(idx)]},{float(var)!r}")
    return "\n".join(lines) + "\n"


def delta_to_tsv(delta: DeltaMatrix) -> str:
    return table_to_tsv(delta.row_ids, delta.array_ids, delta.values)
