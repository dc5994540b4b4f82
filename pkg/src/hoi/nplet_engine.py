"""Streamed n-plet enumeration and batched entropy-term computation.

An n-plet is a subset of k variables out of N. Batches hold B of them,
either as a (B, K) index matrix (fixed order) or as a (B, N) boolean mask
matrix (mixed orders). Mixed-order batches are evaluated by padding each
sub-covariance to N x N with an identity block at the unused positions,
which leaves the log-determinant unchanged and contributes a known
NORMAL_ENTROPY per padded dimension.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .copula_core import NORMAL_ENTROPY, CovSet, _bias_table
from .errors import (
    InvalidData,
    InvalidNplet,
    InvalidOrderRange,
    NotPositiveDefinite,
)


def count_nplets(n: int, min_order: int, max_order: int) -> int:
    """Exact number of variable subsets with size in [min_order, max_order]."""
    if not 1 <= min_order <= max_order <= n:
        raise InvalidOrderRange(
            f"need 1 <= min_order <= max_order <= n, "
            f"got min={min_order}, max={max_order}, n={n}"
        )
    return sum(math.comb(n, k) for k in range(min_order, max_order + 1))


class NpletBatch:
    """A batch of n-plets over N variables.

    Construct with exactly one of:

    indices : (B, K) integer array
        Fixed-order batch; rows strictly increasing, entries in [0, N).
    masks : (B, N) boolean array
        Mixed-order batch; each row selects at least one variable.

    Rows must be unique within a batch unless check_unique is disabled
    (trusted constructors: streaming enumeration, annealing chains that
    may legitimately coincide).
    """

    def __init__(self, n_variables: int, indices=None, masks=None,
                 check_unique: bool = True):
        if (indices is None) == (masks is None):
            raise InvalidNplet("provide exactly one of indices or masks")
        if n_variables < 1:
            raise InvalidData(f"n_variables must be >= 1, got {n_variables}")
        self.n_variables = int(n_variables)
        if indices is not None:
            idx = np.asarray(indices, dtype=np.int64)
            if idx.ndim != 2 or idx.shape[0] < 1 or idx.shape[1] < 1:
                raise InvalidNplet(f"indices must be a nonempty 2-D array, got shape {idx.shape}")
            if idx.min() < 0 or idx.max() >= n_variables:
                raise InvalidNplet(f"indices out of range for N={n_variables}")
            if idx.shape[1] > 1 and not (np.diff(idx, axis=1) > 0).all():
                raise InvalidNplet("index rows must be strictly increasing")
            if check_unique and np.unique(idx, axis=0).shape[0] != idx.shape[0]:
                raise InvalidNplet("duplicate n-plets in batch")
            self.mode = "fixed"
            self.indices = idx
            self.masks = None
        else:
            m = np.asarray(masks)
            if m.dtype != np.bool_:
                raise InvalidNplet("masks must be boolean")
            if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] != n_variables:
                raise InvalidNplet(f"masks must have shape (B, {n_variables}), got {m.shape}")
            if not m.any(axis=1).all():
                raise InvalidNplet("every mask must select at least one variable")
            if check_unique and np.unique(m, axis=0).shape[0] != m.shape[0]:
                raise InvalidNplet("duplicate n-plets in batch")
            self.mode = "mixed"
            self.indices = None
            self.masks = m

    @property
    def batch_size(self) -> int:
        arr = self.indices if self.mode == "fixed" else self.masks
        return arr.shape[0]

    @property
    def order(self) -> int:
        """The common order of a fixed-order batch."""
        if self.mode != "fixed":
            raise InvalidNplet("mixed-order batch has no single order")
        return self.indices.shape[1]

    def orders(self) -> np.ndarray:
        """(B,) effective order of every row."""
        if self.mode == "fixed":
            return np.full(self.batch_size, self.indices.shape[1], dtype=np.int64)
        return self.masks.sum(axis=1).astype(np.int64)

    def row_indices(self, i: int) -> tuple:
        """Sorted variable indices of row i, as a tuple."""
        if self.mode == "fixed":
            return tuple(int(v) for v in self.indices[i])
        return tuple(int(v) for v in np.flatnonzero(self.masks[i]))

    def to_masks(self) -> np.ndarray:
        """(B, N) boolean view of the batch."""
        if self.mode == "mixed":
            return self.masks
        out = np.zeros((self.batch_size, self.n_variables), dtype=bool)
        np.put_along_axis(out, self.indices, True, axis=1)
        return out


def enumerate_order(n: int, k: int, batch_size: int = 10000):
    """Yield every C(n, k) combination exactly once, in lexicographic order.

    Combinations stream in chunks of at most batch_size rows, so memory
    stays O(batch_size * k) no matter how large C(n, k) is.
    """
    if not 1 <= k <= n:
        raise InvalidOrderRange(f"need 1 <= k <= n, got k={k}, n={n}")
    if batch_size < 1:
        raise InvalidData(f"batch_size must be >= 1, got {batch_size}")
    combos = itertools.combinations(range(n), k)
    while True:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, batch_size)),
            dtype=np.int64,
        )
        if flat.size == 0:
            return
        yield NpletBatch(n, indices=flat.reshape(-1, k), check_unique=False)


@dataclass
class SubCovBatch:
    """Batched sub-covariance matrices.

    matrices : (B, D, K, K) array
        K is the n-plet order for fixed-order batches and N for padded
        mixed-order batches.
    pad_counts : (B,) integer array
        Number of identity-padded dimensions per row (0 when fixed).
    """

    matrices: np.ndarray
    pad_counts: np.ndarray


@dataclass
class EntropyTerms:
    """Entropy terms per (n-plet, dataset), in nats.

    h_joint : (B, D) joint entropy of each n-plet.
    h_singles : (B, D, K) marginal entropy of each member variable.
    h_leave_one_out : (B, D, K) entropy of the n-plet minus one member.
    orders : (B,) effective order of each row.

    For mixed-order batches K equals N and the positions outside an
    n-plet hold zeros, so sums over the last axis never need a mask.

    The excess_* fields mirror the three entropy arrays with the
    independent-standard-normal baseline removed (k, 1 and k - 1 times
    the unit-normal entropy respectively). The baselines cancel
    algebraically in every interaction measure, so computing measures
    from the excesses avoids re-cancelling them in floating point: an
    identity covariance then yields exact zeros instead of ~1e-16
    residue. They carry the same bias corrections and pad zeroing as
    their h_* counterparts.
    """

    h_joint: np.ndarray
    h_singles: np.ndarray
    h_leave_one_out: np.ndarray
    orders: np.ndarray
    excess_joint: np.ndarray | None = None
    excess_singles: np.ndarray | None = None
    excess_leave_one_out: np.ndarray | None = None


def extract_subcov_batch(covs: CovSet, batch: NpletBatch) -> SubCovBatch:
    """Gather principal submatrices for a fixed-order batch in one shot."""
    if batch.mode != "fixed":
        raise InvalidNplet("extract_subcov_batch needs a fixed-order batch")
    if batch.n_variables != covs.n_variables:
        raise InvalidNplet(
            f"batch is over {batch.n_variables} variables, covariances over {covs.n_variables}"
        )
    sig = covs.stacked()
    idx = batch.indices
    d_ax = np.arange(sig.shape[0])[None, :, None, None]
    rows = idx[:, None, :, None]
    cols = idx[:, None, None, :]
    return SubCovBatch(
        matrices=sig[d_ax, rows, cols],
        pad_counts=np.zeros(idx.shape[0], dtype=np.int64),
    )


def pad_subcov_batch(covs: CovSet, batch: NpletBatch) -> SubCovBatch:
    """Embed mixed-order rows into N x N matrices, identity at unused slots.

    Selected rows and columns copy the full covariance in their original
    positions; everywhere else the matrix is the identity, so the
    log-determinant equals that of the compact submatrix exactly.
    """
    if batch.mode != "mixed":
        raise InvalidNplet("pad_subcov_batch needs a mixed-order batch")
    if batch.n_variables != covs.n_variables:
        raise InvalidNplet(
            f"batch is over {batch.n_variables} variables, covariances over {covs.n_variables}"
        )
    sig = covs.stacked()
    m = batch.masks
    keep = m[:, None, :, None] & m[:, None, None, :]
    matrices = np.where(keep, sig[None], np.eye(covs.n_variables))
    return SubCovBatch(
        matrices=matrices,
        pad_counts=(batch.n_variables - m.sum(axis=1)).astype(np.int64),
    )


def _try_logdet_invdiag(m: np.ndarray):
    """(logdet, inverse diagonal) of one matrix, or None if not PD."""
    try:
        chol = np.linalg.cholesky(m)
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * np.log(np.diagonal(chol)).sum(), np.diagonal(inv).copy()


def _logdet_invdiag_fallback(mats: np.ndarray):
    """Per-matrix pass used when the batched factorization fails.

    Applies the single jitter retry only to the offending matrices so
    every healthy result stays bit-identical to the batched path.
    """
    lead = mats.shape[:-2]
    k = mats.shape[-1]
    logdet = np.empty(lead)
    invdiag = np.empty(lead + (k,))
    bad = []
    for coord in np.ndindex(lead):
        m = mats[coord]
        out = _try_logdet_invdiag(m)
        if out is None:
            eps = 1e-10 * np.trace(m) / k
            out = _try_logdet_invdiag(m + eps * np.eye(k))
        if out is None:
            bad.append(coord)
            continue
        logdet[coord], invdiag[coord] = out
    if bad:
        raise NotPositiveDefinite(
            f"{len(bad)} sub-covariance(s) not positive definite even after "
            f"jitter, first at (batch, dataset)={bad[0]}",
            coords=bad,
        )
    return logdet, invdiag


def _batched_logdet_invdiag(mats: np.ndarray):
    """Joint log-determinants and inverse diagonals of a (..., K, K) stack.

    The inverse diagonal gives every leave-one-out log-determinant via
    logdet(sigma without j) = logdet(sigma) + log((sigma^-1)_jj), so one
    Cholesky plus one inverse per matrix covers all K subsystems.
    """
    try:
        chol = np.linalg.cholesky(mats)
        inv = np.linalg.inv(mats)
    except np.linalg.LinAlgError:
        return _logdet_invdiag_fallback(mats)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)
    invdiag = np.diagonal(inv, axis1=-2, axis2=-1)
    return logdet, invdiag


def entropy_terms(covs: CovSet, batch: NpletBatch, bias_correct: bool = False) -> EntropyTerms:
    """Joint, marginal and leave-one-out entropies for a whole batch.

    Marginal entropies are computed once per dataset from the covariance
    diagonal and gathered per n-plet. With bias_correct, every entropy is
    corrected at its effective dimension (the n-plet order for the joint
    term, order minus one for leave-one-out, one for marginals); identity
    padding is exact and receives no correction.
    """
    sig = covs.stacked()
    orders = batch.orders()
    if bias_correct:
        t_used = covs.samples_used()
        if (t_used <= 0).any():
            raise InvalidData(
                "bias correction needs sample-estimated covariances "
                "(n_samples_used > 0)"
            )
        k_max = int(orders.max())
        tables = np.stack([_bias_table(int(t), k_max) for t in t_used])  # (D, k_max+1)

    # Everything below works in baseline-free excess form; the plain
    # entropies are reconstructed at the end by adding back multiples of
    # the unit-normal entropy.
    x_singles = 0.5 * np.log(np.diagonal(sig, axis1=-2, axis2=-1))  # (D, N)
    if bias_correct:
        x_singles = x_singles - tables[:, 1][:, None]

    if batch.mode == "fixed":
        sub = extract_subcov_batch(covs, batch)
        logdet, invdiag = _batched_logdet_invdiag(sub.matrices)
        k = batch.order
        x_joint = 0.5 * logdet
        x_loo = 0.5 * (logdet[..., None] + np.log(invdiag))
        x_sing = x_singles[:, batch.indices].transpose(1, 0, 2)  # (B, D, K)
        if bias_correct:
            x_joint = x_joint - tables[:, k][None, :]
            x_loo = x_loo - tables[:, k - 1][None, :, None]
        return EntropyTerms(
            h_joint=x_joint + k * NORMAL_ENTROPY,
            h_singles=x_sing + NORMAL_ENTROPY,
            h_leave_one_out=x_loo + (k - 1) * NORMAL_ENTROPY,
            orders=orders,
            excess_joint=x_joint,
            excess_singles=x_sing,
            excess_leave_one_out=x_loo,
        )

    sub = pad_subcov_batch(covs, batch)
    logdet, invdiag = _batched_logdet_invdiag(sub.matrices)
    ks = orders.astype(np.float64)[:, None]  # (B, 1)
    x_joint = 0.5 * logdet
    x_loo = 0.5 * (logdet[..., None] + np.log(invdiag))
    in_set = batch.masks[:, None, :]
    if bias_correct:
        x_joint = x_joint - tables[:, orders].T
        x_loo = x_loo - tables[:, orders - 1].T[..., None]
    x_sing = np.where(in_set, x_singles[None], 0.0)
    x_loo = np.where(in_set, x_loo, 0.0)
    return EntropyTerms(
        h_joint=x_joint + ks * NORMAL_ENTROPY,
        h_singles=np.where(in_set, x_sing + NORMAL_ENTROPY, 0.0),
        h_leave_one_out=np.where(in_set, x_loo + (ks[..., None] - 1.0) * NORMAL_ENTROPY, 0.0),
        orders=orders,
        excess_joint=x_joint,
        excess_singles=x_sing,
        excess_leave_one_out=x_loo,
    )
