"""Exhaustive streaming scans with pluggable reducers.

A scan visits every n-plet in an order range exactly once per dataset,
in lexicographic order within each order, feeding (batch, measures)
pairs to a reducer. Reduction always happens in the parent process in
enumeration order, so the result is independent of batch size and worker
count. The 21-feature informational fingerprint of a dataset is one such
reduction over orders 2..N.
"""

import itertools
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .copula_core import CovSet
from .errors import ExhaustiveLimitExceeded, InvalidData, InvalidOrderRange
from .measures import HoiBatch, compute_hoi_batch
from .nplet_engine import NpletBatch, count_nplets, enumerate_order

MEASURES = ("tc", "dtc", "o", "s")


class Reducer:
    """Consumes (NpletBatch, HoiBatch) pairs in enumeration order."""

    def update(self, batch: NpletBatch, hoi: HoiBatch) -> None:
        raise NotImplementedError

    def finalize(self):
        raise NotImplementedError


@dataclass(frozen=True)
class TopEntry:
    """One selected n-plet with all four measure values."""

    indices: tuple
    order: int
    value: float
    tc: float
    dtc: float
    o: float
    s: float


class TopK(Reducer):
    """Keep the k best n-plets per dataset for one measure.

    Ties are broken by the lexicographically smallest index tuple, which
    makes the selection independent of batch size and worker count.
    finalize() returns a list of TopEntry lists, one per dataset.
    """

    def __init__(self, measure: str, direction: str, k: int):
        if measure not in MEASURES:
            raise InvalidData(f"measure must be one of {MEASURES}, got {measure!r}")
        if direction not in ("max", "min"):
            raise InvalidData(f"direction must be 'max' or 'min', got {direction!r}")
        if k < 1:
            raise InvalidData(f"k must be >= 1, got {k}")
        self.measure = measure
        self.direction = direction
        self.k = k
        self._best = None  # per dataset: sorted list of (key, TopEntry)

    def update(self, batch, hoi):
        vals = getattr(hoi, self.measure)
        b, d_count = vals.shape
        if self._best is None:
            self._best = [[] for _ in range(d_count)]
        sign = -1.0 if self.direction == "max" else 1.0
        k_eff = min(self.k, b)
        for d in range(d_count):
            v = vals[:, d]
            # candidate cut keeps every row tied with the k-th best
            if self.direction == "max":
                thr = np.partition(v, b - k_eff)[b - k_eff]
                cand = np.flatnonzero(v >= thr)
            else:
                thr = np.partition(v, k_eff - 1)[k_eff - 1]
                cand = np.flatnonzero(v <= thr)
            entries = self._best[d]
            for i in cand:
                idx = batch.row_indices(int(i))
                entry = TopEntry(
                    indices=idx,
                    order=len(idx),
                    value=float(v[i]),
                    tc=float(hoi.tc[i, d]),
                    dtc=float(hoi.dtc[i, d]),
                    o=float(hoi.o[i, d]),
                    s=float(hoi.s[i, d]),
                )
                entries.append(((sign * entry.value, idx), entry))
            entries.sort(key=lambda pair: pair[0])
            del entries[self.k:]

    def finalize(self):
        if self._best is None:
            return []
        return [[entry for _, entry in per_d] for per_d in self._best]


class Histogram(Reducer):
    """Fixed-range histogram of one measure per dataset.

    Values outside [lo, hi] are clipped into the edge bins. finalize()
    returns (edges, counts) with counts of shape (D, bins).
    """

    def __init__(self, measure: str, bins: int, lo: float, hi: float):
        if measure not in MEASURES:
            raise InvalidData(f"measure must be one of {MEASURES}, got {measure!r}")
        if bins < 1:
            raise InvalidData(f"bins must be >= 1, got {bins}")
        if not lo < hi:
            raise InvalidData(f"need lo < hi, got [{lo}, {hi}]")
        self.measure = measure
        self.edges = np.linspace(lo, hi, bins + 1)
        self._counts = None

    def update(self, batch, hoi):
        vals = getattr(hoi, self.measure)
        d_count = vals.shape[1]
        if self._counts is None:
            self._counts = np.zeros((d_count, len(self.edges) - 1), dtype=np.int64)
        lo, hi = self.edges[0], self.edges[-1]
        for d in range(d_count):
            v = np.clip(vals[:, d], lo, hi)
            self._counts[d] += np.histogram(v, bins=self.edges)[0]

    def finalize(self):
        return self.edges, self._counts


class Callback(Reducer):
    """Apply a user function to every (batch, hoi) pair, in enumeration
    order; finalize() returns the list of its return values."""

    def __init__(self, fn):
        if not callable(fn):
            raise InvalidData("Callback needs a callable")
        self.fn = fn
        self._results = []

    def update(self, batch, hoi):
        self._results.append(self.fn(batch, hoi))

    def finalize(self):
        return self._results


FEATURE_NAMES = (
    "tc_max", "tc_min", "tc_mean", "tc_whole",
    "dtc_max", "dtc_min", "dtc_mean", "dtc_whole",
    "o_max", "o_min", "o_mean", "o_whole",
    "s_max", "s_min", "s_mean", "s_whole",
    "mi_mean", "mi_std",
    "o_max_order_norm", "o_min_order_norm",
    "prop_synergistic",
)


@dataclass(frozen=True)
class FeatureVector:
    """21 summary features of one dataset's interaction structure.

    Per measure: max, min, mean over all n-plets of orders 3..N plus the
    whole-system (order N) value. mi_mean / mi_std summarize pairwise
    mutual information (population std). The order at which the extreme
    O-information first appears is divided by N, and prop_synergistic is
    the fraction of n-plets with strictly negative O-information.
    """

    tc_max: float
    tc_min: float
    tc_mean: float
    tc_whole: float
    dtc_max: float
    dtc_min: float
    dtc_mean: float
    dtc_whole: float
    o_max: float
    o_min: float
    o_mean: float
    o_whole: float
    s_max: float
    s_min: float
    s_mean: float
    s_whole: float
    mi_mean: float
    mi_std: float
    o_max_order_norm: float
    o_min_order_norm: float
    prop_synergistic: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


class FeatureAccumulator(Reducer):
    """Streaming accumulator for the 21-feature fingerprint.

    Expects a scan over orders 2..N: order-2 rows feed the mutual
    information summaries, orders >= 3 feed the interaction summaries,
    and the single order-N row supplies the whole-system values.
    """

    def __init__(self, n_variables: int):
        self.n = int(n_variables)
        self._d = None

    def _init_state(self, d_count: int) -> None:
        self._d = d_count
        self._sums = np.zeros((d_count, 4))
        self._maxs = np.full((d_count, 4), -np.inf)
        self._mins = np.full((d_count, 4), np.inf)
        self._count = 0
        self._o_max_order = np.zeros(d_count, dtype=np.int64)
        self._o_min_order = np.zeros(d_count, dtype=np.int64)
        self._syn = np.zeros(d_count, dtype=np.int64)
        self._mi_sum = np.zeros(d_count)
        self._mi_sumsq = np.zeros(d_count)
        self._mi_count = 0
        self._whole = np.full((d_count, 4), np.nan)

    def update(self, batch, hoi):
        vals = np.stack([hoi.tc, hoi.dtc, hoi.o, hoi.s], axis=-1)  # (B, D, 4)
        if self._d is None:
            self._init_state(vals.shape[1])
        orders = hoi.order
        pair_rows = orders == 2
        if pair_rows.any():
            mi = hoi.tc[pair_rows]  # order-2 TC is the pairwise MI
            self._mi_sum += mi.sum(axis=0)
            self._mi_sumsq += (mi * mi).sum(axis=0)
            self._mi_count += int(pair_rows.sum())
        hoi_rows = orders >= 3
        if hoi_rows.any():
            v = vals[hoi_rows]
            o_col = hoi.o[hoi_rows]
            row_orders = orders[hoi_rows]
            # order of the extreme O-information: first strict attainment
            # in enumeration order (argmax/argmin pick the earliest row)
            for d in range(self._d):
                i_max = int(np.argmax(o_col[:, d]))
                if o_col[i_max, d] > self._maxs[d, 2]:
                    self._o_max_order[d] = row_orders[i_max]
                i_min = int(np.argmin(o_col[:, d]))
                if o_col[i_min, d] < self._mins[d, 2]:
                    self._o_min_order[d] = row_orders[i_min]
            np.maximum(self._maxs, v.max(axis=0), out=self._maxs)
            np.minimum(self._mins, v.min(axis=0), out=self._mins)
            self._sums += v.sum(axis=0)
            self._count += v.shape[0]
            self._syn += (o_col < 0.0).sum(axis=0)
            whole_rows = np.flatnonzero(row_orders == self.n)
            if whole_rows.size:
                self._whole = v[whole_rows[0]]

    def finalize(self):
        if self._d is None or self._count == 0 or self._mi_count == 0:
            raise InvalidData("feature accumulation needs orders 2..N")
        if np.isnan(self._whole).any():
            raise InvalidData("feature accumulation never saw the order-N row")
        out = []
        for d in range(self._d):
            means = self._sums[d] / self._count
            mi_mean = self._mi_sum[d] / self._mi_count
            mi_var = max(self._mi_sumsq[d] / self._mi_count - mi_mean * mi_mean, 0.0)
            kw = {}
            for m_i, m in enumerate(MEASURES):
                kw[f"{m}_max"] = float(self._maxs[d, m_i])
                kw[f"{m}_min"] = float(self._mins[d, m_i])
                kw[f"{m}_mean"] = float(means[m_i])
                kw[f"{m}_whole"] = float(self._whole[d, m_i])
            kw["mi_mean"] = float(mi_mean)
            kw["mi_std"] = float(np.sqrt(mi_var))
            kw["o_max_order_norm"] = float(self._o_max_order[d] / self.n)
            kw["o_min_order_norm"] = float(self._o_min_order[d] / self.n)
            kw["prop_synergistic"] = float(self._syn[d] / self._count)
            out.append(FeatureVector(**kw))
        return out


def _ordered_map(fn, items, workers: int):
    """Map with a bounded thread pool, yielding results in input order."""
    if workers <= 1:
        for item in items:
            yield fn(item)
        return
    items = iter(items)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = deque(
            pool.submit(fn, item) for item in itertools.islice(items, workers + 2)
        )
        while pending:
            done = pending.popleft()
            for item in itertools.islice(items, 1):
                pending.append(pool.submit(fn, item))
            yield done.result()


def scan(covs: CovSet, min_order: int, max_order: int, reducer: Reducer, *,
         batch_size: int = 10000, bias_correct: bool = False,
         workers: int = 1, progress=None):
    """Visit every n-plet with order in [min_order, max_order] once.

    Parameters
    ----------
    covs : CovSet
        Datasets to evaluate; every n-plet is scored against all of them.
    min_order, max_order : int
        Inclusive order range, within [1, N].
    reducer : Reducer
        Receives every (batch, measures) pair in enumeration order.
    batch_size : int
        Rows per streamed batch; memory stays O(batch_size).
    bias_correct : bool
        Apply the finite-sample entropy correction (needs estimated
        covariances).
    workers : int
        Thread count for batch computation. Reduction stays in the
        calling thread in enumeration order, so results do not depend
        on this value.
    progress : callable, optional
        Called after each batch with a dict of counters
        (batches, nplets, total, order, elapsed).

    Returns
    -------
    The reducer's finalize() value.
    """
    if not isinstance(reducer, Reducer):
        raise InvalidData("reducer must be a Reducer instance")
    n = covs.n_variables
    total = count_nplets(n, min_order, max_order)  # validates the range
    if workers < 1:
        raise InvalidData(f"workers must be >= 1, got {workers}")

    batches = itertools.chain.from_iterable(
        enumerate_order(n, k, batch_size) for k in range(min_order, max_order + 1)
    )

    def score(batch):
        return batch, compute_hoi_batch(covs, batch, bias_correct=bias_correct)

    t0 = time.perf_counter()
    seen = 0
    for i, (batch, hoi) in enumerate(_ordered_map(score, batches, workers)):
        reducer.update(batch, hoi)
        seen += batch.batch_size
        if progress is not None:
            progress({
                "batches": i + 1,
                "nplets": seen,
                "total": total,
                "order": int(batch.order),
                "elapsed": time.perf_counter() - t0,
            })
    return reducer.finalize()


def extract_features(covs: CovSet, *, bias_correct: bool = False,
                     limit: int = 20, batch_size: int = 10000,
                     workers: int = 1, progress=None):
    """All 21 features per dataset from one exhaustive scan of orders 2..N.

    Systems larger than the limit are refused: the scan is exhaustive,
    so use the greedy or annealing search instead. Returns a list of
    FeatureVector, one per dataset.
    """
    n = covs.n_variables
    if n > limit:
        raise ExhaustiveLimitExceeded(
            f"N={n} exceeds the exhaustive feature limit ({limit}); "
            "use greedy or annealing search"
        )
    if n < 3:
        raise InvalidOrderRange(f"feature extraction needs N >= 3, got {n}")
    acc = FeatureAccumulator(n)
    return scan(covs, 2, n, acc, batch_size=batch_size,
                bias_correct=bias_correct, workers=workers, progress=progress)
