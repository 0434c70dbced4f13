"""Dense numerical substrate: seeded RNG, pairwise distances, spectral norm, PCA.

Everything operates on 2-D float64 arrays (row-major). Public operations
validate that inputs are finite and reject degenerate shapes, so the rest of
the package can assume well-formed matrices.

Random number generation uses the Philox 4x64 counter-based bit generator
(via numpy), so a given seed produces the same draw sequence on every
platform and numpy build.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DegenerateInputError, InvalidInputError

Rng = np.random.Generator

# Distance kernels process index blocks of this many pairs to bound memory.
_PAIR_CHUNK = 1 << 18


def make_rng(seed: int) -> Rng:
    """Seeded Philox generator; equal seeds give equal streams everywhere."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_rng(seed: int, stream: int) -> Rng:
    """Independent child generator ``stream`` derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(stream + 1)
    return np.random.Generator(np.random.Philox(children[stream]))


def as_matrix(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 2-D float64 C-contiguous array or raise."""
    a = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def _sample_pair_indices(total: int, count: int, rng: Rng) -> np.ndarray:
    """Uniform sample of ``count`` distinct integers from [0, total), sorted.

    Batched rejection: repeatedly draw i.i.d. integers and keep new distinct
    values until ``count`` are collected. Accepting only unseen values is
    exactly sampling without replacement, and it needs O(count) memory even
    when ``total`` is huge.
    """
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < count:
        need = count - chosen.size
        draw = rng.integers(0, total, size=int(need * 1.1) + 16, dtype=np.int64)
        _, first = np.unique(draw, return_index=True)
        fresh = draw[np.sort(first)]  # distinct values, in draw order
        fresh = fresh[~np.isin(fresh, chosen)]
        chosen = np.concatenate([chosen, fresh[:need]])
    return np.sort(chosen)


def _decode_pairs(linear: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map lexicographic pair ranks to (i, j) with i < j."""
    rows = np.arange(n - 1, dtype=np.int64)
    starts = rows * (2 * n - rows - 1) // 2  # rank of pair (i, i+1)
    ii = np.searchsorted(starts, linear, side="right") - 1
    jj = linear - starts[ii] + ii + 1
    return ii, jj


def pair_distances(x: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows ``x[ii]`` and ``x[jj]``, chunked."""
    x = as_matrix(x, "x")
    out = np.empty(len(ii), dtype=np.float64)
    for s in range(0, len(ii), _PAIR_CHUNK):
        e = min(s + _PAIR_CHUNK, len(ii))
        diff = x[ii[s:e]] - x[jj[s:e]]
        out[s:e] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return out


def pairwise_euclidean(
    x,
    pair_budget: int | None = None,
    rng: Rng | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Euclidean distances over unordered row pairs of ``x``.

    Returns parallel arrays ``(ii, jj, d)`` with ``ii < jj``; zipping them
    yields ``(i, j, distance)`` triples. Without a budget all n(n-1)/2 pairs
    are produced in lexicographic order. With ``pair_budget`` below the total,
    a seeded uniform sample without replacement of that many pairs is taken
    (ascending pair rank), which requires ``rng``.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError(f"need at least 2 rows, got {n}")
    total = n * (n - 1) // 2
    if pair_budget is not None:
        if not 1 <= pair_budget <= total:
            raise InvalidInputError(
                f"pair_budget must be in [1, {total}], got {pair_budget}"
            )
        if pair_budget < total:
            if rng is None:
                raise InvalidInputError("pair sampling requires an rng")
            linear = _sample_pair_indices(total, pair_budget, rng)
            ii, jj = _decode_pairs(linear, n)
            return ii, jj, pair_distances(x, ii, jj)
    ii, jj = np.triu_indices(n, k=1)
    ii = ii.astype(np.int64)
    jj = jj.astype(np.int64)
    return ii, jj, pair_distances(x, ii, jj)


def spectral_norm(w, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest singular value of ``w`` by power iteration on ``w.T @ w``.

    Starts from the normalized all-ones vector (deterministic). The estimate
    sequence is monotone non-decreasing and never exceeds the true value, so
    early stopping underestimates at worst. Should the start vector lie in
    the null space exactly, two further deterministic starts are tried (an
    index ramp, then a fixed-seed random vector) before concluding zero.
    """
    w = as_matrix(w, "w")
    if w.size == 0:
        raise InvalidInputError("w must be nonempty")
    if tol <= 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    if not np.any(w):
        return 0.0
    n = w.shape[1]
    starts = [
        np.full(n, 1.0 / np.sqrt(n)),
        np.arange(1.0, n + 1.0) / np.linalg.norm(np.arange(1.0, n + 1.0)),
        None,  # lazily drawn fixed-seed random vector
    ]
    start_idx = 0
    v = starts[0]
    lam = 0.0
    for _ in range(max_iter):
        u = w.T @ (w @ v)
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            start_idx += 1
            if start_idx >= len(starts):
                return 0.0
            if starts[start_idx] is None:
                r = make_rng(0).standard_normal(n)
                starts[start_idx] = r / np.linalg.norm(r)
            v = starts[start_idx]
            lam = 0.0
            continue
        v = u / nu
        if abs(nu - lam) <= tol * max(nu, np.finfo(np.float64).tiny):
            return float(np.sqrt(nu))
        lam = nu
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        last_estimate=float(np.sqrt(lam)),
    )


def pca(x, n_components: int) -> tuple[np.ndarray, np.ndarray]:
    """Principal directions and projections of mean-centered ``x``.

    Returns ``(components, projected)`` where ``components`` is (d, c) with
    orthonormal columns in decreasing explained-variance order and
    ``projected`` is the centered data times ``components``. Each component's
    largest-magnitude entry is made positive to fix the sign. Uses the d x d
    covariance eigendecomposition when d <= n and the n x n Gram matrix
    otherwise; the contract is identical either way.
    """
    x = as_matrix(x, "x")
    n, d = x.shape
    if not 1 <= n_components <= min(n - 1, d):
        raise InvalidInputError(
            f"n_components must be in [1, {min(n - 1, d)}], got {n_components}"
        )
    if np.all(x.max(axis=0) == x.min(axis=0)):
        raise DegenerateInputError("constant data has no principal directions")
    xc = x - x.mean(axis=0)
    if d <= n:
        cov = (xc.T @ xc) / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:n_components]
        components = evecs[:, order]
    else:
        gram = (xc @ xc.T) / (n - 1)
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1][:n_components]
        top = evals[order]
        if np.any(top <= 1e-12 * max(top[0], 1e-300)):
            raise DegenerateInputError(
                "data rank is below the requested number of components"
            )
        components = xc.T @ evecs[:, order]
        components /= np.linalg.norm(components, axis=0)
    # sign convention: largest-magnitude entry of each direction is positive
    picks = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[picks, np.arange(components.shape[1])])
    signs[signs == 0] = 1.0
    components *= signs
    return components, xc @ components
