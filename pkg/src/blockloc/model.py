"""Potential models: single-site distributions, block codes, and realizations.

A potential model is a pair (nu, g): an i.i.d. driving sequence xi_n drawn from
a single-site distribution nu, and a window code g mapping (xi_n, ..., xi_{n+k-1})
to the on-site potential v_n.  Everything here is immutable after construction;
sampling is a pure function of (model, seed, index range).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .rng import derive_key, uniform_grid, uniforms

_SUPPORT_WORD_CAP = 1 << 21  # refuse exact enumerations beyond ~2e6 words


class SingleSiteDistribution:
    """Distribution of one xi value: finite atom list or an empirical sample.

    Atoms are (value, weight) pairs with positive weights summing to 1.
    Empirical samples are resampled uniformly with replacement and are
    excluded from exact-support operations.
    """

    def __init__(self, atoms: Sequence[tuple[float, float]] | None = None,
                 samples: Sequence[float] | None = None):
        if (atoms is None) == (samples is None):
            raise ConfigError("provide exactly one of atoms or samples")
        if atoms is not None:
            vals = np.asarray([a[0] for a in atoms], dtype=np.float64)
            wts = np.asarray([a[1] for a in atoms], dtype=np.float64)
            if vals.size < 1:
                raise ConfigError("need at least one atom")
            if not np.all(np.isfinite(vals)):
                raise ConfigError("atom values must be finite")
            if np.any(wts <= 0):
                raise ConfigError("atom weights must be strictly positive")
            if abs(float(wts.sum()) - 1.0) > 1e-12:
                raise ConfigError(f"atom weights sum to {wts.sum()!r}, expected 1")
            order = np.argsort(vals, kind="stable")
            self.values = vals[order]
            self.weights = wts[order]
            self._cum = np.cumsum(self.weights)
            self._cum[-1] = 1.0
            self.samples = None
        else:
            arr = np.asarray(samples, dtype=np.float64)
            if arr.size < 1:
                raise ConfigError("need at least one sample")
            if not np.all(np.isfinite(arr)):
                raise ConfigError("samples must be finite")
            self.samples = arr
            self.values = None
            self.weights = None
            self._cum = None

    @property
    def finite(self) -> bool:
        return self.samples is None

    def draw(self, key: int, indices: np.ndarray) -> np.ndarray:
        """xi values addressed by site index (counter-based, overlap-consistent)."""
        return self._from_uniform(uniforms(key, indices))

    def draw_grid(self, keys: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """xi values for many realizations at once; row r matches draw(keys[r], .)."""
        return self._from_uniform(uniform_grid(keys, indices))

    def _from_uniform(self, u: np.ndarray) -> np.ndarray:
        if self.finite:
            idx = np.searchsorted(self._cum, u, side="right")
            return self.values[np.minimum(idx, len(self.values) - 1)]
        idx = (u * len(self.samples)).astype(np.int64)
        return self.samples[np.minimum(idx, len(self.samples) - 1)]

    def support(self) -> np.ndarray:
        if not self.finite:
            raise ConfigError("empirical distribution has no exact finite support")
        return self.values.copy()


class BlockCode:
    """Window code g: R^k -> R with a certified bound |g| <= c_v on the support.

    ``kind`` selects a vectorized implementation: "difference" (x1 - x2),
    "linear" (coeffs . x + offset), "table" (finite lookup), "expression"
    (a numpy expression in x1..xk), or "custom" (an arbitrary callable).
    The bound c_v is caller-supplied and validated, never inferred.
    """

    def __init__(self, k: int, c_v: float, kind: str = "custom",
                 func: Callable[..., float] | None = None,
                 coeffs: Sequence[float] | None = None, offset: float = 0.0,
                 table: dict[tuple[float, ...], float] | None = None,
                 expr: str | None = None):
        if k < 1:
            raise ConfigError("window length k must be >= 1")
        if not (math.isfinite(c_v) and c_v >= 0):
            raise ConfigError("c_v must be finite and nonnegative")
        self.k = int(k)
        self.c_v = float(c_v)
        self.kind = kind
        self.func = func
        self.offset = float(offset)
        self.coeffs = None if coeffs is None else np.asarray(coeffs, dtype=np.float64)
        self.table = table
        self.expr = expr
        if kind == "difference" and k != 2:
            raise ConfigError("difference code requires k = 2")
        if kind == "linear":
            if self.coeffs is None or len(self.coeffs) != k:
                raise ConfigError("linear code needs k coefficients")
        if kind == "table" and not table:
            raise ConfigError("table code needs a nonempty table")
        if kind == "expression":
            if not expr:
                raise ConfigError("expression code needs an expression string")
            self._code_obj = compile(expr, "<code.expr>", "eval")
        if kind == "custom" and func is None:
            raise ConfigError("custom code needs a callable")

    def apply_windows(self, windows: np.ndarray) -> np.ndarray:
        """Evaluate g on an array of windows with shape (..., k)."""
        w = np.asarray(windows, dtype=np.float64)
        if w.shape[-1] != self.k:
            raise ConfigError(f"window length {w.shape[-1]} != k = {self.k}")
        if self.kind == "difference":
            out = w[..., 0] - w[..., 1]
        elif self.kind == "linear":
            out = w @ self.coeffs + self.offset
        elif self.kind == "expression":
            env = {f"x{j + 1}": w[..., j] for j in range(self.k)}
            env.update(abs=np.abs, sin=np.sin, cos=np.cos, exp=np.exp,
                       sqrt=np.sqrt, log=np.log, tanh=np.tanh, pi=np.pi,
                       min=np.minimum, max=np.maximum)
            out = np.asarray(eval(self._code_obj, {"__builtins__": {}}, env),
                             dtype=np.float64)
            out = np.broadcast_to(out, w.shape[:-1]).copy()
        elif self.kind == "table":
            flat = w.reshape(-1, self.k)
            vals = np.empty(flat.shape[0])
            for i, row in enumerate(flat):
                key = tuple(float(x) for x in row)
                if key not in self.table:
                    raise ConfigError(f"table code has no entry for window {key}")
                vals[i] = self.table[key]
            out = vals.reshape(w.shape[:-1])
        else:
            flat = w.reshape(-1, self.k)
            vals = np.array([float(self.func(*row)) for row in flat])
            out = vals.reshape(w.shape[:-1])
        if not np.all(np.isfinite(out)):
            raise ConfigError("block code produced non-finite potential values")
        return out

    def apply_series(self, xi: np.ndarray) -> np.ndarray:
        """Evaluate g on every length-k window of xi along the last axis."""
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape[-1] < self.k:
            raise ConfigError("series shorter than window length")
        if self.kind == "difference":
            return xi[..., :-1] - xi[..., 1:]
        if self.kind == "linear":
            n = xi.shape[-1] - self.k + 1
            out = np.full(xi.shape[:-1] + (n,), self.offset)
            for j in range(self.k):
                out += self.coeffs[j] * xi[..., j:j + n]
            return out
        windows = np.lib.stride_tricks.sliding_window_view(xi, self.k, axis=-1)
        return self.apply_windows(windows)


@dataclass(frozen=True)
class PotentialModel:
    """Single-site distribution plus block code; the full description of v_n."""

    dist: SingleSiteDistribution
    code: BlockCode

    def __post_init__(self):
        _validate_bound(self.dist, self.code)

    @property
    def k(self) -> int:
        return self.code.k

    def xi(self, key: int, indices: np.ndarray) -> np.ndarray:
        return self.dist.draw(key, indices)


def _validate_bound(dist: SingleSiteDistribution, code: BlockCode,
                    n_samples: int = 4096) -> None:
    # Spot-check |g| <= c_v: exhaustive when the window space is small,
    # by sampling otherwise.
    tol = 1e-9 * max(1.0, code.c_v)
    if dist.finite and len(dist.values) ** code.k <= 4096:
        grids = np.meshgrid(*([dist.values] * code.k), indexing="ij")
        windows = np.stack([g.ravel() for g in grids], axis=-1)
    else:
        key = derive_key(0xB0CDE, code.k, n_samples)
        idx = np.arange(n_samples * code.k, dtype=np.int64)
        windows = dist.draw(key, idx).reshape(n_samples, code.k)
    vals = code.apply_windows(windows)
    worst = float(np.max(np.abs(vals)))
    if worst > code.c_v + tol:
        raise ConfigError(
            f"block code exceeds its certified bound: |g| reaches {worst}, c_v = {code.c_v}")


@dataclass(frozen=True)
class Realization:
    """One sampled stretch of the driving sequence and its potential.

    xi covers [n_lo, n_hi + k - 1] so every stored v_n can be recomputed from
    the stored window; v covers [n_lo, n_hi].  Regeneration from (seed, range)
    is bit-identical.
    """

    seed: int
    n_lo: int
    n_hi: int
    k: int
    xi: np.ndarray
    v: np.ndarray

    def xi_at(self, n: int) -> float:
        return float(self.xi[n - self.n_lo])

    def v_at(self, n: int) -> float:
        return float(self.v[n - self.n_lo])

    def v_slice(self, lo: int, hi: int) -> np.ndarray:
        """Potential values on [lo, hi] inclusive."""
        if lo < self.n_lo or hi > self.n_hi:
            raise ConfigError(f"[{lo}, {hi}] outside realization range "
                              f"[{self.n_lo}, {self.n_hi}]")
        return self.v[lo - self.n_lo: hi - self.n_lo + 1]


def sample_realization(model: PotentialModel, seed: int,
                       index_range: tuple[int, int]) -> Realization:
    """Sample xi i.i.d. on the range (plus the k-1 window tail) and compute v.

    The xi value at a given site depends only on (seed, site), so overlapping
    ranges drawn from the same seed agree exactly.
    """
    n_lo, n_hi = int(index_range[0]), int(index_range[1])
    if n_hi < n_lo:
        raise ConfigError(f"empty index range [{n_lo}, {n_hi}]")
    key = derive_key(seed, 0x5EED)
    idx = np.arange(n_lo, n_hi + model.k, dtype=np.int64)
    xi = model.xi(key, idx)
    v = model.code.apply_series(xi)
    return Realization(seed=seed, n_lo=n_lo, n_hi=n_hi, k=model.k, xi=xi, v=v)


def potential_chunk(model: PotentialModel, key: int, start: int,
                    count: int) -> np.ndarray:
    """v values on [start, start + count) from a raw xi key (streaming form).

    Used by long cocycle sweeps to avoid materializing xi for the whole range;
    chunk boundaries are seamless because xi is addressed per index.
    """
    idx = np.arange(start, start + count + model.k - 1, dtype=np.int64)
    xi = model.xi(key, idx)
    return model.code.apply_series(xi)


@dataclass(frozen=True)
class FreezeScheme:
    """Layout for freezing the leading k xi values of every length-L block.

    Block j occupies sites [L*j + 1, L*(j+1)]; its frozen indices are
    {L*j + 1, ..., L*j + k}.  ``frozen`` holds one k-vector per block, cycled
    when there are more blocks than rows.
    """

    k: int
    frozen: np.ndarray  # shape (m, k); row j % m freezes block j
    block_length: int | None = None  # defaults to 10k

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.frozen, dtype=np.float64))
        object.__setattr__(self, "frozen", arr)
        if arr.shape[1] != self.k:
            raise ConfigError(f"frozen vectors have length {arr.shape[1]}, expected k = {self.k}")
        length = self.block_length if self.block_length is not None else 10 * self.k
        if length <= self.k:
            raise ConfigError("block length must exceed the frozen run k")
        object.__setattr__(self, "block_length", int(length))

    def frozen_for_block(self, j: int) -> np.ndarray:
        return self.frozen[j % self.frozen.shape[0]]


def freeze_sample(model: PotentialModel, scheme: FreezeScheme, seed: int,
                  n_blocks: int) -> Realization:
    """Sample a realization on [1, L*n_blocks] with the scheme's values frozen in.

    Frozen vectors must come from the support of nu^k for the conditional law
    to make sense; this is not enforced beyond the bound check on g.
    """
    if scheme.k != model.k:
        raise ConfigError(f"scheme k = {scheme.k} does not match model k = {model.k}")
    if n_blocks < 0:
        raise ConfigError("n_blocks must be >= 0")
    L = scheme.block_length
    n_hi = L * n_blocks
    if n_blocks == 0:
        return Realization(seed=seed, n_lo=1, n_hi=0, k=model.k,
                           xi=np.empty(0), v=np.empty(0))
    key = derive_key(seed, 0xF0F0)
    idx = np.arange(1, n_hi + model.k, dtype=np.int64)
    xi = model.xi(key, idx)
    # overwrite frozen runs, including the head of block n_blocks when the
    # window tail reaches into it
    j = 0
    while L * j + 1 <= n_hi + model.k - 1:
        lo = L * j + 1
        hi = min(L * j + model.k, n_hi + model.k - 1)
        xi[lo - 1: hi] = scheme.frozen_for_block(j)[: hi - lo + 1]
        j += 1
    v = model.code.apply_series(xi)
    return Realization(seed=seed, n_lo=1, n_hi=n_hi, k=model.k, xi=xi, v=v)


def _enumerate_words(values: np.ndarray, length: int) -> np.ndarray:
    total = len(values) ** length
    if total > _SUPPORT_WORD_CAP:
        raise ConfigError(
            f"{len(values)}^{length} = {total} xi-words exceed the enumeration cap")
    grids = np.meshgrid(*([values] * length), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def support_of_potential_vector(model: PotentialModel, d: int) -> list[tuple[float, ...]]:
    """Exact support of the law of (v_1, ..., v_d), deduplicated and sorted.

    Enumerates every xi-word of length d + k - 1; finite-support nu only.
    """
    if d < 1:
        raise ConfigError("d must be >= 1")
    words = _enumerate_words(model.dist.support(), d + model.k - 1)
    vectors = model.code.apply_series(words)
    return sorted({tuple(float(x) for x in row) for row in vectors})


def conditional_support(model: PotentialModel, d: int,
                        head: Sequence[float], tail: Sequence[float]
                        ) -> list[tuple[float, ...]]:
    """Support of (v_1, ..., v_d) conditional on frozen window boundaries.

    Freezes xi_1..xi_k = head and xi_d..xi_{d+k-1} = tail (the first and last
    k values of the window's dependency range) and enumerates the free middle.
    """
    k = model.k
    if d < k + 2:
        raise ConfigError(f"d = {d} too small to condition on k = {k} boundaries")
    head = np.asarray(head, dtype=np.float64)
    tail = np.asarray(tail, dtype=np.float64)
    if head.shape != (k,) or tail.shape != (k,):
        raise ConfigError("head and tail must be k-vectors")
    n_free = d - 1 - k  # xi_{k+1} .. xi_{d-1}
    free = _enumerate_words(model.dist.support(), n_free) if n_free > 0 \
        else np.empty((1, 0))
    m = free.shape[0]
    xi = np.empty((m, d + k - 1))
    xi[:, :k] = head
    xi[:, k: d - 1] = free
    xi[:, d - 1:] = tail
    vectors = model.code.apply_series(xi)
    return sorted({tuple(float(x) for x in row) for row in vectors})


@dataclass
class SupportVerdict:
    holds: bool
    witness: list[tuple[float, ...]] = field(default_factory=list)
    i0: int = 0


def _pair_admissible(x: tuple, y: tuple, i0: int, tol: float = 1e-12) -> bool:
    # positions are 1-based; require a difference strictly before i0 and
    # strictly after i0 + 1
    before = any(abs(x[i] - y[i]) > tol for i in range(0, i0 - 1))
    after = any(abs(x[i] - y[i]) > tol for i in range(i0 + 1, len(x)))
    return before and after


def check_support_condition(support: Iterable[tuple[float, ...]], i0: int,
                            target: int = 5) -> SupportVerdict:
    """Search for ``target`` vectors every pair of which differs at some
    position i < i0 and at some position i > i0 + 1.

    Exhaustive branch-and-bound over the pairwise-admissibility graph; the
    verdict is exact (holds with a witness, or fails).
    """
    vecs = sorted(set(support))
    if not vecs:
        return SupportVerdict(holds=False, i0=i0)
    d = len(vecs[0])
    if d < i0 + 2:
        raise ConfigError(f"need d >= i0 + 2, got d = {d}, i0 = {i0}")
    n = len(vecs)
    if n < target:
        return SupportVerdict(holds=False, i0=i0)
    adj = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if _pair_admissible(vecs[a], vecs[b], i0):
                adj[a].add(b)
                adj[b].add(a)

    chosen: list[int] = []

    def grow(candidates: list[int]) -> bool:
        if len(chosen) == target:
            return True
        if len(chosen) + len(candidates) < target:
            return False
        for pos, c in enumerate(candidates):
            chosen.append(c)
            rest = [x for x in candidates[pos + 1:] if x in adj[c]]
            if grow(rest):
                return True
            chosen.pop()
        return False

    if grow(list(range(n))):
        return SupportVerdict(holds=True, witness=[vecs[i] for i in chosen], i0=i0)
    return SupportVerdict(holds=False, i0=i0)


# ---------------------------------------------------------------------------
# stock models


def difference_model() -> PotentialModel:
    """Fair Bernoulli {0, 1} driving with the two-site difference code.

    The stock model whose Lyapunov exponent vanishes at E = 0 while the
    operator remains localized on any interval avoiding that energy.
    """
    dist = SingleSiteDistribution(atoms=[(0.0, 0.5), (1.0, 0.5)])
    code = BlockCode(k=2, c_v=1.0, kind="difference")
    return PotentialModel(dist, code)


def bernoulli_anderson(coupling: float, p: float = 0.5) -> PotentialModel:
    """Classical Bernoulli Anderson model: v_n i.i.d. on {0, coupling}."""
    dist = SingleSiteDistribution(atoms=[(0.0, 1.0 - p), (float(coupling), p)])
    code = BlockCode(k=1, c_v=abs(float(coupling)), kind="linear", coeffs=[1.0])
    return PotentialModel(dist, code)


# ---------------------------------------------------------------------------
# model description files


def model_from_dict(spec: dict) -> PotentialModel:
    """Build a model from a description mapping (the CLI config format).

    Expected shape: {"nu": {"atoms": [[v, w], ...]} | {"samples": [...]},
    "code": {"kind": ..., "k": ..., "c_v": ..., kind-specific fields}}.
    Unknown keys are rejected.
    """
    _expect_keys(spec, {"nu", "code"}, "model")
    nu = spec["nu"]
    _expect_keys(nu, {"atoms", "samples"}, "model.nu", required=set())
    if ("atoms" in nu) == ("samples" in nu):
        raise ConfigError("model.nu needs exactly one of atoms, samples")
    if "atoms" in nu:
        dist = SingleSiteDistribution(atoms=[(float(a[0]), float(a[1])) for a in nu["atoms"]])
    else:
        dist = SingleSiteDistribution(samples=[float(x) for x in nu["samples"]])

    code_spec = dict(spec["code"])
    kind = code_spec.pop("kind", None)
    k = code_spec.pop("k", None)
    c_v = code_spec.pop("c_v", None)
    if kind is None or k is None or c_v is None:
        raise ConfigError("model.code needs kind, k, and c_v")
    kind = {"custom-expression": "expression"}.get(kind, kind)
    if kind == "difference":
        _expect_keys(code_spec, set(), "model.code")
        code = BlockCode(k=int(k), c_v=float(c_v), kind="difference")
    elif kind == "linear":
        _expect_keys(code_spec, {"coeffs", "offset"}, "model.code", required={"coeffs"})
        code = BlockCode(k=int(k), c_v=float(c_v), kind="linear",
                         coeffs=[float(c) for c in code_spec["coeffs"]],
                         offset=float(code_spec.get("offset", 0.0)))
    elif kind == "table":
        _expect_keys(code_spec, {"table"}, "model.code", required={"table"})
        table = {tuple(float(x) for x in entry[0]): float(entry[1])
                 for entry in code_spec["table"]}
        code = BlockCode(k=int(k), c_v=float(c_v), kind="table", table=table)
    elif kind == "expression":
        _expect_keys(code_spec, {"expr"}, "model.code", required={"expr"})
        code = BlockCode(k=int(k), c_v=float(c_v), kind="expression",
                         expr=str(code_spec["expr"]))
    else:
        raise ConfigError(f"unknown code kind {kind!r}")
    return PotentialModel(dist, code)


def _expect_keys(d: dict, allowed: set[str], where: str,
                 required: set[str] | None = None) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    if required is None:
        required = allowed
    missing = required - set(d)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")
