"""Transfer-matrix cocycles: renormalized products, energy derivatives,
Lyapunov-exponent estimation, and perturbation bounds in the energy parameter.

A single step at site n is the unimodular matrix [[E - v_n, -1], [1, 0]].
Products are kept Frobenius-normalized with the accumulated log factor carried
separately, so sweeps at n = 10^6 never overflow.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import PotentialModel, Realization, sample_realization
from .rng import derive_key, uniform_grid

_SQRT2 = math.sqrt(2.0)
_LYAP_TAG = 0x117A9
_CHUNK = 32768


def step_matrix(v: float, E: float) -> np.ndarray:
    """One-site transfer matrix [[E - v, -1], [1, 0]]."""
    if not (math.isfinite(v) and math.isfinite(E)):
        raise ConfigError("step matrix needs finite v and E")
    return np.array([[E - v, -1.0], [1.0, 0.0]])


def step_inverse(v: float, E: float) -> np.ndarray:
    """Exact inverse [[0, 1], [-1, E - v]] (det = 1)."""
    if not (math.isfinite(v) and math.isfinite(E)):
        raise ConfigError("step matrix needs finite v and E")
    return np.array([[0.0, 1.0], [-1.0, E - v]])


def opnorm(M: np.ndarray) -> float:
    """Spectral norm of a 2x2 real or complex matrix, in closed form."""
    M = np.asarray(M)
    t = float(np.sum(np.abs(M) ** 2))
    det = abs(complex(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]))
    disc = max(t * t - 4.0 * det * det, 0.0)
    return math.sqrt((t + math.sqrt(disc)) / 2.0)


@dataclass
class RenormalizedProduct:
    """A transfer-matrix product stored as exp(log_norm) * matrix with
    ||matrix||_F = 1."""

    direction: str
    matrix: np.ndarray
    log_norm: float
    steps: int

    def full_matrix(self) -> np.ndarray:
        """The exact product; overflows for very long products by design."""
        return math.exp(self.log_norm) * self.matrix

    @property
    def log_operator_norm(self) -> float:
        """log of the spectral norm; nonnegative for det-1 products."""
        return self.log_norm + math.log(opnorm(self.matrix))

    @property
    def rescaled_det(self) -> float:
        """det(matrix) * exp(2 log_norm); equals 1 for an exact product."""
        d = float(self.matrix[0, 0] * self.matrix[1, 1]
                  - self.matrix[0, 1] * self.matrix[1, 0])
        return d * math.exp(2.0 * self.log_norm)


def _renorm(M: np.ndarray) -> tuple[np.ndarray, float]:
    s = float(np.sqrt(np.sum(M * M))) if not np.iscomplexobj(M) \
        else float(np.sqrt(np.sum(np.abs(M) ** 2)))
    return M / s, math.log(s)


def product(v: np.ndarray, E: float, direction: str = "forward") -> RenormalizedProduct:
    """Renormalized product of the step matrices for the word v[1..N].

    forward: step(v_N) ... step(v_1); backward: step(v_1)^-1 ... step(v_N)^-1,
    the exact inverse of the forward product.  N = 0 gives the identity.
    """
    v = np.asarray(v, dtype=np.float64)
    if direction not in ("forward", "backward"):
        raise ConfigError(f"unknown direction {direction!r}")
    M, logn = _renorm(np.eye(2))
    if direction == "forward":
        for vj in v:
            M, ds = _renorm(step_matrix(float(vj), E) @ M)
            logn += ds
    else:
        for vj in v:
            M, ds = _renorm(M @ step_inverse(float(vj), E))
            logn += ds
    return RenormalizedProduct(direction=direction, matrix=M, log_norm=logn,
                               steps=len(v))


@dataclass
class DerivativeCompanion:
    """dT/dE carried with the same renormalization factor as its product."""

    matrix: np.ndarray
    log_norm: float
    steps: int


def product_with_derivative(v: np.ndarray, E: float
                            ) -> tuple[RenormalizedProduct, DerivativeCompanion]:
    """Forward product together with its energy derivative.

    Recursion: dT_N = dStep * T_{N-1} + step * dT_{N-1} with dStep = e11;
    both matrices are divided by the same running Frobenius factor.
    """
    v = np.asarray(v, dtype=np.float64)
    e11 = np.array([[1.0, 0.0], [0.0, 0.0]])
    M, logn = _renorm(np.eye(2))
    D = np.zeros((2, 2))
    for vj in v:
        Pi = step_matrix(float(vj), E)
        D = e11 @ M + Pi @ D
        M = Pi @ M
        s = float(np.sqrt(np.sum(M * M)))
        M /= s
        D /= s
        logn += math.log(s)
    prod = RenormalizedProduct(direction="forward", matrix=M, log_norm=logn,
                               steps=len(v))
    return prod, DerivativeCompanion(matrix=D, log_norm=logn, steps=len(v))


# ---------------------------------------------------------------------------
# Monte-Carlo Lyapunov estimation


@dataclass
class LyapunovEstimate:
    energy: float
    n: int
    mean: float       # average of log||T_n|| / n over realizations
    stderr: float     # sample std / sqrt(realizations); 0 for a single one
    realizations: int


def _mc_log_norms(model: PotentialModel, E: float, n: int,
                  keys: np.ndarray) -> np.ndarray:
    """log operator norm of T_n for one realization per key, vectorized.

    Renormalizes by the Frobenius norm on every step; xi is generated in
    site chunks so memory stays bounded for n = 10^6.
    """
    R = len(keys)
    inv = 1.0 / _SQRT2
    a = np.full(R, inv)
    b = np.zeros(R)
    c = np.zeros(R)
    d = np.full(R, inv)
    logn = np.full(R, math.log(_SQRT2))
    k = model.k
    pos = 1
    while pos <= n:
        m = min(_CHUNK, n - pos + 1)
        idx = np.arange(pos, pos + m + k - 1, dtype=np.int64)
        xi = model.dist._from_uniform(uniform_grid(keys, idx))
        v = model.code.apply_series(xi)
        for j in range(m):
            Ev = E - v[:, j]
            na = Ev * a - c
            nb = Ev * b - d
            c, d = a, b
            a, b = na, nb
            s = np.sqrt(a * a + b * b + c * c + d * d)
            a /= s
            b /= s
            c /= s
            d /= s
            logn += np.log(s)
        pos += m
    t = a * a + b * b + c * c + d * d
    det = a * d - b * c
    s1sq = (t + np.sqrt(np.maximum(t * t - 4.0 * det * det, 0.0))) / 2.0
    return logn + 0.5 * np.log(s1sq)


def lyapunov_estimate(model: PotentialModel, E: float, n: int,
                      realizations: int, seed: int, energy_index: int = 0
                      ) -> LyapunovEstimate:
    """Monte-Carlo mean of log||T_n|| / n at one energy."""
    if n < 1 or realizations < 1:
        raise ConfigError("need n >= 1 and realizations >= 1")
    keys = np.array([derive_key(seed, _LYAP_TAG, energy_index, r)
                     for r in range(realizations)], dtype=np.uint64)
    logs = _mc_log_norms(model, E, n, keys) / n
    mean = float(np.mean(logs))
    stderr = float(np.std(logs, ddof=1) / math.sqrt(realizations)) \
        if realizations > 1 else 0.0
    return LyapunovEstimate(energy=float(E), n=n, mean=mean, stderr=stderr,
                            realizations=realizations)


def lyapunov_sweep(model: PotentialModel, E_grid: np.ndarray, n: int,
                   realizations: int, seed: int, workers: int | None = None
                   ) -> list[LyapunovEstimate]:
    """Per-energy Lyapunov estimates with deterministic per-cell seeds.

    Cell (energy_index, realization_index) always maps to the same xi stream,
    so results are identical for any worker count; results are ordered by
    energy index.
    """
    E_grid = np.asarray(E_grid, dtype=np.float64)
    tasks = list(enumerate(E_grid))
    if workers is not None and workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(lyapunov_estimate, model, E, n, realizations,
                                seed, i) for i, E in tasks]
            return [f.result() for f in futs]
    return [lyapunov_estimate(model, E, n, realizations, seed, i)
            for i, E in tasks]


# ---------------------------------------------------------------------------
# smoothness and monotonicity of blocks in the energy parameter


@dataclass
class C1MonotonicityReport:
    """Empirical extrema over sampled blocks, an energy grid, and directions.

    m_hat bounds max(||A(E)||, ||dA/dE||); delta_hat is the smallest observed
    clockwise rotation rate of A(E) v as E increases.  Schroedinger blocks of
    two or more steps rotate every direction strictly clockwise, so
    delta_hat <= 0 indicates a convention or sign bug.
    """

    m_hat: float
    delta_hat: float
    block_length: int
    energies: np.ndarray
    samples: int


def angle_rate(A: np.ndarray, dA: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Clockwise angular speed of A v per unit E, for direction columns v.

    Positive values mean arg(A(E) v) decreases as E grows, the orientation in
    which one-dimensional Schroedinger cocycles are monotone.
    """
    W = A @ dirs
    dW = dA @ dirs
    ccw = (W[0] * dW[1] - W[1] * dW[0]) / (W[0] ** 2 + W[1] ** 2)
    return -ccw


def check_c1_monotonicity(model: PotentialModel, J: tuple[float, float],
                          samples: int, seed: int, e_points: int = 9,
                          directions: int = 64, block_length: int | None = None
                          ) -> C1MonotonicityReport:
    """Estimate the C1 bound and the monotonicity margin over random blocks.

    Samples ``samples`` potential blocks of length 10k (the freezing block
    size), evaluates A(E) = T_block(E) and dA/dE on a grid over J, and scans
    a direction grid plus the two singular directions of A.
    """
    if samples < 1:
        raise ConfigError("need samples >= 1")
    L = 10 * model.k if block_length is None else int(block_length)
    if L < 1:
        raise ConfigError("empty block")
    lo, hi = float(J[0]), float(J[1])
    if not (lo <= hi):
        raise ConfigError("J must be a nonempty interval")
    energies = np.linspace(lo, hi, e_points)
    theta = np.linspace(0.0, math.pi, directions, endpoint=False)
    base_dirs = np.vstack([np.cos(theta), np.sin(theta)])

    log_m_hat = -math.inf
    delta_hat = math.inf
    for s in range(samples):
        real = sample_realization(model, derive_key(seed, 0xB10C, s), (1, L))
        for E in energies:
            prod, comp = product_with_derivative(real.v, float(E))
            log_m_hat = max(log_m_hat,
                            prod.log_norm + math.log(opnorm(prod.matrix)),
                            prod.log_norm + math.log(max(opnorm(comp.matrix), 1e-300)))
            # singular directions of the unit matrix (rows of V^T from SVD)
            _, _, vt = np.linalg.svd(prod.matrix)
            dirs = np.hstack([base_dirs, vt.T])
            rates = angle_rate(prod.matrix, comp.matrix, dirs)
            delta_hat = min(delta_hat, float(np.min(rates)))
    m_hat = math.exp(log_m_hat) if log_m_hat < 700 else math.inf
    return C1MonotonicityReport(m_hat=m_hat, delta_hat=delta_hat,
                                block_length=L, energies=energies,
                                samples=samples)


# ---------------------------------------------------------------------------
# stability of the norms under complex energy perturbations


@dataclass
class PerturbationReport:
    """Outcome of the window-norm perturbation bound at energy E + delta.

    K_N is the sup of ||T_[m,n]|| over |m|, |n| <= N at energy E; the bound
    asserts ||T_{n, E+delta}|| <= K_N exp(K_N |n| |delta|) for every |n| <= N.
    lhs/rhs report the worst-margin n; values may overflow to inf, the
    comparison is done in logs.
    """

    K_N: float
    log_K_N: float
    lhs: float
    rhs: float
    worst_n: int
    holds: bool


def _cumulative_products(v_of, E: float, N: int):
    """Unit matrices and log norms of T_j for j in [-(N+1), N].

    v_of(n) must return the potential at site n; sites [-N, N] are used.
    """
    units = {}
    logs = {}
    M, logn = _renorm(np.eye(2))
    units[0], logs[0] = M, logn
    Mf, lf = M, logn
    for j in range(1, N + 1):
        Mf, ds = _renorm(step_matrix(v_of(j), E) @ Mf)
        lf += ds
        units[j], logs[j] = Mf, lf
    Mb, lb = M, logn
    for j in range(-1, -(N + 2), -1):
        # T_j = step(v_{j+1})^{-1} T_{j+1}
        Mb, ds = _renorm(step_inverse(v_of(j + 1), E) @ Mb)
        lb += ds
        units[j], logs[j] = Mb, lb
    return units, logs


def _adj(M: np.ndarray) -> np.ndarray:
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=M.dtype)


def window_norm_sup(realization: Realization, E: float, N: int
                    ) -> tuple[float, int, int]:
    """log K(N) = max over |m|, |n| <= N of log ||T_n T_{m-1}^{-1}||.

    Uses T^{-1} = exp(log_norm) adj(unit) for det-1 renormalized products.
    """
    if realization.n_lo > -N or realization.n_hi < N:
        raise ConfigError(f"realization must cover [{-N}, {N}]")
    v_of = realization.v_at
    units, logs = _cumulative_products(v_of, E, N)
    ns = list(range(-N, N + 1))
    adjs = np.stack([_adj(units[m - 1]) for m in ns])
    adj_logs = np.array([logs[m - 1] for m in ns])
    best = -math.inf
    best_pair = (0, 0)
    for n in ns:
        W = np.einsum("ij,mjk->mik", units[n], adjs)
        fro = np.sqrt(np.sum(W * W, axis=(1, 2)))
        det = np.abs(W[:, 0, 0] * W[:, 1, 1] - W[:, 0, 1] * W[:, 1, 0])
        s1 = np.sqrt((fro ** 2 + np.sqrt(np.maximum(fro ** 4 - 4 * det ** 2, 0))) / 2)
        cand = logs[n] + adj_logs + np.log(np.maximum(s1, 1e-300))
        i = int(np.argmax(cand))
        if cand[i] > best:
            best = float(cand[i])
            best_pair = (ns[i], n)
    return best, best_pair[0], best_pair[1]


def _complex_log_norm(realization: Realization, z: complex, n: int) -> float:
    """log ||T_{n, z}|| for complex energy z; n may be negative."""
    M = np.eye(2, dtype=np.complex128) / _SQRT2
    logn = math.log(_SQRT2)
    if n >= 0:
        sites = range(1, n + 1)
        for j in sites:
            v = realization.v_at(j)
            step = np.array([[z - v, -1.0], [1.0, 0.0]], dtype=np.complex128)
            M, ds = _renorm(step @ M)
            logn += ds
    else:
        for j in range(-1, n - 1, -1):
            v = realization.v_at(j + 1)
            inv = np.array([[0.0, 1.0], [-1.0, z - v]], dtype=np.complex128)
            M, ds = _renorm(inv @ M)
            logn += ds
    return logn + math.log(opnorm(M))


def perturbation_bound_check(realization: Realization, E: float, N: int,
                             delta: complex) -> PerturbationReport:
    """Check ||T_{n, E+delta}|| <= K(N) exp(K(N) |n| |delta|) for all |n| <= N.

    delta may be complex; the product is complexified entrywise.  The right
    side routinely overflows double range, so the verdict compares logs.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    delta = complex(delta)
    log_K, _, _ = window_norm_sup(realization, E, N)
    K = math.exp(log_K) if log_K < 700 else math.inf
    z = complex(E) + delta
    worst_margin = -math.inf
    worst = (0.0, math.inf, 0)
    holds = True
    for n in list(range(-N, 0)) + list(range(1, N + 1)):
        log_lhs = _complex_log_norm(realization, z, n)
        growth = K * abs(n) * abs(delta)
        log_rhs = log_K + growth  # growth may be inf; comparison still valid
        margin = log_lhs - log_rhs
        if margin > 1e-9 * max(1.0, abs(log_rhs)):
            holds = False
        if margin > worst_margin:
            worst_margin = margin
            lhs = math.exp(log_lhs) if log_lhs < 700 else math.inf
            rhs = math.exp(log_rhs) if log_rhs < 700 else math.inf
            worst = (lhs, rhs, n)
    return PerturbationReport(K_N=K, log_K_N=log_K, lhs=worst[0], rhs=worst[1],
                              worst_n=worst[2], holds=holds)
