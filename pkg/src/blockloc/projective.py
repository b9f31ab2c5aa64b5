"""Möbius actions on the complex projective line and the exact solvers behind
the measure-condition certificates.

Matrices act on homogeneous pairs (psi1, psi2); the affine chart is
z = psi2 / psi1, in which a transfer step acts as z -> 1 / ((E - v) - z).
Point pairs are carried as binary quadratic forms q0 x^2 + q1 xy + q2 y^2,
on which a matrix acts through its symmetric-square lift.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import PotentialModel, check_support_condition, conditional_support

_EQ_TOL = 1e-9  # projective equality tolerance on the normalized cross term


class ProjectivePoint:
    """A point of CP^1 in homogeneous coordinates, max-abs normalized."""

    __slots__ = ("z1", "z2")

    def __init__(self, z1: complex, z2: complex):
        s = max(abs(z1), abs(z2))
        if s == 0.0 or not (math.isfinite(s)):
            raise ConfigError("homogeneous coordinates must be finite, not both zero")
        self.z1 = complex(z1) / s
        self.z2 = complex(z2) / s

    @classmethod
    def from_chart(cls, z: complex | None) -> "ProjectivePoint":
        """None encodes the infinity point (0 : 1) of the chart z = psi2/psi1."""
        if z is None:
            return cls(0.0, 1.0)
        return cls(1.0, complex(z))

    def chart(self) -> complex | None:
        if abs(self.z1) <= 1e-300:
            return None
        return self.z2 / self.z1

    def distance(self, other: "ProjectivePoint") -> float:
        """Fubini-Study sine distance; 0 iff projectively equal, max 1."""
        cross = self.z1 * other.z2 - self.z2 * other.z1
        n1 = math.sqrt(abs(self.z1) ** 2 + abs(self.z2) ** 2)
        n2 = math.sqrt(abs(other.z1) ** 2 + abs(other.z2) ** 2)
        return abs(cross) / (n1 * n2)

    def isclose(self, other: "ProjectivePoint", tol: float = _EQ_TOL) -> bool:
        return self.distance(other) <= tol

    def __repr__(self):
        return f"ProjectivePoint({self.z1:.6g}, {self.z2:.6g})"


def mobius_apply(A: np.ndarray, p: ProjectivePoint) -> ProjectivePoint:
    """Projective action of a 2x2 matrix: homogeneous multiply, renormalize."""
    A = np.asarray(A)
    w1 = A[0, 0] * p.z1 + A[0, 1] * p.z2
    w2 = A[1, 0] * p.z1 + A[1, 1] * p.z2
    return ProjectivePoint(w1, w2)


@dataclass(frozen=True)
class OrbitState:
    """Chart value after j steps; value None marks the infinity point."""

    index: int
    value: complex | None


def orbit_iterate(v: np.ndarray, E: float, z0: complex | None) -> list[OrbitState]:
    """Chart orbit z_j = 1 / ((E - v_j) - z_{j-1}), with exact pole handling.

    A zero denominator sends the orbit to infinity; the next step then lands
    at 0, matching the homogeneous action.
    """
    states = [OrbitState(0, None if z0 is None else complex(z0))]
    z = states[0].value
    for j, vj in enumerate(np.asarray(v, dtype=np.float64), start=1):
        if z is None:
            z = 0.0 + 0.0j
        else:
            den = (E - vj) - z
            z = None if den == 0 else 1.0 / den
        states.append(OrbitState(j, z))
    return states


# ---------------------------------------------------------------------------
# quadratic forms and the symmetric-square lift


class QuadraticForm:
    """q0 x^2 + q1 xy + q2 y^2 up to scale; encodes an unordered root pair."""

    __slots__ = ("c",)

    def __init__(self, q0: complex, q1: complex, q2: complex):
        c = np.array([q0, q1, q2], dtype=np.complex128)
        s = float(np.max(np.abs(c)))
        if s == 0.0 or not math.isfinite(s):
            raise ConfigError("form coefficients must be finite, not all zero")
        self.c = c / s

    @classmethod
    def from_points(cls, p: ProjectivePoint, q: ProjectivePoint) -> "QuadraticForm":
        # (z2 x - z1 y)(w2 x - w1 y) vanishes exactly on {p, q}
        return cls(p.z2 * q.z2, -(p.z2 * q.z1 + p.z1 * q.z2), p.z1 * q.z1)

    def roots(self) -> tuple[ProjectivePoint, ProjectivePoint]:
        q0, q1, q2 = self.c
        if abs(q0) < 1e-14 * max(abs(q1), abs(q2), 1e-300):
            if abs(q1) < 1e-14 * max(abs(q2), 1e-300):
                raise ConfigError("degenerate form has no isolated roots")
            # q1 xy + q2 y^2: roots y = 0 and x/y = -q2/q1
            return (ProjectivePoint(1.0, 0.0),
                    ProjectivePoint.from_chart(None) if False else
                    ProjectivePoint(-q2 / q1, 1.0))
        disc = cmath.sqrt(q1 * q1 - 4.0 * q0 * q2)
        r1 = (-q1 + disc) / (2.0 * q0)
        r2 = (-q1 - disc) / (2.0 * q0)
        # roots are ratios x/y; homogeneous points (r, 1) in (x, y)
        return ProjectivePoint(r1, 1.0), ProjectivePoint(r2, 1.0)

    def distance(self, other: "QuadraticForm") -> float:
        """Fubini-Study sine distance between coefficient rays in CP^2.

        Computed from the conjugated 2x2 minors (complex Lagrange identity),
        which stays accurate near zero where the Gram form cancels.
        """
        return _ray_distance(self.c, other.c)

    def isclose(self, other: "QuadraticForm", tol: float = _EQ_TOL) -> bool:
        return self.distance(other) <= tol

    def __repr__(self):
        return f"QuadraticForm({self.c[0]:.6g}, {self.c[1]:.6g}, {self.c[2]:.6g})"


def sym2(A: np.ndarray) -> np.ndarray:
    """3x3 action on form coefficients: (sym2(A) q)(w) = q(adj(A) w).

    For det-1 matrices this is q o A^{-1}, so root pairs transform the same
    way points do; the lift is multiplicative, sym2(AB) = sym2(A) sym2(B).
    """
    a, b = complex(A[0, 0]), complex(A[0, 1])
    c, d = complex(A[1, 0]), complex(A[1, 1])
    return np.array([
        [d * d, -c * d, c * c],
        [-2 * b * d, a * d + b * c, -2 * a * c],
        [b * b, -a * b, a * a],
    ], dtype=np.complex128)


# ---------------------------------------------------------------------------
# linear-algebra helpers for the solvers


def _adj2(A: np.ndarray) -> np.ndarray:
    return np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=complex)


def _ray_distance(u: np.ndarray, v: np.ndarray) -> float:
    """sin of the Fubini-Study angle between rays in C^n, cancellation-free.

    Uses sum_{i<j} |u_i conj(v_j) - u_j conj(v_i)|^2 = |u|^2 |v|^2 - |<u,v>|^2;
    the minor form keeps absolute accuracy ~1e-16 for nearly equal rays.
    """
    u = np.asarray(u, dtype=complex).ravel()
    v = np.asarray(v, dtype=complex).ravel()
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0 or nv == 0:
        return 0.0 if nu == nv else 1.0
    vb = np.conjugate(v)
    total = 0.0
    for i in range(len(u) - 1):
        total += float(np.sum(np.abs(u[i] * vb[i + 1:] - u[i + 1:] * vb[i]) ** 2))
    return math.sqrt(total) / (nu * nv)


def _proportional(A: np.ndarray, B: np.ndarray, tol: float = _EQ_TOL) -> bool:
    a = np.asarray(A, dtype=complex).ravel()
    b = np.asarray(B, dtype=complex).ravel()
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return np.linalg.norm(a) == np.linalg.norm(b)
    return _ray_distance(a, b) <= tol


def _fixed_points(M: np.ndarray) -> list[ProjectivePoint]:
    """Fixed points of the projective action of a 2x2 complex matrix.

    Returns one point (parabolic), two points (generic), or raises if M is
    proportional to the identity (every point is fixed; callers must branch).
    """
    M = np.asarray(M, dtype=complex)
    M = M / float(np.max(np.abs(M)))
    if _proportional(M, np.eye(2)):
        raise ConfigError("matrix acts as the identity; every point is fixed")
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    tr = a + d
    det = a * d - b * c
    disc = cmath.sqrt(tr * tr - 4.0 * det)
    out: list[ProjectivePoint] = []
    for lam in ((tr + disc) / 2.0, (tr - disc) / 2.0):
        u1 = (b, lam - a)
        u2 = (lam - d, c)
        cand = u1 if max(abs(u1[0]), abs(u1[1])) >= max(abs(u2[0]), abs(u2[1])) else u2
        if max(abs(cand[0]), abs(cand[1])) < 1e-14:
            continue
        p = ProjectivePoint(cand[0], cand[1])
        if not any(p.isclose(q) for q in out):
            out.append(p)
    return out


def _char_poly_roots_3(N: np.ndarray) -> np.ndarray:
    tr = N[0, 0] + N[1, 1] + N[2, 2]
    c2 = (N[0, 0] * N[1, 1] - N[0, 1] * N[1, 0]
          + N[0, 0] * N[2, 2] - N[0, 2] * N[2, 0]
          + N[1, 1] * N[2, 2] - N[1, 2] * N[2, 1])
    det = (N[0, 0] * (N[1, 1] * N[2, 2] - N[1, 2] * N[2, 1])
           - N[0, 1] * (N[1, 0] * N[2, 2] - N[1, 2] * N[2, 0])
           + N[0, 2] * (N[1, 0] * N[2, 1] - N[1, 1] * N[2, 0]))
    return np.roots([1.0, -tr, c2, -det])


def _null_vectors_3(M: np.ndarray, tol: float = 1e-8) -> list[np.ndarray]:
    """Null vectors of a (near-)singular 3x3 complex matrix.

    Rank 2: the bilinear cross product of the two most independent rows.
    Rank <= 1: an orthonormal basis of the plane orthogonal to the top row.
    """
    M = np.asarray(M, dtype=complex)
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        return [np.eye(3, dtype=complex)[i] for i in range(3)]
    M = M / scale
    rows = [M[i] for i in range(3)]
    crosses = [np.cross(rows[i], rows[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [float(np.linalg.norm(x)) for x in crosses]
    best = int(np.argmax(norms))
    if norms[best] > tol:
        return [crosses[best] / norms[best]]
    # all rows nearly parallel: 2-dimensional null space
    r = rows[int(np.argmax([np.linalg.norm(x) for x in rows]))]
    r = r / np.linalg.norm(r)
    basis = []
    for e in np.eye(3, dtype=complex):
        w = e - np.vdot(r, e) * r
        for prev in basis:
            w = w - np.vdot(prev, w) * prev
        n = float(np.linalg.norm(w))
        if n > 1e-8:
            basis.append(w / n)
        if len(basis) == 2:
            break
    return basis


# ---------------------------------------------------------------------------
# common-image solvers


@dataclass
class CommonImageResult:
    """Solution set of {A_i p = p' for all i}; all_points marks the degenerate
    case where every matrix acts identically and any p works."""

    all_points: bool
    pairs: list[tuple[ProjectivePoint, ProjectivePoint]] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.all_points and not self.pairs


def common_image_points(matrices: list[np.ndarray], tol: float = _EQ_TOL
                        ) -> CommonImageResult:
    """All p in CP^1 whose image agrees across every matrix, with that image.

    Candidates are the fixed points of adj(A_j) A_i for a non-proportional
    pair; each candidate is verified against every matrix.  When all the
    matrices are projectively equal the result is the all-points marker.
    """
    mats = [np.asarray(A, dtype=complex) for A in matrices]
    if len(mats) < 2:
        raise ConfigError("need at least two matrices")
    base = None
    for i, j in itertools.combinations(range(len(mats)), 2):
        if not _proportional(mats[i], mats[j], tol):
            base = (i, j)
            break
    if base is None:
        return CommonImageResult(all_points=True)
    candidates: list[ProjectivePoint] = []
    for i, j in itertools.combinations(range(len(mats)), 2):
        if _proportional(mats[i], mats[j], tol):
            continue
        M = _adj2(mats[j] / np.max(np.abs(mats[j]))) @ (mats[i] / np.max(np.abs(mats[i])))
        for p in _fixed_points(M):
            if not any(p.isclose(q) for q in candidates):
                candidates.append(p)
    pairs = []
    for p in candidates:
        images = [mobius_apply(A, p) for A in mats]
        if all(images[0].isclose(img, tol) for img in images[1:]):
            pairs.append((p, images[0]))
    return CommonImageResult(all_points=False, pairs=pairs)


@dataclass
class InvariantPairResult:
    all_forms: bool
    pairs: list[tuple[QuadraticForm, QuadraticForm]] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.all_forms and not self.pairs


def common_invariant_pair(matrices: list[np.ndarray], tol: float = _EQ_TOL
                          ) -> InvariantPairResult:
    """All point-pairs F (as quadratic forms) with a common image F' = A_i F.

    Candidate forms are eigenvectors of sym2(A_j)^{-1} sym2(A_i) for a
    non-proportional pair of lifts, each verified against every matrix.
    """
    mats = [np.asarray(A, dtype=complex) for A in matrices]
    if len(mats) < 2:
        raise ConfigError("need at least two matrices")
    lifts = [sym2(A / np.max(np.abs(A))) for A in mats]
    base = None
    for i, j in itertools.combinations(range(len(lifts)), 2):
        if not _proportional(lifts[i], lifts[j], tol):
            base = (i, j)
            break
    if base is None:
        return InvariantPairResult(all_forms=True)
    candidates: list[QuadraticForm] = []
    for i, j in itertools.combinations(range(len(lifts)), 2):
        if _proportional(lifts[i], lifts[j], tol):
            continue
        Sj = lifts[j]
        det_j = np.linalg.det(Sj)
        if abs(det_j) < 1e-200:
            continue
        N = np.linalg.inv(Sj) @ lifts[i]
        for lam in _char_poly_roots_3(N):
            for vec in _null_vectors_3(N - lam * np.eye(3)):
                f = QuadraticForm(*vec)
                if not any(f.isclose(g) for g in candidates):
                    candidates.append(f)
    pairs = []
    for f in candidates:
        images = [QuadraticForm(*(S @ f.c)) for S in lifts]
        if all(images[0].isclose(g, tol) for g in images[1:]):
            pairs.append((f, images[0]))
    return InvariantPairResult(all_forms=False, pairs=pairs)


# ---------------------------------------------------------------------------
# large-energy certificates


@dataclass
class Certificate:
    """Radius beyond which no common projective structure can exist.

    eps is one third of the smallest first/last coordinate gap over vector
    pairs, capped at 1; r0(v) = 1 + max|v_i| + 2/eps and R = max r0.
    """

    V: list[tuple[float, ...]]
    i0: int
    eps: float
    eps_raw: float
    pair_table: dict[tuple[int, int], float]
    r0: list[float]
    R: float


def certificate_radius(V: list[tuple[float, ...]], i0: int) -> Certificate:
    """Instantiate the large-energy certificate for an admissible vector set.

    Requires at least three vectors, every pair differing at some position
    i < i0 and some position i > i0 + 1 (1-based).
    """
    vecs = [tuple(float(x) for x in v) for v in V]
    if len(vecs) < 3:
        raise ConfigError("certificate needs at least three vectors")
    if len(set(vecs)) != len(vecs):
        raise ConfigError("duplicate vectors make the gap undefined")
    d = len(vecs[0])
    if any(len(v) != d for v in vecs):
        raise ConfigError("vectors must share one dimension")
    pair_table: dict[tuple[int, int], float] = {}
    for a, b in itertools.combinations(range(len(vecs)), 2):
        x, y = vecs[a], vecs[b]
        diffs = [i for i in range(d) if x[i] != y[i]]
        if not diffs:
            raise ConfigError("identical vectors in V")
        i_minus, i_plus = diffs[0], diffs[-1]
        # positions are 1-based in the admissibility condition
        if not (i_minus + 1 < i0 and i_plus + 1 > i0 + 1):
            raise ConfigError(
                f"pair {a},{b} violates the support condition at i0 = {i0}")
        pair_table[(a, b)] = min(abs(x[i_minus] - y[i_minus]),
                                 abs(x[i_plus] - y[i_plus]))
    eps_raw = min(pair_table.values()) / 3.0
    eps = min(eps_raw, 1.0)
    r0 = [1.0 + max(abs(x) for x in v) + 2.0 / eps for v in vecs]
    return Certificate(V=vecs, i0=i0, eps=eps, eps_raw=eps_raw,
                       pair_table=pair_table, r0=r0, R=max(r0))


def transfer_product(v, E: float) -> np.ndarray:
    """Plain product of step matrices over the word v (no renormalization)."""
    T = np.eye(2)
    for vj in v:
        T = np.array([[E - float(vj), -1.0], [1.0, 0.0]]) @ T
    return T


@dataclass
class StructureVerdict:
    verdict: str  # "no common structure" | "witnesses found" |
    #               "trivial (single matrix)" | "degenerate (all matrices proportional)"
    point_witnesses: list[tuple[ProjectivePoint, ProjectivePoint]]
    pair_witnesses: list[tuple[QuadraticForm, QuadraticForm]]
    subset_point_hits: list[tuple[int, ...]]

    @property
    def clean(self) -> bool:
        return self.verdict == "no common structure"


def verify_no_common_point(V: list[tuple[float, ...]], E: float,
                           tol: float = _EQ_TOL) -> StructureVerdict:
    """Decide whether the transfer matrices of V at energy E share structure.

    Runs the common-image point solver and the invariant-pair solver on the
    full set; with five or more matrices, a surviving two-point structure
    would force a common image point on some 3-subset (pigeonhole), so every
    3-subset is screened with the point solver as well.
    """
    if len(V) == 1:
        return StructureVerdict("trivial (single matrix)", [], [], [])
    mats = [transfer_product(v, E) for v in V]
    if all(_proportional(mats[0], A, tol) for A in mats[1:]):
        return StructureVerdict("degenerate (all matrices proportional)", [], [], [])
    points = common_image_points(mats, tol)
    pairs = common_invariant_pair(mats, tol)
    subset_hits: list[tuple[int, ...]] = []
    if len(mats) >= 5:
        for combo in itertools.combinations(range(len(mats)), 3):
            sub = [mats[i] for i in combo]
            res = common_image_points(sub, tol)
            if not res.empty:
                subset_hits.append(combo)
    found = (not points.empty) or (not pairs.empty) or bool(subset_hits)
    verdict = "witnesses found" if found else "no common structure"
    return StructureVerdict(verdict, points.pairs, pairs.pairs, subset_hits)


# ---------------------------------------------------------------------------
# grid oracle (brute force over a chart grid of CP^1)


def grid_common_image_residual(matrices: list[np.ndarray], resolution: int = 2000
                               ) -> tuple[float, ProjectivePoint]:
    """Brute-force minimum over a sphere grid of max_i dist(A_i p, A_1 p).

    Parametrizes CP^1 as (cos(t/2), sin(t/2) e^{i phi}) so the grid covers the
    whole line including infinity; returns the minimal residual and argmin.
    """
    mats = [np.asarray(A, dtype=complex) for A in matrices]
    if len(mats) < 2:
        raise ConfigError("need at least two matrices")
    theta = (np.arange(resolution) + 0.5) * (math.pi / resolution)
    phi = np.arange(resolution) * (2.0 * math.pi / resolution)
    e_iphi = np.exp(1j * phi)
    best = math.inf
    best_pt = ProjectivePoint(1.0, 0.0)
    chunk = max(1, (1 << 21) // resolution)
    for s in range(0, resolution, chunk):
        th = theta[s:s + chunk][:, None]
        z1 = np.cos(th / 2.0) * np.ones_like(e_iphi)[None, :]
        z2 = np.sin(th / 2.0) * e_iphi[None, :]
        ws = []
        for A in mats:
            w1 = A[0, 0] * z1 + A[0, 1] * z2
            w2 = A[1, 0] * z1 + A[1, 1] * z2
            ws.append((w1, w2))
        w1a, w2a = ws[0]
        na = np.abs(w1a) ** 2 + np.abs(w2a) ** 2
        res = None
        for w1b, w2b in ws[1:]:
            cross = np.abs(w1a * w2b - w2a * w1b) ** 2
            nb = np.abs(w1b) ** 2 + np.abs(w2b) ** 2
            d2 = cross / (na * nb)
            res = d2 if res is None else np.maximum(res, d2)
        i = int(np.argmin(res))
        val = math.sqrt(float(res.flat[i]))
        if val < best:
            best = val
            r, c = divmod(i, resolution)
            best_pt = ProjectivePoint(complex(z1[r, c]), complex(z2[r, c]))
    return best, best_pt


# ---------------------------------------------------------------------------
# exceptional-energy scanner


@dataclass
class ScanRow:
    E: float
    residual: float | None  # None when skipped by the certificate
    candidate: bool
    refined: float | None


@dataclass
class ScanResult:
    rows: list[ScanRow]
    candidates: list[float]
    degenerate: bool
    radius: float | None
    d: int
    i0: int


class _Conditioning:
    """Witness matrices for one choice of frozen window boundaries."""

    def __init__(self, witnesses: list[tuple[float, ...]]):
        self.witnesses = witnesses

    def residual(self, E: float) -> float:
        mats = [transfer_product(v, E) for v in self.witnesses]
        mats = [A / float(np.max(np.abs(A))) for A in mats]
        candidates: list[ProjectivePoint] = []
        for i, j in itertools.combinations(range(len(mats)), 2):
            if _proportional(mats[i], mats[j]):
                continue
            M = _adj2(mats[j]) @ mats[i]
            try:
                pts = _fixed_points(M)
            except ConfigError:
                continue
            for p in pts:
                if not any(p.isclose(q, 1e-12) for q in candidates):
                    candidates.append(p)
        if not candidates:
            return 0.0  # every pair proportional: structure is trivially shared
        best = math.inf
        for p in candidates:
            images = [mobius_apply(A, p) for A in mats]
            worst = max(images[0].distance(img) for img in images[1:])
            best = min(best, worst)
        return best


def _spread_subsample(vectors: list[tuple[float, ...]], cap: int
                      ) -> list[tuple[float, ...]]:
    # deterministic evenly spaced subsample of the sorted support; lexicographic
    # order spreads head patterns, which is what the clique search needs
    if len(vectors) <= cap:
        return vectors
    idx = np.linspace(0, len(vectors) - 1, cap).astype(int)
    return [vectors[i] for i in sorted(set(int(x) for x in idx))]


def _scan_conditionings(model: PotentialModel, d: int, i0: int,
                        max_conditionings: int) -> list[_Conditioning]:
    values = model.dist.support()
    k = model.k
    combos = list(itertools.product(values, repeat=k))
    boundary_pairs = list(itertools.product(combos, combos))
    if len(boundary_pairs) > max_conditionings:
        boundary_pairs = boundary_pairs[:max_conditionings]
    out = []
    for head, tail in boundary_pairs:
        sup = conditional_support(model, d, head, tail)
        # the exact clique search is quadratic in the support size; witnesses
        # only need existence, so search growing deterministic subsamples
        verdict = None
        for cap in (48, 192):
            verdict = check_support_condition(_spread_subsample(sup, cap), i0)
            if verdict.holds:
                break
        if verdict.holds:
            out.append(_Conditioning(verdict.witness))
    return out


def _golden_minimize(f, a: float, b: float, width: float = 1e-10) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > width:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = f(x2)
    return (a + b) / 2.0


def exceptional_energy_scan(model: PotentialModel, d: int,
                            E_grid: np.ndarray, refine_tol: float,
                            i0: int | None = None,
                            max_conditionings: int = 64) -> ScanResult:
    """Scan an energy grid for candidate exceptional energies.

    For every choice of frozen window boundaries (the conditional laws whose
    common-structure failure defines exceptional energies) the scanner takes
    five admissible witness vectors from the conditional support and measures
    the best-candidate structure violation; the scan residual at E is the
    worst case over conditionings, so a candidate energy must carry structure
    for every boundary choice.  Grid points beyond the certificate radius are
    skipped; local minima below refine_tol are refined by golden section.
    """
    E_grid = np.asarray(E_grid, dtype=np.float64)
    if i0 is None:
        i0 = max(2, (d + 1) // 2)
    if d < i0 + 2:
        raise ConfigError("need d >= i0 + 2")
    conds = _scan_conditionings(model, d, i0, max_conditionings)
    if not conds:
        return ScanResult(rows=[ScanRow(float(E), None, False, None) for E in E_grid],
                          candidates=[], degenerate=True, radius=None, d=d, i0=i0)
    radius = max(certificate_radius(c.witnesses, i0).R for c in conds)

    def s(E: float) -> float:
        return max(c.residual(E) for c in conds)

    rows: list[ScanRow] = []
    residuals: list[float | None] = []
    for E in E_grid:
        if abs(E) > radius:
            residuals.append(None)
        else:
            residuals.append(s(float(E)))
    # local minima below the refinement threshold
    candidates: list[float] = []
    for idx, r in enumerate(residuals):
        E = float(E_grid[idx])
        cand = False
        refined = None
        if r is not None and r < refine_tol:
            left = residuals[idx - 1] if idx > 0 else None
            right = residuals[idx + 1] if idx + 1 < len(residuals) else None
            lo = left if left is not None else math.inf
            hi = right if right is not None else math.inf
            if r <= lo and r <= hi:
                a = float(E_grid[idx - 1]) if idx > 0 else E
                b = float(E_grid[idx + 1]) if idx + 1 < len(E_grid) else E
                refined = _golden_minimize(s, a, b) if a < b else E
                cand = True
                candidates.append(refined)
        rows.append(ScanRow(E, r, cand, refined))
    return ScanResult(rows=rows, candidates=candidates, degenerate=False,
                      radius=radius, d=d, i0=i0)
