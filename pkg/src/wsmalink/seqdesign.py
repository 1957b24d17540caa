"""Signature-sequence design: unit-norm spreading sets with controlled correlation.

Generates L x K signature matrices optimized for one of three correlation
indicators (total squared correlation, worst-case coherence, minimum chordal
distance between column-group subspaces) and verifies the resulting sets
against the K^2/L lower bound on total squared correlation.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

UNIT_NORM_TOL = 1e-9


class PiKind(enum.Enum):
    """Correlation indicator driving sequence generation."""

    TSC = "tsc"
    COHERENCE = "coherence"
    CHORDAL = "chordal"


class SeqDesignError(ValueError):
    pass


@dataclass(frozen=True)
class SignatureMatrix:
    """Unit-norm spreading set: column k of ``entries`` is the sequence of user k.

    ``spread_length`` is the number of resource elements each symbol is spread
    over; ``user_count`` / ``spread_length`` is the overloading factor.
    """

    spread_length: int
    user_count: int
    entries: np.ndarray  # complex, shape (L, K)
    pi: PiKind | None = field(default=None, compare=False)
    seed: int | None = field(default=None, compare=False)
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.spread_length < 1 or self.user_count < 1:
            raise SeqDesignError("spread_length and user_count must be >= 1")
        ent = np.asarray(self.entries, dtype=np.complex128)
        if ent.shape != (self.spread_length, self.user_count):
            raise SeqDesignError(
                f"entries shape {ent.shape} does not match (L, K)="
                f"({self.spread_length}, {self.user_count})"
            )
        norms = np.linalg.norm(ent, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise SeqDesignError(
                f"column {worst} has norm {norms[worst]:.12f}, expected 1"
            )
        object.__setattr__(self, "entries", ent)
        self.entries.setflags(write=False)

    @property
    def overloading_factor(self) -> float:
        return self.user_count / self.spread_length

    def column(self, k: int) -> np.ndarray:
        return self.entries[:, k]


@dataclass(frozen=True)
class CorrelationReport:
    """Aggregate correlation figures of one signature set."""

    tsc: float
    welch_bound: float
    wbe_gap: float
    mu: float
    pairwise_rho: np.ndarray  # (K, K), rho_ij = |s_i^H s_j|
    min_chordal: float


def gram(S: SignatureMatrix) -> np.ndarray:
    """Return the K x K Grammian S^H S."""
    return S.entries.conj().T @ S.entries


def tsc(S: SignatureMatrix) -> float:
    """Total squared correlation, diagonal terms included."""
    return float(np.sum(np.abs(gram(S)) ** 2))


def welch_bound(K: int, L: int) -> float:
    """Lower bound K^2/L on the total squared correlation of K unit-norm L-vectors."""
    if K < 1 or L < 1:
        raise SeqDesignError(f"K and L must be positive, got K={K}, L={L}")
    return K * K / L


def coherence(S: SignatureMatrix) -> float:
    """Worst-case correlation magnitude over distinct column pairs (0 for K=1)."""
    if S.user_count == 1:
        return 0.0
    rho = np.abs(gram(S))
    np.fill_diagonal(rho, 0.0)
    return float(rho.max())


def _orth_basis(cols: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(cols)
    return q


def _chordal_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(sum sin^2 theta_i) over principal angles between span(a) and span(b)."""
    qa, qb = _orth_basis(a), _orth_basis(b)
    sigma = np.linalg.svd(qa.conj().T @ qb, compute_uv=False)
    sigma = np.clip(sigma, 0.0, 1.0)
    m = min(a.shape[1], b.shape[1])
    return float(np.sqrt(max(m - np.sum(sigma**2), 0.0)))


def min_chordal_distance(S: SignatureMatrix, subspace_partition) -> float:
    """Minimum chordal distance over all pairs of column-group subspaces.

    Groups must be disjoint and no larger than the spread length (a group of
    more than L columns cannot span an independent subspace of C^L).
    """
    groups = [list(g) for g in subspace_partition]
    if len(groups) < 2:
        raise SeqDesignError("partition must contain at least two groups")
    seen: set[int] = set()
    for g in groups:
        if not g:
            raise SeqDesignError("empty group in partition")
        if len(g) > S.spread_length:
            raise SeqDesignError(
                f"group {g} has {len(g)} columns, more than L={S.spread_length}"
            )
        if seen.intersection(g):
            raise SeqDesignError(f"overlapping groups at columns {seen.intersection(g)}")
        seen.update(g)
        if max(g) >= S.user_count or min(g) < 0:
            raise SeqDesignError(f"column index out of range in group {g}")
    best = np.inf
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            d = _chordal_distance(S.entries[:, groups[i]], S.entries[:, groups[j]])
            best = min(best, d)
    return float(best)


def _dft_tight_frame(K: int, L: int) -> np.ndarray:
    # L orthogonal rows of the K-point DFT, scaled to unit-norm columns;
    # achieves TSC = K^2/L exactly.
    k = np.arange(K)
    rows = np.arange(L)
    F = np.exp(-2j * np.pi * np.outer(rows, k) / K)
    return F / np.sqrt(L)


def _normalize_columns(S: np.ndarray) -> np.ndarray:
    return S / np.linalg.norm(S, axis=0, keepdims=True)


def _matrix_coherence(S: np.ndarray) -> float:
    rho = np.abs(S.conj().T @ S)
    np.fill_diagonal(rho, 0.0)
    return float(rho.max())


def coherence_lower_bound(K: int, L: int) -> float:
    """Welch bound on worst-case coherence of K unit-norm vectors in C^L."""
    if K <= L:
        return 0.0
    return float(np.sqrt((K - L) / (L * (K - 1))))


def _project_rank_l(G: np.ndarray, L: int) -> np.ndarray:
    # nearest (Frobenius) PSD matrix of rank <= L, then rescale to unit diagonal
    w, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    w = np.clip(w[-L:], 0.0, None)
    V = V[:, -L:]
    S = np.sqrt(w)[:, None] * V.conj().T
    return _normalize_columns(S)

def _pack_coherence(K, L, rng, iters, tol):
    # alternating projection between the clipped-off-diagonal Grammian set
    # and the rank-L PSD cone, tracking the best iterate seen
    mu_target = coherence_lower_bound(K, L)
    S = _normalize_columns(
        rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    )
    best_mu, best_S = _matrix_coherence(S), S
    offdiag = ~np.eye(K, dtype=bool)
    for _ in range(iters):
        G = S.conj().T @ S
        np.fill_diagonal(G, 1.0)
        mags = np.abs(G)
        clip = offdiag & (mags > mu_target)
        G[clip] *= mu_target / mags[clip]
        S = _project_rank_l(G, L)
        mu = _matrix_coherence(S)
        if mu < best_mu:
            best_mu, best_S = mu, S
        if best_mu <= mu_target + tol:
            return best_S, True
    return best_S, best_mu <= mu_target + tol


def chordal_partition(K: int, group_size: int = 2):
    """Consecutive column grouping used by chordal-distance generation."""
    return [
        list(range(i, min(i + group_size, K))) for i in range(0, K, group_size)
    ]


def _pack_chordal(K, L, rng, iters, tol, group_size):
    # subspace packing: columns grouped in blocks, orthonormal inside each
    # block (zero intra-group correlation), blocks spread apart by the same
    # alternating projection applied to the block-Gram structure
    groups = chordal_partition(K, group_size)
    n_groups = len(groups)
    S = _normalize_columns(
        rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    )

    def orthonormalize_groups(M):
        out = M.copy()
        for g in groups:
            out[:, g] = _orth_basis(M[:, g])
        return out

    def min_dist(M):
        best = np.inf
        for i in range(n_groups):
            for j in range(i + 1, n_groups):
                best = min(best, _chordal_distance(M[:, groups[i]], M[:, groups[j]]))
        return best

    S = orthonormalize_groups(S)
    best_d, best_S = min_dist(S), S
    for _ in range(iters):
        G = S.conj().T @ S
        # shrink every cross-group correlation toward zero, keep blocks identity
        shrunk = 0.85 * G
        for g in groups:
            shrunk[np.ix_(g, g)] = np.eye(len(g))
        S = orthonormalize_groups(_project_rank_l(shrunk, L))
        d = min_dist(S)
        if d > best_d:
            best_d, best_S = d, S
    # converged flag is best-effort: packing improved to a stationary value
    return best_S, True


def generate(
    K: int,
    L: int,
    pi: PiKind = PiKind.TSC,
    seed: int = 0,
    iters: int = 5000,
    tol: float = 1e-6,
) -> SignatureMatrix:
    """Generate a K-user, length-L signature set optimized for the chosen indicator.

    TSC uses a deterministic tight-frame construction (orthogonal DFT rows)
    that meets the K^2/L bound exactly. Coherence and chordal packing run a
    seeded alternating projection and return the best iterate found, with
    ``converged`` flagging whether the target was reached within ``iters``.
    Deterministic for fixed (K, L, pi, seed, iters).
    """
    if K < 1 or L < 1:
        raise SeqDesignError(f"K and L must be positive, got K={K}, L={L}")
    if K < L:
        warnings.warn(
            f"K={K} < L={L}: underloaded set, orthonormal columns returned",
            stacklevel=2,
        )
    rng = np.random.default_rng(np.random.SeedSequence([0x5E9D, seed, K, L]))
    converged = True
    if K <= L:
        # orthonormal set meets every indicator at its optimum
        ent = np.asarray(_dft_tight_frame(K, K)[:K, :], dtype=np.complex128)
        if L > K:
            ent = np.vstack([ent, np.zeros((L - K, K))])
    elif pi is PiKind.TSC:
        ent = _dft_tight_frame(K, L)
    elif pi is PiKind.COHERENCE:
        ent, converged = _pack_coherence(K, L, rng, iters, tol)
    elif pi is PiKind.CHORDAL:
        ent, converged = _pack_chordal(K, L, rng, iters, tol, group_size=min(2, L))
    else:
        raise SeqDesignError(f"unknown indicator {pi!r}")
    # exact unit norms regardless of the route taken
    ent = _normalize_columns(ent)
    return SignatureMatrix(
        spread_length=L, user_count=K, entries=ent, pi=pi, seed=seed, converged=converged
    )


def verify(S: SignatureMatrix, tol: float = 1e-6) -> CorrelationReport:
    """Recompute all correlation figures of a signature set in one report.

    ``min_chordal`` uses the per-column (line) partition, i.e. the smallest
    sin of a principal angle between any two signature directions.
    """
    t = tsc(S)
    wb = welch_bound(S.user_count, S.spread_length)
    rho = np.abs(gram(S))
    mu = coherence(S)
    if S.user_count > 1:
        min_chordal = min_chordal_distance(S, [[k] for k in range(S.user_count)])
    else:
        min_chordal = 0.0
    return CorrelationReport(
        tsc=t,
        welch_bound=wb,
        wbe_gap=t - wb,
        mu=mu,
        pairwise_rho=rho,
        min_chordal=min_chordal,
    )


def to_json_dict(S: SignatureMatrix) -> dict:
    """JSON-ready dict; entries are column-major [re, im] pairs."""
    cols = S.entries.T.reshape(-1)  # column-major: all of column 0, then column 1, ...
    return {
        "L": S.spread_length,
        "K": S.user_count,
        "pi": S.pi.value if S.pi is not None else None,
        "seed": S.seed,
        "entries": [[float(z.real), float(z.imag)] for z in cols],
    }


def from_json_dict(d: dict) -> SignatureMatrix:
    try:
        L, K = int(d["L"]), int(d["K"])
        raw = d["entries"]
    except KeyError as exc:
        raise SeqDesignError(f"signature JSON missing field {exc}") from exc
    if len(raw) != L * K:
        raise SeqDesignError(f"expected {L * K} entries, got {len(raw)}")
    flat = np.array([complex(re, im) for re, im in raw], dtype=np.complex128)
    ent = flat.reshape(K, L).T
    pi = PiKind(d["pi"]) if d.get("pi") else None
    return SignatureMatrix(
        spread_length=L, user_count=K, entries=ent, pi=pi, seed=d.get("seed")
    )


def save(S: SignatureMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(S), fh, indent=1)


def load(path) -> SignatureMatrix:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
