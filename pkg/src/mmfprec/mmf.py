"""Multiresolution matrix factorization and its factored approximate inverse.

A factorization is an ordered list of sparse orthogonal rotations plus a
core-diagonal remainder: conjugating the input by the rotations and zeroing
the off-diagonal parts of retired ("wavelet") rows leaves a small dense core
and a diagonal. The squared Frobenius factorization error equals the sum of
squares of the zeroed entries, which is tracked exactly during construction.

Two builders are provided: a single-stream greedy loop working on a dense
copy, and a staged, clustered variant (pmmf) that keeps the master matrix
sparse, factors clusters independently (optionally on worker threads) and
reassembles between stages.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class KPointRotation:
    """Orthogonal rotation touching k active indices (Givens when k = 2)."""

    indices: np.ndarray
    block: np.ndarray
    level: int = 0

    @property
    def k(self):
        return len(self.indices)


@dataclass
class CoreDiagonal:
    """Dense core block over the surviving active set plus a diagonal rest."""

    core_indices: np.ndarray
    core: np.ndarray
    diag_indices: np.ndarray
    diagonal: np.ndarray


@dataclass
class PmmfConfig:
    k: int = 2
    wavelet_fraction: float = 0.5
    target_core: int = 100
    max_block: int = 2000
    stages_cap: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k != 2:
            raise ValueError("only k=2 (Givens) rotations are supported")
        if not 0.0 < self.wavelet_fraction < 1.0:
            raise ValueError("wavelet_fraction must lie in (0, 1)")


@dataclass
class MMFFactorization:
    """Rotation chain, retirement schedule and core-diagonal remainder."""

    n: int
    rotations: list
    H: CoreDiagonal
    recorded_error_sq: float
    active_sizes: list
    retired_order: np.ndarray
    flags: tuple = ()
    _chain: list = field(default=None, repr=False)
    _inv: tuple = field(default=None, repr=False)
    inverse_flags: tuple = field(default=(), repr=False)

    def active_set(self, level):
        """Active index set after `level` retirement levels."""
        retired = set(self.retired_order[: self.n - self.active_sizes[level]])
        return np.array([i for i in range(self.n) if i not in retired])

    def _rotation_chain(self):
        if self._chain is None:
            self._chain = [
                (int(r.indices[0]), int(r.indices[1]),
                 float(r.block[0, 0]), float(r.block[1, 0]))
                for r in self.rotations
                if r.k == 2
            ]
        return self._chain


def _rotate_symmetric(M, i, j, c, s):
    """In-place two-sided Givens update M <- R M R.T on rows/cols (i, j)."""
    ri = c * M[i, :] - s * M[j, :]
    rj = s * M[i, :] + c * M[j, :]
    M[i, :] = ri
    M[j, :] = rj
    ci = c * M[:, i] - s * M[:, j]
    cj = s * M[:, i] + c * M[:, j]
    M[:, i] = ci
    M[:, j] = cj


def find_rotation(working, gram, i1, active=None, level=0):
    """Pick a rotation partner for i1 and the row to retire afterwards.

    The partner maximizes normalized column inner product (zero-norm columns
    excluded); the angle is the Jacobi angle annihilating the pair entry of
    the working matrix. Whichever of the two rotated rows has the smaller
    off-diagonal norm over the active set (pair entry excluded) becomes the
    wavelet; its post-rotation squared off-diagonal row norm is returned.

    Returns (KPointRotation with block-local indices, wavelet index,
    squared off-diagonal norm of the wavelet row).
    """
    m = working.shape[0]
    if active is None:
        active = np.ones(m, dtype=bool)
    g11 = gram[i1, i1]
    best_j = -1
    if g11 > 0.0:
        gj = gram[i1, :].copy()
        norms = np.diag(gram)
        valid = active & (norms > 0.0)
        valid[i1] = False
        if valid.any():
            score = np.zeros(m)
            idx = np.flatnonzero(valid)
            score[idx] = np.abs(gj[idx]) / np.sqrt(g11 * norms[idx])
            best_j = int(idx[np.argmax(score[idx])])
    if best_j < 0:
        # All remaining columns are zero: retire i1 behind an identity.
        contrib = max(gram[i1, i1] - working[i1, i1] ** 2, 0.0)
        rot = KPointRotation(np.array([i1]), np.eye(1), level)
        return rot, i1, contrib

    i2 = best_j
    theta = 0.5 * math.atan2(2.0 * working[i1, i2],
                             working[i2, i2] - working[i1, i1])
    c, s = math.cos(theta), math.sin(theta)
    w11, w12, w22 = working[i1, i1], working[i1, i2], working[i2, i2]
    d1 = c * c * w11 - 2.0 * c * s * w12 + s * s * w22
    d2 = s * s * w11 + 2.0 * c * s * w12 + c * c * w22
    g12, g22 = gram[i1, i2], gram[i2, i2]
    g1 = c * c * g11 - 2.0 * c * s * g12 + s * s * g22
    g2 = s * s * g11 + 2.0 * c * s * g12 + c * c * g22
    m1 = max(g1 - d1 * d1, 0.0)
    m2 = max(g2 - d2 * d2, 0.0)
    wavelet, contrib = (i1, m1) if m1 <= m2 else (i2, m2)
    block = np.array([[c, -s], [s, c]])
    rot = KPointRotation(np.array([i1, i2]), block, level)
    return rot, wavelet, contrib


def _retire(working, gram, active, w):
    """Zero row/col w off-diagonals; returns the exact zeroed row mass."""
    row = working[w, :].copy()
    row[w] = 0.0
    row[~active] = 0.0  # already zero, guard against stale storage
    mass = float(row @ row)
    dval = working[w, w]
    working[w, :] = 0.0
    working[:, w] = 0.0
    working[w, w] = dval
    gram -= np.outer(row, row)
    active[w] = False
    return mass


def greedy_mmf(A, L_target=None, config=None):
    """Single-stream greedy factorization on a dense working copy.

    Runs one retirement per level following the schedule delta_l = n - l,
    stopping at ``L_target`` levels or when the active set reaches the
    configured core size.
    """
    config = config or PmmfConfig()
    W = A.toarray() if hasattr(A, "toarray") else np.array(A, dtype=float)
    W = W.copy()
    n = W.shape[0]
    if L_target is None:
        L_target = max(n - config.target_core, 0)
    floor = max(n - L_target, 1)
    G = W.T @ W
    active = np.ones(n, dtype=bool)
    rng = np.random.default_rng(config.seed)

    rotations = []
    retired = []
    active_sizes = [n]
    err = 0.0
    for level in range(1, L_target + 1):
        avail = np.flatnonzero(active)
        if len(avail) <= floor:
            break
        i1 = int(avail[rng.integers(len(avail))])
        rot, w, _ = find_rotation(W, G, i1, active, level)
        if rot.k == 2:
            i, j = int(rot.indices[0]), int(rot.indices[1])
            c, s = rot.block[0, 0], rot.block[1, 0]
            _rotate_symmetric(W, i, j, c, s)
            W[i, j] = W[j, i] = 0.0
            _rotate_symmetric(G, i, j, c, s)
            rotations.append(rot)
        err += 2.0 * _retire(W, G, active, w)
        retired.append(w)
        active_sizes.append(int(active.sum()))

    core_idx = np.flatnonzero(active)
    diag_idx = np.array(sorted(retired), dtype=np.intp)
    H = CoreDiagonal(core_idx, W[np.ix_(core_idx, core_idx)].copy(),
                     diag_idx, W[diag_idx, diag_idx].copy())
    return MMFFactorization(n, rotations, H, err, active_sizes,
                            np.array(retired, dtype=np.intp))


def cluster_columns(columns, active, max_block, seed):
    """Partition the active columns by normalized inner product.

    Greedy leader clustering: columns are visited in a seeded random order,
    join the most-similar existing leader when the similarity is positive
    and found a new cluster otherwise. Oversize clusters are re-split by
    seeded random bisection until every part is at most ``max_block``.
    """
    if hasattr(columns, "csr"):
        columns = columns.csr
    active = np.asarray(active, dtype=np.intp)
    if len(active) <= max_block:
        return [active.copy()]
    rng = np.random.default_rng(seed)
    B = sp.csc_matrix(columns)[:, active]
    norms = np.sqrt(np.asarray(B.power(2).sum(axis=0)).ravel())
    k = len(active)
    order = rng.permutation(k)

    assignment = np.full(k, -1, dtype=np.intp)
    best_sim = np.zeros(k)
    best_leader = np.full(k, -1, dtype=np.intp)
    leaders = []
    for local in order:
        if best_leader[local] >= 0 and best_sim[local] > 0.0:
            assignment[local] = best_leader[local]
            continue
        leader_id = len(leaders)
        leaders.append(local)
        assignment[local] = leader_id
        sims = np.abs(B.T @ B[:, local].toarray().ravel())
        denom = norms * norms[local]
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(denom > 0.0, sims / denom, 0.0)
        improved = sims > best_sim
        best_sim[improved] = sims[improved]
        best_leader[improved] = leader_id

    clusters = []
    for leader_id in range(len(leaders)):
        members = active[np.sort(np.flatnonzero(assignment == leader_id))]
        clusters.append(members)

    out = []
    queue = list(clusters)
    while queue:
        part = queue.pop(0)
        if len(part) <= max_block:
            out.append(part)
            continue
        perm = rng.permutation(len(part))
        half = len(part) // 2
        queue.insert(0, np.sort(part[perm[half:]]))
        queue.insert(0, np.sort(part[perm[:half]]))
    return out


def _factor_cluster(D, G, quota, rng, level):
    """Run the greedy loop inside one cluster's dense block.

    Returns local rotations [(i, j, c, s)] and retired local indices, in
    order. Gram staleness across clusters is accepted; exact error
    accounting happens against the master at reassembly.
    """
    size = D.shape[0]
    active = np.ones(size, dtype=bool)
    rots = []
    waves = []
    for _ in range(quota):
        avail = np.flatnonzero(active)
        if len(avail) == 0:
            break
        i1 = int(avail[rng.integers(len(avail))])
        rot, w, _ = find_rotation(D, G, i1, active, level)
        if rot.k == 2:
            i, j = int(rot.indices[0]), int(rot.indices[1])
            c, s = rot.block[0, 0], rot.block[1, 0]
            _rotate_symmetric(D, i, j, c, s)
            D[i, j] = D[j, i] = 0.0
            _rotate_symmetric(G, i, j, c, s)
            rots.append((i, j, c, s))
        _retire(D, G, active, w)
        waves.append(w)
    return rots, waves


def pmmf(A, config=None, workers=None):
    """Staged, clustered factorization with a sparse master matrix.

    Each stage clusters the active columns, factors every cluster
    independently (retiring a wavelet_fraction share of its columns), then
    reassembles: the compound block-diagonal stage rotation is applied to
    the master, retired rows/columns are zeroed with their exact
    off-diagonal mass added to the recorded error, and the next stage
    starts from the shrunken active set.
    """
    config = config or PmmfConfig()
    if workers is None:
        workers = int(os.environ.get("MMFPREC_WORKERS", "1"))
    master = sp.csr_matrix(A.csr if hasattr(A, "csr") else A, dtype=np.float64).copy()
    n = master.shape[0]
    active = np.arange(n)
    rotations = []
    retired = []
    retired_diag = {}
    active_sizes = [n]
    err = 0.0
    flags = ()
    root_seed = np.random.SeedSequence(config.seed)

    stage = 0
    while len(active) > config.target_core and stage < config.stages_cap:
        stage += 1
        clu_seed = np.random.SeedSequence(entropy=root_seed.entropy,
                                          spawn_key=(stage, 0))
        clusters = cluster_columns(master, active, config.max_block, clu_seed)

        budget = len(active) - config.target_core
        quotas = []
        for C in clusters:
            q = min(math.ceil(config.wavelet_fraction * len(C)), budget)
            quotas.append(q)
            budget -= q

        masterc = master.tocsc()

        def run_cluster(ci):
            if quotas[ci] == 0:
                return [], []
            C = clusters[ci]
            cols = masterc[:, C]
            D = np.asarray(cols[C, :].todense())
            G = np.asarray((cols.T @ cols).todense())
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=root_seed.entropy,
                                       spawn_key=(stage, 1 + ci)))
            return _factor_cluster(D, G, quotas[ci], rng, stage)

        if workers > 1 and len(clusters) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_cluster, range(len(clusters))))
        else:
            results = [run_cluster(ci) for ci in range(len(clusters))]

        # Compound block-diagonal stage rotation in global coordinates.
        qrows, qcols, qdata = [], [], []
        in_cluster = np.zeros(n, dtype=bool)
        stage_retired = []
        for C, (rots, waves) in zip(clusters, results):
            in_cluster[C] = True
            U = np.eye(len(C))
            for (i, j, c, s) in rots:
                ri = c * U[i, :] - s * U[j, :]
                rj = s * U[i, :] + c * U[j, :]
                U[i, :] = ri
                U[j, :] = rj
                block = np.array([[c, -s], [s, c]])
                rotations.append(
                    KPointRotation(np.array([C[i], C[j]]), block, stage))
            nz = np.nonzero(U)
            qrows.extend(C[nz[0]])
            qcols.extend(C[nz[1]])
            qdata.extend(U[nz])
            stage_retired.extend(int(C[w]) for w in waves)
        rest = np.flatnonzero(~in_cluster)
        qrows.extend(rest)
        qcols.extend(rest)
        qdata.extend(np.ones(len(rest)))
        Qbar = sp.csr_matrix((qdata, (qrows, qcols)), shape=(n, n))

        master = (Qbar @ master @ Qbar.T).tocsr()

        if not stage_retired:
            flags += ("stalled",)
            break

        # Exact error accounting against the rotated master: every
        # off-diagonal entry in a retired row or column is zeroed once.
        # Summing only actual off-diagonal entries avoids cancellation.
        Wp = np.array(stage_retired, dtype=np.intp)
        in_wp = np.zeros(n, dtype=bool)
        in_wp[Wp] = True
        R = master[Wp, :].tocoo()
        offdiag = R.col != Wp[R.row]
        rows_sq = float(np.sum(R.data[offdiag] ** 2))
        blk_sq = float(np.sum(R.data[offdiag & in_wp[R.col]] ** 2))
        err += 2.0 * rows_sq - blk_sq

        for w, d in zip(Wp, master.diagonal()[Wp]):
            retired_diag[int(w)] = float(d)
        retired.extend(int(w) for w in Wp)

        keep = np.ones(n)
        keep[Wp] = 0.0
        Dk = sp.diags(keep)
        master = (Dk @ master @ Dk).tocsr()
        master.eliminate_zeros()

        mask = np.ones(n, dtype=bool)
        mask[np.array(retired, dtype=np.intp)] = False
        active = np.flatnonzero(mask)
        active_sizes.append(len(active))

    if len(active) > config.target_core and "stalled" not in flags:
        flags += ("stage-cap-reached",)

    core_idx = np.array(active, dtype=np.intp)
    core = np.asarray(master[core_idx, :][:, core_idx].todense())
    diag_idx = np.array(sorted(retired_diag), dtype=np.intp)
    diagonal = np.array([retired_diag[i] for i in diag_idx])
    H = CoreDiagonal(core_idx, core, diag_idx, diagonal)
    return MMFFactorization(n, rotations, H, err, active_sizes,
                            np.array(retired, dtype=np.intp), flags)


def _apply_rotations(chain, v, transpose=False):
    if transpose:
        for (i, j, c, s) in reversed(chain):
            vi, vj = v[i], v[j]
            v[i] = c * vi + s * vj
            v[j] = -s * vi + c * vj
    else:
        for (i, j, c, s) in chain:
            vi, vj = v[i], v[j]
            v[i] = c * vi - s * vj
            v[j] = s * vi + c * vj
    return v


def apply_factored(F, v):
    """Apply the factorized matrix Q1.T ... QL.T H QL ... Q1 to a vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (F.n,):
        raise ValueError(f"dimension mismatch: expected {F.n}, got {v.shape}")
    chain = F._rotation_chain()
    w = _apply_rotations(chain, v.copy())
    out = np.empty_like(w)
    H = F.H
    out[H.diag_indices] = H.diagonal * w[H.diag_indices]
    if len(H.core_indices):
        out[H.core_indices] = H.core @ w[H.core_indices]
    return _apply_rotations(chain, out, transpose=True)


def _prepare_inverse(F):
    if F._inv is not None:
        return F._inv
    H = F.H
    flags = ()
    diag_scale = 0.0
    if len(H.diagonal):
        diag_scale = np.max(np.abs(H.diagonal))
    if len(H.core_indices):
        diag_scale = max(diag_scale, np.max(np.abs(np.diag(H.core))))
    eps = 1e-12 * diag_scale if diag_scale > 0.0 else 1e-12

    d = H.diagonal.copy()
    tiny = np.abs(d) < eps
    if tiny.any():
        sign = np.where(d[tiny] >= 0.0, 1.0, -1.0)
        d[tiny] = sign * eps
        flags += ("tiny-diagonal-regularized",)
    diag_inv = 1.0 / d if len(d) else d

    if len(H.core_indices):
        sym = 0.5 * (H.core + H.core.T)
        lam, V = np.linalg.eigh(sym)
        good = np.abs(lam) >= eps
        if not good.all():
            flags += ("singular-core-pseudoinverse",)
        inv_lam = np.where(good, 1.0 / np.where(good, lam, 1.0), 0.0)
        core_inv = (V * inv_lam) @ V.T
    else:
        core_inv = np.zeros((0, 0))

    F._inv = (core_inv, diag_inv)
    F.inverse_flags = flags
    return F._inv


def apply_inverse(F, v):
    """Apply the factored approximate inverse Q1.T ... H^-1 ... Q1 to v.

    The core inverse is computed once (symmetric eigendecomposition;
    near-singular eigenvalues fall back to a pseudo-inverse) and tiny
    diagonal entries are regularized sign-preservingly; both raise flags
    on the factorization.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (F.n,):
        raise ValueError(f"dimension mismatch: expected {F.n}, got {v.shape}")
    core_inv, diag_inv = _prepare_inverse(F)
    chain = F._rotation_chain()
    w = _apply_rotations(chain, v.copy())
    out = np.empty_like(w)
    H = F.H
    out[H.diag_indices] = diag_inv * w[H.diag_indices]
    if len(H.core_indices):
        out[H.core_indices] = core_inv @ w[H.core_indices]
    return _apply_rotations(chain, out, transpose=True)


_FORMAT_VERSION = 1


def save_factorization(F, path):
    """Serialize to a flat npz archive; round-trips apply outputs exactly."""
    k = max((r.k for r in F.rotations), default=2)
    nrot = len(F.rotations)
    idx = np.full((nrot, k), -1, dtype=np.int64)
    blocks = np.zeros((nrot, k, k))
    levels = np.zeros(nrot, dtype=np.int64)
    for t, r in enumerate(F.rotations):
        idx[t, : r.k] = r.indices
        blocks[t, : r.k, : r.k] = r.block
        levels[t] = r.level
    np.savez(
        path,
        version=np.int64(_FORMAT_VERSION),
        n=np.int64(F.n),
        recorded_error_sq=np.float64(F.recorded_error_sq),
        rot_indices=idx,
        rot_blocks=blocks,
        rot_levels=levels,
        core_indices=F.H.core_indices.astype(np.int64),
        core=F.H.core,
        diag_indices=F.H.diag_indices.astype(np.int64),
        diagonal=F.H.diagonal,
        active_sizes=np.array(F.active_sizes, dtype=np.int64),
        retired_order=F.retired_order.astype(np.int64),
        flags=np.array(list(F.flags), dtype="U64"),
    )


def load_factorization(path):
    with np.load(path) as z:
        version = int(z["version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported factorization format version {version}")
        rotations = []
        idx = z["rot_indices"]
        blocks = z["rot_blocks"]
        levels = z["rot_levels"]
        for t in range(idx.shape[0]):
            sel = idx[t] >= 0
            k = int(sel.sum())
            rotations.append(
                KPointRotation(idx[t, :k].astype(np.intp),
                               blocks[t, :k, :k].copy(), int(levels[t])))
        H = CoreDiagonal(
            z["core_indices"].astype(np.intp), z["core"].copy(),
            z["diag_indices"].astype(np.intp), z["diagonal"].copy())
        return MMFFactorization(
            int(z["n"]), rotations, H, float(z["recorded_error_sq"]),
            [int(a) for a in z["active_sizes"]],
            z["retired_order"].astype(np.intp),
            tuple(str(f) for f in z["flags"]))
