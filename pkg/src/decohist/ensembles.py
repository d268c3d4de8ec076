"""Typical coarse-grained histories of a closed system.

Random projector families are drawn from the unitarily invariant ensemble
(Haar-random orthonormal frame, split into blocks of the requested ranks).
For each sample the decoherence functional of a pure initial state is built
and the off-diagonal ratios of history pairs are collected.
"""

from dataclasses import dataclass, field

import numpy as np

from . import histories, qops, rng
from . import tolerances as tol
from .qops import ProjectorFamily


def haar_unitary(d, gen):
    """Haar-random unitary by QR of a complex Ginibre matrix with phase fix."""
    Z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def _check_partition(d, ranks):
    ranks = [int(r) for r in ranks]
    if any(r < 1 for r in ranks) or sum(ranks) != d:
        raise ValueError(f"ranks {ranks} do not partition dimension {d}")
    return ranks


def sample_random_family(d, ranks, seed=None, gen=None):
    """Projectors onto orthogonal random subspaces of the given ranks."""
    ranks = _check_partition(d, ranks)
    if gen is None:
        gen = np.random.default_rng(seed)
    U = haar_unitary(d, gen)
    edges = np.cumsum([0] + ranks)
    groups = [range(edges[i], edges[i + 1]) for i in range(len(ranks))]
    return ProjectorFamily.from_basis(U, groups)


def equal_partition(d, rank):
    """Blocks of size ``rank`` with any remainder as a final smaller block."""
    full, rem = divmod(d, rank)
    return [rank] * full + ([rem] if rem else [])


@dataclass
class RandomScheduleSpec:
    d: int
    n_events: int
    ranks: list
    samples: int
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 2:
            raise ValueError("need at least two events")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.ranks and isinstance(self.ranks[0], (int, np.integer)):
            self.ranks = [list(self.ranks)] * self.n_events
        if len(self.ranks) != self.n_events:
            raise ValueError("need one rank partition per event")
        self.ranks = [_check_partition(self.d, r) for r in self.ranks]


def initial_state(kind, d, gen, beta=1.0):
    """Pure initial states: "random", "ground", or "thermal" (thermal weights, random phases)."""
    if kind == "random":
        v = gen.standard_normal(d) + 1j * gen.standard_normal(d)
    elif kind == "ground":
        v = qops.basis_state(d, 0)
    elif kind == "thermal":
        w = np.exp(-beta * np.arange(d))
        v = np.sqrt(w / w.sum()) * np.exp(2j * np.pi * gen.random(d))
    else:
        raise ValueError(f"unknown initial state {kind!r}")
    return v / np.linalg.norm(v)


@dataclass
class TypicalRatioReport:
    """Per-pair arrays over all samples.

    ``pairs`` holds (first label, second label) outcome tuples as an
    (n_pairs, 2, n_events) integer array.
    """

    spec: RandomScheduleSpec
    initial: str
    sample: np.ndarray = field(repr=False)
    pairs: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    p_prime: np.ndarray = field(repr=False)
    ratio: np.ndarray = field(repr=False)

    @property
    def n_pairs(self):
        return int(self.ratio.size)

    @property
    def scaled(self):
        """ratio * d * p * p' per pair."""
        return self.ratio * self.spec.d * self.p * self.p_prime

    @property
    def overlap(self):
        """Squared overlap of the normalized branch states times d (= ratio * d)."""
        return self.ratio * self.spec.d

    def summary(self):
        """Mean, median and percentiles of both per-pair statistics."""
        def stats(x):
            if x.size == 0:
                return {"mean": None, "median": None, "p10": None, "p90": None}
            return {"mean": float(np.mean(x)), "median": float(np.median(x)),
                    "p10": float(np.percentile(x, 10)), "p90": float(np.percentile(x, 90))}
        return {"n_pairs": self.n_pairs, "ratio_d_p_p": stats(self.scaled),
                "overlap_d": stats(self.overlap)}


def _sample_functional(spec, s, initial, families_kind, beta):
    gen = rng.stream(spec.seed, s)
    d = spec.d
    if families_kind == "random":
        fams = [sample_random_family(d, r, gen=gen) for r in spec.ranks]
        H = None
    elif families_kind == "energy":
        fams = []
        for r in spec.ranks:
            edges = np.cumsum([0] + r)
            groups = [range(edges[i], edges[i + 1]) for i in range(len(r))]
            fams.append(ProjectorFamily.from_basis(np.eye(d), groups))
        H = np.diag(np.arange(d)).astype(complex)
    else:
        raise ValueError(f"unknown family kind {families_kind!r}")
    psi = initial_state(initial, d, gen, beta)
    sched = histories.EventSchedule(range(spec.n_events), fams, hamiltonian=H)
    return histories.decoherence_functional(sched, qops.ket_to_dm(psi))


def _sample_pairs(spec, s, initial, families_kind, beta, same_final_only):
    D = _sample_functional(spec, s, initial, families_kind, beta)
    diag = D.support_diagonal()
    live = np.flatnonzero(diag >= tol.get("diagonal_floor"))
    labels = np.array(D.support, dtype=int).reshape(-1, spec.n_events)[live]
    M = D._M[live]
    diag = diag[live]
    out_i, out_j, out_r = [], [], []
    # pairs sharing the final outcome are the only ones that can interfere
    groups = [np.flatnonzero(labels[:, -1] == x) for x in np.unique(labels[:, -1])] \
        if same_final_only else [np.arange(len(live))]
    if not same_final_only and len(live) > histories.MATERIALIZE_LIMIT:
        raise MemoryError("too many live histories per sample")
    for g in groups:
        if len(g) < 2:
            continue
        G = M[g] @ qops.dag(M[g]) / D.normalization
        iu, ju = np.triu_indices(len(g), k=1)
        out_i.append(g[iu])
        out_j.append(g[ju])
        out_r.append(np.abs(G[iu, ju]) ** 2 / (diag[g[iu]] * diag[g[ju]]))
    if not out_r:
        return np.zeros((0, 2, spec.n_events), dtype=int), np.zeros(0), np.zeros(0), np.zeros(0)
    i, j, r = np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_r)
    pairs = np.stack([labels[i], labels[j]], axis=1)
    return pairs, diag[i], diag[j], r


def typical_ratio_experiment(spec, initial="random", families="random", beta=1.0, same_final_only=True):
    """Collect off-diagonal ratios of history pairs over random samples.

    Pairs whose final outcomes differ have D = 0 identically (orthogonal final
    projectors) and are skipped unless ``same_final_only`` is False.
    """
    parts = [_sample_pairs(spec, s, initial, families, beta, same_final_only) for s in range(spec.samples)]
    sample = np.concatenate([np.full(len(pt[3]), s) for s, pt in enumerate(parts)])
    return TypicalRatioReport(
        spec, initial, sample.astype(int),
        np.concatenate([pt[0] for pt in parts]).reshape(-1, 2, spec.n_events),
        np.concatenate([pt[1] for pt in parts]),
        np.concatenate([pt[2] for pt in parts]),
        np.concatenate([pt[3] for pt in parts]),
    )


@dataclass
class CapacityReport:
    d: int
    threshold: float
    levels: list
    crossing_probability: float
    crossing_event_probability: float
    prediction: float

    @property
    def crossing_factor(self):
        if self.crossing_probability is None:
            return None
        return max(self.crossing_probability, self.prediction) / min(self.crossing_probability, self.prediction)


def _log_crossing(xs, ys, threshold):
    """Interpolate, in log-log, the x where y first rises through ``threshold``."""
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if (y0 - threshold) * (y1 - threshold) <= 0 and y0 != y1:
            t = (np.log(threshold) - np.log(y0)) / (np.log(y1) - np.log(y0))
            return float(np.exp(np.log(x0) + t * (np.log(x1) - np.log(x0))))
    return None


def information_capacity_check(d, n_events=2, ranks=None, samples=50, seed=0, threshold=0.1, initial="random"):
    """Sweep history fineness and locate where the median ratio crosses ``threshold``.

    Fineness is the block rank k of every event (coarse to fine).  For each
    level the typical history probability is the median of sqrt(p p') over
    recorded pairs, and the per-event outcome probability is k/d.  Both
    crossing scales are reported next to the prediction d^(-1/2).
    """
    if ranks is None:
        ranks = [k for k in (d // 2, d // 4, d // 8, d // 16, d // 32, 2, 1) if k >= 1]
        ranks = sorted(set(ranks), reverse=True)
    levels = []
    for k in ranks:
        spec = RandomScheduleSpec(d, n_events, equal_partition(d, k), samples, seed)
        rep = typical_ratio_experiment(spec, initial=initial)
        if rep.n_pairs == 0:
            levels.append({"rank": k, "median_ratio": None, "history_probability": None,
                           "event_probability": k / d})
            continue
        ratios = rep.ratio
        probs = np.sqrt(rep.p * rep.p_prime)
        levels.append({"rank": k, "median_ratio": float(np.median(ratios)),
                       "history_probability": float(np.median(probs)),
                       "event_probability": k / d, "n_pairs": rep.n_pairs})
    usable = [lv for lv in levels if lv["median_ratio"]]
    # order from coarse (large p, small ratio) to fine
    hist = _log_crossing([lv["history_probability"] for lv in usable],
                         [lv["median_ratio"] for lv in usable], threshold)
    event = _log_crossing([lv["event_probability"] for lv in usable],
                          [lv["median_ratio"] for lv in usable], threshold)
    return CapacityReport(d, threshold, levels, hist, event, d ** -0.5)


def haar_overlap_moments(d, rank, n, seed=0):
    """Reference moments of |P psi|^2 from uniformly random unit vectors.

    Independent of the family sampler: a Gaussian vector, normalized, has
    its first ``rank`` coordinates carry weight ~ Beta(rank, d - rank).
    """
    gen = np.random.default_rng(seed)
    v = gen.standard_normal((n, d)) + 1j * gen.standard_normal((n, d))
    w = (np.abs(v[:, :rank]) ** 2).sum(axis=1) / (np.abs(v) ** 2).sum(axis=1)
    return float(w.mean()), float(w.var())
