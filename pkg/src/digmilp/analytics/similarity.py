"""Histogram Jensen-Shannon similarity between instance corpora.

For each statistic, values of all corpora are binned on a shared range
(10 bins, last bin closed). The JS *distance* (square root of the divergence,
natural log) between the original corpus and each candidate is then mapped to
a score in [0, 1] by min-max rescaling over every (candidate, metric) pair,
and the nine scores are averaged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DegenerateRange, ValidationError
from .stats import METRICS, corpus_stats

log = logging.getLogger(__name__)

N_BINS = 10


def js_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    p = p / p.sum()
    q = q / q.sum()
    mid = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / mid[nz])))

    div = 0.5 * (kl(p) + kl(q))
    return float(np.sqrt(max(div, 0.0)))


def shared_histograms(samples, bins=N_BINS):
    """Histogram every sample on the pooled [min, max] range."""
    pooled = np.concatenate([np.asarray(s, dtype=np.float64) for s in samples])
    lo, hi = float(pooled.min()), float(pooled.max())
    return [np.histogram(s, bins=bins, range=(lo, hi))[0] for s in samples]


@dataclass
class SimilarityReport:
    distances: dict
    scores: dict
    score: float
    degenerate: bool = False
    name: str = ""

    def to_dict(self):
        return {"name": self.name, "score": self.score, "distances": self.distances, "scores": self.scores,
                "degenerate": self.degenerate}


def _as_stats(corpus) -> np.ndarray:
    arr = corpus if isinstance(corpus, np.ndarray) else corpus_stats(list(corpus))
    if arr.shape[0] == 0:
        raise ValidationError("empty corpus")
    return arr


def js_similarity(original, candidates, bins=N_BINS, names=None, strict=False) -> list[SimilarityReport]:
    """One report per candidate corpus. Corpora are instance lists or (k, 9) stat matrices."""
    if len(candidates) < 1:
        raise ValidationError("need at least one candidate corpus")
    orig = _as_stats(original)
    cands = [_as_stats(c) for c in candidates]
    dist = np.zeros((len(cands), len(METRICS)))
    for k in range(len(METRICS)):
        hists = shared_histograms([orig[:, k]] + [c[:, k] for c in cands], bins)
        for j in range(len(cands)):
            dist[j, k] = js_distance(hists[0], hists[j + 1])
    dmax, dmin = dist.max(), dist.min()
    degenerate = bool(dmax == dmin)
    if degenerate:
        if strict:
            raise DegenerateRange("all JS distances are equal; scores are undefined")
        log.warning("all JS distances equal (%g); scores set to 1.0", dmax)
        scores = np.ones_like(dist)
    else:
        scores = (dmax - dist) / (dmax - dmin)
    names = names or [f"candidate-{j}" for j in range(len(cands))]
    return [
        SimilarityReport(
            distances=dict(zip(METRICS, map(float, dist[j]))),
            scores=dict(zip(METRICS, map(float, scores[j]))),
            score=float(scores[j].mean()),
            degenerate=degenerate,
            name=names[j],
        )
        for j in range(len(cands))
    ]
