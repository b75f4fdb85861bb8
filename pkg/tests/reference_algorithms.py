"""Deliberately naive reference implementations used as test oracles.

These transcribe the two proximity-suppression procedures literally —
dictionary bookkeeping, quadratic scalar loops, no numpy — as an
independent code path against which the optimized implementations are
checked.  Keep them dumb; do not "improve" them.
"""

from __future__ import annotations

import math

LONE_BASE = 2.0


def _normalize_pair(bi, bj):
    """Per-axis min-max normalization over the union of both boxes' coords."""
    xs = (bi[0], bi[2], bj[0], bj[2])
    ys = (bi[1], bi[3], bj[1], bj[3])
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    xs_n = [((v - xlo) / (xhi - xlo)) if xhi - xlo > 0.0 else 0.0 for v in xs]
    ys_n = [((v - ylo) / (yhi - ylo)) if yhi - ylo > 0.0 else 0.0 for v in ys]
    return (xs_n[0], ys_n[0], xs_n[1], ys_n[1]), (xs_n[2], ys_n[2], xs_n[3], ys_n[3])


def proximity(bi, bj):
    """Normalized proximity between two (x1, y1, x2, y2) boxes."""
    ni, nj = _normalize_pair(bi, bj)
    return (abs(nj[0] - ni[0]) + abs(nj[1] - ni[1])) + (abs(nj[2] - ni[2]) + abs(nj[3] - ni[3]))


def _decay(score, p, ct, decay, sigma):
    if decay == "hard":
        return 0.0
    if decay == "linear":
        scaled = score * (p / ct)
        if scaled > score:
            scaled = score
        if scaled < 0.0:
            scaled = 0.0
        return scaled
    return score * (1.0 - math.exp(-(p * p) / sigma))


def _tie_key(item, primary):
    # primary key, then higher score, then lexicographic coords, then id
    return (primary, -item["score"], item["box"], item["sid"])


def naive_confluence(items, ct, decay="hard", sigma=0.5, floor=0.01):
    """Literal cluster-accumulation transcription.

    ``items``: list of dicts with keys box (x1,y1,x2,y2 tuple), score, sid.
    Returns list of (sid, final_score) in retention order.
    """
    pool = [dict(it) for it in items]
    neighbors = {}
    weighted = {}
    mean_cache = {}
    for bi in pool:
        psum = 0.0
        nset = []
        for bj in pool:
            if bj["sid"] == bi["sid"]:
                continue
            p = proximity(bi["box"], bj["box"])
            if p < ct:
                psum += p
                nset.append(bj["sid"])
        neighbors[bi["sid"]] = set(nset)
        if nset:
            mean_cache[bi["sid"]] = psum / len(nset)
            weighted[bi["sid"]] = mean_cache[bi["sid"]] * (1.0 - bi["score"])
        else:
            mean_cache[bi["sid"]] = None
            weighted[bi["sid"]] = LONE_BASE + 2.0 * (1.0 - bi["score"])

    kept = []
    while pool:
        best = min(pool, key=lambda it: _tie_key(it, weighted[it["sid"]]))
        kept.append((best["sid"], best["score"]))
        pool = [it for it in pool if it["sid"] != best["sid"]]
        if decay == "hard":
            pool = [it for it in pool if it["sid"] not in neighbors[best["sid"]]]
        else:
            survivors = []
            for it in pool:
                if it["sid"] in neighbors[best["sid"]]:
                    p = proximity(best["box"], it["box"])
                    new = _decay(it["score"], p, ct, decay, sigma)
                    if new < floor:
                        continue
                    it["score"] = new
                    weighted[it["sid"]] = mean_cache[it["sid"]] * (1.0 - new)
                survivors.append(it)
            pool = survivors
    return kept


def naive_confluence_nms(items, ct, decay="hard", sigma=0.5, floor=0.01):
    """Literal score-greedy transcription with the proximity test."""
    pool = [dict(it) for it in items]
    kept = []
    while pool:
        best = min(pool, key=lambda it: _tie_key(it, -it["score"]))
        kept.append((best["sid"], best["score"]))
        pool = [it for it in pool if it["sid"] != best["sid"]]
        survivors = []
        for it in pool:
            p = proximity(best["box"], it["box"])
            if p < ct:
                if decay == "hard":
                    continue
                new = _decay(it["score"], p, ct, decay, sigma)
                if new < floor:
                    continue
                it["score"] = new
            survivors.append(it)
        pool = survivors
    return kept
