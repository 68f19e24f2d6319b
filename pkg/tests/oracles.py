"""Independent reference implementations used to cross-check the package.

Everything here is written directly from the published definitions with
deliberately different code shapes (plain loops, explicit dicts) so that a
shared bug between package and oracle is unlikely.
"""

from __future__ import annotations

import math
import re

_WORD = re.compile(r"[a-z0-9]+")


# ---------------------------------------------------------------------------
# AD mapping: brute-force all-pairs arithmetic


def _pick_piece(pieces, t):
    # pieces: list of (valid_from, valid_to, slope, offset)
    for vf, vt, s, o in pieces:
        if vf <= t < vt:
            return s, o
    if t < pieces[0][0]:
        return pieces[0][2], pieces[0][3]
    return pieces[-1][2], pieces[-1][3]


def _pick_piece_inverse(pieces, u):
    best = None
    best_dist = math.inf
    for vf, vt, s, o in pieces:
        lo = s * vf + o
        hi = math.inf if math.isinf(vt) else s * vt + o
        if lo <= u < hi:
            return s, o
        dist = (lo - u) if u < lo else (u - hi)
        if dist < best_dist:
            best_dist = dist
            best = (s, o)
    return best


def _olap(a0, a1, b0, b1):
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0:
        return 0.0
    shorter = min(a1 - a0, b1 - b0)
    return min(inter / shorter, 1.0)


def oracle_map_ads(ads1, ads2, pieces, threshold=0.5, buffer_s=1.0):
    """All-pairs mapping from the interval-overlap recipe.

    ads1/ads2: lists of (index, start, end); pieces as in _pick_piece.
    Returns (pairs dict {(i, j): overlap}, non_aligned_1 set, non_aligned_2 set).
    """
    found: dict[tuple[int, int], float] = {}
    for i, s1, e1 in ads1:
        slope, off = _pick_piece(pieces, s1)
        lo = slope * s1 + off - buffer_s
        hi = slope * e1 + off + buffer_s
        for j, s2, e2 in ads2:
            o = _olap(lo, hi, s2, e2)
            if o > threshold:
                if (i, j) not in found or o > found[(i, j)]:
                    found[(i, j)] = o
    for j, s2, e2 in ads2:
        slope, off = _pick_piece_inverse(pieces, s2)
        lo = (s2 - off) / slope - buffer_s
        hi = (e2 - off) / slope + buffer_s
        for i, s1, e1 in ads1:
            o = _olap(lo, hi, s1, e1)
            if o > threshold:
                if (i, j) not in found or o > found[(i, j)]:
                    found[(i, j)] = o
    na1 = {i for i, _, _ in ads1} - {i for i, _ in found}
    na2 = {j for j, _, _ in ads2} - {j for _, j in found}
    return found, na1, na2


# ---------------------------------------------------------------------------
# CIDEr from the definition


def _grams(text, n):
    toks = _WORD.findall(text.lower())
    out: dict[tuple, int] = {}
    for k in range(len(toks) - n + 1):
        g = tuple(toks[k : k + n])
        out[g] = out.get(g, 0) + 1
    return out


def oracle_cider(candidate, reference, corpus_texts, max_n=4):
    """Mean over n of 10 x cosine(tf-idf n-gram vectors)."""
    n_docs = len(corpus_texts)
    total = 0.0
    for n in range(1, max_n + 1):
        df: dict[tuple, int] = {}
        for doc in corpus_texts:
            for g in _grams(doc, n):
                df[g] = df.get(g, 0) + 1
        cv = _grams(candidate, n)
        rv = _grams(reference, n)
        dot = nc = nr = 0.0
        for g in sorted(set(list(cv) + list(rv))):
            idf = math.log(n_docs / max(df.get(g, 0), 1))
            a = cv.get(g, 0) * idf
            b = rv.get(g, 0) * idf
            dot += a * b
            nc += a * a
            nr += b * b
        if nc > 0 and nr > 0:
            total += 10.0 * dot / math.sqrt(nc * nr)
    return total / max_n


# ---------------------------------------------------------------------------
# Quadrant counting


def oracle_quadrants(points):
    """points: list of (b, c). Returns dict of percents plus medians."""

    def med(vals):
        vs = sorted(vals)
        m = len(vs) // 2
        if len(vs) % 2:
            return vs[m]
        return (vs[m - 1] + vs[m]) / 2.0

    mb = med([b for b, _ in points])
    mc = med([c for _, c in points])
    n = len(points)
    cells = {"hh": 0, "lh": 0, "ll": 0, "hl": 0}
    zero = 0
    for b, c in points:
        hb = b > mb
        hc = c > mc
        cells["hh" if hb and hc else "hl" if hb else "lh" if hc else "ll"] += 1
        if c == 0.0:
            zero += 1
    return {
        "median_b": mb,
        "median_c": mc,
        "hh": 100.0 * cells["hh"] / n,
        "lh": 100.0 * cells["lh"] / n,
        "ll": 100.0 * cells["ll"] / n,
        "hl": 100.0 * cells["hl"] / n,
        "zero": 100.0 * zero / n,
    }


# ---------------------------------------------------------------------------
# Answer metrics by hand count


def oracle_metrics(triples):
    """triples: list of (is_correct_choice, flag) where flag is the raw
    from-context string ("True"/"False"/"Unparsed"). Unparsed is both wrong
    and not-from-context regardless of is_correct_choice."""
    n = len(triples)
    ca = ac = cc = 0
    for ok, flag in triples:
        parsed = flag in ("True", "False")
        correct = ok and parsed
        used = parsed and flag == "True"
        ca += 1 if correct else 0
        ac += 1 if used else 0
        cc += 1 if correct and used else 0
    return 100.0 * ca / n, 100.0 * ac / n, 100.0 * cc / n


# ---------------------------------------------------------------------------
# Exhaustive monotone matching (small n) for anchor DP validation


def oracle_best_matching(cost, skip1, skip2):
    """Minimum-cost monotone matching between two sequences.

    cost[i][j] is the cost of pairing i with j; skipping element i of the
    first sequence costs skip1, of the second skip2. Exhaustive recursion,
    only viable for small inputs. Returns (total_cost, pairs)."""
    n1 = len(cost)
    n2 = len(cost[0]) if n1 else 0
    memo: dict[tuple[int, int], tuple[float, tuple]] = {}

    def go(i, j):
        if (i, j) in memo:
            return memo[(i, j)]
        if i == n1 and j == n2:
            res = (0.0, ())
        elif i == n1:
            res = (skip2 * (n2 - j), ())
        elif j == n2:
            res = (skip1 * (n1 - i), ())
        else:
            c_pair, p_pair = go(i + 1, j + 1)
            c_s1, p_s1 = go(i + 1, j)
            c_s2, p_s2 = go(i, j + 1)
            options = [
                (cost[i][j] + c_pair, ((i, j),) + p_pair),
                (skip1 + c_s1, p_s1),
                (skip2 + c_s2, p_s2),
            ]
            res = min(options, key=lambda x: x[0])
        memo[(i, j)] = res
        return res

    return go(0, 0)
