"""Slow, literal reference implementation used only to check the engine."""
import math
from statistics import NormalDist, fmean

INF = math.inf


def pooled_interval(y, treat, level=0.95):
    c = [v for v, t in zip(y, treat) if not t]
    t = [v for v, t in zip(y, treat) if t]
    if len(c) < 2 or len(t) < 2:
        return None
    mc, mt = fmean(c), fmean(t)
    ss = sum((v - mc) ** 2 for v in c) + sum((v - mt) ** 2 for v in t)
    if ss <= 1e-300:
        return None
    var = ss / (len(c) + len(t) - 2)
    q = NormalDist().inv_cdf(0.5 + level / 2)
    half = q * math.sqrt(var * (1 / len(c) + 1 / len(t)))
    return mt - mc - half, mt - mc + half


def overlap(lo, hi, parts):
    total = 0.0
    for a, b in parts:
        left, right = max(lo, a), min(hi, b)
        if right > left:
            total += right - left
    return total


def alert(lo, hi, null_parts, meaningful_parts):
    code = 0
    if overlap(lo, hi, null_parts) == 0:
        code |= 1
    if overlap(lo, hi, meaningful_parts) == 0:
        code |= 2
    return code


def prism_one_sided(g1, g2):
    return [(-INF, g1)], [(g2, INF)]


def prism_two_sided(l2, l1, g1, g2):
    return [(l1, g1)], [(-INF, l2), (g2, INF)]


def monitor(y, treat, regions, W, S, A, N, mode="forward"):
    """Return (n_stop, affirmed_alert); alert 0 means no affirmed stop by N."""
    null_parts, meaningful = regions
    looks = list(range(W, N + 1, S))
    if looks[-1] != N:
        looks.append(N)
    codes = {}
    for n in range(W, N + 1):
        iv = pooled_interval(y[:n], treat[:n])
        codes[n] = None if iv is None else alert(iv[0], iv[1], null_parts, meaningful)

    if mode == "backward" and A > 0:
        for n in looks:
            c = codes[n]
            if not c or n - A < W:
                continue
            prior = codes[n - A]
            if prior and c & prior:
                return n, c & prior
        return N, 0

    pending, target = 0, None
    for n in looks:
        c = codes[n]
        if c is None:
            continue
        if pending and n < target:
            continue
        if pending:
            if c & pending:
                return n, c & pending
            pending = 0
            if not c:
                continue
        if c:
            if A == 0:
                return n, c
            pending, target = c, n + A
    return N, 0


def verdict(y, treat, regions, n, two_sided):
    iv = pooled_interval(y[:n], treat[:n])
    if iv is None:
        return 0, False
    lo, hi = iv
    code = alert(lo, hi, *regions)
    reject = (lo > 0 or hi < 0) if two_sided else lo > 0
    # for PRISM-type designs the alert code doubles as the conclusion code
    return code, reject


def trial(y, treat, regions, W, S, A, N, lag, mode="forward", two_sided=False):
    """Stop look, affirmed alert and (conclusion, reject) at the stop and final analyses."""
    n_stop, code = monitor(y, treat, regions, W, S, A, N, mode)
    n_final = min(n_stop + lag, N)
    return (n_stop, code, verdict(y, treat, regions, n_stop, two_sided),
            verdict(y, treat, regions, n_final, two_sided))
