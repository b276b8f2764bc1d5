"""Independent brute-force reference implementations used by the tests.

Each one is written from the definition with plain Python loops and
``math.fsum`` so that it shares no code path with the package.
"""

import math

from transitlabel.model import Motion


def lowess_oracle(y, half_width):
    """Degree-1 tricube local regression, solved per window by the normal equations."""
    n = len(y)
    out = []
    for i in range(n):
        rows = []
        for j in range(max(0, i - half_width), min(n, i + half_width + 1)):
            u = abs(j - i) / (half_width + 1)
            w = (1 - u**3) ** 3
            rows.append((w, j - i, float(y[j])))
        sw = math.fsum(w for w, _, _ in rows)
        sx = math.fsum(w * x for w, x, _ in rows)
        sxx = math.fsum(w * x * x for w, x, _ in rows)
        sy = math.fsum(w * v for w, _, v in rows)
        sxy = math.fsum(w * x * v for w, x, v in rows)
        # weighted least squares intercept at x = 0 (the centre sample)
        out.append((sxx * sy - sx * sxy) / (sw * sxx - sx * sx))
    return out


def moving_average_oracle(x, window):
    n = len(x)
    left = window // 2
    out = []
    for i in range(n):
        vals = [float(x[j]) for j in range(i - left, i - left + window) if 0 <= j < n]
        out.append(math.fsum(vals) / len(vals))
    return out


def windowed_variance_oracle(x, window, stride):
    out = []
    for start in range(0, len(x) - window + 1, stride):
        vals = [float(v) for v in x[start:start + window]]
        mean = math.fsum(vals) / window
        out.append(math.fsum((v - mean) ** 2 for v in vals) / window)
    return out


def weighted_centroid_oracle(points, weights):
    total = math.fsum(weights)
    return (math.fsum(w * p[0] for p, w in zip(points, weights)) / total,
            math.fsum(w * p[1] for p, w in zip(points, weights)) / total)


def dbscan_oracle(points, eps, minpts):
    """Clusters as the reachability closure of the core-point graph.

    Border points go to the cluster with the lowest core index among those
    with a core within eps; clusters are ordered by their lowest core index.
    Returns (clusters as sorted index lists, noise set).
    """
    n = len(points)
    near = [[math.hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]) <= eps
             for j in range(n)] for i in range(n)]
    core = [sum(near[i]) >= minpts for i in range(n)]
    # transitive closure over core points (Warshall)
    reach = [[core[i] and core[j] and near[i][j] for j in range(n)] for i in range(n)]
    for i in range(n):
        if core[i]:
            reach[i][i] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                for j in range(n):
                    if reach[k][j]:
                        reach[i][j] = True
    comp_of = {}
    comps = []
    for i in range(n):
        if core[i] and i not in comp_of:
            members = [j for j in range(n) if reach[i][j]]
            for j in members:
                comp_of[j] = len(comps)
            comps.append(members)
    clusters = [set(c) for c in comps]
    for b in range(n):
        if core[b]:
            continue
        cands = [comp_of[c] for c in range(n) if core[c] and near[b][c]]
        if cands:
            clusters[min(cands, key=lambda k: min(comps[k]))].add(b)
    assigned = set().union(*clusters) if clusters else set()
    return [sorted(c) for c in clusters], set(range(n)) - assigned


# ---------------------------------------------------------------------------
# scripted motion sequences for the microphone gating contract

S, W, L = Motion.STATIONARY, Motion.NORMAL_WALK, Motion.SLOW_WALK


def script(*runs, dt=0.5):
    """Expand (state, seconds) runs into a state sequence sampled every ``dt``."""
    out, t = [], 0.0
    for state, seconds in runs:
        for _ in range(int(round(seconds / dt))):
            out.append((round(t, 6), state))
            t += dt
    return out


# (name, sequence, expected intervals) computed by hand from the contract:
# open 4 s into a stationary bout, close on the first non-stationary state or
# after 60 s of recording; a bout ending with the trace ends at its last entry.
GATING_CASES = [
    ("all walking", script((W, 30)), []),
    ("all slow walking", script((L, 30)), []),
    ("stationary 10-30 s", script((W, 10), (S, 20), (W, 10)), [(14.0, 30.0)]),
    ("stationary 0-200 s", script((S, 200), (W, 5)), [(4.0, 64.0)]),
    ("bout of exactly 4 s", script((W, 5), (S, 4), (W, 5)), []),
    ("bout of 4.5 s", script((W, 5), (S, 4.5), (W, 5)), [(9.0, 9.5)]),
    ("bout of 3 s", script((W, 5), (S, 3), (W, 5)), []),
    ("two bouts", script((W, 2), (S, 10), (W, 3), (S, 8), (W, 1)), [(6.0, 12.0), (19.0, 23.0)]),
    ("close on slow walk", script((W, 1), (S, 20), (L, 4)), [(5.0, 21.0)]),
    ("bout to trace end", script((W, 1), (S, 20)), [(5.0, 20.5)]),
    ("cap exactly 60 s", script((S, 64), (W, 2)), [(4.0, 64.0)]),
    ("cap one step short", script((S, 63.5), (W, 2)), [(4.0, 63.5)]),
    ("cap then resume", script((W, 3), (S, 100), (W, 3), (S, 10)), [(7.0, 67.0), (110.0, 115.5)]),
    ("walk blip splits bout", script((S, 10), (W, 0.5), (S, 10)), [(4.0, 10.0), (14.5, 20.0)]),
    ("slow blip splits bout", script((W, 1), (S, 6), (L, 0.5), (S, 6)), [(5.0, 7.0), (11.5, 13.0)]),
    ("short bouts only", script(*[(S, 2), (W, 1)] * 6), []),
    ("stationary from start", script((S, 30), (W, 3)), [(4.0, 30.0)]),
    ("alternating walk kinds", script((L, 2), (W, 2), (S, 12), (L, 2), (W, 2)), [(8.0, 16.0)]),
    ("single stationary entry", script((W, 2), (S, 0.5), (W, 2)), []),
    ("three capped bouts", script((S, 70), (W, 1), (S, 70), (W, 1), (S, 5), (W, 1)),
     [(4.0, 64.0), (75.0, 135.0), (146.0, 147.0)]),
]


# ---------------------------------------------------------------------------
# PDR resets against simulator truth


def true_landmark_resets(analysis, trace, truth):
    """Reset the base trail at each mappable detection to the true position.

    Yields (error before, error after) at the reset instant, the largest
    per-step change of the trail increments, the correction length and the
    largest deviation of the post-reset trail from a rigid shift.
    """
    import numpy as np
    from transitlabel.pdr import reset_at_landmark
    from transitlabel.pipeline import base_trail

    trail = base_trail(analysis)

    def truth_at(t):
        i = min(int(np.searchsorted(trace.t, t)), len(trace.t) - 1)
        return truth.position[i]

    for lb in analysis.mappable:
        t_r = float(np.clip(lb.anchor_t, trail.t[0], trail.t[-1]))
        landmark = tuple(float(v) for v in truth_at(t_r))
        est = trail.position_at(t_r)
        out = reset_at_landmark(trail, t_r, landmark)
        c = np.subtract(landmark, est)
        before = float(np.hypot(*(np.subtract(est, landmark))))
        after = float(np.hypot(*(np.subtract(out.position_at(t_r), landmark))))
        # compare on the original sample times
        ox = np.array([out.position_at(t)[0] for t in trail.t])
        oy = np.array([out.position_at(t)[1] for t in trail.t])
        jump = np.hypot(np.diff(ox) - np.diff(trail.x), np.diff(oy) - np.diff(trail.y))
        later = trail.t > t_r
        rigid = np.hypot(ox[later] - trail.x[later] - c[0], oy[later] - trail.y[later] - c[1])
        yield before, after, float(jump.max(initial=0.0)), float(np.hypot(*c)), float(rigid.max(initial=0.0))
