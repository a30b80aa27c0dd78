#!/usr/bin/env python3
# Copyright 2026 The Arbor Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent reference values for the frozen constants in the C++ tests.

Plain Python, no shared code with the library. Run it and compare against
the literals in tests/test_frozen.cpp.
"""

import itertools
import json
import math
from collections import deque


def depths_binary(levels):
    # Node ids in breadth-first creation order.
    parent = [None]
    for i in range(1, 2 ** levels - 1):
        parent.append((i - 1) // 2)
    out = []
    for i, p in enumerate(parent):
        d = 0
        while p is not None:
            d += 1
            p = parent[p]
        out.append(d)
    return out


def bfs(adj, s):
    dist = {s: 0}
    q = deque([s])
    while q:
        x = q.popleft()
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def cousin_distance():
    # root 0, children 1 and 2, grandchildren 3 (under 1) and 4 (under 2).
    edges = [(0, 1), (0, 2), (1, 3), (2, 4)]
    adj = {i: [] for i in range(5)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return bfs(adj, 3)[4]


def bucketed_u(top, other, vocab):
    ps = list(top) + [other]
    h = -sum(p * math.log(p) for p in ps if p > 0)
    return 1 - h / math.log(vocab)


def sigmoid(x):
    return 1 / (1 + math.exp(-x))


def weight(s, gamma, lam_d, d, lam_delta, delta):
    return s ** gamma * math.exp(-lam_d * d) * math.exp(-lam_delta * delta)


def ratio(alpha, eta, on_path, w, r_min):
    raw = alpha * (1 if on_path else eta) * w
    return min(1.0, max(r_min, raw))


def keep_count(r, n, k_min, l_tail):
    return min(n, max(k_min, min(l_tail, n), math.floor(r * n)))


def waterfill(w, caps, budget):
    lo, hi = 1e-12, 1e12
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        s = sum(min(c, wi / mid) for wi, c in zip(w, caps))
        if s > budget:
            lo = mid
        else:
            hi = mid
    lam = hi
    return lam, [min(c, wi / lam) for wi, c in zip(w, caps)]


def brute(w, lower, caps, budget):
    best = None
    for k in itertools.product(*[range(l, c + 1) for l, c in zip(lower, caps)]):
        if sum(k) != min(budget, sum(caps)):
            continue
        obj = -sum(wi * math.log(ki) for wi, ki in zip(w, k))
        if best is None or obj < best[0] - 1e-12:
            best = (obj, list(k))
    return best


def retained_example():
    a = [9, 0, 0, 7, 0, 0, 0]
    tail = [7, 8, 9]
    k = 5
    # Heavy: top-(k - |tail|) by A desc, then more recent first.
    ranked = sorted(range(7), key=lambda p: (-a[p], -p))
    heavy = sorted(ranked[: k - len(tail)])
    return tail, heavy


def main():
    lam, k = waterfill([4, 2, 1], [3, 10, 10], 8)
    tail, heavy = retained_example()
    out = {
        "binary_tree_depths": depths_binary(3),
        "cousin_distance": cousin_distance(),
        "u_top2_half_quarter_v16": bucketed_u([0.5, 0.25], 0.25, 16),
        "sigmoid_1_5": sigmoid(1.5),
        "w_s05_g2_ld05_D2": weight(0.5, 2, 0, 0, 0.5, 2),
        "r_on_a06_s08": ratio(0.6, 0.5, True, weight(0.8, 1, 0, 0, 0, 0), 0.0),
        "r_off_a06_s08_eta05": ratio(0.6, 0.5, False, weight(0.8, 1, 0, 0, 0, 0), 0.0),
        "keep_count_r03_n100_kmin4_ltail8": keep_count(0.3, 100, 4, 8),
        "keep_count_n2_kmin4_ltail8": keep_count(1.0, 2, 4, 8),
        "waterfill_anchor_lambda": lam,
        "waterfill_anchor_k": k,
        "brute_w421_lo111_cap3_10_10_B8": brute([4, 2, 1], [1, 1, 1], [3, 10, 10], 8),
        "retained_example_tail": tail,
        "retained_example_heavy": heavy,
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
