"""Compiled kernels for the circulation solver and shortest-path baselines.

All kernels operate on the flat doubled-arc representation: arc slot a and
its reverse twin a ^ 1, int64 costs/capacities/flows, CSR adjacency over
slots. Reduced cost of slot a is costs[a] + price[tail] - price[head]; a
slot is admissible when it is residual with negative reduced cost.
"""

import numpy as np
from numba import njit

INF64 = np.int64(2**62)


@njit(cache=True)
def set_relabel_kernel(tails, heads, costs, caps, flow, price, excess,
                       fixed, adj_start, adj_arcs, eps, round_limit,
                       fix_threshold):
    """Grow the admissible network backward from deficit nodes.

    Repeats: reverse-BFS from deficit nodes over admissible slots; if some
    excess node is not reached, raise the price of every reached node
    (deficit nodes included) by eps and retry. Marks the admissible slots
    on excess-to-deficit paths found by the final BFS.

    After every price raise, fixed slots whose reduced cost drifted back to
    within fix_threshold are released, so a fixed slot can never become
    admissible while still excluded from scans.
    """
    n = price.shape[0]
    two_m = tails.shape[0]
    marked = np.zeros(two_m, np.bool_)
    in_s = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    rounds = np.int64(0)
    relabels = np.int64(0)
    scanned = np.int64(0)
    while True:
        for v in range(n):
            in_s[v] = False
        for a in range(two_m):
            marked[a] = False
        qt = 0
        for v in range(n):
            if excess[v] < 0:
                in_s[v] = True
                queue[qt] = v
                qt += 1
        qh = 0
        while qh < qt:
            v = queue[qh]
            qh += 1
            for ii in range(adj_start[v], adj_start[v + 1]):
                a = adj_arcs[ii]
                t = a ^ 1  # slot whose head is v
                if fixed[t]:
                    continue
                scanned += 1
                if caps[t] - flow[t] > 0:
                    u = heads[a]  # tail of t
                    if costs[t] + price[u] - price[v] < 0:
                        marked[t] = True
                        if not in_s[u]:
                            in_s[u] = True
                            queue[qt] = u
                            qt += 1
        ok = True
        for v in range(n):
            if excess[v] > 0 and not in_s[v]:
                ok = False
                break
        if ok:
            return rounds, relabels, scanned, True, marked, in_s
        for v in range(n):
            if in_s[v]:
                price[v] += eps
                relabels += 1
        for a in range(two_m):
            if fixed[a]:
                cp = costs[a] + price[tails[a]] - price[heads[a]]
                if -fix_threshold <= cp <= fix_threshold:
                    fixed[a] = False
        rounds += 1
        if rounds > round_limit:
            return rounds, relabels, scanned, False, marked, in_s


@njit(cache=True)
def blocking_push_kernel(heads, costs, caps, flow, price, excess,
                         fixed, adj_start, adj_arcs, marked, budget):
    """Depth-first unit path pushes from excess nodes toward deficit nodes.

    Paths are hunted over admissible slots, marked (blocking) slots first,
    and saturated atomically once a deficit node is reached. Dead ends are
    pruned for the rest of the call; pruning is sound because price changes
    only happen in set-relabel, so the admissible network is a DAG that
    only shrinks here. Stops after the budget is exhausted (never before
    the first completed path). Status 1 flags an admissible cycle, which
    the scaling invariants rule out.
    """
    n = price.shape[0]
    dead = np.zeros(n, np.bool_)
    onpath = np.zeros(n, np.bool_)
    cur_m = adj_start[:n].copy()
    cur_u = adj_start[:n].copy()
    stack_nodes = np.empty(n + 1, np.int64)
    stack_arcs = np.empty(n + 1, np.int64)
    pushes = np.int64(0)
    paths = np.int64(0)
    scanned = np.int64(0)
    budget_hit = False
    for root in range(n):
        if budget_hit:
            break
        while excess[root] > 0 and not dead[root]:
            if paths > 0 and pushes >= budget:
                budget_hit = True
                break
            top = 0
            stack_nodes[0] = root
            onpath[root] = True
            reached = False
            while True:
                v = stack_nodes[top]
                a = np.int64(-1)
                while cur_m[v] < adj_start[v + 1]:
                    cand = adj_arcs[cur_m[v]]
                    if marked[cand]:
                        scanned += 1
                        if ((not fixed[cand]) and caps[cand] - flow[cand] > 0
                                and (not dead[heads[cand]])
                                and costs[cand] + price[v] - price[heads[cand]] < 0):
                            a = cand
                            break
                    cur_m[v] += 1
                if a == -1:
                    while cur_u[v] < adj_start[v + 1]:
                        cand = adj_arcs[cur_u[v]]
                        if not marked[cand]:
                            scanned += 1
                            if ((not fixed[cand]) and caps[cand] - flow[cand] > 0
                                    and (not dead[heads[cand]])
                                    and costs[cand] + price[v] - price[heads[cand]] < 0):
                                a = cand
                                break
                        cur_u[v] += 1
                if a == -1:
                    dead[v] = True
                    onpath[v] = False
                    if top == 0:
                        break
                    top -= 1
                    continue
                w = heads[a]
                if onpath[w]:
                    return pushes, paths, scanned, np.int64(1)
                stack_arcs[top] = a
                top += 1
                stack_nodes[top] = w
                onpath[w] = True
                if excess[w] < 0:
                    for k in range(top):
                        aa = stack_arcs[k]
                        flow[aa] += 1
                        flow[aa ^ 1] -= 1
                    excess[root] -= 1
                    excess[w] += 1
                    pushes += top
                    paths += 1
                    for k in range(top + 1):
                        onpath[stack_nodes[k]] = False
                    reached = True
                    break
            if not reached:
                break
    return pushes, paths, scanned, np.int64(0)


@njit(cache=True)
def admissible_topo_kernel(tails, heads, costs, caps, flow, price, fixed,
                           adj_start, adj_arcs):
    """Admissible-slot mask plus a topological node order (Kahn)."""
    n = adj_start.shape[0] - 1
    two_m = tails.shape[0]
    adm = np.zeros(two_m, np.bool_)
    indeg = np.zeros(n, np.int64)
    for a in range(two_m):
        if (not fixed[a]) and caps[a] - flow[a] > 0:
            if costs[a] + price[tails[a]] - price[heads[a]] < 0:
                adm[a] = True
                indeg[heads[a]] += 1
    order = np.empty(n, np.int64)
    qt = 0
    for v in range(n):
        if indeg[v] == 0:
            order[qt] = v
            qt += 1
    qh = 0
    while qh < qt:
        v = order[qh]
        qh += 1
        for ii in range(adj_start[v], adj_start[v + 1]):
            a = adj_arcs[ii]
            if adm[a]:
                w = heads[a]
                indeg[w] -= 1
                if indeg[w] == 0:
                    order[qt] = w
                    qt += 1
    return order, qt, adm, qt < n


@njit(cache=True)
def price_refine_pass_kernel(heads, costs, caps, flow, price, fixed,
                             adj_start, adj_arcs, order, delta, eps_target):
    """One relaxation pass of delta over residual slots, in node order.

    Relaxes delta[w] <= delta[v] + reduced_cost(v,w) + eps_target; a pass
    with no change certifies the target optimality is reachable by pure
    price updates.
    """
    changed = False
    for k in range(order.shape[0]):
        v = order[k]
        dv = delta[v]
        for ii in range(adj_start[v], adj_start[v + 1]):
            a = adj_arcs[ii]
            if fixed[a]:
                continue
            if caps[a] - flow[a] > 0:
                w = heads[a]
                nd = dv + costs[a] + price[v] - price[w] + eps_target
                if nd < delta[w]:
                    delta[w] = nd
                    changed = True
    return changed


@njit(cache=True)
def price_feasible_kernel(tails, heads, costs, caps, flow, price, fixed,
                          delta, eps_target):
    for a in range(tails.shape[0]):
        if fixed[a]:
            continue
        if caps[a] - flow[a] > 0:
            v = tails[a]
            w = heads[a]
            cp = costs[a] + price[v] - price[w] + delta[v] - delta[w]
            if cp < -eps_target:
                return False
    return True


# -- binary heap (array based, lazy deletion) --------------------------------

@njit(cache=True, inline="always")
def _heap_push(keys, nodes, size, key, node):
    i = size
    keys[i] = key
    nodes[i] = node
    while i > 0:
        p = (i - 1) // 2
        if keys[p] > keys[i]:
            keys[p], keys[i] = keys[i], keys[p]
            nodes[p], nodes[i] = nodes[i], nodes[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True, inline="always")
def _heap_pop(keys, nodes, size):
    key = keys[0]
    node = nodes[0]
    size -= 1
    keys[0] = keys[size]
    nodes[0] = nodes[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        small = i
        if left < size and keys[left] < keys[small]:
            small = left
        if right < size and keys[right] < keys[small]:
            small = right
        if small == i:
            break
        keys[small], keys[i] = keys[i], keys[small]
        nodes[small], nodes[i] = nodes[i], nodes[small]
        i = small
    return key, node, size


@njit(cache=True)
def dag_potentials_kernel(heads, costs, caps, adj_start, adj_arcs, order, pot, src):
    """Exact shortest distances from src at zero flow, relaxed in topological
    order; handles negative costs because the network is a DAG."""
    n = pot.shape[0]
    for v in range(n):
        pot[v] = INF64
    pot[src] = 0
    for k in range(order.shape[0]):
        v = order[k]
        if pot[v] >= INF64:
            continue
        for ii in range(adj_start[v], adj_start[v + 1]):
            a = adj_arcs[ii]
            if caps[a] > 0:
                w = heads[a]
                nd = pot[v] + costs[a]
                if nd < pot[w]:
                    pot[w] = nd


@njit(cache=True)
def dijkstra_kernel(heads, costs, caps, flow, adj_start, adj_arcs, pot,
                    src, dst, dist, parent, heap_keys, heap_nodes):
    """Residual Dijkstra under potentials, stopping once dst is settled.

    Status 1 reports a negative reduced cost, which the potential update
    invariant is supposed to rule out.
    """
    n = dist.shape[0]
    for v in range(n):
        dist[v] = INF64
        parent[v] = -1
    settled = np.zeros(n, np.bool_)
    size = 0
    dist[src] = 0
    size = _heap_push(heap_keys, heap_nodes, size, np.int64(0), src)
    status = np.int64(0)
    while size > 0:
        key, v, size = _heap_pop(heap_keys, heap_nodes, size)
        if settled[v]:
            continue
        settled[v] = True
        if v == dst:
            break
        for ii in range(adj_start[v], adj_start[v + 1]):
            a = adj_arcs[ii]
            if caps[a] - flow[a] > 0:
                w = heads[a]
                if not settled[w]:
                    rc = costs[a] + pot[v] - pot[w]
                    if rc < 0:
                        status = 1
                    nd = key + rc
                    if nd < dist[w]:
                        dist[w] = nd
                        parent[w] = a
                        size = _heap_push(heap_keys, heap_nodes, size, nd, w)
    return settled, status


@njit(cache=True)
def repair_dijkstra_kernel(heads, costs, caps, flow, adj_start, adj_arcs, pot,
                           valid, dst, dist, parent, heap_keys, heap_nodes):
    """Dijkstra restart that trusts still-valid labels from the prior tree.

    Valid nodes act as settled zero-distance sources (their old shortest
    path survives at reduced cost zero); only invalidated nodes are
    re-settled, seeded by residual boundary arcs.
    """
    n = dist.shape[0]
    settled = np.zeros(n, np.bool_)
    size = 0
    status = np.int64(0)
    for v in range(n):
        if valid[v]:
            dist[v] = 0
            settled[v] = True
        else:
            dist[v] = INF64
            parent[v] = -1
    for v in range(n):
        if valid[v]:
            for ii in range(adj_start[v], adj_start[v + 1]):
                a = adj_arcs[ii]
                if caps[a] - flow[a] > 0:
                    w = heads[a]
                    if not valid[w]:
                        rc = costs[a] + pot[v] - pot[w]
                        if rc < 0:
                            status = 1
                        if rc < dist[w]:
                            dist[w] = rc
                            parent[w] = a
                            size = _heap_push(heap_keys, heap_nodes, size, rc, w)
    while size > 0:
        key, v, size = _heap_pop(heap_keys, heap_nodes, size)
        if settled[v]:
            continue
        settled[v] = True
        if v == dst:
            break
        for ii in range(adj_start[v], adj_start[v + 1]):
            a = adj_arcs[ii]
            if caps[a] - flow[a] > 0:
                w = heads[a]
                if not settled[w]:
                    rc = costs[a] + pot[v] - pot[w]
                    if rc < 0:
                        status = 1
                    nd = key + rc
                    if nd < dist[w]:
                        dist[w] = nd
                        parent[w] = a
                        size = _heap_push(heap_keys, heap_nodes, size, nd, w)
    return settled, status
