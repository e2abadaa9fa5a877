"""Pure-Python structural kernels; same semantics as the compiled ``_kernels``.

Graphs are given in CSR form: row ``r`` has neighbours
``indices[indptr[r]:indptr[r + 1]]``, assumed sorted ascending.
"""

from __future__ import annotations

import numpy as np


def max_matching(indptr, indices, n_rows: int, n_cols: int):
    """Maximum bipartite matching by augmenting paths (Kuhn).

    Rows are processed in ascending order and columns are tried in the order
    stored, so the result is deterministic.  Returns ``(row_match, col_match)``
    with -1 for unmatched entries.
    """
    indptr = [int(a) for a in indptr]
    indices = [int(a) for a in indices]
    row_match = [-1] * n_rows
    col_match = [-1] * n_cols
    # cheap greedy pass first
    for r in range(n_rows):
        for k in range(indptr[r], indptr[r + 1]):
            c = indices[k]
            if col_match[c] < 0:
                col_match[c] = r
                row_match[r] = c
                break
    visited = [-1] * n_cols
    for root in range(n_rows):
        if row_match[root] >= 0:
            continue
        # iterative DFS over alternating paths; stack holds (row, next edge pos)
        stack_rows = [root]
        stack_pos = [indptr[root]]
        via_col = []
        found = -1
        while stack_rows:
            r = stack_rows[-1]
            pos = stack_pos[-1]
            end = indptr[r + 1]
            advanced = False
            while pos < end:
                c = indices[pos]
                pos += 1
                if visited[c] == root:
                    continue
                visited[c] = root
                stack_pos[-1] = pos
                if col_match[c] < 0:
                    found = c
                    via_col.append(c)
                    break
                via_col.append(c)
                nr = col_match[c]
                stack_rows.append(nr)
                stack_pos.append(indptr[nr])
                advanced = True
                break
            if found >= 0:
                break
            if not advanced:
                stack_rows.pop()
                stack_pos.pop()
                if via_col:
                    via_col.pop()
        if found >= 0:
            for r, c in zip(stack_rows, via_col):
                row_match[r] = c
                col_match[c] = r
    return np.array(row_match, dtype=np.intp), np.array(col_match, dtype=np.intp)


def strongly_connected(indptr, indices, n: int):
    """Tarjan's algorithm, iterative.  Returns (labels, count).

    Labels are assigned in completion order, so a component's label is larger
    than the labels of every component it can reach.
    """
    indptr = [int(a) for a in indptr]
    indices = [int(a) for a in indices]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    labels = [-1] * n
    stack = []
    counter = 0
    count = 0
    for s in range(n):
        if index[s] >= 0:
            continue
        work = [(s, indptr[s])]
        index[s] = low[s] = counter
        counter += 1
        stack.append(s)
        on_stack[s] = True
        while work:
            v, pos = work[-1]
            end = indptr[v + 1]
            if pos < end:
                w = indices[pos]
                work[-1] = (v, pos + 1)
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, indptr[w]))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    labels[w] = count
                    if w == v:
                        break
                count += 1
    return np.array(labels, dtype=np.intp), count
