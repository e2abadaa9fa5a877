# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled structural kernels (matching and strongly connected components)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.intp_t idx_t


def max_matching(indptr, indices, Py_ssize_t n_rows, Py_ssize_t n_cols):
    cdef idx_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.intp)
    cdef idx_t[::1] ind = np.ascontiguousarray(indices, dtype=np.intp)
    row_arr = np.full(n_rows, -1, dtype=np.intp)
    col_arr = np.full(n_cols, -1, dtype=np.intp)
    cdef idx_t[::1] row_match = row_arr
    cdef idx_t[::1] col_match = col_arr
    cdef idx_t[::1] visited = np.full(max(n_cols, 1), -1, dtype=np.intp)
    cdef idx_t[::1] st_row = np.empty(max(n_rows, 1), dtype=np.intp)
    cdef idx_t[::1] st_pos = np.empty(max(n_rows, 1), dtype=np.intp)
    cdef idx_t[::1] st_col = np.empty(max(n_rows, 1), dtype=np.intp)
    cdef Py_ssize_t r, k, c, root, depth, pos, end, nr, i
    cdef idx_t found
    cdef bint advanced

    for r in range(n_rows):
        for k in range(ptr[r], ptr[r + 1]):
            c = ind[k]
            if col_match[c] < 0:
                col_match[c] = r
                row_match[r] = c
                break

    for root in range(n_rows):
        if row_match[root] >= 0:
            continue
        depth = 1
        st_row[0] = root
        st_pos[0] = ptr[root]
        found = -1
        while depth > 0:
            r = st_row[depth - 1]
            pos = st_pos[depth - 1]
            end = ptr[r + 1]
            advanced = False
            while pos < end:
                c = ind[pos]
                pos += 1
                if visited[c] == root:
                    continue
                visited[c] = root
                st_pos[depth - 1] = pos
                st_col[depth - 1] = c
                if col_match[c] < 0:
                    found = c
                    break
                nr = col_match[c]
                st_row[depth] = nr
                st_pos[depth] = ptr[nr]
                depth += 1
                advanced = True
                break
            if found >= 0:
                break
            if not advanced:
                depth -= 1
        if found >= 0:
            for i in range(depth):
                row_match[st_row[i]] = st_col[i]
                col_match[st_col[i]] = st_row[i]
    return row_arr, col_arr


def strongly_connected(indptr, indices, Py_ssize_t n):
    cdef idx_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.intp)
    cdef idx_t[::1] ind = np.ascontiguousarray(indices, dtype=np.intp)
    cdef Py_ssize_t m = max(n, 1)
    cdef idx_t[::1] index = np.full(m, -1, dtype=np.intp)
    cdef idx_t[::1] low = np.zeros(m, dtype=np.intp)
    cdef char[::1] on_stack = np.zeros(m, dtype=np.int8)
    labels_arr = np.full(n, -1, dtype=np.intp)
    cdef idx_t[::1] labels = labels_arr
    cdef idx_t[::1] stack = np.empty(m, dtype=np.intp)
    cdef idx_t[::1] work_v = np.empty(m, dtype=np.intp)
    cdef idx_t[::1] work_p = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t sp = 0, wp = 0, counter = 0, count = 0
    cdef Py_ssize_t s, v, w, pos, u

    for s in range(n):
        if index[s] >= 0:
            continue
        index[s] = counter
        low[s] = counter
        counter += 1
        stack[sp] = s
        sp += 1
        on_stack[s] = 1
        work_v[0] = s
        work_p[0] = ptr[s]
        wp = 1
        while wp > 0:
            v = work_v[wp - 1]
            pos = work_p[wp - 1]
            if pos < ptr[v + 1]:
                w = ind[pos]
                work_p[wp - 1] = pos + 1
                if index[w] < 0:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = 1
                    work_v[wp] = w
                    work_p[wp] = ptr[w]
                    wp += 1
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            wp -= 1
            if wp > 0:
                u = work_v[wp - 1]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    sp -= 1
                    w = stack[sp]
                    on_stack[w] = 0
                    labels[w] = count
                    if w == v:
                        break
                count += 1
    return labels_arr, count
