# Compiled dynamic programs for kernel change-point detection.
#
# Both routines work on suffixes: best[s] is the optimal cost of x[s:N], so a
# greedy forward walk that takes the smallest admissible next breakpoint
# reconstructs the lexicographically smallest optimal breakpoint vector.
# Segment cost must match _cpd_py.segment_costs operation for operation.
import numpy as np

from libc.math cimport INFINITY


cdef inline double _cost(const double[:, ::1] S, const double[::1] D,
                         Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return (D[b] - D[a]) - (S[b, b] - S[a, b] - S[b, a] + S[a, a]) / <double>(b - a)


def fixed_k(const double[:, ::1] S, const double[::1] D, Py_ssize_t k,
            Py_ssize_t min_size, double tol):
    cdef Py_ssize_t n = D.shape[0] - 1
    cdef Py_ssize_t j, s, t, s_hi
    cdef double v, best
    table = np.full((k + 2, n + 1), np.inf)
    cdef double[:, ::1] B = table
    B[0, n] = 0.0
    with nogil:
        for j in range(1, k + 2):
            s_hi = n - j * min_size
            s = 0
            while s <= s_hi:
                if j == k + 1 and s > 0:
                    break
                if s == 0 or s >= min_size:
                    best = INFINITY
                    for t in range(s + min_size, n + 1):
                        if B[j - 1, t] == INFINITY:
                            continue
                        v = _cost(S, D, s, t) + B[j - 1, t]
                        if v < best:
                            best = v
                    B[j, s] = best
                s += 1
    out = []
    s = 0
    for j in range(k + 1, 1, -1):
        best = B[j, s]
        for t in range(s + min_size, n + 1):
            if B[j - 1, t] == INFINITY:
                continue
            v = _cost(S, D, s, t) + B[j - 1, t]
            if v <= best + tol:
                out.append(t)
                s = t
                break
    return out, table[k + 1, 0]


def penalized(const double[:, ::1] S, const double[::1] D, double beta,
              Py_ssize_t min_size, double tol):
    cdef Py_ssize_t n = D.shape[0] - 1
    cdef Py_ssize_t s, t, i, m, n_cand
    cdef double v, best, c
    best_arr = np.full(n + 1, np.inf)
    kill_arr = np.full(n + 1, -1, dtype=np.intp)
    cand_arr = np.empty(n + 1, dtype=np.intp)
    cdef double[::1] G = best_arr
    cdef Py_ssize_t[::1] kill = kill_arr
    cdef Py_ssize_t[::1] cand = cand_arr
    G[n] = 0.0
    cand[0] = n
    n_cand = 1
    with nogil:
        s = n - min_size
        while s >= 0:
            if s == 0 or s >= min_size:
                best = INFINITY
                for i in range(n_cand):
                    t = cand[i]
                    if t - s >= min_size and s > kill[t]:
                        v = _cost(S, D, s, t) + beta + G[t]
                        if v < best:
                            best = v
                G[s] = best
                # a later breakpoint t is dominated by s for every start <= s - min_size
                m = 0
                for i in range(n_cand):
                    t = cand[i]
                    if t - s >= min_size and s > kill[t]:
                        c = _cost(S, D, s, t) + G[t]
                        if c > best + tol and s - min_size > kill[t]:
                            kill[t] = s - min_size
                    if s - 1 > kill[t]:
                        cand[m] = t
                        m += 1
                n_cand = m
                if s > 0 and s <= n - min_size:
                    cand[n_cand] = s
                    n_cand += 1
            s -= 1
    out = []
    s = 0
    while n - s >= min_size:
        best = G[s]
        for t in range(s + min_size, n + 1):
            if G[t] == INFINITY:
                continue
            v = _cost(S, D, s, t) + beta + G[t]
            if v <= best + tol:
                break
        if t == n:
            break
        out.append(t)
        s = t
    return out, best_arr[0]
