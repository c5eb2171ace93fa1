# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_pykernels.py``."""

from libc.math cimport log2, INFINITY


def pfsg_stream_logloss(const int[:] tokens, const int[:] row_ptr, const int[:] t_sym,
                        const int[:] t_dst, const double[:] t_prob, int start,
                        int n_states, int end_id):
    cdef Py_ssize_t i, s, t
    cdef int tok
    cdef double a, c, loss = 0.0
    cdef bint dead = False
    cdef double[:] alpha = _zeros(n_states)
    cdef double[:] new = _zeros(n_states)
    out = []
    alpha[start] = 1.0
    for i in range(tokens.shape[0]):
        tok = tokens[i]
        if not dead:
            for s in range(n_states):
                new[s] = 0.0
            for s in range(n_states):
                a = alpha[s]
                if a == 0.0:
                    continue
                for t in range(row_ptr[s], row_ptr[s + 1]):
                    if t_sym[t] == tok:
                        new[t_dst[t]] += a * t_prob[t]
            c = 0.0
            for s in range(n_states):
                c += new[s]
            if c > 0.0:
                loss -= log2(c)
                for s in range(n_states):
                    alpha[s] = new[s] / c
            else:
                dead = True
                loss = INFINITY
        if tok == end_id:
            out.append(loss)
            loss = 0.0
            if dead:
                dead = False
                for s in range(n_states):
                    alpha[s] = 0.0
                alpha[start] = 1.0
    return out


def pfsg_sample(const int[:] row_ptr, const int[:] t_sym, const int[:] t_dst,
                const double[:] t_cum, int start, const double[:] uniforms,
                long max_sentences, int end_id, int[:] out_trans):
    cdef Py_ssize_t i, n = 0
    cdef long n_sent = 0
    cdef int s = start, t, hi
    cdef double u
    for i in range(uniforms.shape[0]):
        if max_sentences >= 0 and n_sent >= max_sentences:
            break
        u = uniforms[i]
        t = row_ptr[s]
        hi = row_ptr[s + 1] - 1
        while t < hi and t_cum[t] <= u:
            t += 1
        out_trans[i] = t
        s = t_dst[t]
        if t_sym[t] == end_id:
            n_sent += 1
        n += 1
    return n, n_sent


def inside_chart(const int[:] tok, const double[:, :] lex, const int[:] bin_lhs,
                 const int[:] bin_left, const int[:] bin_right, const double[:] bin_prob,
                 const double[:, :] closure, bint has_unary, double[:, :, :] chart):
    cdef Py_ssize_t n = tok.shape[0]
    cdef Py_ssize_t n_sym = closure.shape[0]
    cdef Py_ssize_t n_bin = bin_lhs.shape[0]
    cdef Py_ssize_t span, i, j, k, a, b, r
    cdef int left, right
    cdef double acc
    cdef double[:] tmp = _zeros(n_sym)
    for span in range(1, n + 1):
        for i in range(n - span + 1):
            j = i + span
            for a in range(n_sym):
                tmp[a] = 0.0
            if span == 1:
                for a in range(n_sym):
                    tmp[a] = lex[tok[i], a]
            else:
                for r in range(n_bin):
                    left = bin_left[r]
                    right = bin_right[r]
                    acc = 0.0
                    for k in range(i + 1, j):
                        acc += chart[i, k, left] * chart[k, j, right]
                    tmp[bin_lhs[r]] += bin_prob[r] * acc
            if has_unary:
                for a in range(n_sym):
                    acc = 0.0
                    for b in range(n_sym):
                        acc += closure[a, b] * tmp[b]
                    chart[i, j, a] = acc
            else:
                for a in range(n_sym):
                    chart[i, j, a] = tmp[a]
    return chart


cdef double[:] _zeros(Py_ssize_t n):
    import array
    return array.array("d", bytes(8 * n))
