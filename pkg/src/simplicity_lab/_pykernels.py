"""Pure-Python versions of the hot loops.

Each function mirrors one in ``_ckernels.pyx`` argument for argument and
must produce bit-identical results; ``kernels.py`` picks one at import.
"""

import math


def pfsg_stream_logloss(tokens, row_ptr, t_sym, t_dst, t_prob, start, n_states, end_id):
    """Per-sentence ``-log2 P`` for an END-terminated stream of symbol ids.

    The forward vector is carried across sentence boundaries (an END
    transition may name a successor state).  A sentence of probability
    zero scores ``inf`` and the forward vector restarts at ``start``.
    """
    out = []
    alpha = [0.0] * n_states
    alpha[start] = 1.0
    loss = 0.0
    dead = False
    for tok in tokens:
        if not dead:
            new = [0.0] * n_states
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
                loss -= math.log2(c)
                for s in range(n_states):
                    alpha[s] = new[s] / c
            else:
                dead = True
                loss = math.inf
        if tok == end_id:
            out.append(loss)
            loss = 0.0
            if dead:
                dead = False
                for s in range(n_states):
                    alpha[s] = 0.0
                alpha[start] = 1.0
    return out


def pfsg_sample(row_ptr, t_sym, t_dst, t_cum, start, uniforms, max_sentences, end_id, out_trans):
    """Walk the automaton consuming one uniform per emitted symbol.

    Writes the chosen transition indices into ``out_trans`` and returns
    ``(n_tokens, n_sentences)``.  ``max_sentences < 0`` means unbounded.
    """
    s = start
    n_sent = 0
    n = 0
    for i in range(len(uniforms)):
        if 0 <= max_sentences <= n_sent:
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


def inside_chart(tok, lex, bin_lhs, bin_left, bin_right, bin_prob, closure, has_unary, chart):
    """Fill ``chart[i, j, A]`` with inside probabilities of span ``i..j``.

    ``lex[t, A]`` holds lexical rule probabilities, binary rules are given
    as parallel arrays and ``closure`` is the unary-chain closure matrix
    ``(I - U)^-1`` applied after every cell.
    """
    n = len(tok)
    n_sym = len(closure)
    n_bin = len(bin_lhs)
    tmp = [0.0] * n_sym
    for span in range(1, n + 1):
        for i in range(n - span + 1):
            j = i + span
            for a in range(n_sym):
                tmp[a] = 0.0
            if span == 1:
                row = lex[tok[i]]
                for a in range(n_sym):
                    tmp[a] = row[a]
            else:
                for r in range(n_bin):
                    left = bin_left[r]
                    right = bin_right[r]
                    acc = 0.0
                    for k in range(i + 1, j):
                        acc += chart[i][k][left] * chart[k][j][right]
                    tmp[bin_lhs[r]] += bin_prob[r] * acc
            cell = chart[i][j]
            if has_unary:
                for a in range(n_sym):
                    acc = 0.0
                    crow = closure[a]
                    for b in range(n_sym):
                        acc += crow[b] * tmp[b]
                    cell[a] = acc
            else:
                for a in range(n_sym):
                    cell[a] = tmp[a]
    return chart
