"""Backend selection for the hot loops.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python module takes over.  Set ``SIMPLICITY_LAB_PURE=1`` to force
the fallback (the test-suite runs both and compares).
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("SIMPLICITY_LAB_PURE"):
        raise ImportError("pure backend requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"


def _i32(a):
    return np.ascontiguousarray(a, dtype=np.int32)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pfsg_stream_logloss(tokens, csr, start, n_states, end_id, backend=None):
    row_ptr, t_sym, t_dst, t_prob = csr
    if _use_c(backend):
        out = _ckernels.pfsg_stream_logloss(
            _i32(tokens), _i32(row_ptr), _i32(t_sym), _i32(t_dst), _f64(t_prob),
            int(start), int(n_states), int(end_id))
    else:
        out = _pykernels.pfsg_stream_logloss(
            list(map(int, tokens)), list(map(int, row_ptr)), list(map(int, t_sym)),
            list(map(int, t_dst)), list(map(float, t_prob)), int(start), int(n_states), int(end_id))
    return np.asarray(out, dtype=np.float64)


def pfsg_sample(csr_cum, start, uniforms, max_sentences, end_id, backend=None):
    """Return ``(transition indices, n_sentences)``."""
    row_ptr, t_sym, t_dst, t_cum = csr_cum
    uniforms = _f64(uniforms)
    out = np.zeros(len(uniforms), dtype=np.int32)
    if _use_c(backend):
        n, n_sent = _ckernels.pfsg_sample(
            _i32(row_ptr), _i32(t_sym), _i32(t_dst), _f64(t_cum), int(start),
            uniforms, int(max_sentences), int(end_id), out)
    else:
        buf = [0] * len(uniforms)
        n, n_sent = _pykernels.pfsg_sample(
            list(map(int, row_ptr)), list(map(int, t_sym)), list(map(int, t_dst)),
            list(map(float, t_cum)), int(start), uniforms.tolist(), int(max_sentences),
            int(end_id), buf)
        out[:] = buf
    return out[:n], n_sent


def inside_chart(tok, lex, binary, closure, has_unary, backend=None):
    """Return the full ``(n+1, n+1, n_sym)`` inside chart for ``tok``."""
    bin_lhs, bin_left, bin_right, bin_prob = binary
    n = len(tok)
    n_sym = closure.shape[0]
    if _use_c(backend):
        chart = np.zeros((n + 1, n + 1, n_sym))
        _ckernels.inside_chart(
            _i32(tok), _f64(lex), _i32(bin_lhs), _i32(bin_left), _i32(bin_right),
            _f64(bin_prob), _f64(closure), bool(has_unary), chart)
        return chart
    chart = np.zeros((n + 1, n + 1, n_sym)).tolist()
    _pykernels.inside_chart(
        list(map(int, tok)), np.asarray(lex, dtype=float).tolist(), list(map(int, bin_lhs)),
        list(map(int, bin_left)), list(map(int, bin_right)), list(map(float, bin_prob)),
        np.asarray(closure, dtype=float).tolist(), bool(has_unary), chart)
    return np.asarray(chart, dtype=np.float64)


def _use_c(backend):
    if backend is None:
        return _ckernels is not None
    if backend == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        return True
    if backend == "python":
        return False
    raise ValueError(f"unknown backend {backend!r}")
