"""Pure-Python reflected Euler step loop; drop-in twin of the compiled kernel."""

from .lcp import OK, complete_step, lemke

BACKEND = "python"


def reflect_chunk(w, inc, r, w_out, dy_out, cap):
    """Advance the chain through ``inc.shape[0]`` steps, updating ``w`` in place.

    Returns ``(status, step)`` exactly like the compiled version.
    """
    n = inc.shape[1]
    rows = r.tolist()
    state = w.tolist()
    zeros = [0.0] * n
    for t, step in enumerate(inc.tolist()):
        q = [a + b for a, b in zip(state, step)]
        if min(q) >= 0.0:
            state = q
            w_out[t] = q
            dy_out[t] = zeros
            continue
        status, dy = lemke(q, rows, cap)
        if status != OK:
            w[:] = state
            return status, t
        state = complete_step(q, rows, dy)
        w_out[t] = state
        dy_out[t] = dy
    w[:] = state
    return OK, -1
