"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations follow the same update order and stopping rule; they
agree to rounding error, not bit-for-bit.
"""

import numpy as np


def _row_lse(C, pot, eps):
    z = pot[None, :] - C
    mx = z.max(axis=1)
    return mx / eps + np.log(np.exp((z - mx[:, None]) / eps).sum(axis=1))


def sinkhorn_log(C, CT, a, b, eps, max_iter, tol, n_threads=1, f0=None, g0=None):
    """Log-domain Sinkhorn on dual potentials (f, g).

    (f0, g0) warm-start the potentials. Each sweep checks the row-marginal error of the current plan, then updates
    f (rows exact) and g (columns exact). Returns
    ``(f, g, iterations, marginal_error, converged)``.
    """
    n, m = C.shape
    f = np.zeros(n) if f0 is None else np.array(f0, dtype=np.float64)
    g = np.zeros(m) if g0 is None else np.array(g0, dtype=np.float64)
    log_a = np.log(a)
    log_b = np.log(b)
    it = 0
    while True:
        L = _row_lse(C, g, eps)
        err = float(np.max(np.abs(np.exp(f / eps + L) - a)))
        if err <= tol:
            return f, g, it, err, True
        if it >= max_iter:
            return f, g, it, err, False
        f = eps * (log_a - L)
        g = eps * (log_b - _row_lse(CT, f, eps))
        it += 1


def transport_plan(C, f, g, eps, n_threads=1):
    return np.exp((f[:, None] + g[None, :] - C) * (1.0 / eps))


def warp_bilinear(src, inv, src_x0, src_y0, dst_x0, dst_y0, out_h, out_w):
    """Inverse-map every destination pixel into ``src`` and sample bilinearly.

    ``inv`` (2x3) maps absolute destination coordinates to absolute source
    coordinates; ``src`` is anchored at (src_x0, src_y0). Outside taps are 0.
    """
    h, w, ch = src.shape
    ys, xs = np.mgrid[dst_y0:dst_y0 + out_h, dst_x0:dst_x0 + out_w].astype(np.float64)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2] - src_x0
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2] - src_y0
    ix = np.floor(sx).astype(np.intp)
    iy = np.floor(sy).astype(np.intp)
    fx = (sx - ix)[..., None]
    fy = (sy - iy)[..., None]
    padded = np.zeros((h + 2, w + 2, ch))
    padded[1:-1, 1:-1] = src
    live = (sx > -1.0) & (sy > -1.0) & (sx < w) & (sy < h)
    ix = np.where(live, ix, -1) + 1
    iy = np.where(live, iy, -1) + 1
    ix1 = np.minimum(ix + 1, w + 1)
    iy1 = np.minimum(iy + 1, h + 1)
    out = (1.0 - fy) * ((1.0 - fx) * padded[iy, ix] + fx * padded[iy, ix1]) + fy * (
        (1.0 - fx) * padded[iy1, ix] + fx * padded[iy1, ix1]
    )
    out[~live] = 0.0
    return out
