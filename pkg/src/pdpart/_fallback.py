"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

``crp_path`` consumes uniforms one at a time from the BitGenerator with
the same ``(raw >> 11) * 2**-53`` mapping the C side uses, so for a PCG64
stream both implementations return identical trajectories and leave the
generator in the same state.
"""
import numpy as np

_INV_2_53 = 1.0 / 9007199254740992.0


def crp_path(bit_generator, alpha, theta, checkpoints, l_max):
    """Run one trajectory and record (K_n, M_{1..l_max,n}) at each checkpoint."""
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    raw = bit_generator.random_raw
    out_k = np.zeros(len(checkpoints), dtype=np.int64)
    out_m = np.zeros((len(checkpoints), l_max), dtype=np.int64)
    label = []
    bsize = []
    mult = [0] * (l_max + 2)
    n = 0
    k = 0
    for c, target in enumerate(checkpoints.tolist()):
        while n < target:
            if n == 0:
                b = k
                k += 1
                bsize.append(0)
            elif (raw() >> 11) * _INV_2_53 * (theta + n) < theta + k * alpha:
                b = k
                k += 1
                bsize.append(0)
            else:
                while True:
                    b = label[int((raw() >> 11) * _INV_2_53 * n)]
                    s = bsize[b]
                    if (raw() >> 11) * _INV_2_53 * s < s - alpha:
                        break
            s = bsize[b]
            if 1 <= s <= l_max:
                mult[s] -= 1
            if s + 1 <= l_max:
                mult[s + 1] += 1
            bsize[b] = s + 1
            label.append(b)
            n += 1
        out_k[c] = k
        out_m[c, :] = mult[1:l_max + 1]
    return out_k, out_m


def law_kn_logprob(alpha, theta, n):
    """log P(K_n = k) for k = 0..n via the one-step predictive recursion."""
    lp = np.full(n + 1, -np.inf)
    lp[1] = 0.0
    ks = np.arange(n + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_new = np.log(theta + (ks - 1.0) * alpha)  # entry k: new block given k-1 blocks
        for m in range(1, n):
            denom = np.log(theta + m)
            stay_w = m - ks[1:m + 1] * alpha
            stay = np.where(stay_w > 0, lp[1:m + 1] + np.log(np.where(stay_w > 0, stay_w, 1.0)), -np.inf)
            move = lp[1:m + 1] + log_new[2:m + 2]
            new = np.full(m + 2, -np.inf)
            new[1:m + 1] = stay
            new[2:m + 2] = np.logaddexp(new[2:m + 2], move)
            lp[:m + 2] = new - denom
    return lp
