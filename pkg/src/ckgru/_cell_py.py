"""Pure-NumPy recurrence kernel for the knowledge-gated GRU cell.

This is the fallback implementation of the hot loop; ckgru._cell_cy is the
compiled twin with identical semantics.  Everything that does not depend
on the previous hidden state (input/concept projections, biases) is
precomputed by the caller and passed in as per-step rows, so the kernel
only runs the sequential part:

    pre_r = gxr[t] + Wrh h          r = sigmoid(pre_r)
    pre_z = gxz[t] + Wzh h          z = sigmoid(pre_z)
    n  = tanh(pn[t]  + r * pm[t])
    nc = tanh(pcn[t] + r * pcm[t])
    h  = (1-z)*n + z*h + (1-z)*nc          (or the mean-combined variant)

Rows are in processing order; the caller handles direction reversal.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def seq_forward(gxr, gxz, pn, pm, pcn, pcm, wrh, wzh, mean_combine):
    """Run the recurrence; returns (H, R, Z, N, NC), each (k, h)."""
    k, h = gxr.shape
    H = np.empty((k, h))
    R = np.empty((k, h))
    Z = np.empty((k, h))
    N = np.empty((k, h))
    NC = np.empty((k, h))
    hprev = np.zeros(h)
    for t in range(k):
        r = _sigmoid(gxr[t] + wrh @ hprev)
        z = _sigmoid(gxz[t] + wzh @ hprev)
        n = np.tanh(pn[t] + r * pm[t])
        nc = np.tanh(pcn[t] + r * pcm[t])
        omz = 1.0 - z
        if mean_combine:
            hnew = omz * (0.5 * (n + nc)) + z * hprev
        else:
            hnew = omz * n + z * hprev + omz * nc
        R[t] = r
        Z[t] = z
        N[t] = n
        NC[t] = nc
        H[t] = hnew
        hprev = hnew
    return H, R, Z, N, NC


def seq_backward(dh_out, H, R, Z, N, NC, pm, pcm, wrh, wzh, mean_combine):
    """Backpropagate through the recurrence.

    `dh_out` is the upstream gradient per step.  Returns per-step
    gradients (dgxr, dgxz, dpn, dpm, dpcn, dpcm) plus the accumulated
    recurrent-weight gradients (dwrh, dwzh).
    """
    k, h = H.shape
    dgxr = np.empty((k, h))
    dgxz = np.empty((k, h))
    dpn = np.empty((k, h))
    dpm = np.empty((k, h))
    dpcn = np.empty((k, h))
    dpcm = np.empty((k, h))
    dwrh = np.zeros((h, h))
    dwzh = np.zeros((h, h))
    carry = np.zeros(h)
    zero = np.zeros(h)
    for t in range(k - 1, -1, -1):
        hprev = H[t - 1] if t > 0 else zero
        dh = dh_out[t] + carry
        r, z, n, nc = R[t], Z[t], N[t], NC[t]
        omz = 1.0 - z
        if mean_combine:
            dn = dh * omz * 0.5
            dnc = dn
            dz = dh * (hprev - 0.5 * (n + nc))
        else:
            dn = dh * omz
            dnc = dn
            dz = dh * (hprev - n - nc)
        dtn = dn * (1.0 - n * n)
        dtc = dnc * (1.0 - nc * nc)
        dpn[t] = dtn
        dpm[t] = dtn * r
        dpcn[t] = dtc
        dpcm[t] = dtc * r
        dr = dtn * pm[t] + dtc * pcm[t]
        dpre_r = dr * r * (1.0 - r)
        dpre_z = dz * z * omz
        dgxr[t] = dpre_r
        dgxz[t] = dpre_z
        dwrh += np.outer(dpre_r, hprev)
        dwzh += np.outer(dpre_z, hprev)
        carry = dh * z + wrh.T @ dpre_r + wzh.T @ dpre_z
    return dgxr, dgxz, dpn, dpm, dpcn, dpcm, dwrh, dwzh
