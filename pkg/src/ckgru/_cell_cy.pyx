# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrence kernel for the knowledge-gated GRU cell.

Same contract as ckgru._cell_py; see that module for the math.  The
pre-activations that depend only on the inputs are precomputed by the
caller; this kernel runs the sequential hidden-state loop in C.
"""

from libc.math cimport exp, tanh

import numpy as np


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def seq_forward(double[:, ::1] gxr, double[:, ::1] gxz,
                double[:, ::1] pn, double[:, ::1] pm,
                double[:, ::1] pcn, double[:, ::1] pcm,
                double[:, ::1] wrh, double[:, ::1] wzh,
                bint mean_combine):
    cdef Py_ssize_t k = gxr.shape[0]
    cdef Py_ssize_t h = gxr.shape[1]
    H_arr = np.empty((k, h))
    R_arr = np.empty((k, h))
    Z_arr = np.empty((k, h))
    N_arr = np.empty((k, h))
    NC_arr = np.empty((k, h))
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] Z = Z_arr
    cdef double[:, ::1] N = N_arr
    cdef double[:, ::1] NC = NC_arr
    hprev_arr = np.zeros(h)
    cdef double[::1] hprev = hprev_arr
    cdef Py_ssize_t t, j, l
    cdef double acc_r, acc_z, r, z, n, nc, omz, hnew
    with nogil:
        for t in range(k):
            for j in range(h):
                acc_r = gxr[t, j]
                acc_z = gxz[t, j]
                for l in range(h):
                    acc_r += wrh[j, l] * hprev[l]
                    acc_z += wzh[j, l] * hprev[l]
                r = _sig(acc_r)
                z = _sig(acc_z)
                n = tanh(pn[t, j] + r * pm[t, j])
                nc = tanh(pcn[t, j] + r * pcm[t, j])
                omz = 1.0 - z
                if mean_combine:
                    hnew = omz * (0.5 * (n + nc)) + z * hprev[j]
                else:
                    hnew = omz * n + z * hprev[j] + omz * nc
                R[t, j] = r
                Z[t, j] = z
                N[t, j] = n
                NC[t, j] = nc
                H[t, j] = hnew
            for j in range(h):
                hprev[j] = H[t, j]
    return H_arr, R_arr, Z_arr, N_arr, NC_arr


def seq_backward(double[:, ::1] dh_out, double[:, ::1] H,
                 double[:, ::1] R, double[:, ::1] Z,
                 double[:, ::1] N, double[:, ::1] NC,
                 double[:, ::1] pm, double[:, ::1] pcm,
                 double[:, ::1] wrh, double[:, ::1] wzh,
                 bint mean_combine):
    cdef Py_ssize_t k = H.shape[0]
    cdef Py_ssize_t h = H.shape[1]
    dgxr_arr = np.empty((k, h))
    dgxz_arr = np.empty((k, h))
    dpn_arr = np.empty((k, h))
    dpm_arr = np.empty((k, h))
    dpcn_arr = np.empty((k, h))
    dpcm_arr = np.empty((k, h))
    dwrh_arr = np.zeros((h, h))
    dwzh_arr = np.zeros((h, h))
    cdef double[:, ::1] dgxr = dgxr_arr
    cdef double[:, ::1] dgxz = dgxz_arr
    cdef double[:, ::1] dpn = dpn_arr
    cdef double[:, ::1] dpm = dpm_arr
    cdef double[:, ::1] dpcn = dpcn_arr
    cdef double[:, ::1] dpcm = dpcm_arr
    cdef double[:, ::1] dwrh = dwrh_arr
    cdef double[:, ::1] dwzh = dwzh_arr
    carry_arr = np.zeros(h)
    nxt_arr = np.zeros(h)
    cdef double[::1] carry = carry_arr
    cdef double[::1] nxt = nxt_arr
    cdef Py_ssize_t t, j, l
    cdef double dh, r, z, n, nc, omz, dn, dnc, dz, dtn, dtc, dr, dpr, dpz, hp
    with nogil:
        for t in range(k - 1, -1, -1):
            for j in range(h):
                nxt[j] = 0.0
            for j in range(h):
                dh = dh_out[t, j] + carry[j]
                r = R[t, j]
                z = Z[t, j]
                n = N[t, j]
                nc = NC[t, j]
                omz = 1.0 - z
                hp = H[t - 1, j] if t > 0 else 0.0
                if mean_combine:
                    dn = dh * omz * 0.5
                    dnc = dn
                    dz = dh * (hp - 0.5 * (n + nc))
                else:
                    dn = dh * omz
                    dnc = dn
                    dz = dh * (hp - n - nc)
                dtn = dn * (1.0 - n * n)
                dtc = dnc * (1.0 - nc * nc)
                dpn[t, j] = dtn
                dpm[t, j] = dtn * r
                dpcn[t, j] = dtc
                dpcm[t, j] = dtc * r
                dr = dtn * pm[t, j] + dtc * pcm[t, j]
                dpr = dr * r * (1.0 - r)
                dpz = dz * z * omz
                dgxr[t, j] = dpr
                dgxz[t, j] = dpz
                nxt[j] += dh * z
                if t > 0:
                    for l in range(h):
                        dwrh[j, l] += dpr * H[t - 1, l]
                        dwzh[j, l] += dpz * H[t - 1, l]
                for l in range(h):
                    nxt[l] += wrh[j, l] * dpr + wzh[j, l] * dpz
            for j in range(h):
                carry[j] = nxt[j]
    return dgxr_arr, dgxz_arr, dpn_arr, dpm_arr, dpcn_arr, dpcm_arr, dwrh_arr, dwzh_arr
