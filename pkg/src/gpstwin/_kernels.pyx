# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for synthesis and correlation.

Semantics are defined by the numpy versions in ``_purepy``; these loops
compute the same values sample by sample.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, cos, sin, M_PI

cnp.import_array()


def synth_accumulate(double complex[::1] out, long long k0, double fs, double h, long long seg_first,
                     const double[:, ::1] chip_c, const double[:, ::1] phase_c, const double[:, ::1] amp_c,
                     const signed char[::1] code, const signed char[::1] bits, long long chips_per_bit):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t nseg = chip_c.shape[0]
    cdef Py_ssize_t ncode = code.shape[0]
    cdef Py_ssize_t nbits = bits.shape[0]
    cdef Py_ssize_t i, j
    cdef long long k, ci, bi, jabs
    cdef double t, s, chips, ph, amp, v
    for i in range(n):
        k = k0 + i
        t = <double>k / fs
        jabs = <long long>floor(t / h)
        j = jabs - seg_first
        if j < 0 or j >= nseg:
            raise IndexError("sample outside supplied truth segments")
        s = t - <double>jabs * h
        chips = chip_c[j, 0] + s * (chip_c[j, 1] + s * (chip_c[j, 2] + s * chip_c[j, 3]))
        ci = <long long>floor(chips)
        bi = ci // chips_per_bit if ci >= 0 else -1
        if bi < 0 or bi >= nbits:
            raise IndexError("chip count outside navigation message")
        ph = phase_c[j, 0] + s * (phase_c[j, 1] + s * (phase_c[j, 2] + s * phase_c[j, 3]))
        amp = amp_c[j, 0] + amp_c[j, 1] * s
        v = amp * code[ci % ncode] * bits[bi]
        ph = 2.0 * M_PI * ph
        out[i] = out[i] + v * cos(ph) + 1j * (v * sin(ph))


def correlate_epl(const double complex[::1] x, Py_ssize_t start, Py_ssize_t n, const signed char[::1] code,
                  double chip0, double chip_step, double ph0, double ph_step, double spacing):
    cdef Py_ssize_t ncode = code.shape[0]
    cdef Py_ssize_t i
    cdef double c, ph, half = 0.5 * spacing
    cdef double complex e = 0, p = 0, l = 0, w
    cdef double cr, ci_, xr, xi, wr, wi
    cdef long long ie, ip, il
    if start < 0 or start + n > x.shape[0]:
        raise IndexError("correlation window outside sample buffer")
    for i in range(n):
        c = chip0 + i * chip_step
        ph = -2.0 * M_PI * (ph0 + i * ph_step)
        cr = cos(ph)
        ci_ = sin(ph)
        xr = x[start + i].real
        xi = x[start + i].imag
        wr = xr * cr - xi * ci_
        wi = xr * ci_ + xi * cr
        w = wr + 1j * wi
        ip = (<long long>floor(c)) % ncode
        ie = (<long long>floor(c + half)) % ncode
        il = (<long long>floor(c - half)) % ncode
        if ip < 0: ip += ncode
        if ie < 0: ie += ncode
        if il < 0: il += ncode
        p += w * code[ip]
        e += w * code[ie]
        l += w * code[il]
    return e, p, l
