# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gibbs sweep kernel. Semantics are defined by ``_sweep_py``."""

from libc.math cimport exp, log, sqrt, isfinite, cos, sin
from libc.stdint cimport uint64_t
from scipy.special.cython_special cimport ndtr, ndtri, log_ndtr

cdef double TAIL_CUTOFF = 6.0
cdef double U_EPS = 5.551115123125783e-17  # 2**-54
cdef double HALF_LOG_2PI = 0.9189385332046727
cdef double TWO_PI = 6.283185307179586
cdef int MAX_SHRINK = 200


cdef inline uint64_t _splitmix(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _u01(uint64_t bits) nogil:
    return ((bits >> 11) + 0.5) * 1.1102230246251565e-16  # 2**-53


cdef double _std_lower_tail(double a, double u, uint64_t seed) nogil:
    cdef double z, lam
    cdef uint64_t state = seed
    if a <= TAIL_CUTOFF:
        if u < U_EPS:
            u = U_EPS
        if u > 1.0 - U_EPS:
            u = 1.0 - U_EPS
        z = -ndtri(u * ndtr(-a))
        return z if z > a else a
    lam = 0.5 * (a + sqrt(a * a + 4.0))
    while True:
        z = a - log(_u01(_splitmix(&state))) / lam
        if _u01(_splitmix(&state)) <= exp(-0.5 * (z - lam) * (z - lam)):
            return z


cdef inline double _lognorm(double y, double m, double v) nogil:
    return -0.5 * (y - m) * (y - m) / v - 0.5 * log(v) - HALF_LOG_2PI


cdef inline double _expit(double x) nogil:
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    return exp(x) / (1.0 + exp(x))


cdef inline double _act(double w, int activation) nogil:
    return w if (activation == 1 or w > 0.0) else 0.0


cdef double _quad(const double[::1] Q, Py_ssize_t q0, double* v, Py_ssize_t n) nogil:
    cdef Py_ssize_t a, b
    cdef double acc = 0.0, row
    for a in range(n):
        row = 0.0
        for b in range(n):
            row = row + Q[q0 + a * n + b] * v[b]
        acc = acc + v[a] * row
    return -0.5 * acc


cdef void _elliptical(double[::1] vals, const double[::1] Q, const long[::1] qoff,
                      double[::1] r, const long[::1] roff, const long[::1] nf,
                      const long[:, ::1] btab, const double[::1] Lc, double[::1] work,
                      long b0, long nb, long gp, long loff, long gd, int activation,
                      uint64_t seed) nogil:
    cdef uint64_t state = seed
    cdef Py_ssize_t k, m, it
    cdef Py_ssize_t nd = nf[gd], rd0 = roff[gd], qd0 = qoff[gd], rp0 = roff[gp]
    cdef double* w0 = &work[0]
    cdef double* nu = &work[nb]
    cdef double* wp = &work[2 * nb]
    cdef double* base = &work[3 * nb]
    cdef double* rr = &work[3 * nb + nd]
    cdef double logy, theta, lo, hi, acc, ll
    cdef int accepted = 0
    for k in range(nb):
        w0[k] = vals[btab[b0 + k, 0]]
        wp[k] = ndtri(_u01(_splitmix(&state)))
    for k in range(nb):
        acc = 0.0
        for m in range(k + 1):
            acc = acc + Lc[loff + k * nb + m] * wp[m]
        nu[k] = acc
    for k in range(nd):
        base[k] = r[rd0 + k]
        rr[k] = r[rd0 + k]
    for k in range(nb):
        base[btab[b0 + k, 3]] += vals[btab[b0 + k, 1]] * _act(w0[k], activation)
    logy = _quad(Q, qd0, rr, nd) + log(_u01(_splitmix(&state)))
    theta = TWO_PI * _u01(_splitmix(&state))
    lo = theta - TWO_PI
    hi = theta
    for it in range(MAX_SHRINK):
        for k in range(nd):
            rr[k] = base[k]
        for k in range(nb):
            wp[k] = w0[k] * cos(theta) + nu[k] * sin(theta)
            rr[btab[b0 + k, 3]] -= vals[btab[b0 + k, 1]] * _act(wp[k], activation)
        ll = _quad(Q, qd0, rr, nd)
        if ll > logy:
            accepted = 1
            break
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = lo + (hi - lo) * _u01(_splitmix(&state))
    if accepted:
        for k in range(nb):
            vals[btab[b0 + k, 0]] = wp[k]
            r[rp0 + btab[b0 + k, 2]] += wp[k] - w0[k]
        for k in range(nd):
            r[rd0 + k] = rr[k]


def run_sweeps(double[::1] vals, const double[::1] Q, const long[::1] qoff,
               double[::1] r, const long[::1] roff, const long[::1] nf,
               const long[:, ::1] steps, int activation,
               const double[:, :, ::1] U, const double[:, ::1] Z,
               const uint64_t[:, ::1] seeds, const long[::1] rec_idx,
               double[:, ::1] out, const long[:, ::1] btab, const double[::1] Lc,
               double[::1] work):
    cdef Py_ssize_t n_iter = Z.shape[0], n_steps = Z.shape[1], n_rec = rec_idx.shape[0]
    cdef Py_ssize_t it, s, k, n, q0, r0
    cdef long kind, vi, oi, gp, jp, gd, jd
    cdef double acc, mp, s2p, md, s2d, w, f, rho, y, var_pos, mu_pos, w_new, rho_new
    cdef double log_ratio, sd_pos, sd_neg, pi, z, prec, mean, f_new
    cdef int bad = -1
    with nogil:
        for it in range(n_iter):
            for s in range(n_steps):
                kind = steps[s, 0]
                vi = steps[s, 1]
                oi = steps[s, 2]
                gp = steps[s, 3]
                jp = steps[s, 4]
                gd = steps[s, 5]
                jd = steps[s, 6]

                if kind == 2:
                    _elliptical(vals, Q, qoff, r, roff, nf, btab, Lc, work,
                                vi, oi, gp, jp, gd, activation, seeds[it, s])
                    continue

                n = nf[gp]
                q0 = qoff[gp] + jp * n
                r0 = roff[gp]
                acc = 0.0
                for k in range(n):
                    acc = acc + Q[q0 + k] * r[r0 + k]
                s2p = 1.0 / Q[q0 + jp]
                mp = r[r0 + jp] - acc * s2p + (vals[vi] - r[r0 + jp])

                n = nf[gd]
                q0 = qoff[gd] + jd * n
                r0 = roff[gd]
                acc = 0.0
                for k in range(n):
                    acc = acc + Q[q0 + k] * r[r0 + k]
                s2d = 1.0 / Q[q0 + jd]
                md = r[r0 + jd] - acc * s2d

                if kind == 0:
                    w = vals[vi]
                    f = vals[oi]
                    rho = w if (activation == 1 or w > 0.0) else 0.0
                    y = r[roff[gd] + jd] + f * rho - md
                    var_pos = 1.0 / (1.0 / s2p + f * f / s2d)
                    mu_pos = var_pos * (mp / s2p + f * y / s2d)
                    if activation == 1:
                        w_new = mu_pos + sqrt(var_pos) * Z[it, s]
                    else:
                        log_ratio = _lognorm(y, mp * f, s2d + f * f * s2p) - _lognorm(y, 0.0, s2d)
                        sd_pos = sqrt(var_pos)
                        sd_neg = sqrt(s2p)
                        pi = _expit(log_ndtr(mu_pos / sd_pos) + log_ratio - log_ndtr(-mp / sd_neg))
                        if U[it, s, 0] < pi:
                            z = _std_lower_tail(-mu_pos / sd_pos, U[it, s, 1], seeds[it, s])
                            w_new = mu_pos + sd_pos * z
                            if w_new < 0.0:
                                w_new = 0.0
                        else:
                            z = _std_lower_tail(mp / sd_neg, U[it, s, 1], seeds[it, s])
                            w_new = mp - sd_neg * z
                            if w_new > 0.0:
                                w_new = 0.0
                    rho_new = w_new if (activation == 1 or w_new > 0.0) else 0.0
                    r[roff[gp] + jp] += w_new - w
                    r[roff[gd] + jd] -= f * (rho_new - rho)
                    vals[vi] = w_new
                else:
                    f = vals[vi]
                    w = vals[oi]
                    rho = w if (activation == 1 or w > 0.0) else 0.0
                    y = r[roff[gd] + jd] + rho * f - md
                    prec = 1.0 / s2p + rho * rho / s2d
                    mean = (mp / s2p + rho * y / s2d) / prec
                    f_new = mean + Z[it, s] / sqrt(prec)
                    r[roff[gp] + jp] += f_new - f
                    r[roff[gd] + jd] -= rho * (f_new - f)
                    vals[vi] = f_new
            for k in range(n_rec):
                if not isfinite(vals[rec_idx[k]]):
                    bad = it
                    break
                out[it, k] = vals[rec_idx[k]]
            if bad >= 0:
                break
    return bad
