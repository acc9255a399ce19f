# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; mirror ``_pykernels`` draw for draw."""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, floor, log, log1p, pow
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND = "compiled"

DEF KIND_DELTA = 0
DEF KIND_BETA = 1
DEF KIND_PRODUNIF = 2
DEF KIND_INTERVAL = 3
DEF KIND_GEOM = 4
DEF POLICY_B = 0
DEF POLICY_WEIGHT = 1
DEF MAX_RECORDS = 10000000
DEF TINY = 2.2250738585072014e-308
DEF LOG_TINY = -708.3964185322641


class RunawayPath(RuntimeError):
    pass


cdef bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _u(bitgen_t* g) noexcept nogil:
    return g.next_double(g.state)


cdef inline double _factor(bitgen_t* g, int kind, double param) noexcept nogil:
    cdef double x, v, lo, hi, mid, f, q, am1
    cdef int i, d
    if kind == KIND_DELTA:
        return param
    if kind == KIND_BETA:
        if param == 1.0:
            return 1.0 - _u(g)
        return pow(1.0 - _u(g), 1.0 / param)
    if kind == KIND_PRODUNIF:
        d = <int> param
        x = 1.0
        for i in range(d):
            x *= 1.0 - _u(g)
        return x
    if kind == KIND_INTERVAL:
        v = 1.0 - _u(g)
        am1 = param - 1.0
        lo = log(v / param) / am1
        hi = log(v) / am1
        for i in range(64):
            mid = 0.5 * (lo + hi)
            f = param * exp(am1 * mid) - am1 * exp(param * mid)
            if f < v:
                lo = mid
            else:
                hi = mid
        x = param * (0.5 * (lo + hi))
        if x > LOG_TINY:
            return exp(x)
        return TINY
    # KIND_GEOM
    q = 1.0 - param
    return pow(q, 1.0 + floor(log1p(-_u(g)) / log(q)))


def simulate_policy(rng, int kind, double param, double r0, double horizon,
                    int policy, double policy_param, Py_ssize_t n):
    cdef bitgen_t* g = _bitgen(rng)
    cdef Py_ssize_t i, successes = 0, nonstops = 0
    cdef long records
    cdef double r, t
    cdef bint stop
    cdef int runaway = 0
    if kind < 0 or kind > KIND_GEOM:
        raise ValueError(f"no kernel for distribution kind {kind}")
    with rng.bit_generator.lock:
        with nogil:
            for i in range(n):
                r = r0
                t = 0.0
                records = 0
                while True:
                    t += -log1p(-_u(g)) / r
                    if t >= horizon:
                        nonstops += 1
                        break
                    r *= _factor(g, kind, param)
                    records += 1
                    if records > MAX_RECORDS:
                        runaway = 1
                        break
                    if policy == POLICY_B:
                        stop = (horizon - t) * r <= policy_param
                    elif policy == POLICY_WEIGHT:
                        stop = r <= policy_param
                    else:
                        stop = t > policy_param
                    if stop:
                        if t + -log1p(-_u(g)) / r >= horizon:
                            successes += 1
                        break
                if runaway:
                    break
    if runaway:
        raise RunawayPath("more than 1e7 records on one path")
    return successes, nonstops


def entrance_paths(rng, int kind, double param, double r0, double horizon, Py_ssize_t n):
    cdef bitgen_t* g = _bitgen(rng)
    cdef cnp.ndarray[double] final = np.empty(n)
    cdef cnp.ndarray[double] last = np.zeros(n)
    cdef cnp.ndarray[cnp.int64_t] counts = np.zeros(n, dtype=np.int64)
    cdef double[::1] fv = final
    cdef double[::1] lv = last
    cdef cnp.int64_t[::1] cv = counts
    cdef Py_ssize_t i
    cdef long k
    cdef double r, t, tl
    cdef int runaway = 0
    with rng.bit_generator.lock:
        with nogil:
            for i in range(n):
                r = r0
                t = 0.0
                k = 0
                tl = 0.0
                while True:
                    t += -log1p(-_u(g)) / r
                    if t >= horizon:
                        break
                    r *= _factor(g, kind, param)
                    tl = t
                    k += 1
                    if k > MAX_RECORDS:
                        runaway = 1
                        break
                if runaway:
                    break
                fv[i] = r
                lv[i] = tl
                cv[i] = k
    if runaway:
        raise RunawayPath("more than 1e7 records on one path")
    return final, last, counts


def simulate_discrete(rng, int kind, double param, double n_obs, double s, Py_ssize_t n):
    cdef bitgen_t* g = _bitgen(rng)
    cdef Py_ssize_t i, successes = 0, nonstops = 0
    cdef double j, r, gap
    with rng.bit_generator.lock:
        with nogil:
            for i in range(n):
                j = 1.0
                r = _factor(g, kind, param)
                while True:
                    if r * (n_obs - j) <= s:
                        gap = 1.0 + floor(log1p(-_u(g)) / log1p(-r))
                        if j + gap > n_obs:
                            successes += 1
                        break
                    j += 1.0 + floor(log1p(-_u(g)) / log1p(-r))
                    if j > n_obs:
                        nonstops += 1
                        break
                    r *= _factor(g, kind, param)
    return successes, nonstops


def chain_records_cube(rng, int d, double n_samples, bint skip):
    cdef bitgen_t* g = _bitgen(rng)
    cdef list weights = []
    cdef cnp.ndarray[double] box_arr = np.ones(d)
    cdef cnp.ndarray[double] cur_arr = np.ones(d)
    cdef cnp.ndarray[double] v_arr = np.ones(d)
    cdef double[::1] box = box_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] v = v_arr
    cdef double w = 1.0, used = 0.0
    cdef long long i, total
    cdef int c
    cdef bint first = True, below
    with rng.bit_generator.lock:
        if skip:
            while True:
                if w < 1.0:
                    used += 1.0 + floor(log1p(-_u(g)) / log1p(-w))
                else:
                    used += 1.0
                if used > n_samples:
                    break
                w = 1.0
                for c in range(d):
                    box[c] *= _u(g)
                    w *= box[c]
                weights.append(w)
            return np.array(weights)
        total = <long long> n_samples
        for i in range(total):
            for c in range(d):
                v[c] = _u(g)
            below = True
            if not first:
                for c in range(d):
                    if not v[c] < cur[c]:
                        below = False
                        break
            if first or below:
                first = False
                w = 1.0
                for c in range(d):
                    cur[c] = v[c]
                    w *= v[c]
                weights.append(w)
    return np.array(weights)


cdef inline void _interval_mark(bitgen_t* g, double alpha, double* left, double* length) noexcept nogil:
    cdef double first = pow(_u(g), 1.0 / (alpha - 1.0))
    length[0] = first * pow(_u(g), 1.0 / alpha)
    left[0] = _u(g) * (1.0 - length[0])


def chain_records_interval(rng, double alpha, double n_samples, bint skip):
    cdef bitgen_t* g = _bitgen(rng)
    cdef list weights = []
    cdef double a = 0.0, ln = 1.0, w = 1.0, used = 0.0
    cdef double left, length, ca = 0.0, cl = 0.0
    cdef long long i, total
    cdef bint first = True
    with rng.bit_generator.lock:
        if skip:
            while True:
                if w < 1.0:
                    used += 1.0 + floor(log1p(-_u(g)) / log1p(-w))
                else:
                    used += 1.0
                if used > n_samples:
                    break
                _interval_mark(g, alpha, &left, &length)
                a = a + left * ln
                ln = length * ln
                w = pow(ln, alpha)
                weights.append(w)
            return np.array(weights)
        total = <long long> n_samples
        for i in range(total):
            _interval_mark(g, alpha, &left, &length)
            if first or (left > ca and left + length < ca + cl):
                first = False
                ca = left
                cl = length
                weights.append(pow(length, alpha))
    return np.array(weights)


cdef inline double _density(int kind, double param, double norm, double x) noexcept nogil:
    if kind == KIND_BETA:
        return param * pow(x, param - 1.0)
    if kind == KIND_PRODUNIF:
        return pow(-log(x), param - 1.0) / norm
    return (param - 1.0) * (pow(x, -1.0 / param) - 1.0)


def march_trapezoid(int kind, double param, T_in, F_in, double v0, double f0):
    cdef double[::1] T = np.ascontiguousarray(T_in, dtype=float)
    cdef double[::1] F = np.ascontiguousarray(F_in, dtype=float)
    cdef Py_ssize_t n_nodes = T.shape[0], n, j
    cdef cnp.ndarray[double] out = np.empty(n_nodes)
    cdef double[::1] v = out
    cdef double h = T[1] - T[0], tn, rest, c, vn, f_prev = f0, norm = 1.0
    cdef int k
    if kind not in (KIND_BETA, KIND_PRODUNIF, KIND_INTERVAL):
        raise ValueError(f"no density kernel for kind {kind}")
    if kind == KIND_PRODUNIF:
        for k in range(1, <int> param):
            norm *= k
    v[0] = v0
    with nogil:
        for n in range(1, n_nodes):
            tn = T[n]
            rest = 0.5 * v[0] * _density(kind, param, norm, T[0] / tn)
            for j in range(1, n):
                rest += v[j] * _density(kind, param, norm, T[j] / tn)
            rest *= h / tn
            c = 0.5 * (h / tn) * _density(kind, param, norm, 1.0)
            vn = (v[n - 1] + 0.5 * h * (f_prev + rest + F[n])) / (1.0 + 0.5 * h * (1.0 - c))
            v[n] = vn
            f_prev = -vn + c * vn + rest + F[n]
    return out
