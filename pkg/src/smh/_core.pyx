# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain and acceptance-trial loops for the built-in GLM models.

Mirrors the pure-Python engine in ``acceptance.py`` step for step,
including the order in which random numbers are drawn, so both backends
produce the same chains from the same generator state.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log1p, fabs, fmax, INFINITY
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_uniform, random_standard_normal, random_poisson)

cdef enum:
    LOGISTIC = 0
    ROBUST = 1

cdef enum:
    KIND_MH = 0
    KIND_TAYLOR = 1
    KIND_LIPSCHITZ = 2

cdef double BOUND_ATOL = 1e-10
cdef double BOUND_RTOL = 1e-9


cdef inline bitgen_t* _bitgen(gen) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


cdef class Engine:
    cdef int model_code, kind, order
    cdef double nu, Psi, R
    cdef Py_ssize_t m, d
    cdef bint q_sym, skip_solitary
    cdef const double[:, ::1] X
    cdef const double[::1] y
    cdef const double[::1] theta_hat
    cdef const double[::1] u_hat
    cdef const double[:, ::1] G
    cdef const double[:, :, ::1] Hf
    cdef const double[::1] g_tot
    cdef const double[:, ::1] H_tot
    cdef const double[::1] psi
    cdef const double[::1] aprob
    cdef const int64_t[::1] aidx
    cdef const double[:, ::1] A
    cdef const double[::1] b
    cdef const double[:, ::1] S
    cdef const double[:, ::1] Linv
    cdef double[::1] z, w1, w2, dth, dthp
    cdef public Py_ssize_t violation
    cdef public double violation_lam, violation_cap

    def __init__(self, int model_code, X, y, double nu, int kind, int order, double R,
                 theta_hat, u_hat, G, Hf, g_tot, H_tot, psi, double Psi, aprob, aidx,
                 A, b, S, Linv, bint q_sym, bint skip_solitary):
        self.model_code = model_code
        self.X = X
        self.y = y
        self.nu = nu
        self.m = X.shape[0]
        self.d = X.shape[1]
        self.kind = kind
        self.order = order
        self.R = R
        self.theta_hat = theta_hat
        self.u_hat = u_hat
        self.G = G
        self.Hf = Hf
        self.g_tot = g_tot
        self.H_tot = H_tot
        self.psi = psi
        self.Psi = Psi
        self.aprob = aprob
        self.aidx = aidx
        self.A = A
        self.b = b
        self.S = S
        self.Linv = Linv
        self.q_sym = q_sym
        self.skip_solitary = skip_solitary
        self.z = np.zeros(self.d)
        self.w1 = np.zeros(self.d)
        self.w2 = np.zeros(self.d)
        self.dth = np.zeros(self.d)
        self.dthp = np.zeros(self.d)
        self.violation = -1

    # -- factor potentials ------------------------------------------------
    cdef inline double U_i(self, Py_ssize_t i, const double[::1] th) noexcept nogil:
        cdef Py_ssize_t j
        cdef double z = 0.0, r
        for j in range(self.d):
            z += self.X[i, j] * th[j]
        if self.model_code == LOGISTIC:
            return log1p(exp(-fabs(z))) + fmax(z, 0.0) - self.y[i] * z
        r = self.y[i] - z
        return 0.5 * (self.nu + 1.0) * log1p(r * r / self.nu)

    cdef double U_total(self, const double[::1] th) noexcept nogil:
        cdef Py_ssize_t i
        cdef double s = 0.0
        for i in range(self.m):
            s += self.U_i(i, th)
        return s

    cdef double remainder(self, Py_ssize_t i, const double[::1] th,
                          const double[::1] delta) noexcept nogil:
        cdef Py_ssize_t j, k
        cdef double lin = 0.0, quad = 0.0, row
        cdef double r = self.U_i(i, th) - self.u_hat[i]
        for j in range(self.d):
            lin += self.G[i, j] * delta[j]
        r -= lin
        if self.order == 2:
            for j in range(self.d):
                row = 0.0
                for k in range(self.d):
                    row += self.Hf[i, j, k] * delta[k]
                quad += delta[j] * row
            r -= 0.5 * quad
        return r

    cdef double lam_i(self, Py_ssize_t i, const double[::1] th,
                      const double[::1] thp) noexcept nogil:
        if self.kind == KIND_TAYLOR:
            return fmax(0.0, self.remainder(i, thp, self.dthp) - self.remainder(i, th, self.dth))
        return fmax(0.0, self.U_i(i, thp) - self.U_i(i, th))

    # -- bounds and surrogate ---------------------------------------------
    cdef double phi(self, const double[::1] th, const double[::1] thp) noexcept nogil:
        cdef Py_ssize_t j
        cdef double a = 0.0, c = 0.0
        if self.kind == KIND_LIPSCHITZ:
            for j in range(self.d):
                a += fabs(thp[j] - th[j])
            return a
        for j in range(self.d):
            self.dth[j] = th[j] - self.theta_hat[j]
            self.dthp[j] = thp[j] - self.theta_hat[j]
            a += fabs(self.dth[j])
            c += fabs(self.dthp[j])
        if self.order == 1:
            return a * a + c * c
        return a * a * a + c * c * c

    cdef double offset(self, const double[::1] delta) noexcept nogil:
        cdef Py_ssize_t j, k
        cdef double lin = 0.0, quad = 0.0, row
        for j in range(self.d):
            lin += self.g_tot[j] * delta[j]
        if self.order == 2:
            for j in range(self.d):
                row = 0.0
                for k in range(self.d):
                    row += self.H_tot[j, k] * delta[k]
                quad += delta[j] * row
            return lin + 0.5 * quad
        return lin

    # -- proposal -----------------------------------------------------------
    cdef double log_q(self, const double[::1] th, const double[::1] thp) noexcept nogil:
        cdef Py_ssize_t j, k
        cdef double s, out = 0.0
        for j in range(self.d):
            s = 0.0
            for k in range(self.d):
                s += self.A[j, k] * th[k]
            self.w1[j] = thp[j] - s - self.b[j]
        for j in range(self.d):
            s = 0.0
            for k in range(j + 1):
                s += self.Linv[j, k] * self.w1[k]
            out += s * s
        return -0.5 * out

    cdef double log_q_ratio(self, const double[::1] th, const double[::1] thp) noexcept nogil:
        if self.q_sym:
            return 0.0
        return self.log_q(thp, th) - self.log_q(th, thp)

    cdef void propose(self, bitgen_t* rng, const double[::1] th, double[::1] out) noexcept nogil:
        cdef Py_ssize_t j, k
        cdef double s
        for j in range(self.d):
            self.z[j] = random_standard_normal(rng)
        for j in range(self.d):
            s = 0.0
            for k in range(self.d):
                s += self.A[j, k] * th[k]
            self.w2[j] = s + self.b[j]
        for j in range(self.d):
            s = 0.0
            for k in range(j + 1):
                s += self.S[j, k] * self.z[k]
            out[j] = self.w2[j] + s

    # -- acceptance ---------------------------------------------------------
    cdef inline bint passes(self, bitgen_t* rng, double log_p) noexcept nogil:
        if log_p >= 0.0:
            return True
        return random_standard_uniform(rng) < exp(log_p)

    cdef Py_ssize_t alias_sample(self, bitgen_t* rng) noexcept nogil:
        cdef Py_ssize_t col = <Py_ssize_t>(random_standard_uniform(rng) * self.m)
        if random_standard_uniform(rng) < self.aprob[col]:
            return col
        return <Py_ssize_t>self.aidx[col]

    cdef int accept_mh(self, bitgen_t* rng, const double[::1] th, const double[::1] thp,
                       Py_ssize_t* evals) noexcept nogil:
        cdef double log_r = self.U_total(th) - self.U_total(thp) + self.log_q_ratio(th, thp)
        evals[0] = self.m
        return self.passes(rng, log_r)

    cdef int solitary_fails(self, bitgen_t* rng, const double[::1] th,
                            const double[::1] thp) noexcept nogil:
        cdef double lr
        if self.kind == KIND_TAYLOR:
            if self.skip_solitary:
                return 0
            lr = self.offset(self.dth) - self.offset(self.dthp) + self.log_q_ratio(th, thp)
        else:
            if self.q_sym:
                return 0
            lr = self.log_q_ratio(th, thp)
        return not self.passes(rng, lr if lr < 0.0 else 0.0)

    cdef int accept_poisson(self, bitgen_t* rng, const double[::1] th, const double[::1] thp,
                            double phi, Py_ssize_t* evals, int64_t* n_out) noexcept nogil:
        """Returns 1 accept, 0 reject, -1 bound violation."""
        cdef double lam_bar, lam, cap
        cdef int64_t n_draw = 0, j
        cdef Py_ssize_t i
        evals[0] = 0
        n_out[0] = -1
        if self.solitary_fails(rng, th, thp):
            return 0
        lam_bar = phi * self.Psi
        if lam_bar > 0.0:
            n_draw = random_poisson(rng, lam_bar)
        n_out[0] = n_draw
        for j in range(n_draw):
            i = self.alias_sample(rng)
            lam = self.lam_i(i, th, thp)
            cap = phi * self.psi[i]
            if lam > cap:
                if lam - cap > BOUND_ATOL + BOUND_RTOL * cap:
                    self.violation = i
                    self.violation_lam = lam
                    self.violation_cap = cap
                    return -1
                lam = cap
            if random_standard_uniform(rng) < lam / cap:
                evals[0] = j + 1
                return 0
        evals[0] = n_draw
        return 1

    cdef int accept_cascade(self, bitgen_t* rng, const double[::1] th, const double[::1] thp,
                            Py_ssize_t* evals) noexcept nogil:
        cdef Py_ssize_t i
        cdef double lam
        evals[0] = 0
        self.phi(th, thp)  # fills the offsets from theta_hat
        if self.solitary_fails(rng, th, thp):
            return 0
        for i in range(self.m):
            lam = self.lam_i(i, th, thp)
            if lam > 0.0 and random_standard_uniform(rng) >= exp(-lam):
                evals[0] = i + 1
                return 0
        evals[0] = self.m
        return 1

    cdef int step(self, bitgen_t* rng, const double[::1] th, const double[::1] thp,
                  Py_ssize_t* evals, int64_t* n_out) noexcept nogil:
        cdef double phi
        n_out[0] = -1
        if self.kind == KIND_MH:
            return self.accept_mh(rng, th, thp, evals)
        phi = self.phi(th, thp)
        if phi * self.Psi < self.R:
            return self.accept_poisson(rng, th, thp, phi, evals, n_out)
        return self.accept_mh(rng, th, thp, evals)

    def _raise_violation(self):
        from .acceptance import BoundViolationError
        i = self.violation
        self.violation = -1
        raise BoundViolationError(i, self.violation_lam, self.violation_cap)

    # -- public loops -------------------------------------------------------
    def run(self, theta0, Py_ssize_t n_iter, Py_ssize_t burn, Py_ssize_t thin, gen):
        """Run the chain; returns (states, accepted, evals, poisson_draws)."""
        cdef Py_ssize_t n_keep = (n_iter - burn + thin - 1) // thin if n_iter > burn else 0
        cdef double[:, ::1] states = np.empty((n_keep, self.d))
        cdef signed char[::1] acc = np.empty(n_keep, dtype=np.int8)
        cdef int64_t[::1] ev = np.empty(n_keep, dtype=np.int64)
        cdef int64_t[::1] pois = np.empty(n_keep, dtype=np.int64)
        cdef double[::1] th = np.array(theta0, dtype=float)
        cdef double[::1] thp = np.empty(self.d)
        cdef Py_ssize_t t, j, row = 0, evals = 0
        cdef int64_t n_draw = -1
        cdef int res = 0
        cdef bitgen_t* rng = _bitgen(gen)
        with gen.bit_generator.lock, nogil:
            for t in range(n_iter):
                self.propose(rng, th, thp)
                res = self.step(rng, th, thp, &evals, &n_draw)
                if res < 0:
                    break
                if res == 1:
                    for j in range(self.d):
                        th[j] = thp[j]
                if t >= burn and (t - burn) % thin == 0:
                    for j in range(self.d):
                        states[row, j] = th[j]
                    acc[row] = res
                    ev[row] = evals
                    pois[row] = n_draw
                    row += 1
        if res < 0:
            self._raise_violation()
        return (np.asarray(states), np.asarray(acc).astype(bool),
                np.asarray(ev), np.asarray(pois))

    def trials(self, theta, theta_prime, Py_ssize_t n, bint cascade, gen):
        """Repeat one acceptance test ``n`` times; returns (accepts, total evaluations)."""
        cdef const double[::1] th = np.ascontiguousarray(theta, dtype=float)
        cdef const double[::1] thp = np.ascontiguousarray(theta_prime, dtype=float)
        cdef Py_ssize_t t, evals = 0, accepts = 0, total = 0
        cdef int64_t n_draw
        cdef int res = 0
        cdef bitgen_t* rng = _bitgen(gen)
        with gen.bit_generator.lock, nogil:
            for t in range(n):
                if cascade:
                    res = self.accept_cascade(rng, th, thp, &evals)
                else:
                    res = self.step(rng, th, thp, &evals, &n_draw)
                if res < 0:
                    break
                accepts += res
                total += evals
        if res < 0:
            self._raise_violation()
        return accepts, total
