"""Compiled inner loops for long-horizon runs.

Private module.  Each kernel mirrors the Python reference recursion in
statespace._run_python op for op; tests assert the two engines agree.
Attacks arrive pre-expanded as a plan: mode 0 none, 1 open-loop offsets,
2 residual shaping (the stored row is the exact residual to produce).
Detector kind 0 is the plain chi-squared test, 1 the filtered variant.
fastmath stays off so accumulation order is fixed.
"""

import numpy as np
from numba import njit

__all__ = ["loop_record", "loop_stats"]


@njit(cache=True)
def _quad(v, m):
    p = v.shape[0]
    acc = 0.0
    for i in range(p):
        row = 0.0
        for j in range(p):
            row += v[j] * m[j, i]
        acc += row * v[i]
    return acc


@njit(cache=True)
def _dot(v):
    acc = 0.0
    for i in range(v.shape[0]):
        acc += v[i] * v[i]
    return acc


@njit(cache=True)
def loop_record(a, bk, l, c, tau, eta, mode, vals,
                kind, sigma_inv, use_inv, coeff, alpha, phi_d, psi_d,
                x, xhat,
                x_arr, xh_arr, y_arr, d_arr, yb_arr, r_arr, rho_arr,
                z_arr, al_arr):
    n = a.shape[0]
    p = c.shape[0]
    horizon = eta.shape[0]
    y = np.empty(p)
    y_hat = np.empty(p)
    delta = np.empty(p)
    r = np.empty(p)
    rho = np.empty(p)
    fstate = np.zeros((p, 2))
    x_next = np.empty(n)
    xh_next = np.empty(n)

    for k in range(horizon):
        for i in range(p):
            acc_y = 0.0
            acc_h = 0.0
            for j in range(n):
                acc_y += c[i, j] * x[j]
                acc_h += c[i, j] * xhat[j]
            y[i] = acc_y + eta[k, i]
            y_hat[i] = acc_h

        if mode == 0:
            for i in range(p):
                delta[i] = 0.0
        elif mode == 1:
            for i in range(p):
                delta[i] = vals[k, i]
        else:
            for i in range(p):
                delta[i] = -y[i] + y_hat[i] + vals[k, i]

        for i in range(p):
            r[i] = y[i] + delta[i] - y_hat[i]

        if kind == 1:
            for i in range(p):
                s0 = fstate[i, 0]
                s1 = fstate[i, 1]
                fstate[i, 0] = s0 * phi_d[0, 0] + s1 * phi_d[0, 1] + r[i] * psi_d[0]
                fstate[i, 1] = s0 * phi_d[1, 0] + s1 * phi_d[1, 1] + r[i] * psi_d[1]
                rho[i] = fstate[i, 0]
            if use_inv == 1:
                z = coeff * _quad(rho, sigma_inv)
            else:
                z = _dot(rho)
        else:
            if use_inv == 1:
                z = _quad(r, sigma_inv)
            else:
                z = _dot(r)

        for i in range(n):
            x_arr[k, i] = x[i]
            xh_arr[k, i] = xhat[i]
        for i in range(p):
            y_arr[k, i] = y[i]
            d_arr[k, i] = delta[i]
            yb_arr[k, i] = y[i] + delta[i]
            r_arr[k, i] = r[i]
        if kind == 1:
            for i in range(p):
                rho_arr[k, i] = rho[i]
        z_arr[k] = z
        al_arr[k] = 1 if z > alpha else 0

        for i in range(n):
            acc_a = 0.0
            acc_bk = 0.0
            acc_ah = 0.0
            acc_lr = 0.0
            for j in range(n):
                acc_a += a[i, j] * x[j]
                acc_bk += bk[i, j] * xhat[j]
                acc_ah += a[i, j] * xhat[j]
            for j in range(p):
                acc_lr += l[i, j] * r[j]
            x_next[i] = x[i] + tau * (acc_a + acc_bk)
            xh_next[i] = xhat[i] + tau * (acc_ah + acc_bk + acc_lr)
        for i in range(n):
            x[i] = x_next[i]
            xhat[i] = xh_next[i]


@njit(cache=True)
def loop_stats(a, bk, l, c, tau, eta, mode, vals,
               kind, sigma_inv, use_inv, coeff, alpha, phi_d, psi_d,
               x, xhat, discard):
    n = a.shape[0]
    p = c.shape[0]
    horizon = eta.shape[0]
    y = np.empty(p)
    y_hat = np.empty(p)
    delta = np.empty(p)
    r = np.empty(p)
    rho = np.empty(p)
    fstate = np.zeros((p, 2))
    x_next = np.empty(n)
    xh_next = np.empty(n)

    alarms = 0
    z_sum = 0.0
    z_sumsq = 0.0
    z_max = -np.inf
    r_sum = np.zeros(p)
    r_outer = np.zeros((p, p))
    rho_outer = np.zeros((p, p))

    for k in range(horizon):
        for i in range(p):
            acc_y = 0.0
            acc_h = 0.0
            for j in range(n):
                acc_y += c[i, j] * x[j]
                acc_h += c[i, j] * xhat[j]
            y[i] = acc_y + eta[k, i]
            y_hat[i] = acc_h

        if mode == 0:
            for i in range(p):
                delta[i] = 0.0
        elif mode == 1:
            for i in range(p):
                delta[i] = vals[k, i]
        else:
            for i in range(p):
                delta[i] = -y[i] + y_hat[i] + vals[k, i]

        for i in range(p):
            r[i] = y[i] + delta[i] - y_hat[i]

        if kind == 1:
            for i in range(p):
                s0 = fstate[i, 0]
                s1 = fstate[i, 1]
                fstate[i, 0] = s0 * phi_d[0, 0] + s1 * phi_d[0, 1] + r[i] * psi_d[0]
                fstate[i, 1] = s0 * phi_d[1, 0] + s1 * phi_d[1, 1] + r[i] * psi_d[1]
                rho[i] = fstate[i, 0]
            if use_inv == 1:
                z = coeff * _quad(rho, sigma_inv)
            else:
                z = _dot(rho)
        else:
            if use_inv == 1:
                z = _quad(r, sigma_inv)
            else:
                z = _dot(r)

        if k >= discard:
            if z > alpha:
                alarms += 1
            z_sum += z
            z_sumsq += z * z
            if z > z_max:
                z_max = z
            for i in range(p):
                r_sum[i] += r[i]
                for j in range(p):
                    r_outer[i, j] += r[i] * r[j]
            if kind == 1:
                for i in range(p):
                    for j in range(p):
                        rho_outer[i, j] += rho[i] * rho[j]

        for i in range(n):
            acc_a = 0.0
            acc_bk = 0.0
            acc_ah = 0.0
            acc_lr = 0.0
            for j in range(n):
                acc_a += a[i, j] * x[j]
                acc_bk += bk[i, j] * xhat[j]
                acc_ah += a[i, j] * xhat[j]
            for j in range(p):
                acc_lr += l[i, j] * r[j]
            x_next[i] = x[i] + tau * (acc_a + acc_bk)
            xh_next[i] = xhat[i] + tau * (acc_ah + acc_bk + acc_lr)
        for i in range(n):
            x[i] = x_next[i]
            xhat[i] = xh_next[i]

    return alarms, z_sum, z_sumsq, z_max, r_sum, r_outer, rho_outer
