"""Compiled inner loops for the two Markov chain samplers.

Everything here works on plain arrays; the public wrappers in
``samplers.py`` translate the dataclass configuration into these arguments.
Component numbering follows the parameter vector (s_1..s_K, g_1..g_L,
h_1..h_L, w_11..w_LK).
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, nogil=True)
def relay_map(r, code):
    if code == 0:
        return r
    if code == 1:
        return complex(np.tanh(r.real), np.tanh(r.imag))
    m = abs(r)
    if m == 0.0:
        return 0j
    return np.tanh(m) * (r / m)


@njit(cache=True, nogil=True)
def _quantiles_sorted(v, levels, out, off):
    n = v.size
    for j in range(levels.size):
        pos = (n - 1) * levels[j]
        lo = int(np.floor(pos))
        hi = min(lo + 1, n - 1)
        out[off + j] = v[lo] + (pos - lo) * (v[hi] - v[lo])


@njit(cache=True, nogil=True)
def _insertion_sort(v):
    for i in range(1, v.size):
        t = v[i]
        j = i - 1
        while j >= 0 and v[j] > t:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = t


@njit(cache=True, nogil=True)
def _part(z, part):
    if part == 0:
        return z.real
    if part == 1:
        return z.imag
    return abs(z)


@njit(cache=True, nogil=True)
def summarize_into(x, kind, cmode, pooling, levels, out, buf_all, buf_col):
    L, K = x.shape
    p0, p1 = (0, 2) if cmode == 0 else (2, 3)
    nl = levels.size
    off = 0
    if kind == 1:
        for p in range(p0, p1):
            for l in range(L):
                for k in range(K):
                    out[off] = _part(x[l, k], p)
                    off += 1
        return
    if pooling == 0:
        for p in range(p0, p1):
            i = 0
            for l in range(L):
                for k in range(K):
                    buf_all[i] = _part(x[l, k], p)
                    i += 1
            _insertion_sort(buf_all)
            _quantiles_sorted(buf_all, levels, out, off)
            off += nl
    else:
        for p in range(p0, p1):
            for k in range(K):
                for l in range(L):
                    buf_col[l] = _part(x[l, k], p)
                _insertion_sort(buf_col)
                _quantiles_sorted(buf_col, levels, out, off)
                off += nl


@njit(cache=True, nogil=True)
def discrepancy(a, b, mkind, Q, p):
    d = a.size
    if mkind == 0:
        s = 0.0
        for i in range(d):
            di = a[i] - b[i]
            if di == 0.0:
                continue
            t = 0.0
            for j in range(d):
                t += Q[i, j] * (a[j] - b[j])
            s += di * t
        return max(s, 0.0)
    s = 0.0
    for i in range(d):
        s += abs(a[i] - b[i]) ** p
    return s ** (1.0 / p)


@njit(cache=True, nogil=True)
def _simulate(rng, svals, h, g, sdw, sdv, code, x):
    L, K = x.shape
    for l in range(L):
        for k in range(K):
            w = complex(sdw * rng.standard_normal(), sdw * rng.standard_normal())
            v = complex(sdv * rng.standard_normal(), sdv * rng.standard_normal())
            x[l, k] = relay_map(svals[k] * h[l] + w, code) * g[l] + v


@njit(cache=True, nogil=True)
def _log_weight(rhos, eps, wkind):
    D = rhos.size
    if wkind == 0:
        hits = 0
        for d in range(D):
            if rhos[d] <= eps:
                hits += 1
        if hits == 0:
            return NEG_INF
        return np.log(hits / D)
    m = NEG_INF
    for d in range(D):
        v = -rhos[d] / (eps * eps)
        if v > m:
            m = v
    acc = 0.0
    for d in range(D):
        acc += np.exp(-rhos[d] / (eps * eps) - m)
    return m + np.log(acc / D)


@njit(cache=True, nogil=True)
def _uniform_int(rng, n):
    # floor(u * n) is unbiased to double precision and much cheaper than integers()
    return min(int(rng.random() * n), n - 1)


@njit(cache=True, nogil=True)
def _draw_codeword(rng, cdf):
    u = rng.random()
    for j in range(cdf.size):
        if u < cdf[j]:
            return j
    return cdf.size - 1


@njit(cache=True, nogil=True)
def _set_symbols(cw, M, K, sidx):
    for k in range(K - 1, -1, -1):
        sidx[k] = cw % M
        cw //= M


@njit(cache=True, nogil=True)
def _cw_index(sidx, M):
    c = 0
    for k in range(sidx.size):
        c = c * M + sidx[k]
    return c


@njit(cache=True, nogil=True)
def _ch_logprior(z, mean, var):
    if var <= 0.0:
        return 0.0
    return -abs(z - mean) ** 2 / var


@njit(cache=True, nogil=True)
def _simulate_rhos(rng, t_y, svals, h, g, sdw, sdv, code, x, t_x, skind, cmode, pooling,
                   levels, buf_all, buf_col, mkind, Q, p, rhos):
    for d in range(rhos.size):
        _simulate(rng, svals, h, g, sdw, sdv, code, x)
        summarize_into(x, skind, cmode, pooling, levels, t_x, buf_all, buf_col)
        rhos[d] = discrepancy(t_y, t_x, mkind, Q, p)


@njit(cache=True, nogil=True)
def abc_chain(rng, t_y, points, log_prior, K, L, hhat, ghat, sig_h, sig_g, sig_w, sig_v, code,
              skind, cmode, pooling, levels, mkind, Q, p, wkind, eps_min, N, burn_in,
              n_data, refresh, rw_g, rw_h, h0, g0, update_channels, init_cw,
              out_s, out_h, out_g, out_acc, out_eps, out_comp, out_rho):
    """MCMC-ABC random-scan Metropolis-within-Gibbs chain.

    Tolerance follows max(N - 10 n, eps_min) during burn-in and eps_min
    afterwards. ``init_cw < 0`` draws the initial codeword from the prior.
    """
    M = points.size
    sdw = np.sqrt(sig_w / 2.0)
    sdv = np.sqrt(sig_v / 2.0)
    cdf = np.cumsum(np.exp(log_prior))
    x = np.empty((L, K), dtype=np.complex128)
    t_x = np.empty(t_y.size)
    buf_all = np.empty(L * K)
    buf_col = np.empty(L)
    rho_cur = np.empty(n_data)
    rho_new = np.empty(n_data)

    n_comp = K + 2 * L if update_channels else K
    sidx = np.empty(K, dtype=np.int64)
    svals = np.empty(K)
    cw = init_cw if init_cw >= 0 else _draw_codeword(rng, cdf)
    _set_symbols(cw, M, K, sidx)
    for k in range(K):
        svals[k] = points[sidx[k]]
    h = h0.copy()
    g = g0.copy()
    lp_cur = log_prior[cw]
    for l in range(L):
        lp_cur += _ch_logprior(h[l], hhat[l], sig_h) + _ch_logprior(g[l], ghat[l], sig_g)

    eps_prev = max(N - 10.0, eps_min)
    _simulate_rhos(rng, t_y, svals, h, g, sdw, sdv, code, x, t_x, skind, cmode, pooling,
                   levels, buf_all, buf_col, mkind, Q, p, rho_cur)

    out_s[0] = cw
    out_h[0, :] = h
    out_g[0, :] = g
    out_acc[0] = False
    out_eps[0] = eps_prev
    out_comp[0] = -1
    out_rho[0] = rho_cur.mean()

    sdg = np.sqrt(rw_g / 2.0)
    sdh = np.sqrt(rw_h / 2.0)
    new_sidx = np.empty(K, dtype=np.int64)
    new_svals = np.empty(K)
    new_h = h.copy()
    new_g = g.copy()

    for n in range(2, N + 1):
        eps = max(N - 10.0 * n, eps_min) if n <= burn_in else eps_min
        i = _uniform_int(rng, n_comp)
        for k in range(K):
            new_sidx[k] = sidx[k]
            new_svals[k] = svals[k]
        for l in range(L):
            new_h[l] = h[l]
            new_g[l] = g[l]
        lp_new = lp_cur
        if i < K:
            j = _uniform_int(rng, M)
            new_sidx[i] = j
            new_svals[i] = points[j]
            new_cw = _cw_index(new_sidx, M)
            lp_new += log_prior[new_cw] - log_prior[cw]
        elif i < K + L:
            l = i - K
            new_cw = cw
            new_g[l] = g[l] + complex(sdg * rng.standard_normal(), sdg * rng.standard_normal())
            lp_new += _ch_logprior(new_g[l], ghat[l], sig_g) - _ch_logprior(g[l], ghat[l], sig_g)
        else:
            l = i - K - L
            new_cw = cw
            new_h[l] = h[l] + complex(sdh * rng.standard_normal(), sdh * rng.standard_normal())
            lp_new += _ch_logprior(new_h[l], hhat[l], sig_h) - _ch_logprior(h[l], hhat[l], sig_h)

        accept = False
        if lp_new > NEG_INF:
            if refresh:
                _simulate_rhos(rng, t_y, svals, h, g, sdw, sdv, code, x, t_x, skind, cmode,
                               pooling, levels, buf_all, buf_col, mkind, Q, p, rho_cur)
            _simulate_rhos(rng, t_y, new_svals, new_h, new_g, sdw, sdv, code, x, t_x, skind,
                           cmode, pooling, levels, buf_all, buf_col, mkind, Q, p, rho_new)
            lw_new = _log_weight(rho_new, eps, wkind)
            if lw_new > NEG_INF:
                u = rng.random()
                if wkind == 0 and n_data == 1:
                    log_alpha = lp_new - lp_cur
                else:
                    lw_cur = _log_weight(rho_cur, eps_prev, wkind)
                    if lw_cur == NEG_INF:
                        log_alpha = lp_new - lp_cur
                    else:
                        log_alpha = lw_new + lp_new - lw_cur - lp_cur
                if log_alpha >= 0.0 or u <= np.exp(log_alpha):
                    accept = True
        if accept:
            cw = new_cw
            for k in range(K):
                sidx[k] = new_sidx[k]
                svals[k] = new_svals[k]
            for l in range(L):
                h[l] = new_h[l]
                g[l] = new_g[l]
            lp_cur = lp_new
            for d in range(n_data):
                rho_cur[d] = rho_new[d]
        eps_prev = eps

        out_s[n - 1] = cw
        for l in range(L):
            out_h[n - 1, l] = h[l]
            out_g[n - 1, l] = g[l]
        out_acc[n - 1] = accept
        out_eps[n - 1] = eps
        out_comp[n - 1] = i
        out_rho[n - 1] = rho_cur.mean()


@njit(cache=True, nogil=True)
def _elem_ll(y, sval, h, g, w, sig_v, code):
    r = y - relay_map(sval * h + w, code) * g
    return -(r.real * r.real + r.imag * r.imag) / sig_v


@njit(cache=True, nogil=True)
def av_loglik(y, svals, h, g, w, sig_v, code):
    L, K = y.shape
    s = -L * K * np.log(np.pi * sig_v)
    for l in range(L):
        for k in range(K):
            s += _elem_ll(y[l, k], svals[k], h[l], g[l], w[l, k], sig_v, code)
    return s


@njit(cache=True, nogil=True)
def av_chain(rng, y, points, log_prior, K, L, hhat, ghat, sig_h, sig_g, sig_w, sig_v, code,
             N, rw_g, rw_h, rw_w, h0, g0, w0, update_channels, update_w, init_cw,
             out_s, out_h, out_g, out_acc, out_comp, out_ll, out_w):
    """Auxiliary-variable random-scan Metropolis-within-Gibbs chain.

    Targets p(s, g, h, w | y) exactly; ``out_w`` may have zero rows to skip
    storing the relay-noise trajectory.
    """
    M = points.size
    cdf = np.cumsum(np.exp(log_prior))
    store_w = out_w.shape[0] == N

    comp_arr = np.empty(K + 2 * L + K * L, dtype=np.int64)
    n_comp = 0
    for c in range(K + 2 * L + K * L):
        if c < K or (c < K + 2 * L and update_channels) or (c >= K + 2 * L and update_w):
            comp_arr[n_comp] = c
            n_comp += 1

    sidx = np.empty(K, dtype=np.int64)
    svals = np.empty(K)
    cw = init_cw if init_cw >= 0 else _draw_codeword(rng, cdf)
    _set_symbols(cw, M, K, sidx)
    for k in range(K):
        svals[k] = points[sidx[k]]
    h = h0.copy()
    g = g0.copy()
    w = w0.copy()

    ell = np.empty((L, K))
    for l in range(L):
        for k in range(K):
            ell[l, k] = _elem_ll(y[l, k], svals[k], h[l], g[l], w[l, k], sig_v, code)
    const = -L * K * np.log(np.pi * sig_v)

    out_s[0] = cw
    out_h[0, :] = h
    out_g[0, :] = g
    out_acc[0] = False
    out_comp[0] = -1
    out_ll[0] = ell.sum() + const
    if store_w:
        out_w[0] = w

    sdg = np.sqrt(rw_g / 2.0)
    sdh = np.sqrt(rw_h / 2.0)
    sdw = np.sqrt(rw_w / 2.0)
    tmp = np.empty(max(K, L))

    for n in range(2, N + 1):
        i = comp_arr[_uniform_int(rng, n_comp)]
        delta = 0.0
        j = 0
        new_cw = cw
        prop = 0j
        e_new = 0.0
        l = 0
        k = 0
        if i < K:
            j = _uniform_int(rng, M)
            old = sidx[i]
            sidx[i] = j
            new_cw = _cw_index(sidx, M)
            sidx[i] = old
            delta = log_prior[new_cw] - log_prior[cw]
            if delta > NEG_INF:
                sv = points[j]
                for l in range(L):
                    tmp[l] = _elem_ll(y[l, i], sv, h[l], g[l], w[l, i], sig_v, code)
                    delta += tmp[l] - ell[l, i]
        elif i < K + 2 * L:
            is_g = i < K + L
            l = i - K if is_g else i - K - L
            if is_g:
                prop = g[l] + complex(sdg * rng.standard_normal(), sdg * rng.standard_normal())
                delta = _ch_logprior(prop, ghat[l], sig_g) - _ch_logprior(g[l], ghat[l], sig_g)
                for k in range(K):
                    tmp[k] = _elem_ll(y[l, k], svals[k], h[l], prop, w[l, k], sig_v, code)
                    delta += tmp[k] - ell[l, k]
            else:
                prop = h[l] + complex(sdh * rng.standard_normal(), sdh * rng.standard_normal())
                delta = _ch_logprior(prop, hhat[l], sig_h) - _ch_logprior(h[l], hhat[l], sig_h)
                for k in range(K):
                    tmp[k] = _elem_ll(y[l, k], svals[k], prop, g[l], w[l, k], sig_v, code)
                    delta += tmp[k] - ell[l, k]
        else:
            m = i - K - 2 * L
            l = m // K
            k = m % K
            prop = w[l, k] + complex(sdw * rng.standard_normal(), sdw * rng.standard_normal())
            e_new = _elem_ll(y[l, k], svals[k], h[l], g[l], prop, sig_v, code)
            delta = (e_new - ell[l, k]) + (abs(w[l, k]) ** 2 - abs(prop) ** 2) / sig_w

        accept = False
        if delta > NEG_INF:
            u = rng.random()
            if delta >= 0.0 or u <= np.exp(delta):
                accept = True
        if accept:
            if i < K:
                sidx[i] = j
                svals[i] = points[j]
                cw = new_cw
                for l in range(L):
                    ell[l, i] = tmp[l]
            elif i < K + L:
                g[l] = prop
                for k in range(K):
                    ell[l, k] = tmp[k]
            elif i < K + 2 * L:
                h[l] = prop
                for k in range(K):
                    ell[l, k] = tmp[k]
            else:
                w[l, k] = prop
                ell[l, k] = e_new

        out_s[n - 1] = cw
        for l in range(L):
            out_h[n - 1, l] = h[l]
            out_g[n - 1, l] = g[l]
        out_acc[n - 1] = accept
        out_comp[n - 1] = i
        out_ll[n - 1] = ell.sum() + const
        if store_w:
            out_w[n - 1] = w
