"""Compiled inner loops.

Groups are passed in flattened form: ``idx[off[g]:off[g+1]]`` holds the
zero-based covariates of group ``g``.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def lambda_cd_sweeps(w2, idx, off, d2, lam, zeta, frozen, n_sweeps, inner_tol, inner_max):
    """Cyclic exact minimisation of F(lam) = 1/2 sum_i w2_i / zeta_i + 1/2 sum_g d2_g lam_g.

    ``zeta`` must equal B @ lam on entry and is kept in sync.  Groups with
    ``frozen[g]`` set are skipped (their lam stays at zero).
    """
    m = d2.shape[0]
    for _ in range(n_sweeps):
        for g in range(m):
            if frozen[g]:
                continue
            a = off[g]
            b = off[g + 1]
            lg = lam[g]
            dg2 = d2[g]
            # derivative at t = 0+ ; -inf when an uncovered nonzero remains
            phi0 = dg2
            wsum = 0.0
            for j in range(a, b):
                i = idx[j]
                wi = w2[i]
                if wi > 0.0:
                    wsum += wi
                    s = zeta[i] - lg
                    if s <= 0.0:
                        phi0 = -np.inf
                    elif phi0 != -np.inf:
                        phi0 -= wi / (s * s)
            if wsum == 0.0 or phi0 >= 0.0:
                t = 0.0
            else:
                lo = 0.0
                hi = np.sqrt(wsum / dg2)
                t = lg if (lg > lo and lg < hi) else 0.5 * hi
                for _it in range(inner_max):
                    f = dg2
                    fp = 0.0
                    for j in range(a, b):
                        i = idx[j]
                        wi = w2[i]
                        if wi > 0.0:
                            s = zeta[i] - lg
                            if s < 0.0:
                                s = 0.0
                            u = t + s
                            f -= wi / (u * u)
                            fp += 2.0 * wi / (u * u * u)
                    if f > 0.0:
                        hi = t
                    else:
                        lo = t
                    if abs(f) <= inner_tol * dg2:
                        break
                    tn = t - f / fp
                    if not (tn > lo and tn < hi):
                        tn = 0.5 * (lo + hi)
                    if tn == t:
                        break
                    t = tn
            if t != lg:
                delta = t - lg
                for j in range(a, b):
                    zeta[idx[j]] += delta
                lam[g] = t


@njit(cache=True)
def group_sq_norms(x, idx, off):
    m = off.shape[0] - 1
    out = np.zeros(m)
    for g in range(m):
        acc = 0.0
        for j in range(off[g], off[g + 1]):
            v = x[idx[j]]
            acc += v * v
        out[g] = acc
    return out


@njit(cache=True)
def block_secular_solve(evals, ct, thresh, tol, max_iter):
    """Norm of the minimiser of 1/2 u'Hu - c'u + thresh ||u|| given H's eigen-data.

    ``ct`` is c in the eigenbasis.  Returns the shrinkage ``s`` such that
    u = (H + s I)^{-1} c; the caller has already checked ||c|| > thresh.
    Solves s * ||(H + s I)^{-1} c|| = thresh, which is increasing in s.
    """
    c2 = ct * ct
    lo = 0.0
    # at s = hi the left side is at least thresh
    cn = np.sqrt(np.sum(c2))
    emax = 0.0
    for e in evals:
        if e > emax:
            emax = e
    hi = thresh * (emax + thresh) / max(cn - thresh, 1e-300) + thresh
    s = 0.5 * (lo + hi)
    for _ in range(max_iter):
        q = 0.0
        dq = 0.0
        for k in range(evals.shape[0]):
            den = evals[k] + s
            q += c2[k] / (den * den)
            dq += -2.0 * c2[k] / (den * den * den)
        # h(s) = s^2 q(s) - thresh^2
        h = s * s * q - thresh * thresh
        if h > 0.0:
            hi = s
        else:
            lo = s
        if abs(h) <= tol * thresh * thresh:
            break
        dh = 2.0 * s * q + s * s * dq
        sn = s - h / dh if dh > 0.0 else 0.5 * (lo + hi)
        if not (sn > lo and sn < hi):
            sn = 0.5 * (lo + hi)
        if sn == s:
            break
        s = sn
    return s


@njit(cache=True)
def bcd_squared_sweeps(XT, r, gidx, goff, evecs, eoff, evals, v, thresh, n_sweeps, tol,
                       secular_tol, secular_max):
    """Cyclic exact block minimisation for (1/2n)||r||^2 + sum_k thresh_k ||v_k||.

    ``XT`` is the transposed design (p, n).  ``r = y - X w`` is updated in place, as is the stacked latent vector ``v``
    (block ``k`` lives in ``v[goff[k]:goff[k+1]]`` and acts on the columns
    ``gidx[goff[k]:goff[k+1]]``).  ``evecs[eoff[k]:eoff[k+1]]`` holds the
    row-major eigenvectors of ``X_k' X_k / n`` and ``evals`` its eigenvalues.

    Each block's KKT residual is measured just before it is updated; the
    loop stops after the first sweep in which all of them are at most
    ``tol``.  Returns the number of sweeps and the last sweep's largest residual.
    """
    n = XT.shape[1]
    nblocks = goff.shape[0] - 1
    worst = np.inf
    sweeps = 0
    for _ in range(n_sweeps):
        sweeps += 1
        worst = 0.0
        for k in range(nblocks):
            a = goff[k]
            b = goff[k + 1]
            s = b - a
            th = thresh[k]
            c0 = np.zeros(s)
            for j in range(s):
                col = gidx[a + j]
                acc = 0.0
                for i in range(n):
                    acc += XT[col, i] * r[i]
                c0[j] = acc / n
            vn = 0.0
            for j in range(s):
                vn += v[a + j] * v[a + j]
            vn = np.sqrt(vn)
            # residual of the block optimality condition at the current point
            if vn > 0.0:
                res = 0.0
                for j in range(s):
                    d = -c0[j] + th * v[a + j] / vn
                    res += d * d
                res = np.sqrt(res) / th
            else:
                res = 0.0
                for j in range(s):
                    res += c0[j] * c0[j]
                res = max(0.0, np.sqrt(res) / th - 1.0)
            if res > worst:
                worst = res
            # c = X_k' (r + X_k v_k) / n in the eigenbasis
            E = evecs[eoff[k]:eoff[k + 1]].reshape((s, s))
            ev = evals[a:b]
            ct = np.zeros(s)
            for q in range(s):
                acc = 0.0
                for j in range(s):
                    acc += E[j, q] * c0[j]
                vt = 0.0
                for j in range(s):
                    vt += E[j, q] * v[a + j]
                ct[q] = acc + ev[q] * vt
            cn = np.sqrt(np.sum(ct * ct))
            u = np.zeros(s)
            if cn > th:
                shrink = block_secular_solve(ev, ct, th, secular_tol, secular_max)
                for j in range(s):
                    acc = 0.0
                    for q in range(s):
                        acc += E[j, q] * ct[q] / (ev[q] + shrink)
                    u[j] = acc
            for j in range(s):
                delta = u[j] - v[a + j]
                if delta != 0.0:
                    col = gidx[a + j]
                    for i in range(n):
                        r[i] -= XT[col, i] * delta
                    v[a + j] = u[j]
        if worst <= tol:
            break
    return sweeps, worst
