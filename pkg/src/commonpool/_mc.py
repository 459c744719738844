"""Compiled Euler-Maruyama kernel with a counter-based RNG.

The noise for (path p, step t) is a pure function of (seed, p, t): a
Philox4x32-10 block cipher keyed by the seed with the path index and the
step block in the counter, pushed through Box-Muller.  Paths are therefore
reproducible and embarrassingly parallel, and runs comparing several
strategy profiles share identical Wiener increments by construction
(common random numbers).

All strategy variants advance inside one pass over the noise: per step the
normal increment is generated once and every variant's state is updated
branchlessly, which is what makes large deviation scans affordable.
"""

import numpy as np
from numba import njit, prange

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_TWO_PI = 2.0 * np.pi
_INV32 = 1.0 / 4294967296.0


@njit(inline="always", cache=True)
def _philox4x32(c0, c1, c2, c3, k0, k1):
    # 10 rounds; the key is bumped by the Weyl constants between rounds.
    for _ in range(10):
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & _MASK32)
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & _MASK32)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _normals4(block, path, seed, out):
    """Four standard normals for (seed, path, step block)."""
    r0, r1, r2, r3 = _philox4x32(
        np.uint32(block & np.uint64(0xFFFFFFFF)), np.uint32(block >> np.uint64(32)),
        np.uint32(path & np.uint64(0xFFFFFFFF)), np.uint32(path >> np.uint64(32)),
        np.uint32(seed & np.uint64(0xFFFFFFFF)), np.uint32(seed >> np.uint64(32)))
    u0 = (np.float64(r0) + 0.5) * _INV32
    u1 = (np.float64(r1) + 0.5) * _INV32
    u2 = (np.float64(r2) + 0.5) * _INV32
    u3 = (np.float64(r3) + 0.5) * _INV32
    m0 = np.sqrt(-2.0 * np.log(u0))
    m1 = np.sqrt(-2.0 * np.log(u2))
    c0 = np.cos(_TWO_PI * u1)
    c1 = np.cos(_TWO_PI * u3)
    # sin recovered from cos; the sign flips at u = 1/2
    s0 = np.sqrt(max(0.0, 1.0 - c0 * c0))
    s1 = np.sqrt(max(0.0, 1.0 - c1 * c1))
    if u1 > 0.5:
        s0 = -s0
    if u3 > 0.5:
        s1 = -s1
    out[0] = m0 * c0
    out[1] = m0 * s0
    out[2] = m1 * c1
    out[3] = m1 * s1


@njit(parallel=True, fastmath=True, cache=True)
def run_paths(npairs, twins, nsteps, x0, dt, mu0, mu1, sig0, r, rates, thr,
              seed, rew, absorbed, taudisc):
    """Advance all strategy variants through the same noise.

    thr has layout (n_agents, V); rew (npairs, twins, V, n_agents),
    absorbed/taudisc (npairs, twins, V).  With twins == 2 the second twin
    uses the sign-flipped increments (antithetic pairing).  The inner loops
    are branchless over the flattened twin/variant axis so they vectorize.
    """
    n, V = thr.shape
    W = twins * V
    sqdt = np.sqrt(dt)
    decay = np.exp(-r * dt)
    mu0dt = mu0 * dt
    mu1dt = mu1 * dt
    alive0 = 1.0 if x0 > 0.0 else 0.0
    useed = np.uint64(seed)

    th_ex = np.empty((n, W))  # thresholds expanded across twins
    sgn = np.empty(W)
    for h in range(twins):
        for v in range(V):
            sgn[h * V + v] = 1.0 if h == 0 else -1.0
            for i in range(n):
                th_ex[i, h * V + v] = thr[i, v]
    kdt = rates * dt

    for q in prange(npairs):
        X = np.empty(W)
        m = np.empty(W)
        td = np.empty(W)
        extm = np.empty(W)
        rloc = np.zeros((n, W))
        zbuf = np.empty(4)
        for w in range(W):
            X[w] = x0
            m[w] = alive0
            td[w] = 1.0  # tau = 0 when absorbed at the start
        disc = 1.0
        for t in range(nsteps):
            j = t & 3
            if j == 0:
                _normals4(np.uint64(t >> 2), np.uint64(q), useed, zbuf)
            zz = sig0 * sqdt * zbuf[j]
            discn = disc * decay
            for w in range(W):
                extm[w] = 0.0
            for i in range(n):
                dd = disc * kdt[i]
                kd = kdt[i]
                for w in range(W):
                    ai = m[w] if X[w] >= th_ex[i, w] else 0.0
                    rloc[i, w] += dd * ai
                    extm[w] += kd * ai
            for w in range(W):
                x = X[w]
                a = m[w]
                xn = x + a * (mu0dt + mu1dt * x + zz * sgn[w]) - extm[w]
                an = a if xn > 0.0 else 0.0
                td[w] += (a - an) * (discn - td[w])
                m[w] = an
                X[w] = xn
            disc = discn
        for h in range(twins):
            for v in range(V):
                w = h * V + v
                dead = m[w] == 0.0
                absorbed[q, h, v] = np.uint8(1 if dead else 0)
                taudisc[q, h, v] = td[w] if dead else disc
                for i in range(n):
                    rew[q, h, v, i] = rloc[i, w]


# --- numpy twin (slow path for user-defined coefficients and tests) --------

def philox4x32_np(counter, key):
    """Vectorized Philox4x32-10; counter (4, N) uint32, key (2,) uint32."""
    c0, c1, c2, c3 = (counter[k].astype(np.uint64) for k in range(4))
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    mask = _MASK32
    for _ in range(10):
        p0 = (_M0 * c0) & np.uint64(0xFFFFFFFFFFFFFFFF)
        p1 = (_M1 * c2) & np.uint64(0xFFFFFFFFFFFFFFFF)
        hi0, lo0 = p0 >> np.uint64(32), p0 & mask
        hi1, lo1 = p1 >> np.uint64(32), p1 & mask
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        c0 &= mask
        c2 &= mask
        k0 = (k0 + np.uint64(_W0)) & mask
        k1 = (k1 + np.uint64(_W1)) & mask
    return (c0.astype(np.uint32), c1.astype(np.uint32),
            c2.astype(np.uint32), c3.astype(np.uint32))


def normals4_np(seed, path_ids, block):
    """(4, N) normals matching the compiled kernel draw for draw."""
    seed = np.uint64(seed)
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    n = len(path_ids)
    counter = np.empty((4, n), dtype=np.uint32)
    counter[0] = np.uint32(block & 0xFFFFFFFF)
    counter[1] = np.uint32((block >> 32) & 0xFFFFFFFF)
    counter[2] = (path_ids & np.uint64(0xFFFFFFFF)).astype(np.uint32)
    counter[3] = (path_ids >> np.uint64(32)).astype(np.uint32)
    key = (np.uint32(seed & np.uint64(0xFFFFFFFF)),
           np.uint32(seed >> np.uint64(32)))
    r0, r1, r2, r3 = philox4x32_np(counter, key)
    u = [(x.astype(np.float64) + 0.5) * _INV32 for x in (r0, r1, r2, r3)]
    out = np.empty((4, n))
    for pair, (ua, ub) in enumerate(((u[0], u[1]), (u[2], u[3]))):
        mag = np.sqrt(-2.0 * np.log(ua))
        c = np.cos(_TWO_PI * ub)
        s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
        s[ub > 0.5] *= -1.0
        out[2 * pair] = mag * c
        out[2 * pair + 1] = mag * s
    return out


def run_paths_np(npairs, twins, nsteps, x0, dt, mu, sigma, r, rates, thr,
                 seed, rew, absorbed, taudisc):
    """Reference engine: same recursion with callable coefficients.

    Vectorized over paths, stepping in time; orders of magnitude slower than
    the compiled kernel and intended for user-defined models and tests.
    The mu/sigma callables must accept numpy arrays.
    """
    n, V = thr.shape
    sqdt = np.sqrt(dt)
    decay = np.exp(-r * dt)
    ids = np.arange(npairs, dtype=np.uint64)
    X = np.full((twins, V, npairs), float(x0))
    m = np.full((twins, V, npairs), 1.0 if x0 > 0.0 else 0.0)
    td = np.ones((twins, V, npairs))
    rloc = np.zeros((twins, V, n, npairs))
    disc = 1.0
    zblock = None
    for t in range(nsteps):
        j = t & 3
        if j == 0:
            zblock = normals4_np(seed, ids, t >> 2)
        z = zblock[j]
        discn = disc * decay
        for h in range(twins):
            zz = z if h == 0 else -z
            for v in range(V):
                x = X[h, v]
                alive = m[h, v]
                ext = np.zeros(npairs)
                for i in range(n):
                    ind = alive * (x >= thr[i, v])
                    rloc[h, v, i] += disc * rates[i] * dt * ind
                    ext += rates[i] * ind
                xn = x + alive * ((mu(x) - ext) * dt + sigma(x) * sqdt * zz)
                crossed = (alive == 1.0) & (xn <= 0.0)
                m[h, v][crossed] = 0.0
                td[h, v][crossed] = discn
                X[h, v] = xn
        disc = discn
    for h in range(twins):
        for v in range(V):
            dead = m[h, v] == 0.0
            absorbed[:, h, v] = dead.astype(np.uint8)
            taudisc[:, h, v] = np.where(dead, td[h, v], disc)
            for i in range(n):
                rew[:, h, v, i] = rloc[h, v, i]
