"""Hot numeric kernels, in numba and pure-numpy variants.

The pulse kernels work on the two-level Hamiltonian

    H(k, d) = d * Z + Re[h_k] * X + Im[h_k] * Y,

whose segment propagator exp(-i H dt) has the closed axis-angle form
c * I - i * sin(w dt)/w * (a . sigma) with w = |a|.  Gradients of the
gate-overlap magnitude |Tr[T^dag U]| are exact: each segment derivative is
assembled from the spectral divided differences of exp(-i lambda dt) on the
eigenvalues +/- w, not from a small-dt approximation.

The sampling kernel applies per-shot gathered transfer matrices to a batch
of state coefficient vectors.

Use :func:`get_kernels` to fetch a specific backend; module attribute
``kernels`` holds the one selected by ``QPSYNTH_BACKEND``.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ._accel import ACTIVE_BACKEND, NUMBA_ENABLED

_TINY = 1e-300
_DEGENERATE = 1e-12


# ---------------------------------------------------------------------------
# pure numpy implementations (vectorized over offsets and segments)
# ---------------------------------------------------------------------------

def _np_segment_unitaries(h_re, h_im, offsets, dt):
    """Segment propagators, shape (q, K, 2, 2)."""
    ax = h_re[None, :]
    ay = h_im[None, :]
    az = np.broadcast_to(offsets[:, None], (offsets.size, h_re.size))
    w = np.sqrt(ax * ax + ay * ay + az * az)
    c = np.cos(w * dt)
    snc = np.where(w > _TINY, np.sin(w * dt) / np.maximum(w, _TINY), dt)
    U = np.empty((offsets.size, h_re.size, 2, 2), dtype=np.complex128)
    U[..., 0, 0] = c - 1j * snc * az
    U[..., 1, 1] = c + 1j * snc * az
    U[..., 0, 1] = -1j * snc * (ax - 1j * ay)
    U[..., 1, 0] = -1j * snc * (ax + 1j * ay)
    return U


def _np_propagate_total(h_re, h_im, offsets, dt):
    """Total propagators over all segments, shape (q, 2, 2); later segments act last."""
    segs = _np_segment_unitaries(h_re, h_im, offsets, dt)
    total = np.broadcast_to(np.eye(2, dtype=np.complex128), (offsets.size, 2, 2)).copy()
    for k in range(h_re.size):
        total = segs[:, k] @ total
    return total


def _np_fidelity_grad(h_re, h_im, offsets, dt, target):
    """Mean of |Tr[target^dag U(d)]| over offsets and its exact gradient.

    Returns ``(mean_f, g_re, g_im)`` with gradients with respect to the real
    and imaginary parts of every segment amplitude.
    """
    q, K = offsets.size, h_re.size
    segs = _np_segment_unitaries(h_re, h_im, offsets, dt)

    prefix = np.empty((q, K, 2, 2), dtype=np.complex128)
    suffix = np.empty((q, K, 2, 2), dtype=np.complex128)
    eye = np.broadcast_to(np.eye(2, dtype=np.complex128), (q, 2, 2)).copy()
    acc = eye.copy()
    for k in range(K):
        prefix[:, k] = acc
        acc = segs[:, k] @ acc
    total = acc
    acc = eye.copy()
    for k in range(K - 1, -1, -1):
        suffix[:, k] = acc
        acc = acc @ segs[:, k]

    tdag = np.ascontiguousarray(target.conj().T)
    z = np.einsum("ab,qba->q", tdag, total)
    fvals = np.abs(z)
    pref = np.conj(z) / np.maximum(fvals, _TINY)

    ax = np.broadcast_to(h_re[None, :], (q, K))
    ay = np.broadcast_to(h_im[None, :], (q, K))
    az = np.broadcast_to(offsets[:, None], (q, K))
    w = np.sqrt(ax * ax + ay * ay + az * az)
    ep = np.exp(-1j * w * dt)
    em = np.conj(ep)
    fpp = -1j * dt * ep
    fmm = -1j * dt * em
    small = 2.0 * w < _DEGENERATE
    fpm = np.where(small, fpp, (ep - em) / np.where(small, 1.0, 2.0 * w))

    wsafe = np.maximum(w, _TINY)
    nx, ny, nz = ax / wsafe, ay / wsafe, az / wsafe
    N = np.empty((q, K, 2, 2), dtype=np.complex128)
    N[..., 0, 0] = nz
    N[..., 1, 1] = -nz
    N[..., 0, 1] = nx - 1j * ny
    N[..., 1, 0] = nx + 1j * ny

    # Q_k = prefix_k @ T^dag @ suffix_k, so dz = Tr[Q_k dU_k]
    Q = np.einsum("qkab,bc,qkcd->qkad", prefix, tdag, suffix)
    NQ = N @ Q
    QN = Q @ N
    NQN = NQ @ N
    c0 = (fpp + fmm + 2.0 * fpm)[..., None, None]
    c1 = (fpp - fmm)[..., None, None]
    c2 = (fpp + fmm - 2.0 * fpm)[..., None, None]
    W = 0.25 * (c0 * Q + c1 * (NQ + QN) + c2 * NQN)

    dzx = W[..., 0, 1] + W[..., 1, 0]
    dzy = 1j * (W[..., 0, 1] - W[..., 1, 0])
    g_re = np.real(pref[:, None] * dzx).sum(axis=0) / q
    g_im = np.real(pref[:, None] * dzy).sum(axis=0) / q
    return float(fvals.sum() / q), g_re, g_im


def _np_evolve_sampled(ptms, idx, states):
    """Apply ptms[idx[s]] to states[s] for every shot s."""
    return np.einsum("sij,sj->si", ptms[idx], states)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _nb_propagate_total(h_re, h_im, offsets, dt):
        q = offsets.shape[0]
        K = h_re.shape[0]
        out = np.empty((q, 2, 2), np.complex128)
        for i in range(q):
            d = offsets[i]
            u00 = 1.0 + 0j
            u01 = 0.0 + 0j
            u10 = 0.0 + 0j
            u11 = 1.0 + 0j
            for k in range(K):
                ax = h_re[k]
                ay = h_im[k]
                w = np.sqrt(ax * ax + ay * ay + d * d)
                c = np.cos(w * dt)
                snc = np.sin(w * dt) / w if w > _TINY else dt
                a00 = c - 1j * snc * d
                a11 = c + 1j * snc * d
                a01 = -1j * snc * (ax - 1j * ay)
                a10 = -1j * snc * (ax + 1j * ay)
                n00 = a00 * u00 + a01 * u10
                n01 = a00 * u01 + a01 * u11
                n10 = a10 * u00 + a11 * u10
                n11 = a10 * u01 + a11 * u11
                u00, u01, u10, u11 = n00, n01, n10, n11
            out[i, 0, 0] = u00
            out[i, 0, 1] = u01
            out[i, 1, 0] = u10
            out[i, 1, 1] = u11
        return out

    @njit(cache=True, nogil=True)
    def _nb_fidelity_grad(h_re, h_im, offsets, dt, target):
        q = offsets.shape[0]
        K = h_re.shape[0]
        t00 = np.conj(target[0, 0])
        t01 = np.conj(target[1, 0])
        t10 = np.conj(target[0, 1])
        t11 = np.conj(target[1, 1])
        g_re = np.zeros(K)
        g_im = np.zeros(K)
        f_sum = 0.0
        seg = np.empty((K, 2, 2), np.complex128)
        pre = np.empty((K, 2, 2), np.complex128)
        suf = np.empty((K, 2, 2), np.complex128)
        for i in range(q):
            d = offsets[i]
            for k in range(K):
                ax = h_re[k]
                ay = h_im[k]
                w = np.sqrt(ax * ax + ay * ay + d * d)
                c = np.cos(w * dt)
                snc = np.sin(w * dt) / w if w > _TINY else dt
                seg[k, 0, 0] = c - 1j * snc * d
                seg[k, 1, 1] = c + 1j * snc * d
                seg[k, 0, 1] = -1j * snc * (ax - 1j * ay)
                seg[k, 1, 0] = -1j * snc * (ax + 1j * ay)
            a00 = 1.0 + 0j
            a01 = 0.0 + 0j
            a10 = 0.0 + 0j
            a11 = 1.0 + 0j
            for k in range(K):
                pre[k, 0, 0] = a00
                pre[k, 0, 1] = a01
                pre[k, 1, 0] = a10
                pre[k, 1, 1] = a11
                s00 = seg[k, 0, 0]
                s01 = seg[k, 0, 1]
                s10 = seg[k, 1, 0]
                s11 = seg[k, 1, 1]
                n00 = s00 * a00 + s01 * a10
                n01 = s00 * a01 + s01 * a11
                n10 = s10 * a00 + s11 * a10
                n11 = s10 * a01 + s11 * a11
                a00, a01, a10, a11 = n00, n01, n10, n11
            b00 = 1.0 + 0j
            b01 = 0.0 + 0j
            b10 = 0.0 + 0j
            b11 = 1.0 + 0j
            for k in range(K - 1, -1, -1):
                suf[k, 0, 0] = b00
                suf[k, 0, 1] = b01
                suf[k, 1, 0] = b10
                suf[k, 1, 1] = b11
                s00 = seg[k, 0, 0]
                s01 = seg[k, 0, 1]
                s10 = seg[k, 1, 0]
                s11 = seg[k, 1, 1]
                n00 = b00 * s00 + b01 * s10
                n01 = b00 * s01 + b01 * s11
                n10 = b10 * s00 + b11 * s10
                n11 = b10 * s01 + b11 * s11
                b00, b01, b10, b11 = n00, n01, n10, n11
            z = t00 * a00 + t01 * a01 + t10 * a10 + t11 * a11
            f = np.abs(z)
            f_sum += f
            pz = np.conj(z) / f if f > _TINY else 0.0 + 0j
            for k in range(K):
                ax = h_re[k]
                ay = h_im[k]
                w = np.sqrt(ax * ax + ay * ay + d * d)
                ep = np.exp(-1j * w * dt)
                em = np.conj(ep)
                fpp = -1j * dt * ep
                fmm = -1j * dt * em
                fpm = (ep - em) / (2.0 * w) if 2.0 * w > _DEGENERATE else fpp
                ws = w if w > _TINY else _TINY
                nx = ax / ws
                ny = ay / ws
                nz = d / ws
                # Q = pre_k @ T^dag @ suf_k
                p00 = pre[k, 0, 0] * t00 + pre[k, 0, 1] * t10
                p01 = pre[k, 0, 0] * t01 + pre[k, 0, 1] * t11
                p10 = pre[k, 1, 0] * t00 + pre[k, 1, 1] * t10
                p11 = pre[k, 1, 0] * t01 + pre[k, 1, 1] * t11
                q00 = p00 * suf[k, 0, 0] + p01 * suf[k, 1, 0]
                q01 = p00 * suf[k, 0, 1] + p01 * suf[k, 1, 1]
                q10 = p10 * suf[k, 0, 0] + p11 * suf[k, 1, 0]
                q11 = p10 * suf[k, 0, 1] + p11 * suf[k, 1, 1]
                m00 = nz
                m11 = -nz
                m01 = nx - 1j * ny
                m10 = nx + 1j * ny
                nq00 = m00 * q00 + m01 * q10
                nq01 = m00 * q01 + m01 * q11
                nq10 = m10 * q00 + m11 * q10
                nq11 = m10 * q01 + m11 * q11
                qn00 = q00 * m00 + q01 * m10
                qn01 = q00 * m01 + q01 * m11
                qn10 = q10 * m00 + q11 * m10
                qn11 = q10 * m01 + q11 * m11
                nqn00 = nq00 * m00 + nq01 * m10
                nqn01 = nq00 * m01 + nq01 * m11
                nqn10 = nq10 * m00 + nq11 * m10
                nqn11 = nq10 * m01 + nq11 * m11
                c0 = 0.25 * (fpp + fmm + 2.0 * fpm)
                c1 = 0.25 * (fpp - fmm)
                c2 = 0.25 * (fpp + fmm - 2.0 * fpm)
                w01 = c0 * q01 + c1 * (nq01 + qn01) + c2 * nqn01
                w10 = c0 * q10 + c1 * (nq10 + qn10) + c2 * nqn10
                dzx = w01 + w10
                dzy = 1j * (w01 - w10)
                g_re[k] += (pz * dzx).real
                g_im[k] += (pz * dzy).real
        return f_sum / q, g_re / q, g_im / q

    @njit(cache=True, nogil=True)
    def _nb_evolve_sampled(ptms, idx, states):
        n_shots, dim = states.shape
        out = np.empty_like(states)
        for s in range(n_shots):
            m = ptms[idx[s]]
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += m[i, j] * states[s, j]
                out[s, i] = acc
        return out


_NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    propagate_total=_np_propagate_total,
    fidelity_grad=_np_fidelity_grad,
    evolve_sampled=_np_evolve_sampled,
)

if NUMBA_ENABLED:
    _NUMBA_KERNELS = SimpleNamespace(
        name="numba",
        propagate_total=_nb_propagate_total,
        fidelity_grad=_nb_fidelity_grad,
        evolve_sampled=_nb_evolve_sampled,
    )
else:
    _NUMBA_KERNELS = None


def get_kernels(name: str | None = None) -> SimpleNamespace:
    """Kernel namespace for ``name`` in {"numpy", "numba"}; default = active backend."""
    if name is None:
        name = ACTIVE_BACKEND
    if name == "numpy":
        return _NUMPY_KERNELS
    if name == "numba":
        if _NUMBA_KERNELS is None:
            raise RuntimeError("numba backend requested but numba is not available")
        return _NUMBA_KERNELS
    raise ValueError(f"unknown backend {name!r}")


kernels = get_kernels()
