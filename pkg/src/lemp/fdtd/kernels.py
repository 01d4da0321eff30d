"""Numba Yee-cycle kernels.

Every kernel is a pure element-wise stencil over disjoint output cells, so
results do not depend on the thread count. CPML memory (psi) is stored only
for layer nodes: ``slot_*[i] >= 0`` gives the compressed index of node i.

Axisymmetric lattice (i along r, k along z; cell size dx):
    Ez[i, k]  at r = i dx,       z = (k + 1/2) dx     shape (nr + 1, nz)
    Er[i, k]  at r = (i+1/2) dx, z = k dx             shape (nr, nz + 1)
    Hp[i, k]  at r = (i+1/2) dx, z = (k + 1/2) dx     shape (nr, nz)

Cartesian lattice follows the usual Yee placement with E on cell edges and
H on face centres.
"""

import warnings

import numpy as np
from numba import njit, prange

# numba probes an old system TBB on first parallel launch; the fallback layer is fine
warnings.filterwarnings("ignore", message="The TBB threading layer")

_OPTS = dict(parallel=True, cache=True, nogil=True)


@njit(**_OPTS)
def axi_update_h(hp, ez, er, da, db,
                 kr, br, ar, sr, psi_r,
                 kz, bz, az, sz, psi_z):
    nr, nz = hp.shape
    for i in prange(nr):
        si = sr[i]
        for k in range(nz):
            d_r = ez[i + 1, k] - ez[i, k]
            d_z = er[i, k + 1] - er[i, k]
            curl = d_r * kr[i] - d_z * kz[k]
            if si >= 0:
                psi_r[si, k] = br[i] * psi_r[si, k] + ar[i] * d_r
                curl += psi_r[si, k]
            sk = sz[k]
            if sk >= 0:
                psi_z[i, sk] = bz[k] * psi_z[i, sk] + az[k] * d_z
                curl -= psi_z[i, sk]
            hp[i, k] = da[i, k] * hp[i, k] + db[i, k] * curl


@njit(**_OPTS)
def axi_update_e(ez, er, hp, ca_z, cb_z, ca_r, cb_r,
                 kr, br, ar, sr, psi_r,
                 kz, bz, az, sz, psi_z):
    nr, nz = hp.shape
    for i in prange(nr):
        si = sr[i]
        for k in range(nz):
            if i == 0:
                # r -> 0 limit of (1/r) d(r Hphi)/dr over the axis disc of radius dx/2
                curl = 4.0 * hp[0, k]
            else:
                d = ((i + 0.5) * hp[i, k] - (i - 0.5) * hp[i - 1, k]) / i
                curl = d * kr[i]
                if si >= 0:
                    psi_r[si, k] = br[i] * psi_r[si, k] + ar[i] * d
                    curl += psi_r[si, k]
            ez[i, k] = ca_z[i, k] * ez[i, k] + cb_z[i, k] * curl
    for i in prange(nr):
        for k in range(1, nz):
            d = hp[i, k] - hp[i, k - 1]
            curl = -d * kz[k]
            sk = sz[k]
            if sk >= 0:
                psi_z[i, sk] = bz[k] * psi_z[i, sk] + az[k] * d
                curl -= psi_z[i, sk]
            er[i, k] = ca_r[i, k] * er[i, k] + cb_r[i, k] * curl


@njit(**_OPTS)
def axi_monitor(ez, er, hp, dx):
    """Return (max|E|, max|H|, vacuum-weighted energy per 2*pi) in float64."""
    nr, nz = hp.shape
    emax = np.zeros(nr + 1)
    hmax = np.zeros(nr + 1)
    wsum = np.zeros(nr + 1)
    for i in prange(nr + 1):
        r_e = i * dx if i > 0 else dx / 8.0
        r_h = (i + 0.5) * dx
        em = 0.0
        hm = 0.0
        w = 0.0
        for k in range(nz):
            v = np.float64(ez[i, k])
            if not np.isfinite(v):
                em = np.inf
            elif abs(v) > em:
                em = abs(v)
            w += 8.8541878128e-12 * v * v * r_e
            if i < nr:
                v = np.float64(hp[i, k])
                if not np.isfinite(v):
                    hm = np.inf
                elif abs(v) > hm:
                    hm = abs(v)
                w += 1.25663706212e-6 * v * v * r_h
        if i < nr:
            for k in range(nz + 1):
                v = np.float64(er[i, k])
                if not np.isfinite(v):
                    em = np.inf
                elif abs(v) > em:
                    em = abs(v)
                w += 8.8541878128e-12 * v * v * r_h
        emax[i] = em
        hmax[i] = hm
        wsum[i] = w
    return emax.max(), hmax.max(), 0.5 * wsum.sum() * dx * dx


@njit(**_OPTS)
def cart_update_h(hx, hy, hz, ex, ey, ez,
                  da_x, db_x, da_y, db_y, da_z, db_z,
                  kx, bx, ax, sx, ky, by, ay, sy, kz, bz, az, sz,
                  p_hx_y, p_hx_z, p_hy_z, p_hy_x, p_hz_x, p_hz_y):
    # kx/bx/ax/sx etc. are the half-node profiles
    n0, n1, n2 = hx.shape
    for i in prange(n0):
        for j in range(n1):
            sj = sy[j]
            for k in range(n2):
                d_y = ez[i, j + 1, k] - ez[i, j, k]
                d_z = ey[i, j, k + 1] - ey[i, j, k]
                curl = d_y * ky[j] - d_z * kz[k]
                if sj >= 0:
                    p_hx_y[i, sj, k] = by[j] * p_hx_y[i, sj, k] + ay[j] * d_y
                    curl += p_hx_y[i, sj, k]
                sk = sz[k]
                if sk >= 0:
                    p_hx_z[i, j, sk] = bz[k] * p_hx_z[i, j, sk] + az[k] * d_z
                    curl -= p_hx_z[i, j, sk]
                hx[i, j, k] = da_x[i, j, k] * hx[i, j, k] - db_x[i, j, k] * curl
    n0, n1, n2 = hy.shape
    for i in prange(n0):
        si = sx[i]
        for j in range(n1):
            for k in range(n2):
                d_z = ex[i, j, k + 1] - ex[i, j, k]
                d_x = ez[i + 1, j, k] - ez[i, j, k]
                curl = d_z * kz[k] - d_x * kx[i]
                sk = sz[k]
                if sk >= 0:
                    p_hy_z[i, j, sk] = bz[k] * p_hy_z[i, j, sk] + az[k] * d_z
                    curl += p_hy_z[i, j, sk]
                if si >= 0:
                    p_hy_x[si, j, k] = bx[i] * p_hy_x[si, j, k] + ax[i] * d_x
                    curl -= p_hy_x[si, j, k]
                hy[i, j, k] = da_y[i, j, k] * hy[i, j, k] - db_y[i, j, k] * curl
    n0, n1, n2 = hz.shape
    for i in prange(n0):
        si = sx[i]
        for j in range(n1):
            sj = sy[j]
            for k in range(n2):
                d_x = ey[i + 1, j, k] - ey[i, j, k]
                d_y = ex[i, j + 1, k] - ex[i, j, k]
                curl = d_x * kx[i] - d_y * ky[j]
                if si >= 0:
                    p_hz_x[si, j, k] = bx[i] * p_hz_x[si, j, k] + ax[i] * d_x
                    curl += p_hz_x[si, j, k]
                if sj >= 0:
                    p_hz_y[i, sj, k] = by[j] * p_hz_y[i, sj, k] + ay[j] * d_y
                    curl -= p_hz_y[i, sj, k]
                hz[i, j, k] = da_z[i, j, k] * hz[i, j, k] - db_z[i, j, k] * curl


@njit(**_OPTS)
def cart_update_e(ex, ey, ez, hx, hy, hz,
                  ca_x, cb_x, ca_y, cb_y, ca_z, cb_z,
                  kx, bx, ax, sx, ky, by, ay, sy, kz, bz, az, sz,
                  p_ex_y, p_ex_z, p_ey_z, p_ey_x, p_ez_x, p_ez_y):
    # integer-node profiles; boundary tangential E stays zero (PEC walls)
    nx, ny1, nz1 = ex.shape
    ny = ny1 - 1
    nz = nz1 - 1
    for i in prange(nx):
        for j in range(1, ny):
            sj = sy[j]
            for k in range(1, nz):
                d_y = hz[i, j, k] - hz[i, j - 1, k]
                d_z = hy[i, j, k] - hy[i, j, k - 1]
                curl = d_y * ky[j] - d_z * kz[k]
                if sj >= 0:
                    p_ex_y[i, sj, k] = by[j] * p_ex_y[i, sj, k] + ay[j] * d_y
                    curl += p_ex_y[i, sj, k]
                sk = sz[k]
                if sk >= 0:
                    p_ex_z[i, j, sk] = bz[k] * p_ex_z[i, j, sk] + az[k] * d_z
                    curl -= p_ex_z[i, j, sk]
                ex[i, j, k] = ca_x[i, j, k] * ex[i, j, k] + cb_x[i, j, k] * curl
    for i in prange(1, nx):
        si = sx[i]
        for j in range(ny):
            for k in range(1, nz):
                d_z = hx[i, j, k] - hx[i, j, k - 1]
                d_x = hz[i, j, k] - hz[i - 1, j, k]
                curl = d_z * kz[k] - d_x * kx[i]
                sk = sz[k]
                if sk >= 0:
                    p_ey_z[i, j, sk] = bz[k] * p_ey_z[i, j, sk] + az[k] * d_z
                    curl += p_ey_z[i, j, sk]
                if si >= 0:
                    p_ey_x[si, j, k] = bx[i] * p_ey_x[si, j, k] + ax[i] * d_x
                    curl -= p_ey_x[si, j, k]
                ey[i, j, k] = ca_y[i, j, k] * ey[i, j, k] + cb_y[i, j, k] * curl
    for i in prange(1, nx):
        si = sx[i]
        for j in range(1, ny):
            sj = sy[j]
            for k in range(nz):
                d_x = hy[i, j, k] - hy[i - 1, j, k]
                d_y = hx[i, j, k] - hx[i, j - 1, k]
                curl = d_x * kx[i] - d_y * ky[j]
                if si >= 0:
                    p_ez_x[si, j, k] = bx[i] * p_ez_x[si, j, k] + ax[i] * d_x
                    curl += p_ez_x[si, j, k]
                if sj >= 0:
                    p_ez_y[i, sj, k] = by[j] * p_ez_y[i, sj, k] + ay[j] * d_y
                    curl -= p_ez_y[i, sj, k]
                ez[i, j, k] = ca_z[i, j, k] * ez[i, j, k] + cb_z[i, j, k] * curl


@njit(**_OPTS)
def _absmax_energy(a, weight):
    n0 = a.shape[0]
    m = np.zeros(n0)
    w = np.zeros(n0)
    for i in prange(n0):
        mm = 0.0
        ww = 0.0
        for j in range(a.shape[1]):
            for k in range(a.shape[2]):
                v = np.float64(a[i, j, k])
                if not np.isfinite(v):
                    mm = np.inf
                elif abs(v) > mm:
                    mm = abs(v)
                ww += v * v
        m[i] = mm
        w[i] = ww
    return m.max(), 0.5 * weight * w.sum()


def cart_monitor(ex, ey, ez, hx, hy, hz, dx):
    vol = dx ** 3
    e = [_absmax_energy(a, 8.8541878128e-12 * vol) for a in (ex, ey, ez)]
    h = [_absmax_energy(a, 1.25663706212e-6 * vol) for a in (hx, hy, hz)]
    return (max(m for m, _ in e), max(m for m, _ in h),
            sum(w for _, w in e) + sum(w for _, w in h))
