"""Pure-numpy implementation of the near-field radiation integral.

Fallback backend; the compiled Cython kernel implements the identical sums.
Chunked over observers to bound the size of broadcast temporaries.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

# observers closer than this to a source centroid make the kernel singular
MIN_DISTANCE_MM = 1e-6

# soft cap on pair-array elements per chunk (memory control)
_CHUNK_PAIRS = 2_000_000


class SingularKernelError(ValueError):
    """An observer coincides (within tolerance) with a source centroid."""


def radiate_pairs(
    src_pos: np.ndarray,
    areas: np.ndarray,
    current_j: np.ndarray,
    current_m: np.ndarray,
    obs: np.ndarray,
    k: complex,
    eta: complex,
    workers: int = 1,
    has_j: bool = True,
    has_m: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Fields at `obs` radiated by facet currents with centroid quadrature.

    E(r) = sum_j { -A1*G1*J - A1*G2*(J.R)R - B*G3*(M x R) } e^{-jkR} ds
    H(r) = sum_j { -A2*G1*M - A2*G2*(M.R)R + B*G3*(J x R) } e^{-jkR} ds

    with R = r - r_j (full vector), R = |R| inside the kernels,
    G1 = (-1 - jkR + (kR)^2)/R^3, G2 = (3 + j3kR - (kR)^2)/R^5,
    G3 = (1 + jkR)/R^3, A1 = j*eta/(4*pi*k), A2 = j/(4*pi*k*eta),
    B = 1/(4*pi).  `k` and `eta` may be complex (in-medium propagation).
    `workers` is accepted for interface parity and ignored here.
    `has_j`/`has_m` let callers skip terms for identically-zero currents
    (electric-only sheets are common); passing True is always correct.
    """
    src_pos = np.ascontiguousarray(src_pos, dtype=float)
    obs = np.ascontiguousarray(obs, dtype=float)
    areas = np.ascontiguousarray(areas, dtype=float)
    current_j = np.ascontiguousarray(current_j, dtype=complex)
    current_m = np.ascontiguousarray(current_m, dtype=complex)
    n_src = src_pos.shape[0]
    n_obs = obs.shape[0]

    a1 = 1j * eta / (4.0 * np.pi * k)
    a2 = 1j / (4.0 * np.pi * k * eta)
    b = 1.0 / (4.0 * np.pi)

    e_out = np.zeros((n_obs, 3), dtype=complex)
    h_out = np.zeros((n_obs, 3), dtype=complex)
    if n_src == 0 or n_obs == 0 or not (has_j or has_m):
        return e_out, h_out
    chunk = max(1, _CHUNK_PAIRS // max(1, n_src))
    for lo in range(0, n_obs, chunk):
        hi = min(n_obs, lo + chunk)
        rvec = obs[lo:hi, None, :] - src_pos[None, :, :]  # (c, n, 3)
        r = np.linalg.norm(rvec, axis=2)  # (c, n)
        if np.any(r < MIN_DISTANCE_MM):
            raise SingularKernelError(
                f"observer within {MIN_DISTANCE_MM} mm of a source centroid"
            )
        kr = k * r
        r3 = r * r * r
        g1 = (-1.0 - 1j * kr + kr * kr) / r3
        g2 = (3.0 + 3j * kr - kr * kr) / (r3 * r * r)
        g3 = (1.0 + 1j * kr) / r3
        phase = np.exp(-1j * kr) * areas[None, :]
        g1p = g1 * phase
        g2p = g2 * phase
        g3p = g3 * phase

        e_acc = np.zeros((hi - lo, 3), dtype=complex)
        h_acc = np.zeros((hi - lo, 3), dtype=complex)
        if has_j:
            jdotr = np.einsum("nk,cnk->cn", current_j, rvec)
            jxr = np.cross(np.broadcast_to(current_j, rvec.shape), rvec)
            se1 = np.einsum("cn,nk->ck", g1p, current_j) + np.einsum(
                "cn,cnk->ck", g2p * jdotr, rvec
            )
            sh3 = np.einsum("cn,cnk->ck", g3p, jxr)
            e_acc += -a1 * se1
            h_acc += b * sh3
        if has_m:
            mdotr = np.einsum("nk,cnk->cn", current_m, rvec)
            mxr = np.cross(np.broadcast_to(current_m, rvec.shape), rvec)
            sh1 = np.einsum("cn,nk->ck", g1p, current_m) + np.einsum(
                "cn,cnk->ck", g2p * mdotr, rvec
            )
            se3 = np.einsum("cn,cnk->ck", g3p, mxr)
            e_acc += -b * se3
            h_acc += -a2 * sh1
        e_out[lo:hi] = e_acc
        h_out[lo:hi] = h_acc
    return e_out, h_out
