"""Pure-NumPy strip assembly kernels.

Reference implementation of the energy/derivative kernels; the compiled
backend in ``_core.pyx`` mirrors these semantics exactly.  All functions take
node positions ``q`` of shape ``(n, 2)`` and operate on the full node set;
free/boundary slicing happens one level up.

Bending uses the tan-half-angle measure ``kh_i = 2 tan(phi_i / 2)`` at every
node with two incident edges, evaluated as ``2 (t_prev x t_next) / (1 +
t_prev . t_next)`` with unit tangents, so energy, gradient and Hessian stay
closed-form.
"""

import numpy as np

from ..errors import DegenerateGeometryError

DEGENERACY_REL_TOL = 1e-12

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _edge_geometry(q, dl):
    e = q[1:] - q[:-1]
    length = np.hypot(e[:, 0], e[:, 1])
    if np.min(length) < DEGENERACY_REL_TOL * dl:
        raise DegenerateGeometryError(
            f"edge collapsed: min length {np.min(length):.3e} at rest length {dl:.3e}"
        )
    return e, length, e / length[:, None]


def _perp(v):
    # v x z_hat in the plane: (v_y, -v_x)
    return np.stack([v[:, 1], -v[:, 0]], axis=1)


def _angle_quantities(t):
    ta, tb = t[:-1], t[1:]
    chi = 1.0 + np.einsum("ij,ij->i", ta, tb)
    cross = ta[:, 0] * tb[:, 1] - ta[:, 1] * tb[:, 0]
    kh = 2.0 * cross / chi
    return ta, tb, chi, kh


def _bend_kappa_gradients(t, length):
    """Per-angle tan-half-angle measure and its 6-gradient over (a, b, c) nodes."""
    ta, tb, chi, kh = _angle_quantities(t)
    la, lb = length[:-1], length[1:]
    tilde = (ta + tb) / chi[:, None]
    two_over_chi = (2.0 / chi)[:, None]
    dk_de = (-kh[:, None] * tilde + two_over_chi * _perp(tb)) / la[:, None]
    dk_df = (-kh[:, None] * tilde - two_over_chi * _perp(ta)) / lb[:, None]
    grad6 = np.concatenate([-dk_de, dk_de - dk_df, dk_df], axis=1)
    return kh, grad6, (ta, tb, chi, la, lb, tilde, dk_de, dk_df)


def energy_terms(q, dl, ks, kb, masses, gravity):
    """Stretching, bending and gravity energies as a 3-tuple [J]."""
    _, length, t = _edge_geometry(q, dl)
    strain = 1.0 - length / dl
    e_s = 0.5 * ks * dl * np.dot(strain, strain)
    _, _, _, kh = _angle_quantities(t)
    e_b = 0.5 * kb / dl * np.dot(kh, kh)
    e_g = -float(masses @ (q @ gravity))
    return float(e_s), float(e_b), float(e_g)


def gradient(q, dl, ks, kb, masses, gravity):
    """Gradient of the total energy w.r.t. all node coordinates, flat (2n,)."""
    n = q.shape[0]
    _, length, t = _edge_geometry(q, dl)
    grad = np.zeros((n, 2))

    # stretching: dE/de per edge, scattered with signs (+ on head, - on tail)
    f_edge = (-ks * (1.0 - length / dl))[:, None] * t
    np.add.at(grad, np.arange(1, n), f_edge)
    np.add.at(grad, np.arange(0, n - 1), -f_edge)

    # bending at nodes 1..n-2
    kh, grad6, _ = _bend_kappa_gradients(t, length)
    coeff = (kb / dl) * kh
    contrib = coeff[:, None] * grad6
    nodes = np.arange(1, n - 1)
    np.add.at(grad, nodes - 1, contrib[:, 0:2])
    np.add.at(grad, nodes, contrib[:, 2:4])
    np.add.at(grad, nodes + 1, contrib[:, 4:6])

    grad -= masses[:, None] * gravity[None, :]
    return grad.ravel()


def _bend_kappa_hessians(parts, kh):
    """Per-angle 6x6 second derivative of the tan-half-angle measure."""
    ta, tb, chi, la, lb, tilde, dk_de, dk_df = parts
    m = kh.shape[0]
    pa, pb = _perp(ta), _perp(tb)
    inv_chi = 1.0 / chi

    def outer(u, v):
        return u[:, :, None] * v[:, None, :]

    eye = np.broadcast_to(np.eye(2), (m, 2, 2))
    tt = outer(tilde, tilde)
    two_chi = (2.0 * inv_chi)[:, None, None]
    kh_c = kh[:, None, None]

    dee = (
        2.0 * kh_c * tt
        - two_chi * (outer(pb, tilde) + outer(tilde, pb))
        - (kh * inv_chi)[:, None, None] * (eye - outer(ta, ta))
    ) / (la * la)[:, None, None]
    dff = (
        2.0 * kh_c * tt
        + two_chi * (outer(pa, tilde) + outer(tilde, pa))
        - (kh * inv_chi)[:, None, None] * (eye - outer(tb, tb))
    ) / (lb * lb)[:, None, None]
    def_ = (
        -(kh * inv_chi)[:, None, None] * (eye + outer(ta, tb))
        + 2.0 * kh_c * tt
        - two_chi * outer(pb, tilde)
        + two_chi * outer(tilde, pa)
        - two_chi * _ROT90[None, :, :]
    ) / (la * lb)[:, None, None]
    dfe = def_.transpose(0, 2, 1)

    h = np.zeros((m, 6, 6))
    h[:, 0:2, 0:2] = dee
    h[:, 0:2, 2:4] = -dee + def_
    h[:, 0:2, 4:6] = -def_
    h[:, 2:4, 0:2] = -dee + dfe
    h[:, 2:4, 2:4] = dee - def_ - dfe + dff
    h[:, 2:4, 4:6] = def_ - dff
    h[:, 4:6, 0:2] = -dfe
    h[:, 4:6, 2:4] = dfe - dff
    h[:, 4:6, 4:6] = dff
    return h


def _scatter_band(ab, blocks, bases, size):
    """Accumulate symmetric local blocks into the lower band storage.

    Off-diagonal pairs are averaged with their transposes so the stored
    matrix is symmetric to the last bit regardless of rounding in the blocks.
    """
    for li in range(size):
        for lj in range(li + 1):
            if li == lj:
                vals = blocks[:, li, lj]
            else:
                vals = 0.5 * (blocks[:, li, lj] + blocks[:, lj, li])
            np.add.at(ab, (li - lj, bases + lj), vals)


def hessian_band(q, dl, ks, kb):
    """Banded Hessian of the elastic energy over all node coordinates.

    Returns LAPACK lower-band storage of shape ``(6, 2n)`` (half-bandwidth 5).
    Gravity is linear in positions and contributes nothing.
    """
    n = q.shape[0]
    _, length, t = _edge_geometry(q, dl)
    ab = np.zeros((6, 2 * n))

    # stretching blocks: [[k, -k], [-k, k]] per edge
    strain = 1.0 - length / dl
    m_e = n - 1
    tt = t[:, :, None] * t[:, None, :]
    eye = np.broadcast_to(np.eye(2), (m_e, 2, 2))
    k_edge = (ks / dl) * tt - (ks * strain / length)[:, None, None] * (eye - tt)
    blocks4 = np.zeros((m_e, 4, 4))
    blocks4[:, 0:2, 0:2] = k_edge
    blocks4[:, 0:2, 2:4] = -k_edge
    blocks4[:, 2:4, 0:2] = -k_edge
    blocks4[:, 2:4, 2:4] = k_edge
    _scatter_band(ab, blocks4, 2 * np.arange(m_e), 4)

    # bending blocks: (kb/dl) (grad grad^T + kh * d2kh)
    kh, grad6, parts = _bend_kappa_gradients(t, length)
    d2 = _bend_kappa_hessians(parts, kh)
    blocks6 = (kb / dl) * (
        grad6[:, :, None] * grad6[:, None, :] + kh[:, None, None] * d2
    )
    _scatter_band(ab, blocks6, 2 * np.arange(n - 2), 6)
    return ab


def curvature_measures(q, dl):
    """Tan-half-angle measure ``kh_i`` at interior nodes 1..n-2, shape (n-2,)."""
    _, _, t = _edge_geometry(q, dl)
    _, _, _, kh = _angle_quantities(t)
    return kh


def curvature_measures_with_gradients(q, dl):
    """Interior-node measure and its per-angle 6-gradient, shapes (n-2,), (n-2, 6)."""
    _, length, t = _edge_geometry(q, dl)
    kh, grad6, _ = _bend_kappa_gradients(t, length)
    return kh, grad6
