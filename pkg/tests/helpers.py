"""Shared test fixtures: the volume-discretized dipole-sum oracle."""
import numpy as np

from qdmsim.constants import MU0


def disk_cells(diameter, thickness, n_side, n_z):
    """Midpoint-rule cell centers filling a disk (center at the origin)."""
    r = 0.5 * diameter
    xs = (np.arange(n_side) + 0.5) / n_side * diameter - r
    xg, yg = np.meshgrid(xs, xs, indexing="ij")
    inside = xg ** 2 + yg ** 2 <= r ** 2
    xc, yc = xg[inside], yg[inside]
    zs = (np.arange(n_z) + 0.5) / n_z * thickness - 0.5 * thickness
    pts = np.concatenate(
        [np.stack([xc, yc, np.full_like(xc, z)], axis=1) for z in zs])
    return pts


def dipole_sum_field(moment, cells, obs, chunk=16):
    """Field of a uniformly magnetized body as a sum of cell dipoles.

    moment: total moment vector (J/T); cells: (N, 3) centers; obs: (M, 3).
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    mcell = np.asarray(moment, dtype=float) / len(cells)
    out = np.empty((obs.shape[0], 3))
    for i0 in range(0, obs.shape[0], chunk):
        o = obs[i0:i0 + chunk]
        r = o[:, None, :] - cells[None, :, :]
        rr = np.einsum("mni,mni->mn", r, r)
        inv_r5 = rr ** -2.5
        mr = r @ mcell
        b = (3.0 * mr * inv_r5)[..., None] * r \
            - (rr ** -1.5)[..., None] * mcell[None, None, :]
        out[i0:i0 + chunk] = MU0 / (4 * np.pi) * b.sum(axis=1)
    return out
