"""Pure-NumPy implementations of the hot kernels.

Function-for-function mirror of the compiled extension in ``_ckern``;
used as the import-time fallback and as the reference side of the
backend parity tests. All label arrays are int32, coordinates float64.
"""

import numpy as np


def project_points(points, rot, trans, fx, fy, cx, cy, width, height, eps_depth):
    """Pinhole-project points already expressed relative to a pose (R, t).

    Returns (uv, depth, valid). uv rows for points at or behind the depth
    cutoff are (0, 0); valid requires depth > eps_depth and uv inside the
    closed rectangle [0, width-1] x [0, height-1].
    """
    q = points @ rot.T + trans
    z = q[:, 2]
    in_front = z > eps_depth
    zsafe = np.where(in_front, z, 1.0)
    u = np.where(in_front, fx * q[:, 0] / zsafe + cx, 0.0)
    v = np.where(in_front, fy * q[:, 1] / zsafe + cy, 0.0)
    valid = in_front & (u >= 0.0) & (u <= width - 1.0) & (v >= 0.0) & (v <= height - 1.0)
    return np.stack([u, v], axis=1), z.copy(), valid


def project_pullback(points, rot, trans, fx, fy, grad_uv, valid):
    """Accumulate d<grad_uv, uv>/d(delta) for a left-multiplied exp(delta).

    Twist order (tx, ty, tz, rx, ry, rz). Rows where valid is False are
    ignored.
    """
    mask = valid != 0
    q = points @ rot.T + trans
    gu = np.where(mask, grad_uv[:, 0], 0.0)
    gv = np.where(mask, grad_uv[:, 1], 0.0)
    z = np.where(mask, q[:, 2], 1.0)
    gq = np.empty_like(q)
    gq[:, 0] = gu * fx / z
    gq[:, 1] = gv * fy / z
    gq[:, 2] = -(gu * fx * q[:, 0] + gv * fy * q[:, 1]) / (z * z)
    gq[~mask] = 0.0
    out = np.empty(6)
    out[:3] = gq.sum(axis=0)
    # d(delta_r x q)/d(delta_r) contributes q x g per point
    out[3:] = np.cross(q, gq).sum(axis=0)
    return out


def _corner_indices(labels, uv):
    h, w = labels.shape
    u = uv[:, 0]
    v = uv[:, 1]
    x0 = np.clip(np.floor(u).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(v).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    return x0, y0, x1, y1, u - x0, v - y0


def sample_labels(labels, num_classes, uv):
    """Bilinear sample of the one-hot planes of a label image.

    Equivalent to interpolating the C one-hot planes at (u, v) but gathers
    the four corner classes directly. Returns an (N, C) array.
    """
    x0, y0, x1, y1, fu, fv = _corner_indices(labels, uv)
    n = uv.shape[0]
    out = np.zeros((n, num_classes))
    rows = np.arange(n)
    corners = (
        (y0, x0, (1.0 - fu) * (1.0 - fv)),
        (y0, x1, fu * (1.0 - fv)),
        (y1, x0, (1.0 - fu) * fv),
        (y1, x1, fu * fv),
    )
    for yy, xx, wgt in corners:
        np.add.at(out, (rows, labels[yy, xx]), wgt)
    return out


def sample_labels_pullback(labels, num_classes, uv, grad_soft):
    """d<grad_soft, soft>/d(u, v) for sample_labels, per point.

    The kernel derivative is piecewise constant; on integer grid lines the
    right/down one-sided value is used (floor-based cell choice).
    """
    x0, y0, x1, y1, fu, fv = _corner_indices(labels, uv)
    rows = np.arange(uv.shape[0])
    g00 = grad_soft[rows, labels[y0, x0]]
    g01 = grad_soft[rows, labels[y0, x1]]
    g10 = grad_soft[rows, labels[y1, x0]]
    g11 = grad_soft[rows, labels[y1, x1]]
    du = (1.0 - fv) * (g01 - g00) + fv * (g11 - g10)
    dv = (1.0 - fu) * (g10 - g00) + fu * (g11 - g01)
    return np.stack([du, dv], axis=1)


def mi_from_counts(counts, total):
    """Plug-in mutual information (nats) from a joint count table."""
    counts = np.asarray(counts, dtype=np.float64)
    na = counts.sum(axis=1)
    nb = counts.sum(axis=0)
    nz = counts > 0
    nij = counts[nz]
    outer = np.outer(na, nb)[nz]
    return float(np.sum((nij / total) * np.log(nij * total / outer)))


def mi_score_map(fixed, moving, num_classes, du0, n_du, dv0, n_dv, min_pairs):
    """Plug-in MI of the label overlap for every integer offset (du, dv).

    moving pixel (r, c) is compared against fixed pixel (r+dv, (c+du) mod W):
    columns wrap, rows outside the fixed image do not contribute. Labels
    >= num_classes are an ignore sentinel. Offsets with fewer than
    min_pairs usable pairs get NaN.
    """
    h, w = fixed.shape
    hm, wm = moving.shape
    c = num_classes
    out = np.full((n_dv, n_du), np.nan)
    cols = np.arange(wm)
    for idv in range(n_dv):
        dv = dv0 + idv
        r0 = max(0, -dv)
        r1 = min(hm, h - dv)
        if r1 - r0 <= 0:
            continue
        msub = moving[r0:r1]
        frows = fixed[r0 + dv:r1 + dv]
        for idu in range(n_du):
            du = du0 + idu
            cc = (cols + du) % w
            fsub = frows[:, cc]
            pair_ok = (fsub < c) & (msub < c)
            total = int(pair_ok.sum())
            if total < min_pairs:
                continue
            joint = np.bincount(fsub[pair_ok] * c + msub[pair_ok], minlength=c * c)
            out[idv, idu] = mi_from_counts(joint.reshape(c, c), total)
    return out
