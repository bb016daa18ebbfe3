# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: projection, bilinear label sampling, their
pullbacks, and the registration MI score map.

Same contracts as numpy_backend; see that module for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, log

cnp.import_array()


def project_points(double[:, ::1] points, double[:, ::1] rot, double[::1] trans,
                   double fx, double fy, double cx, double cy,
                   int width, int height, double eps_depth):
    cdef Py_ssize_t n = points.shape[0]
    uv_arr = np.zeros((n, 2), dtype=np.float64)
    depth_arr = np.empty(n, dtype=np.float64)
    valid_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] uv = uv_arr
    cdef double[::1] depth = depth_arr
    cdef unsigned char[::1] valid = valid_arr
    cdef double r00 = rot[0, 0], r01 = rot[0, 1], r02 = rot[0, 2]
    cdef double r10 = rot[1, 0], r11 = rot[1, 1], r12 = rot[1, 2]
    cdef double r20 = rot[2, 0], r21 = rot[2, 1], r22 = rot[2, 2]
    cdef double t0 = trans[0], t1 = trans[1], t2 = trans[2]
    cdef double umax = width - 1.0, vmax = height - 1.0
    cdef double px, py, pz, qx, qy, qz, u, v
    cdef Py_ssize_t i
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        qx = r00 * px + r01 * py + r02 * pz + t0
        qy = r10 * px + r11 * py + r12 * pz + t1
        qz = r20 * px + r21 * py + r22 * pz + t2
        depth[i] = qz
        if qz > eps_depth:
            u = fx * qx / qz + cx
            v = fy * qy / qz + cy
            uv[i, 0] = u
            uv[i, 1] = v
            if u >= 0.0 and u <= umax and v >= 0.0 and v <= vmax:
                valid[i] = 1
    return uv_arr, depth_arr, valid_arr.view(np.bool_)


def project_pullback(double[:, ::1] points, double[:, ::1] rot, double[::1] trans,
                     double fx, double fy, double[:, ::1] grad_uv,
                     const unsigned char[::1] valid):
    cdef Py_ssize_t n = points.shape[0]
    out_arr = np.zeros(6, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double r00 = rot[0, 0], r01 = rot[0, 1], r02 = rot[0, 2]
    cdef double r10 = rot[1, 0], r11 = rot[1, 1], r12 = rot[1, 2]
    cdef double r20 = rot[2, 0], r21 = rot[2, 1], r22 = rot[2, 2]
    cdef double t0 = trans[0], t1 = trans[1], t2 = trans[2]
    cdef double px, py, pz, qx, qy, qz, gu, gv, gx, gy, gz
    cdef double g0 = 0, g1 = 0, g2 = 0, g3 = 0, g4 = 0, g5 = 0
    cdef Py_ssize_t i
    for i in range(n):
        if not valid[i]:
            continue
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        qx = r00 * px + r01 * py + r02 * pz + t0
        qy = r10 * px + r11 * py + r12 * pz + t1
        qz = r20 * px + r21 * py + r22 * pz + t2
        gu = grad_uv[i, 0]
        gv = grad_uv[i, 1]
        gx = gu * fx / qz
        gy = gv * fy / qz
        gz = -(gu * fx * qx + gv * fy * qy) / (qz * qz)
        g0 += gx
        g1 += gy
        g2 += gz
        g3 += qy * gz - qz * gy
        g4 += qz * gx - qx * gz
        g5 += qx * gy - qy * gx
    out[0] = g0
    out[1] = g1
    out[2] = g2
    out[3] = g3
    out[4] = g4
    out[5] = g5
    return out_arr


def sample_labels(const int[:, ::1] labels, int num_classes, double[:, ::1] uv):
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef Py_ssize_t n = uv.shape[0]
    out_arr = np.zeros((n, num_classes), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double u, v, fu, fv
    cdef Py_ssize_t i, x0, y0, x1, y1
    for i in range(n):
        u = uv[i, 0]
        v = uv[i, 1]
        x0 = <Py_ssize_t>floor(u)
        y0 = <Py_ssize_t>floor(v)
        if x0 < 0:
            x0 = 0
        elif x0 > w - 1:
            x0 = w - 1
        if y0 < 0:
            y0 = 0
        elif y0 > h - 1:
            y0 = h - 1
        x1 = x0 + 1 if x0 + 1 < w else w - 1
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        fu = u - x0
        fv = v - y0
        out[i, labels[y0, x0]] += (1.0 - fu) * (1.0 - fv)
        out[i, labels[y0, x1]] += fu * (1.0 - fv)
        out[i, labels[y1, x0]] += (1.0 - fu) * fv
        out[i, labels[y1, x1]] += fu * fv
    return out_arr


def sample_labels_pullback(const int[:, ::1] labels, int num_classes,
                           double[:, ::1] uv, double[:, ::1] grad_soft):
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef Py_ssize_t n = uv.shape[0]
    out_arr = np.empty((n, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double u, v, fu, fv, g00, g01, g10, g11
    cdef Py_ssize_t i, x0, y0, x1, y1
    for i in range(n):
        u = uv[i, 0]
        v = uv[i, 1]
        x0 = <Py_ssize_t>floor(u)
        y0 = <Py_ssize_t>floor(v)
        if x0 < 0:
            x0 = 0
        elif x0 > w - 1:
            x0 = w - 1
        if y0 < 0:
            y0 = 0
        elif y0 > h - 1:
            y0 = h - 1
        x1 = x0 + 1 if x0 + 1 < w else w - 1
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        fu = u - x0
        fv = v - y0
        g00 = grad_soft[i, labels[y0, x0]]
        g01 = grad_soft[i, labels[y0, x1]]
        g10 = grad_soft[i, labels[y1, x0]]
        g11 = grad_soft[i, labels[y1, x1]]
        out[i, 0] = (1.0 - fv) * (g01 - g00) + fv * (g11 - g10)
        out[i, 1] = (1.0 - fu) * (g10 - g00) + fu * (g11 - g01)
    return out_arr


def mi_score_map(const int[:, ::1] fixed, const int[:, ::1] moving, int num_classes,
                 int du0, int n_du, int dv0, int n_dv, int min_pairs):
    cdef Py_ssize_t h = fixed.shape[0], w = fixed.shape[1]
    cdef Py_ssize_t hm = moving.shape[0], wm = moving.shape[1]
    cdef int c = num_classes
    out_arr = np.full((n_dv, n_du), np.nan, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    joint_arr = np.zeros(c * c, dtype=np.int64)
    na_arr = np.zeros(c, dtype=np.int64)
    nb_arr = np.zeros(c, dtype=np.int64)
    cdef long long[::1] joint = joint_arr
    cdef long long[::1] na = na_arr
    cdef long long[::1] nb = nb_arr
    cdef Py_ssize_t idv, idu, r, col, cc, r0, r1, a, b
    cdef int dv, du, shift
    cdef long long total, nij
    cdef double acc, dtotal
    for idv in range(n_dv):
        dv = dv0 + idv
        r0 = -dv if dv < 0 else 0
        r1 = hm if hm < h - dv else h - dv
        if r1 - r0 <= 0:
            continue
        for idu in range(n_du):
            du = du0 + idu
            shift = du % <int>w
            if shift < 0:
                shift += <int>w
            for a in range(c * c):
                joint[a] = 0
            total = 0
            for r in range(r0, r1):
                for col in range(wm):
                    b = moving[r, col]
                    if b >= c:
                        continue
                    cc = col + shift
                    if cc >= w:
                        cc -= w
                    a = fixed[r + dv, cc]
                    if a >= c:
                        continue
                    joint[a * c + b] += 1
                    total += 1
            if total < min_pairs:
                continue
            for a in range(c):
                na[a] = 0
                nb[a] = 0
            for a in range(c):
                for b in range(c):
                    nij = joint[a * c + b]
                    na[a] += nij
                    nb[b] += nij
            acc = 0.0
            dtotal = <double>total
            for a in range(c):
                for b in range(c):
                    nij = joint[a * c + b]
                    if nij > 0:
                        acc += (nij / dtotal) * log(nij * dtotal / (<double>na[a] * <double>nb[b]))
            out[idv, idu] = acc
    return out_arr
