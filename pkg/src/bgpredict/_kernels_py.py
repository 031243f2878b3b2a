"""Pure-Python reference versions of the compiled kernels.

Used when the extension is not built, or when ``BGPREDICT_PURE_PYTHON=1``.
Integer codes: ranges 0/1/2 = hypo/eu/hyper, zones 0..4 = A..E,
verdicts 0/1/2 = Error/Benign/Accurate, rate zone -1 = undefined.
"""

import numpy as np


def iir_first_order(x, b0, b1, a1, x_init, y_init):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(x.shape[0], dtype=np.float64)
    xp, yp = float(x_init), float(y_init)
    for i, xi in enumerate(x.tolist()):
        yp = b0 * xi + b1 * xp - a1 * yp
        xp = xi
        out[i] = yp
    return out


def gaussian_weights(points, epsilon):
    points = np.ascontiguousarray(points, dtype=np.float64)
    n, dim = points.shape
    acc = np.zeros((n, n))
    for k in range(dim):
        col = points[:, k]
        diff = col[:, None] - col[None, :]
        acc += diff * diff
    out = np.exp(-acc / epsilon)
    np.fill_diagonal(out, 1.0)
    return out


def _glycemic_range(ref, hypo_max, hyper_min):
    if ref <= hypo_max:
        return 0
    if ref <= hyper_min:
        return 1
    return 2


def _point_zone(pred, ref, p):
    hypo_max, hyper_min = p[0], p[1]
    if abs(pred - ref) <= p[2] * ref or (ref <= hypo_max and pred <= hypo_max):
        return 0
    if (ref <= hypo_max and pred > hyper_min) or (ref > hyper_min and pred <= hypo_max):
        return 4
    if hypo_max < pred <= hyper_min and (ref <= hypo_max or ref > p[3]):
        return 3
    if hypo_max < ref <= p[5] and pred >= ref + p[4]:
        return 2
    if p[6] <= ref <= hyper_min and pred <= p[7] * ref - p[8]:
        return 2
    return 1


def _rate_zone(pred, ref, q):
    delta = abs(pred - ref)
    sig = q[2]
    if delta <= q[0]:
        return 0
    if delta <= q[1]:
        return 1
    if pred * ref < 0.0 and abs(pred) > sig and abs(ref) > sig:
        return 4
    if abs(ref) > sig and abs(pred) <= sig * (1.0 - q[3]):
        return 3
    return 2


def classify_batch(pred, ref, pred_rate, ref_rate, rate_defined,
                   point_params, rate_params, combination, endpoint):
    n = len(pred)
    p = [float(v) for v in point_params]
    q = [float(v) for v in rate_params]
    comb = np.asarray(combination).tolist()
    endp = np.asarray(endpoint).tolist()
    ranges = np.empty(n, dtype=np.int8)
    pzones = np.empty(n, dtype=np.int8)
    rzones = np.empty(n, dtype=np.int8)
    verdicts = np.empty(n, dtype=np.int8)
    rows = zip(
        np.asarray(pred, dtype=float).tolist(),
        np.asarray(ref, dtype=float).tolist(),
        np.asarray(pred_rate, dtype=float).tolist(),
        np.asarray(ref_rate, dtype=float).tolist(),
        np.asarray(rate_defined).tolist(),
    )
    for i, (pv, rv, pr, rr, defined) in enumerate(rows):
        rng = _glycemic_range(rv, p[0], p[1])
        pz = _point_zone(pv, rv, p)
        ranges[i] = rng
        pzones[i] = pz
        if defined:
            rz = _rate_zone(pr, rr, q)
            rzones[i] = rz
            verdicts[i] = comb[rng][pz][rz]
        else:
            rzones[i] = -1
            verdicts[i] = endp[pz]
    return ranges, pzones, rzones, verdicts

