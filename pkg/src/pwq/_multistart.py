"""Brute-force multistart oracle: projected subgradient descent over many
starts, a monotone diminishing-step polish, and a directional-sampling
stationarity filter.

This is deliberately independent of the enumeration machinery; it shares
no pencil, root-isolation, or LP code with it.  It is not part of the
public API: tests and the CLI ``--oracle`` diff use it to cross-check
enumerated value sets.
"""

import numpy as np
from scipy.optimize import minimize


def _piece_arrays(maxq):
    H = np.stack([p.hessian for p in maxq.pieces])
    L = np.stack([p.linear for p in maxq.pieces])
    C = np.array([p.constant for p in maxq.pieces])
    return H, L, C


def _values_and_grads(H, L, C, X):
    # values: (k, S); pick the attaining piece per point
    vals = 0.5 * np.einsum("sj,kji,si->ks", X, H, X) + L @ X.T + C[:, None]
    sel = np.argmax(vals, axis=0)
    grads = np.einsum("sji,sj->si", H[sel], X) + L[sel]
    return vals[sel, np.arange(X.shape[0])], grads


def _objective_batch(f, X):
    Hp, Lp, Cp = _piece_arrays(f.plus)
    Hm, Lm, Cm = _piece_arrays(f.minus)
    vp = 0.5 * np.einsum("sj,kji,si->ks", X, Hp, X) + Lp @ X.T + Cp[:, None]
    vm = 0.5 * np.einsum("sj,kji,si->ks", X, Hm, X) + Lm @ X.T + Cm[:, None]
    return np.max(vp, axis=0) - np.max(vm, axis=0)


def _subgradients(f, X):
    Hp, Lp, Cp = _piece_arrays(f.plus)
    Hm, Lm, Cm = _piece_arrays(f.minus)
    _, gp = _values_and_grads(Hp, Lp, Cp, X)
    _, gm = _values_and_grads(Hm, Lm, Cm, X)
    return gp - gm


def _project(poly, X, passes=40):
    """Cyclic halfspace/hyperplane projection (adequate for mild violation)."""
    if poly.num_rows == 0 and poly.E.shape[0] == 0:
        return X
    X = X.copy()
    for _ in range(passes):
        moved = False
        for a, b in zip(poly.A, poly.b):
            viol = X @ a - b
            bad = viol > 1e-12
            if np.any(bad):
                X[bad] -= np.outer(viol[bad] / (a @ a), a)
                moved = True
        for e, dv in zip(poly.E, poly.d):
            viol = X @ e - dv
            X -= np.outer(viol / (e @ e), e)
        if not moved:
            break
    return X


def _feasible_samples(poly, n, rng, count, box=6.0):
    if poly.num_rows == 0 and poly.E.shape[0] == 0:
        return rng.uniform(-box, box, size=(count, n))
    pts = rng.uniform(-box, box, size=(6 * count, n))
    pts = _project(poly, pts, passes=120)
    keep = np.array([poly.contains(x, tol=1e-7) for x in pts])
    pts = pts[keep]
    return pts[:count]


def multistart_stationary_values(f, n_starts=10000, iterations=2000, seed=0,
                                 start_box=5.0, polish_stages=45,
                                 filter_directions=1000, filter_tol=1e-4,
                                 value_grid=1e-5):
    """Distinct objective values at descent-reachable stationary points.

    Projected subgradient descent with 1/k steps runs from ``n_starts``
    seeded points; a monotone halving-step polish then drives the finals
    to their local values; finals are clustered by value, and each cluster
    representative must survive a directional sampling test (minimum
    sampled directional derivative above ``-filter_tol``).
    """
    rng = np.random.default_rng(seed)
    n = f.dim
    X = rng.uniform(-start_box, start_box, size=(n_starts, n))
    X = _project(f.feasible, X)

    for k in range(1, iterations + 1):
        G = _subgradients(f, X)
        X = _project(f.feasible, X - (1.0 / k) * G, passes=4)

    # Monotone polish: halved steps along the (normalized) subgradient.
    vals = _objective_batch(f, X)
    step = 0.5
    for _ in range(polish_stages):
        G = _subgradients(f, X)
        norms = np.linalg.norm(G, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        cand = _project(f.feasible, X - step * G / norms, passes=6)
        cand_vals = _objective_batch(f, cand)
        better = cand_vals < vals
        X[better] = cand[better]
        vals[better] = cand_vals[better]
        step *= 0.5

    feasible = np.array([f.feasible.contains(x, tol=1e-6) for x in X])
    X, vals = X[feasible], vals[feasible]
    if X.shape[0] == 0:
        return []

    # Coarse value clusters, then a derivative-free local polish of each
    # representative; pure subgradient steps stall in kink valleys.
    order = np.argsort(vals)
    X, vals = X[order], vals[order]
    coarse = []
    for x, v in zip(X, vals):
        if coarse and abs(v - coarse[-1][1]) <= 1e-3 * (1.0 + abs(v)):
            continue
        coarse.append((x, v))

    def penalized(x):
        val = _objective_batch(f, x[None, :])[0]
        pen = 0.0
        if f.feasible.num_rows:
            pen += np.sum(np.maximum(f.feasible.A @ x - f.feasible.b, 0.0) ** 2)
        if f.feasible.E.shape[0]:
            pen += np.sum((f.feasible.E @ x - f.feasible.d) ** 2)
        return val + 1e8 * pen

    reps = []
    for x, v in coarse[:60]:
        res = minimize(penalized, x, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-13,
                                "maxiter": 2000, "maxfev": 4000})
        xr = _project(f.feasible, res.x[None, :], passes=200)[0]
        vr = _objective_batch(f, xr[None, :])[0]
        if not f.feasible.contains(xr, tol=1e-6):
            continue
        if vr > v + 1e-9:
            xr, vr = x, v
        reps.append((xr, vr))
    reps.sort(key=lambda t: t[1])
    reps = [(x, v) for k, (x, v) in enumerate(reps)
            if k == 0 or abs(v - reps[k - 1][1]) > value_grid]

    free = f.feasible.num_rows == 0 and f.feasible.E.shape[0] == 0
    if free:
        D = rng.normal(size=(filter_directions, n))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
    else:
        targets = _feasible_samples(f.feasible, n, rng, filter_directions)

    out = []
    for x, v in reps:
        if free:
            dirs = D
        else:
            diffs = targets - x
            norms = np.linalg.norm(diffs, axis=1)
            dirs = diffs[norms > 1e-9] / norms[norms > 1e-9, None]
            if dirs.shape[0] == 0:
                continue
        if _min_directional(f, x, dirs) >= -filter_tol:
            out.append(float(v))
    return sorted(out)


def _min_directional(f, x, dirs):
    """min over the direction batch of the exact directional derivative."""
    def side(maxq):
        vals = maxq.values(x)
        vmax = np.max(vals)
        act = vals >= vmax - 1e-6 * (1.0 + abs(vmax))
        G = np.stack([p.gradient(x) for p in maxq.pieces])[act]
        return np.max(G @ dirs.T, axis=0)

    return float(np.min(side(f.plus) - side(f.minus)))
