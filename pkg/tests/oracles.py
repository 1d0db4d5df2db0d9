"""Independent reference implementations used to check the library.

Everything here is deliberately written the slow, obvious way (explicit
loops, exhaustive reachability, first-order optimization) and shares no
code with the package, so agreement is meaningful evidence.
"""

from __future__ import annotations

import math

import numpy as np


def flood_fill_components(mask: np.ndarray, connectivity: int) -> list[set[tuple[int, int]]]:
    """Connected components by explicit stack-based flood fill."""
    mask = np.asarray(mask).astype(bool)
    h, w = mask.shape
    if connectivity == 4:
        moves = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        moves = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    seen = np.zeros_like(mask)
    comps: list[set[tuple[int, int]]] = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            comp = set()
            stack = [(y, x)]
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                comp.add((cx, cy))
                for dy, dx in moves:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.append(comp)
    return comps


def reachability_dbscan(points: np.ndarray, eps: float, min_pts: int) -> tuple[list[set[int]], set[int]]:
    """DBSCAN semantics from first principles.

    Core points are found by counting neighbors (self included); clusters
    are the transitive closure of core-to-core eps-adjacency; each border
    point joins the earliest-created cluster (ordered by their smallest
    core index) that has a core within eps of it.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return [], set()
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    adjacent = dist <= eps
    core = [i for i in range(n) if int(adjacent[i].sum()) >= min_pts]
    core_set = set(core)

    parent = {i: i for i in core}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a in core:
        for b in core:
            if a < b and adjacent[a, b]:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra

    groups: dict[int, set[int]] = {}
    for c in core:
        groups.setdefault(find(c), set()).add(c)
    clusters = sorted(groups.values(), key=lambda g: min(g))

    claimed = set()
    for cluster in clusters:
        members = set(cluster)
        for p in range(n):
            if p in core_set or p in claimed:
                continue
            if any(adjacent[p, c] for c in cluster):
                members.add(p)
                claimed.add(p)
        cluster.clear()
        cluster.update(members)

    assigned = set().union(*clusters) if clusters else set()
    noise = set(range(n)) - assigned
    return clusters, noise


def naive_dilated_conv_1d(x, w, r):
    x = list(x)
    w = list(w)
    n_out = len(x) - r * (len(w) - 1)
    out = []
    for i in range(n_out):
        acc = 0.0
        for k in range(len(w)):
            acc += x[i + r * k] * w[k]
        out.append(acc)
    return out


def naive_dilated_conv_2d(x, w, r):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    out_h = x.shape[0] - r * (w.shape[0] - 1)
    out_w = x.shape[1] - r * (w.shape[1] - 1)
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            acc = 0.0
            for ky in range(w.shape[0]):
                for kx in range(w.shape[1]):
                    acc += x[i + r * ky, j + r * kx] * w[ky, kx]
            out[i, j] = acc
    return out


def closed_form_ols(x, y) -> tuple[float, float, float]:
    """Mean-centered least squares: slope, intercept, R^2."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    xbar = sum(x) / n
    ybar = sum(y) / n
    sxy = sum((xi - xbar) * (yi - ybar) for xi, yi in zip(x, y))
    sxx = sum((xi - xbar) ** 2 for xi in x)
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    ss_res = sum((yi - slope * xi - intercept) ** 2 for xi, yi in zip(x, y))
    ss_tot = sum((yi - ybar) ** 2 for yi in y)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def rbf_kernel_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


def _project_box_hyperplane(z: np.ndarray, c: float, u: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {0 <= t <= c, u.t == 0} by bisection."""
    bound = float(np.abs(z).max()) + c + 1.0
    lo, hi = -bound, bound
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if float((np.clip(z - mid * u, 0.0, c) * u).sum()) > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(z - 0.5 * (lo + hi) * u, 0.0, c)


def projected_gradient_svr(
    kernel: np.ndarray,
    y: np.ndarray,
    c: float,
    eps: float,
    max_iter: int = 60_000,
) -> dict:
    """Accelerated projected-gradient solve of the eps-SVR dual.

    Works on the 2n stacked variables (alpha, alpha*) with the balance
    constraint handled inside the projection. Returns the stacked solution,
    the combined coefficients beta, the dual objective value, and a bias
    estimated from near-interior coefficients.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    u = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([y - eps, -y - eps])
    lipschitz = max(2.0 * float(np.linalg.eigvalsh(kernel).max()), 1e-9)

    def objective(theta):
        beta = theta[:n] - theta[n:]
        return 0.5 * float(beta @ (kernel @ beta)) - float(p @ theta)

    def gradient(theta):
        kb = kernel @ (theta[:n] - theta[n:])
        return np.concatenate([kb, -kb]) - p

    theta = np.zeros(2 * n)
    z = theta.copy()
    momentum = 1.0
    f_curr = objective(theta)
    f_check = f_curr
    for it in range(1, max_iter + 1):
        candidate = _project_box_hyperplane(z - gradient(z) / lipschitz, c, u)
        f_cand = objective(candidate)
        if f_cand > f_curr:  # momentum overshoot: restart from the last iterate
            z = theta.copy()
            momentum = 1.0
            candidate = _project_box_hyperplane(z - gradient(z) / lipschitz, c, u)
            f_cand = objective(candidate)
        momentum_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        z = candidate + (momentum - 1.0) / momentum_new * (candidate - theta)
        theta, momentum, f_curr = candidate, momentum_new, f_cand
        if it % 200 == 0:
            if abs(f_check - f_curr) < 1e-14 * max(1.0, abs(f_curr)):
                break
            f_check = f_curr

    beta = theta[:n] - theta[n:]
    dual_objective = -0.5 * float(beta @ (kernel @ beta)) - eps * float(theta.sum()) + float(y @ beta)
    residual = y - kernel @ beta
    tol = 1e-6 * c
    candidates = []
    for i in range(n):
        if tol < theta[i] < c - tol:
            candidates.append(residual[i] - eps)
        elif tol < theta[n + i] < c - tol:
            candidates.append(residual[i] + eps)
    bias = float(np.mean(candidates)) if candidates else float(np.median(residual))
    return {"theta": theta, "beta": beta, "dual_objective": dual_objective, "bias": bias}


def svr_dual_objective(kernel: np.ndarray, beta: np.ndarray, y: np.ndarray, eps: float) -> float:
    """Dual value at a combined-coefficient point (optimal alpha+alpha* split)."""
    return (
        -0.5 * float(beta @ (kernel @ beta))
        - eps * float(np.abs(beta).sum())
        + float(np.asarray(y) @ beta)
    )
