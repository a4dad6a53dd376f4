"""Jitted stencil kernels and the preconditioned CG loop.

All operators act on cell-centered (n, n, n) arrays with ghost values
implied by a six-entry wall code array ``bc`` ordered (x0, x1, y0, y1,
z0, z1): 0 means zero-normal-gradient (ghost mirrors the interior value),
1 means homogeneous Dirichlet (ghost negates it). Inhomogeneous wall
values are folded into right-hand sides by the callers, which keeps every
operator here symmetric.

Face arrays are (n+1, n, n), (n, n+1, n), (n, n, n+1); wall faces stay
exactly zero (no penetration) and are never corrected.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def apply_operator(out, x, shift, coef, h, bc):
    """out = shift * x - coef * Laplacian(x) under homogeneous wall codes."""
    n = x.shape[0]
    ih2 = 1.0 / (h * h)
    sx0 = 1.0 - 2.0 * bc[0]
    sx1 = 1.0 - 2.0 * bc[1]
    sy0 = 1.0 - 2.0 * bc[2]
    sy1 = 1.0 - 2.0 * bc[3]
    sz0 = 1.0 - 2.0 * bc[4]
    sz1 = 1.0 - 2.0 * bc[5]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                c = x[i, j, k]
                xm = x[i - 1, j, k] if i > 0 else sx0 * c
                xp = x[i + 1, j, k] if i < n - 1 else sx1 * c
                ym = x[i, j - 1, k] if j > 0 else sy0 * c
                yp = x[i, j + 1, k] if j < n - 1 else sy1 * c
                zm = x[i, j, k - 1] if k > 0 else sz0 * c
                zp = x[i, j, k + 1] if k < n - 1 else sz1 * c
                lap = (xm + xp + ym + yp + zm + zp - 6.0 * c) * ih2
                out[i, j, k] = shift * c - coef * lap


@nb.njit(cache=True)
def pcg(x, b, diag, shift, coef, h, bc, tol, atol_inf, maxiter, project):
    """Jacobi-preconditioned CG on the SPD operator of apply_operator.

    ``x`` holds the warm start on entry and the solution on exit. When
    ``project`` is nonzero the preconditioned residual is kept mean-free so
    the singular pure-Neumann Poisson operator stays on its range.

    Convergence requires the relative 2-norm residual <= tol and, when
    ``atol_inf`` > 0, additionally max|r| <= atol_inf (the projection uses
    this to bound the post-correction divergence directly).
    Returns (iterations, relative residual, max-norm residual).
    """
    nt = x.size
    xf = x.reshape(nt)
    bf = b.reshape(nt)
    df = diag.reshape(nt)
    p = np.empty_like(x)
    ap = np.empty_like(x)
    pf = p.reshape(nt)
    af = ap.reshape(nt)
    r = np.empty(nt)
    z = np.empty(nt)

    apply_operator(ap, x, shift, coef, h, bc)
    bnorm2 = 0.0
    for t in range(nt):
        r[t] = bf[t] - af[t]
        bnorm2 += bf[t] * bf[t]
    bnorm = np.sqrt(bnorm2)
    if bnorm == 0.0:
        for t in range(nt):
            xf[t] = 0.0
        return 0, 0.0, 0.0

    rn2 = 0.0
    rinf = 0.0
    for t in range(nt):
        rn2 += r[t] * r[t]
        if abs(r[t]) > rinf:
            rinf = abs(r[t])
    relres = np.sqrt(rn2) / bnorm
    if relres <= tol and (atol_inf <= 0.0 or rinf <= atol_inf):
        return 0, relres, rinf

    rz = 0.0
    for t in range(nt):
        z[t] = r[t] / df[t]
    if project:
        zm = 0.0
        for t in range(nt):
            zm += z[t]
        zm /= nt
        for t in range(nt):
            z[t] -= zm
    for t in range(nt):
        pf[t] = z[t]
        rz += r[t] * z[t]

    it = 0
    while it < maxiter:
        it += 1
        apply_operator(ap, p, shift, coef, h, bc)
        pap = 0.0
        for t in range(nt):
            pap += pf[t] * af[t]
        alpha = rz / pap
        rn2 = 0.0
        rinf = 0.0
        for t in range(nt):
            xf[t] += alpha * pf[t]
            r[t] -= alpha * af[t]
            rn2 += r[t] * r[t]
            if abs(r[t]) > rinf:
                rinf = abs(r[t])
        relres = np.sqrt(rn2) / bnorm
        if relres <= tol and (atol_inf <= 0.0 or rinf <= atol_inf):
            return it, relres, rinf
        rznew = 0.0
        for t in range(nt):
            z[t] = r[t] / df[t]
        if project:
            zm = 0.0
            for t in range(nt):
                zm += z[t]
            zm /= nt
            for t in range(nt):
                z[t] -= zm
        for t in range(nt):
            rznew += r[t] * z[t]
        beta = rznew / rz
        rz = rznew
        for t in range(nt):
            pf[t] = z[t] + beta * pf[t]
    return it, relres, rinf


@nb.njit(cache=True)
def average_to_faces(u, v, w, ufx, ufy, ufz):
    """Linear momentum interpolation from cells to faces; wall faces zero."""
    n = u.shape[0]
    for j in range(n):
        for k in range(n):
            ufx[0, j, k] = 0.0
            ufx[n, j, k] = 0.0
    for i in range(1, n):
        for j in range(n):
            for k in range(n):
                ufx[i, j, k] = 0.5 * (u[i - 1, j, k] + u[i, j, k])
    for i in range(n):
        for k in range(n):
            ufy[i, 0, k] = 0.0
            ufy[i, n, k] = 0.0
    for i in range(n):
        for j in range(1, n):
            for k in range(n):
                ufy[i, j, k] = 0.5 * (v[i, j - 1, k] + v[i, j, k])
    for i in range(n):
        for j in range(n):
            ufz[i, j, 0] = 0.0
            ufz[i, j, n] = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(1, n):
                ufz[i, j, k] = 0.5 * (w[i, j, k - 1] + w[i, j, k])


@nb.njit(cache=True)
def face_divergence(out, ufx, ufy, ufz, h):
    """Compact divergence of the face field, one value per cell."""
    n = out.shape[0]
    ih = 1.0 / h
    for i in range(n):
        for j in range(n):
            for k in range(n):
                out[i, j, k] = (
                    ufx[i + 1, j, k] - ufx[i, j, k]
                    + ufy[i, j + 1, k] - ufy[i, j, k]
                    + ufz[i, j, k + 1] - ufz[i, j, k]
                ) * ih


@nb.njit(cache=True)
def correct_faces(ufx, ufy, ufz, phi, dt, h):
    """Subtract dt * compact normal gradient of phi on interior faces."""
    n = phi.shape[0]
    c = dt / h
    for i in range(1, n):
        for j in range(n):
            for k in range(n):
                ufx[i, j, k] -= c * (phi[i, j, k] - phi[i - 1, j, k])
    for i in range(n):
        for j in range(1, n):
            for k in range(n):
                ufy[i, j, k] -= c * (phi[i, j, k] - phi[i, j - 1, k])
    for i in range(n):
        for j in range(n):
            for k in range(1, n):
                ufz[i, j, k] -= c * (phi[i, j, k] - phi[i, j, k - 1])


@nb.njit(cache=True)
def cell_gradient(phi, gx, gy, gz, h):
    """Wide central gradient with zero-normal-gradient wall ghosts."""
    n = phi.shape[0]
    i2 = 0.5 / h
    for i in range(n):
        for j in range(n):
            for k in range(n):
                pm = phi[i - 1, j, k] if i > 0 else phi[i, j, k]
                pp = phi[i + 1, j, k] if i < n - 1 else phi[i, j, k]
                gx[i, j, k] = (pp - pm) * i2
                pm = phi[i, j - 1, k] if j > 0 else phi[i, j, k]
                pp = phi[i, j + 1, k] if j < n - 1 else phi[i, j, k]
                gy[i, j, k] = (pp - pm) * i2
                pm = phi[i, j, k - 1] if k > 0 else phi[i, j, k]
                pp = phi[i, j, k + 1] if k < n - 1 else phi[i, j, k]
                gz[i, j, k] = (pp - pm) * i2


@nb.njit(cache=True)
def convect_scalar(out, phi, ufx, ufy, ufz, h):
    """Conservative div(U_f * phi_f) with centered face values.

    Wall fluxes vanish with the no-penetration face velocities, so wall
    values of phi never enter.
    """
    n = phi.shape[0]
    ih = 1.0 / h
    for i in range(n):
        for j in range(n):
            for k in range(n):
                c = phi[i, j, k]
                fxm = ufx[i, j, k] * 0.5 * (phi[i - 1, j, k] + c) if i > 0 else 0.0
                fxp = ufx[i + 1, j, k] * 0.5 * (c + phi[i + 1, j, k]) if i < n - 1 else 0.0
                fym = ufy[i, j, k] * 0.5 * (phi[i, j - 1, k] + c) if j > 0 else 0.0
                fyp = ufy[i, j + 1, k] * 0.5 * (c + phi[i, j + 1, k]) if j < n - 1 else 0.0
                fzm = ufz[i, j, k] * 0.5 * (phi[i, j, k - 1] + c) if k > 0 else 0.0
                fzp = ufz[i, j, k + 1] * 0.5 * (c + phi[i, j, k + 1]) if k < n - 1 else 0.0
                out[i, j, k] = (fxp - fxm + fyp - fym + fzp - fzm) * ih


def operator_diagonal(n, shift, coef, h, bc):
    """Diagonal of apply_operator's matrix, for Jacobi preconditioning."""
    d = np.full((n, n, n), shift + 6.0 * coef / h**2)
    # each wall side swaps a true neighbor for a ghost of sign s = 1 - 2*bc
    edges = [
        (np.s_[0, :, :], bc[0]), (np.s_[n - 1, :, :], bc[1]),
        (np.s_[:, 0, :], bc[2]), (np.s_[:, n - 1, :], bc[3]),
        (np.s_[:, :, 0], bc[4]), (np.s_[:, :, n - 1], bc[5]),
    ]
    for sl, code in edges:
        d[sl] -= coef * (1.0 - 2.0 * code) / h**2
    return d
