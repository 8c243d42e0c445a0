"""Dense primal-dual interior-point solver for small block-diagonal SDPs.

Solves the LMI-form problem produced by the relaxation assembler:

    minimize    c . x + const
    subject to  S_j(x) = C_j + sum_i x_i A_{ji}  >=  0   (each block)
                E x = e                                   (equality rows)

Equality rows are eliminated up front through a nullspace basis; the
reduced pure-LMI problem is then solved by an infeasible-start Mehrotra
predictor-corrector on the HKM direction, with the Schur complement
factored by Cholesky under adaptive diagonal regularization. Reported
objectives: `primal_objective` is the moment-side value c.x, and
`dual_objective` is the certificate-side lower bound; at every iterate the
pair brackets the optimum up to the current residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown

__all__ = ["SolveOptions", "Solution", "solve"]


@dataclass(frozen=True)
class SolveOptions:
    max_iterations: int = 100
    gap_tolerance: float = 1e-8
    feasibility_tolerance: float = 1e-8
    step_damping: float = 0.98

    def __post_init__(self):
        if self.gap_tolerance <= 0 or self.feasibility_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.step_damping < 1):
            raise ValueError("step damping must be in (0, 1)")


@dataclass
class Solution:
    """Solver outcome.

    `history` holds one tuple per iterate: (primal, dual, mu, feas_p,
    feas_d). The dual value is a certified lower bound on the primal only
    once feas_p (the certificate side's constraint residual) is within the
    feasibility tolerance; earlier entries are progress data, not bounds.
    """

    variables: np.ndarray
    primal_objective: float
    dual_objective: float
    status: str  # optimal | max_iter | infeasible_suspected
    iterations: int
    history: list = field(default_factory=list)
    gap: float = np.inf
    feasibility: float = np.inf

    def certified_bounds(self, feas_tol=1e-8):
        """(primal, dual) pairs at iterates whose dual bound is certified."""
        return [(p, d) for p, d, _, fp, fd in self.history
                if fp <= feas_tol and fd <= feas_tol]


def _presolve_equalities(sdp):
    """Eliminate E x = e; returns (x_particular, nullspace, consistent)."""
    nv = sdp.n_vars
    if sdp.eq_a.shape[0] == 0:
        return np.zeros(nv), np.eye(nv), True
    a, b = sdp.eq_a, sdp.eq_b
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    scale = s[0] if s.size else 0.0
    rank = int(np.sum(s > 1e-12 * max(scale, 1.0)))
    x_p = vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])
    nullspace = vt[rank:].T
    consistent = np.linalg.norm(a @ x_p - b) <= 1e-8 * (1.0 + np.linalg.norm(b))
    return x_p, nullspace, consistent


def _reduced_blocks(sdp, x_p, nullspace):
    """Blocks rewritten over the nullspace coordinates u (x = x_p + N u)."""
    reduced = []
    f = nullspace.shape[1]
    for b in sdp.blocks:
        const = np.asarray(np.real(b.const), dtype=float).copy()
        stack = np.zeros((f, b.size, b.size))
        for i, mat in b.coeffs.items():
            mat = np.asarray(np.real(mat), dtype=float)
            const += x_p[i] * mat
            row = nullspace[i]
            nz = np.nonzero(np.abs(row) > 0)[0]
            for k in nz:
                stack[k] += row[k] * mat
        const = (const + const.T) / 2.0
        stack = (stack + np.transpose(stack, (0, 2, 1))) / 2.0
        reduced.append((const, stack))
    return reduced


def _max_step(m, dm):
    """Largest alpha in (0, 1] with m + alpha*dm staying PSD."""
    try:
        ell = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return 0.0
    w = np.linalg.solve(ell, dm)
    w = np.linalg.solve(ell, w.T).T
    w = (w + w.T) / 2.0
    lam = np.linalg.eigvalsh(w)[0]
    if lam >= -1e-14:
        return 1.0
    return min(1.0, -1.0 / lam)


def solve(sdp, opts=None):
    """Solve a realified SDPProblem; see the module docstring for the form."""
    opts = opts or SolveOptions()
    if not sdp.is_real:
        raise ValueError("solve expects a realified problem (call realify first)")
    if not sdp.blocks:
        raise ValueError("problem has no PSD blocks")

    x_p, nullspace, consistent = _presolve_equalities(sdp)
    if not consistent:
        return Solution(
            variables=x_p,
            primal_objective=float(sdp.objective @ x_p + sdp.obj_const),
            dual_objective=-np.inf,
            status="infeasible_suspected",
            iterations=0,
        )
    f = nullspace.shape[1]
    c_red = nullspace.T @ sdp.objective
    const_off = float(sdp.objective @ x_p + sdp.obj_const)
    blocks = _reduced_blocks(sdp, x_p, nullspace)

    if f == 0:
        feas = min(
            (np.linalg.eigvalsh(cb)[0] for cb, _ in blocks), default=0.0
        )
        ok = feas >= -opts.feasibility_tolerance
        return Solution(
            variables=x_p,
            primal_objective=const_off,
            dual_objective=const_off if ok else -np.inf,
            status="optimal" if ok else "infeasible_suspected",
            iterations=0,
            gap=0.0 if ok else np.inf,
            feasibility=max(0.0, -feas),
        )

    sizes = [cb.shape[0] for cb, _ in blocks]
    total_n = sum(sizes)
    norm_c = max(1.0, float(np.linalg.norm(c_red)))
    norm_f0 = max([1.0] + [float(np.linalg.norm(cb)) for cb, _ in blocks])
    radius = max(10.0, norm_c, norm_f0)

    u = np.zeros(f)
    xs = [radius * np.eye(nn) for nn in sizes]  # certificate-side matrices
    zs = [radius * np.eye(nn) for nn in sizes]  # LMI slacks

    history = []
    status = "max_iter"
    gap = np.inf
    worst_feas = np.inf
    tiny_steps = 0
    it = 0

    def slack(bi):
        cb, stack = blocks[bi]
        return cb + np.einsum("k,kij->ij", u, stack)

    for it in range(1, opts.max_iterations + 1):
        # residuals: drive Z = S(u) and <A_jk, X_j> summed = c_k
        rd = [slack(bi) - zs[bi] for bi in range(len(blocks))]
        rp = c_red.copy()
        for bi, (_, stack) in enumerate(blocks):
            rp -= np.einsum("kij,ij->k", stack, xs[bi])
        mu = sum(np.tensordot(xs[bi], zs[bi]) for bi in range(len(blocks))) / total_n

        pobj = float(c_red @ u) + const_off
        dobj = -sum(np.tensordot(blocks[bi][0], xs[bi]) for bi in range(len(blocks)))
        dobj = float(dobj) + const_off

        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        feas_p = float(np.linalg.norm(rp)) / norm_c
        feas_d = max(float(np.linalg.norm(r)) for r in rd) / norm_f0
        worst_feas = max(feas_p, feas_d)
        history.append((pobj, dobj, float(mu), feas_p, feas_d))
        if gap <= opts.gap_tolerance and worst_feas <= opts.feasibility_tolerance:
            status = "optimal"
            break

        # factor slacks; on breakdown keep the best iterate reached so far
        zinv = []
        broke = False
        for bi, z in enumerate(zs):
            inv = None
            for ridge in (0.0, 1e-14, 1e-11):
                try:
                    zr = z + ridge * max(np.trace(z) / z.shape[0], 1e-300) * np.eye(z.shape[0])
                    ell = np.linalg.cholesky(zr)
                    inv = np.linalg.solve(ell.T, np.linalg.solve(ell, np.eye(z.shape[0])))
                    if ridge:
                        zs[bi] = zr
                    break
                except np.linalg.LinAlgError:
                    continue
            if inv is None:
                broke = True
                break
            zinv.append((inv + inv.T) / 2.0)
        if broke:
            break

        # Schur complement B[k,l] = sum_j tr(A_jk X_j A_jl Zinv_j)
        schur = np.zeros((f, f))
        for bi, (_, stack) in enumerate(blocks):
            xa = np.einsum("ij,kjl->kil", xs[bi], stack)  # X A_k
            xaz = np.einsum("kil,lm->kim", xa, zinv[bi])  # X A_k Zinv
            schur += np.einsum("kim,lmi->kl", xaz, stack)
        schur = (schur + schur.T) / 2.0

        chol = None
        reg = 0.0
        base = max(np.trace(schur) / f, 1.0)
        for attempt in range(8):
            try:
                chol = np.linalg.cholesky(schur + reg * np.eye(f))
                break
            except np.linalg.LinAlgError:
                reg = base * (1e-14 if reg == 0.0 else reg / base * 100)
        if chol is None:
            raise NumericalBreakdown("Schur complement not factorizable")

        def schur_solve(v):
            return np.linalg.solve(chol.T, np.linalg.solve(chol, v))

        def directions(sigma_mu, corr):
            rhs = np.zeros(f)
            for bi, (_, stack) in enumerate(blocks):
                m = sigma_mu * zinv[bi] - xs[bi] - xs[bi] @ rd[bi] @ zinv[bi]
                if corr is not None:
                    m -= corr[bi] @ zinv[bi]
                rhs += np.einsum("kij,ij->k", stack, m)
            # <A_k, dX> = rp_k  with dX = sigma*mu*Zinv - X - (X dZ + corr) Zinv
            rhs -= rp
            du = schur_solve(rhs)
            dz = [
                np.einsum("k,kij->ij", du, blocks[bi][1]) + rd[bi]
                for bi in range(len(blocks))
            ]
            dx = []
            for bi in range(len(blocks)):
                m = sigma_mu * zinv[bi] - xs[bi] - xs[bi] @ dz[bi] @ zinv[bi]
                if corr is not None:
                    m -= corr[bi] @ zinv[bi]
                dx.append((m + m.T) / 2.0)
            return du, dx, dz

        # predictor
        du_a, dx_a, dz_a = directions(0.0, None)
        ap = min(_max_step(xs[bi], dx_a[bi]) for bi in range(len(blocks)))
        ad = min(_max_step(zs[bi], dz_a[bi]) for bi in range(len(blocks)))
        mu_aff = sum(
            np.tensordot(xs[bi] + ap * dx_a[bi], zs[bi] + ad * dz_a[bi])
            for bi in range(len(blocks))
        ) / total_n
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        corr = [dx_a[bi] @ dz_a[bi] for bi in range(len(blocks))]
        du, dx, dz = directions(sigma * mu, corr)
        ap = opts.step_damping * min(_max_step(xs[bi], dx[bi]) for bi in range(len(blocks)))
        ad = opts.step_damping * min(_max_step(zs[bi], dz[bi]) for bi in range(len(blocks)))
        ap, ad = min(ap, 1.0), min(ad, 1.0)

        if max(ap, ad) < 1e-6:
            tiny_steps += 1
            if tiny_steps >= 3:
                break
        else:
            tiny_steps = 0

        for bi in range(len(blocks)):
            xs[bi] = xs[bi] + ap * dx[bi]
            zs[bi] = zs[bi] + ad * dz[bi]
        u = u + ad * du

    variables = x_p + nullspace @ u
    pobj = float(c_red @ u) + const_off
    dobj = float(
        -sum(np.tensordot(blocks[bi][0], xs[bi]) for bi in range(len(blocks)))
    ) + const_off
    if status != "optimal" and worst_feas > 1e-4 and gap > 1e-2:
        status = "infeasible_suspected"
    return Solution(
        variables=variables,
        primal_objective=pobj,
        dual_objective=dobj,
        status=status,
        iterations=it,
        history=history,
        gap=float(gap),
        feasibility=float(worst_feas),
    )
