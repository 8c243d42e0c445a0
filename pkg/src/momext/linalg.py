"""Dense complex linear-algebra kernels.

Everything here operates on plain numpy arrays (complex128) at desk scale
(matrices up to ~100x100). The Hermitian eigensolver is a cyclic complex
Jacobi iteration; the Takagi factorization is built on top of it via the
eigendecomposition of S S^* with per-cluster phase correction.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPSD, NotSymmetric

__all__ = [
    "EigResult",
    "TakagiResult",
    "hermitian_eig",
    "numeric_rank",
    "psd_root_factor",
    "takagi",
    "column_basis",
]

DEFAULT_RANK_TOL = 1e-7


class EigResult(NamedTuple):
    values: np.ndarray  # real, ascending
    vectors: np.ndarray  # unitary, columns are eigenvectors


class TakagiResult(NamedTuple):
    u: np.ndarray  # unitary
    values: np.ndarray  # real, nonnegative, descending


def _as_complex_matrix(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix entries must be finite")
    return a


def hermitian_eig(a, tol=1e-9):
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.

    Returns eigenvalues in ascending order and a unitary matrix of
    eigenvectors. `tol` bounds the accepted Hermitian asymmetry of the
    input relative to its norm.
    """
    a = _as_complex_matrix(a)
    n = a.shape[0]
    if n == 0:
        return EigResult(np.zeros(0), np.zeros((0, 0), dtype=complex))
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > tol * max(scale, 1e-300):
        raise NotHermitian(
            f"asymmetry {np.linalg.norm(a - a.conj().T):.3e} exceeds "
            f"{tol:.1e} * ||a||"
        )
    work = (a + a.conj().T) / 2.0
    vecs = np.eye(n, dtype=complex)
    if n == 1:
        return EigResult(np.array([work[0, 0].real]), vecs)

    stop = 1e-14 * max(scale, 1e-300)
    max_sweeps = 60
    for _ in range(max_sweeps):
        off = np.linalg.norm(work - np.diag(np.diag(work)))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                mag = abs(apq)
                if mag <= stop / (2.0 * n):
                    continue
                app = work[p, p].real
                aqq = work[q, q].real
                phase = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                t = np.sign(tau) if tau != 0 else 1.0
                t = t / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # 2x2 unitary diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array(
                    [[c, s], [-s * np.conj(phase), c * np.conj(phase)]],
                    dtype=complex,
                )
                work[:, [p, q]] = work[:, [p, q]] @ g
                work[[p, q], :] = g.conj().T @ work[[p, q], :]
                work[p, q] = 0.0
                work[q, p] = 0.0
                work[p, p] = work[p, p].real
                work[q, q] = work[q, q].real
                vecs[:, [p, q]] = vecs[:, [p, q]] @ g
    else:
        raise NoConvergence(f"Jacobi sweep cap hit (off-norm {off:.3e})")

    values = np.real(np.diag(work))
    order = np.argsort(values, kind="stable")
    return EigResult(values[order], vecs[:, order])


def numeric_rank(eigenvalues, tol=DEFAULT_RANK_TOL):
    """Count eigenvalues above tol * max(1, largest magnitude)."""
    vals = np.abs(np.asarray(eigenvalues, dtype=float))
    if vals.size == 0:
        return 0
    return int(np.sum(vals > tol * max(1.0, vals.max())))


def _phase_normalize_rows(x, eps):
    """Scale each row by a unimodular factor so the leading entry is >= 0."""
    x = x.copy()
    for i in range(x.shape[0]):
        row = x[i]
        idx = np.nonzero(np.abs(row) > eps)[0]
        if idx.size == 0:
            continue
        lead = row[idx[0]]
        x[i] = row * (np.conj(lead) / abs(lead))
    return x


def psd_root_factor(a, tol=1e-8, rank_tol=DEFAULT_RANK_TOL):
    """Factor a Hermitian PSD matrix as a = X^* X with rank(a) rows.

    Eigendecompose, clamp round-off negatives, then QR so that X comes out
    in a row-echelon-like form (leading entries real nonnegative), which
    keeps the downstream column-basis search stable.
    """
    a = _as_complex_matrix(a)
    n = a.shape[0]
    values, vectors = hermitian_eig(a, tol=max(tol, 1e-9))
    scale = max(np.abs(values).max(initial=0.0), 0.0)
    if values.size and values[0] < -tol * max(scale, 1.0):
        raise NotPSD(f"eigenvalue {values[0]:.6e} below -{tol:.1e} * ||a||")
    values = np.clip(values, 0.0, None)
    r = numeric_rank(values, rank_tol)
    if r == 0:
        return np.zeros((0, n), dtype=complex)
    top = np.argsort(values)[::-1][:r]
    b = (np.sqrt(values[top])[:, None]) * vectors[:, top].conj().T
    _, rmat = np.linalg.qr(b)
    return _phase_normalize_rows(rmat, 1e-13 * max(scale, 1.0))


def _joint_diag_real_symmetric(r, m, cluster_tol):
    """Orthogonal O with O^T r O and O^T m O (both) diagonal.

    Assumes r and m are commuting real symmetric matrices: diagonalize r,
    then diagonalize m restricted to each eigenvalue cluster of r.
    """
    vals, vecs = hermitian_eig(r.astype(complex))
    o = np.real(vecs)
    # re-orthonormalize against residual imaginary dust
    o, _ = np.linalg.qr(o)
    spread = max(vals.max() - vals.min(), 1.0) if vals.size else 1.0
    i = 0
    n = r.shape[0]
    while i < n:
        j = i + 1
        while j < n and vals[j] - vals[j - 1] <= cluster_tol * spread:
            j += 1
        if j - i > 1:
            block = o[:, i:j]
            sub = block.T @ m @ block
            sub = (sub + sub.T) / 2.0
            _, svecs = hermitian_eig(sub.astype(complex))
            o[:, i:j] = block @ np.real(svecs)
        i = j
    return o


def takagi(s, tol=1e-8, cluster_tol=1e-8):
    """Autonne-Takagi factorization S = U diag(values) U^T.

    S must be complex symmetric; U is unitary and the values are the
    singular values of S in descending order. Built from the Hermitian
    eigendecomposition of S S^*: simple singular values get a per-vector
    phase correction, clustered ones get a small complex-symmetric block
    diagonalized through its commuting real/imaginary parts.
    """
    s = _as_complex_matrix(s)
    n = s.shape[0]
    scale = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > tol * max(scale, 1e-300):
        raise NotSymmetric(
            f"asymmetry {np.linalg.norm(s - s.T):.3e} exceeds {tol:.1e} * ||s||"
        )
    if n == 0:
        return TakagiResult(np.zeros((0, 0), dtype=complex), np.zeros(0))
    s = (s + s.T) / 2.0
    h = s @ s.conj().T
    hvals, hvecs = hermitian_eig(h)
    sigma = np.sqrt(np.clip(hvals, 0.0, None))[::-1]
    q = hvecs[:, ::-1]

    u = np.zeros((n, n), dtype=complex)
    smax = max(sigma[0], 1.0) if sigma.size else 1.0
    i = 0
    while i < n:
        j = i + 1
        while j < n and sigma[j - 1] - sigma[j] <= cluster_tol * smax:
            j += 1
        block = q[:, i:j]
        if sigma[i] <= cluster_tol * smax:
            # null cluster: any orthonormal basis works
            u[:, i:j] = block
        elif j - i == 1:
            v = block[:, 0]
            c = np.vdot(v, s @ np.conj(v))
            if abs(c) <= 1e-300:
                u[:, i] = v
            else:
                u[:, i] = v * np.exp(0.5j * np.angle(c))
        else:
            b = block.conj().T @ s @ block.conj()
            b = (b + b.T) / 2.0
            o = _joint_diag_real_symmetric(np.real(b), np.imag(b), 1e-10)
            d = np.diag(o.T @ b @ o)
            u[:, i:j] = block @ (o * np.exp(0.5j * np.angle(d))[None, :])
        i = j

    # Rayleigh refinement: eigenvalues of S S^* square the small singular
    # values, so sqrt() only recovers them to ~sqrt(eps). The diagonal of
    # U^* S conj(U) carries them at full precision.
    diag = np.einsum("ij,ij->j", u.conj(), s @ u.conj())
    keep = np.abs(diag) > 1e-300
    u[:, keep] = u[:, keep] * np.exp(0.5j * np.angle(diag[keep]))[None, :]
    sigma = np.abs(diag)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    u = u[:, order]

    resid = np.linalg.norm(u @ np.diag(sigma) @ u.T - s)
    if resid > max(tol, 1e-10) * max(scale, 1.0):
        raise NoConvergence(
            f"takagi residual {resid:.3e} exceeds {max(tol, 1e-10):.1e} * ||s||"
        )
    return TakagiResult(u, sigma)


def column_basis(x, tol=DEFAULT_RANK_TOL):
    """Greedy left-to-right pivoted column basis of x.

    Returns ascending indices of the earliest maximal independent column
    set. A column is accepted when its residual against the span of the
    already-selected columns exceeds tol times its own norm, which makes
    the selection invariant under positive rescaling of columns.
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2:
        raise ValueError("column_basis expects a matrix")
    rows, cols = x.shape
    residual = x.copy()
    basis = []
    for j in range(cols):
        norm_orig = np.linalg.norm(x[:, j])
        if norm_orig == 0.0:
            continue
        col = residual[:, j]
        rnorm = np.linalg.norm(col)
        if rnorm > tol * norm_orig:
            basis.append(j)
            if len(basis) == rows:
                break
            qcol = col / rnorm
            tail = residual[:, j + 1 :]
            tail -= np.outer(qcol, qcol.conj() @ tail)
    return basis
