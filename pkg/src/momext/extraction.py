"""Atomic-measure extraction from truncated moment data.

Pipeline: factor the moment matrix as X^bullet X, pick a column basis,
build one shift operator per variable, verify joint hyponormality
(conjugate-transpose mode) or complex symmetry (transpose mode),
simultaneously diagonalize, and read atoms and weights off the diagonal.

`bullet` is the conjugate transpose for optimization data and the plain
transpose for interpolation data; real optimization data satisfies both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    BasisDegenerate,
    DegenerateCombination,
    IsotropicEigenvector,
    MissingMoment,
    NotFlat,
    NotHyponormal,
    OrderTooSmall,
    ParseError,
    ShiftInconsistent,
)
from .moment import (
    MomentSequence,
    enumerate_indices,
    hyponormality_block,
    index_add,
    index_count,
    localizing_matrix,
    moment_matrix,
    total_degree,
    unit_index,
    classify_structure,
)

__all__ = [
    "Tolerances",
    "ShiftFamily",
    "AtomicMeasure",
    "ExtractionReport",
    "FlatnessInfo",
    "HyponormalityCheck",
    "check_flatness",
    "compute_shifts",
    "check_hyponormality",
    "simultaneous_diagonalize",
    "extract_measure",
    "verify_measure",
    "feasibility_report",
    "write_measure",
    "read_measure",
]

CONJUGATE = "conjugate_transpose"
TRANSPOSE = "transpose"


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds for the extraction pipeline.

    Defaults suit solver- or machine-accurate data. `printed()` suits
    matrices transcribed with four decimals, where eigenvalue noise sits
    around 1e-4.
    """

    rank_tol: float = 1e-7
    psd_tol: float = 1e-8
    shift_tol: float = 1e-6
    hypo_tol: float = 1e-6
    struct_tol: float = 1e-9
    dedup_tol: float = 1e-6
    weight_floor: float = 1e-8
    offdiag_tol: float = 1e-8
    collision_tol: float = 1e-6

    @classmethod
    def printed(cls):
        return cls(
            rank_tol=1e-3,
            psd_tol=1e-3,
            shift_tol=5e-3,
            hypo_tol=5e-3,
            struct_tol=5e-4,
            offdiag_tol=5e-3,
        )


@dataclass
class ShiftFamily:
    shifts: list  # n matrices, each r x r
    mode: str
    r: int
    residual: float  # max relative shift residual over all testable columns
    basis_labels: list


@dataclass
class AtomicMeasure:
    atoms: list  # points in C^n (tuples of complex)
    weights: list  # real > 0 in conjugate mode, complex in transpose mode
    mode: str

    @property
    def n(self):
        return len(self.atoms[0]) if self.atoms else 0

    def sorted(self):
        order = sorted(
            range(len(self.atoms)),
            key=lambda k: tuple((z.real, z.imag) for z in self.atoms[k]),
        )
        return AtomicMeasure(
            [self.atoms[k] for k in order],
            [self.weights[k] for k in order],
            self.mode,
        )


@dataclass
class FlatnessInfo:
    ranks: list  # rank M_t(y) for t = 0..d
    d: int
    dk: int

    @property
    def r_d(self):
        return self.ranks[self.d]

    @property
    def r_dm1(self):
        return self.ranks[self.d - 1] if self.d >= 1 else self.ranks[0]

    @property
    def r_ddk(self):
        return self.ranks[max(self.d - self.dk, 0)]

    @property
    def flat_1(self):
        return self.r_d == self.r_dm1

    @property
    def flat_dk(self):
        return self.r_d == self.r_ddk


@dataclass
class HyponormalityCheck:
    min_eig: float
    commutator_norm: float
    passed: bool
    scale: float


@dataclass
class ExtractionReport:
    d: int = 0
    dk: int = 1
    mode: str = CONJUGATE
    ranks: list = field(default_factory=list)
    flat_1: bool = False
    flat_dk: bool = False
    rank: int = 0
    min_moment_eig: float = 0.0
    structure: object = None
    hypo_min_eig: float | None = None
    hypo_commutator: float | None = None
    data_hypo_min_eig: float | None = None
    shift_residual: float | None = None
    shift_symmetry: float | None = None
    reconstruction_residual: float | None = None
    certification: str = "failed"
    atom_count: int = 0
    ball_constraint_seen: bool | None = None
    notes: list = field(default_factory=list)


def check_flatness(seq, d=None, dk=1, tol=1e-7):
    """Ranks of the nested moment matrices M_0(y) .. M_d(y).

    Paired (Hermitian) data is ranked through its eigenvalues; Hankel data
    is complex symmetric, so its rank comes from the singular values.
    """
    d = seq.d if d is None else d
    big = moment_matrix(seq, d).matrix
    ranks = []
    for t in range(d + 1):
        m = index_count(seq.n, t)
        sub = big[:m, :m]
        if seq.mode == "hankel":
            _, sigma = linalg.takagi((sub + sub.T) / 2.0, tol=np.inf)
            ranks.append(linalg.numeric_rank(sigma, tol))
        else:
            vals, _ = linalg.hermitian_eig((sub + sub.conj().T) / 2.0, tol=np.inf)
            ranks.append(linalg.numeric_rank(vals, tol))
    return FlatnessInfo(ranks=ranks, d=d, dk=dk)


def compute_shifts(x, labels, basis, mode, tol=1e-6):
    """Shift operators T_k with T_k x_alpha = x_{alpha+e_k} on the basis.

    The defining system uses only the basis columns; the returned residual
    is the worst relative error of the shift identity over every column of
    degree <= d-1, and exceeding `tol` raises ShiftInconsistent.
    """
    x = np.asarray(x, dtype=complex)
    r = len(basis)
    if r == 0 or r != x.shape[0]:
        raise BasisDegenerate(f"basis of size {r} cannot drive a rank-{x.shape[0]} factor")
    n = len(labels[0])
    pos = {a: i for i, a in enumerate(labels)}
    d = max(total_degree(a) for a in labels)
    b = x[:, basis]
    shifts = []
    for k in range(1, n + 1):
        ek = unit_index(n, k)
        cols = []
        for bi in basis:
            target = index_add(labels[bi], ek)
            if target not in pos:
                raise BasisDegenerate(
                    f"basis label {labels[bi]} has no shifted column for variable {k}"
                )
            cols.append(pos[target])
        s = x[:, cols]
        try:
            t = np.linalg.solve(b.T, s.T).T
        except np.linalg.LinAlgError:
            raise BasisDegenerate("basis columns are numerically singular") from None
        shifts.append(t)

    xnorm = max(np.linalg.norm(x), 1e-300)
    worst = 0.0
    for k in range(1, n + 1):
        ek = unit_index(n, k)
        for i, a in enumerate(labels):
            if total_degree(a) > d - 1:
                continue
            j = pos[index_add(a, ek)]
            resid = np.linalg.norm(shifts[k - 1] @ x[:, i] - x[:, j])
            worst = max(worst, resid / xnorm)
    if worst > tol:
        raise ShiftInconsistent(
            f"shift residual {worst:.6e} exceeds {tol:.1e}; the shift operators "
            f"are not well defined on this data"
        )
    return ShiftFamily(
        shifts=shifts,
        mode=mode,
        r=r,
        residual=worst,
        basis_labels=[labels[i] for i in basis],
    )


def operator_hypo_block(ti, tj):
    """Hermitian operator block testing hyponormality of the pair (T_i, T_j)."""
    r = ti.shape[0]
    eye = np.eye(r, dtype=complex)
    return np.block(
        [
            [eye, ti.conj().T, tj.conj().T],
            [ti, ti.conj().T @ ti, tj.conj().T @ ti],
            [tj, ti.conj().T @ tj, tj.conj().T @ tj],
        ]
    )


def check_hyponormality(shifts, tol=1e-6):
    """Operator-level joint hyponormality test.

    For n >= 2: the minimum eigenvalue over all pairwise operator blocks
    plus the largest pairwise commutator norm among the shifts and their
    adjoints. For n == 1 only the self-commutator norm matters (its trace
    vanishes in finite dimension, so PSD forces zero).
    """
    ts = [np.asarray(t, dtype=complex) for t in shifts.shifts]
    n = len(ts)
    scale = max(1.0, max(np.linalg.norm(t, 2) for t in ts) ** 2)
    ops = ts + [t.conj().T for t in ts]
    comm = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            comm = max(comm, np.linalg.norm(ops[i] @ ops[j] - ops[j] @ ops[i]))
    if n == 1:
        t = ts[0]
        block = np.block([[np.eye(t.shape[0], dtype=complex), t.conj().T], [t, t.conj().T @ t]])
        vals, _ = linalg.hermitian_eig(block, tol=1e-6)
        min_eig = float(vals[0])
        passed = comm <= tol * scale
    else:
        min_eig = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                vals, _ = linalg.hermitian_eig(operator_hypo_block(ts[i], ts[j]), tol=1e-6)
                min_eig = min(min_eig, float(vals[0]))
        passed = (min_eig >= -tol * scale) and (comm <= tol * scale)
    return HyponormalityCheck(
        min_eig=float(min_eig), commutator_norm=float(comm), passed=bool(passed), scale=scale
    )


def _cluster_bounds(values, width):
    """Split sorted real values into clusters of gap <= width."""
    bounds = []
    i = 0
    n = len(values)
    while i < n:
        j = i + 1
        while j < n and values[j] - values[j - 1] <= width:
            j += 1
        bounds.append((i, j))
        i = j
    return bounds


def _unitary_diagonalizer(a, offdiag_tol):
    """Unitary P with P^* a P diagonal, for (numerically) normal a.

    Two-step: diagonalize the Hermitian part, then the skew part restricted
    to each eigenvalue cluster of the first step. Returns None when the
    result fails the off-diagonal test, signalling the caller to redraw.
    """
    r = a.shape[0]
    h = (a + a.conj().T) / 2.0
    k = (a - a.conj().T) / 2.0j
    hvals, p = linalg.hermitian_eig(h, tol=np.inf)
    spread = max(hvals[-1] - hvals[0], 1.0)
    for i, j in _cluster_bounds(hvals, 1e-9 * spread):
        if j - i > 1:
            block = p[:, i:j]
            sub = block.conj().T @ k @ block
            sub = (sub + sub.conj().T) / 2.0
            _, svecs = linalg.hermitian_eig(sub, tol=np.inf)
            p[:, i:j] = block @ svecs
    check = p.conj().T @ a @ p
    off = np.linalg.norm(check - np.diag(np.diag(check)))
    if off > offdiag_tol * max(1.0, np.linalg.norm(a, 2)):
        return None
    return p


def _orthogonal_diagonalizer(a, offdiag_tol):
    """Complex-orthogonal P (P^T P = I) with P^T a P diagonal, a symmetric.

    Uses the general eigendecomposition plus bilinear normalization; returns
    ('isotropic', None) when an eigenvector has negligible bilinear norm.
    """
    vals, vecs = np.linalg.eig(a)
    p = np.empty_like(vecs)
    for idx in range(vecs.shape[1]):
        v = vecs[:, idx]
        bil = v @ v
        if abs(bil) < 1e-6:
            return "isotropic", None
        p[:, idx] = v / np.sqrt(bil)
    ident = p.T @ p
    if np.linalg.norm(ident - np.eye(a.shape[0])) > offdiag_tol * a.shape[0]:
        return "retry", None
    check = p.T @ a @ p
    off = np.linalg.norm(check - np.diag(np.diag(check)))
    if off > offdiag_tol * max(1.0, np.linalg.norm(a, 2)):
        return "retry", None
    return "ok", p


def simultaneous_diagonalize(shifts, seed=0, tol=1e-8, max_attempts=20):
    """Joint diagonalization of a commuting shift family.

    Draws random real combination coefficients, diagonalizes the combined
    operator (Hermitian two-step in conjugate mode, general eigensolve with
    bilinear normalization in transpose mode), and retries on eigenvalue
    collisions or isotropic eigenvectors. Returns (P, coords) with coords[k]
    the diagonal of P^bullet T_{k+1} P.
    """
    ts = [np.asarray(t, dtype=complex) for t in shifts.shifts]
    n = len(ts)
    r = ts[0].shape[0]
    if r == 1:
        p = np.eye(1, dtype=complex)
        return p, [np.array([t[0, 0]]) for t in ts]
    rng = np.random.default_rng(seed)
    last_isotropic = False
    for _ in range(max_attempts):
        t = rng.uniform(-1.0, 1.0, n)
        a = sum(tk * mk for tk, mk in zip(t, ts))
        if shifts.mode == CONJUGATE:
            p = _unitary_diagonalizer(a, tol)
            if p is None:
                continue
            bullet = p.conj().T
        else:
            status, p = _orthogonal_diagonalizer(a, max(tol, 1e-6))
            if status == "isotropic":
                last_isotropic = True
                continue
            if status != "ok":
                continue
            bullet = p.T
        eigs = np.diag(bullet @ a @ p)
        spread = max(np.abs(eigs[:, None] - eigs[None, :]).max(), 1e-12)
        dmin = min(
            abs(eigs[i] - eigs[j]) for i in range(r) for j in range(i + 1, r)
        )
        if dmin < 1e-6 * spread:
            continue
        coords = []
        ok = True
        for mk in ts:
            e = bullet @ mk @ p
            off = np.linalg.norm(e - np.diag(np.diag(e)))
            if off > max(tol, 1e-6) * max(1.0, np.linalg.norm(mk, 2)):
                ok = False
                break
            coords.append(np.diag(e).copy())
        if not ok:
            continue
        return p, coords
    if last_isotropic:
        raise IsotropicEigenvector(
            "bilinear normalization kept hitting isotropic eigenvectors"
        )
    raise DegenerateCombination(
        f"no usable random combination after {max_attempts} attempts"
    )


def _dedup_atoms(atoms, weights, tol):
    """Merge atoms closer than `tol` in max-coordinate distance."""
    merged_atoms, merged_weights = [], []
    for atom, w in zip(atoms, weights):
        for idx, ref in enumerate(merged_atoms):
            if max(abs(a - b) for a, b in zip(atom, ref)) <= tol:
                merged_weights[idx] += w
                break
        else:
            merged_atoms.append(atom)
            merged_weights.append(w)
    return merged_atoms, merged_weights


def extract_measure(seq, d=None, dk=1, mode=None, seed=0, tol=None):
    """Run the full extraction pipeline on a truncated moment sequence.

    Returns (AtomicMeasure, ExtractionReport); raises an ExtractionError
    subclass (carrying the partial report) when the data does not admit the
    construction.
    """
    tol = tol or Tolerances()
    d = seq.d if d is None else d
    if mode is None:
        mode = TRANSPOSE if seq.mode == "hankel" else CONJUGATE
    if mode not in (CONJUGATE, TRANSPOSE):
        raise ValueError(f"unknown mode {mode!r}")

    report = ExtractionReport(d=d, dk=dk, mode=mode)
    mm = moment_matrix(seq, d)
    report.structure = classify_structure(mm, tol.struct_tol)

    flat = check_flatness(seq, d, dk, tol.rank_tol)
    report.ranks = flat.ranks
    report.flat_1 = flat.flat_1
    report.flat_dk = flat.flat_dk
    report.rank = flat.r_d

    sym = (mm.matrix + mm.matrix.conj().T) / 2.0
    vals, _ = linalg.hermitian_eig(sym, tol=np.inf)
    report.min_moment_eig = float(vals[0])
    report.ball_constraint_seen = None  # cmd_solve fills this in when a problem is known

    if not flat.flat_1:
        raise NotFlat(
            f"rank M_{d}(y) = {flat.r_d} != rank M_{d - 1}(y) = {flat.r_dm1}",
            report,
        )

    if mode == CONJUGATE:
        x = linalg.psd_root_factor(mm.matrix, tol.psd_tol, tol.rank_tol)
    else:
        u, sigma = linalg.takagi(mm.matrix, max(tol.psd_tol, 1e-10))
        r = linalg.numeric_rank(sigma, tol.rank_tol)
        x = np.sqrt(sigma[:r])[:, None] * u[:, :r].T

    basis = linalg.column_basis(x, tol.rank_tol)
    if len(basis) != x.shape[0]:
        raise BasisDegenerate(
            f"found {len(basis)} independent columns for a rank-{x.shape[0]} factor",
            report,
        )

    try:
        shifts = compute_shifts(x, mm.col_labels, basis, mode, tol.shift_tol)
    except (ShiftInconsistent, BasisDegenerate) as exc:
        exc.report = report
        raise
    report.shift_residual = shifts.residual

    if mode == CONJUGATE:
        hypo = check_hyponormality(shifts, tol.hypo_tol)
        report.hypo_min_eig = hypo.min_eig
        report.hypo_commutator = hypo.commutator_norm
        if not hypo.passed:
            raise NotHyponormal(
                f"operator block min eigenvalue {hypo.min_eig:.6f}, commutator "
                f"norm {hypo.commutator_norm:.6f}: shifts are not jointly "
                f"hyponormal, no atomic measure exists for this data",
                report,
            )
    else:
        sym_resid = max(
            np.linalg.norm(t - t.T) / max(1.0, np.linalg.norm(t)) for t in shifts.shifts
        )
        report.shift_symmetry = float(sym_resid)
        comm = 0.0
        for i in range(len(shifts.shifts)):
            for j in range(i + 1, len(shifts.shifts)):
                ti, tj = shifts.shifts[i], shifts.shifts[j]
                comm = max(comm, np.linalg.norm(ti @ tj - tj @ ti))
        report.hypo_commutator = float(comm)
        scale = max(1.0, max(np.linalg.norm(t, 2) for t in shifts.shifts) ** 2)
        if sym_resid > tol.hypo_tol or comm > tol.hypo_tol * scale:
            raise NotHyponormal(
                f"transpose-mode shifts fail symmetry ({sym_resid:.3e}) or "
                f"commutation ({comm:.3e})",
                report,
            )

    try:
        p, coords = simultaneous_diagonalize(
            shifts, seed=seed, tol=tol.offdiag_tol
        )
    except (DegenerateCombination, IsotropicEigenvector) as exc:
        exc.report = report
        raise

    x0 = x[:, 0]
    atoms, weights = [], []
    for kk in range(shifts.r):
        atom = tuple(complex(coords[i][kk]) for i in range(seq.n))
        if mode == CONJUGATE:
            w = float(abs(np.vdot(x0, p[:, kk])) ** 2)
        else:
            w = complex(x0 @ p[:, kk]) ** 2
        atoms.append(atom)
        weights.append(w)

    atoms, weights = _dedup_atoms(atoms, weights, tol.dedup_tol)
    if mode == CONJUGATE:
        y00 = abs(seq.zero_moment())
        keep = [i for i, w in enumerate(weights) if w >= tol.weight_floor * max(y00, 1e-300)]
        atoms = [atoms[i] for i in keep]
        weights = [float(weights[i]) for i in keep]

    measure = AtomicMeasure(atoms, weights, mode).sorted()
    report.atom_count = len(measure.atoms)
    report.reconstruction_residual = verify_measure(measure, seq)

    report.certification = _certify(seq, report, flat, mode, tol)
    return measure, report


def _certify(seq, report, flat, mode, tol):
    if mode == TRANSPOSE:
        return "certified" if flat.flat_dk else "rank_preserved_uncertified"
    scale = max(1.0, _matrix_scale(seq, report.d))
    psd_ok = report.min_moment_eig >= -tol.psd_tol * scale
    if not flat.flat_dk or not psd_ok:
        return "rank_preserved_uncertified"
    st = report.structure
    if st is not None and st.hermitian and (st.hankel or st.toeplitz):
        return "certified"
    try:
        data_min = data_hyponormality_min_eig(seq, report.dk)
    except MissingMoment:
        return "rank_preserved_uncertified"
    report.data_hypo_min_eig = data_min
    if data_min >= -tol.hypo_tol * scale:
        return "certified"
    return "rank_preserved_uncertified"


def _matrix_scale(seq, d):
    m = moment_matrix(seq, d).matrix
    return float(np.linalg.norm(m, 2))


def data_hyponormality_min_eig(seq, dk):
    """Smallest eigenvalue over the data-level hyponormality blocks at gap dk."""
    n = seq.n
    best = np.inf
    pairs = [(1, 1)] if n == 1 else [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    for i, j in pairs:
        block = hyponormality_block(seq, dk, i, j).matrix
        vals, _ = linalg.hermitian_eig((block + block.conj().T) / 2.0, tol=np.inf)
        best = min(best, float(vals[0]))
    return best


def verify_measure(measure, seq):
    """Worst absolute moment-reconstruction error of a measure against data."""
    worst = 0.0
    for key, v in seq.values.items():
        v = complex(v)
        if seq.mode == "paired":
            a, b = key
            acc = sum(
                w * np.prod(np.conj(np.asarray(z)) ** np.asarray(a)) * np.prod(np.asarray(z) ** np.asarray(b))
                for z, w in zip(measure.atoms, measure.weights)
            )
        else:
            acc = sum(
                w * np.prod(np.asarray(z) ** np.asarray(key))
                for z, w in zip(measure.atoms, measure.weights)
            )
        worst = max(worst, abs(acc - v))
    return float(worst)


@dataclass
class ConstraintFeasibility:
    index: int
    kind: str
    values: list
    violations: list  # (atom_index, value)
    zero_atom_count: int
    expected_zero_count: int | None


def feasibility_report(measure, problem, tol=1e-6, seq=None, dk=None):
    """Evaluate every constraint at every atom.

    With the solved sequence supplied, also reports the theoretical count of
    atoms lying on each constraint boundary, rank M_d(y) - rank M_{d-dk}(g_i y).
    """
    rows = []
    rank_d = None
    if seq is not None:
        dk = problem.d_K if dk is None else dk
        mm = moment_matrix(seq, seq.d).matrix
        vals, _ = linalg.hermitian_eig((mm + mm.conj().T) / 2.0, tol=np.inf)
        rank_d = linalg.numeric_rank(vals, 1e-5)
    for idx, con in enumerate(problem.constraints):
        vals = [float(np.real(con.poly.eval(np.asarray(a)))) for a in measure.atoms]
        if con.kind == "eq":
            violations = [(i, v) for i, v in enumerate(vals) if abs(v) > tol]
        else:
            violations = [(i, v) for i, v in enumerate(vals) if v < -tol]
        zero_count = sum(1 for v in vals if abs(v) <= tol)
        expected = None
        if rank_d is not None:
            try:
                loc = localizing_matrix(seq, con.poly, seq.d - dk + con.poly.k)
                lvals, _ = linalg.hermitian_eig(
                    (loc.matrix + loc.matrix.conj().T) / 2.0, tol=np.inf
                )
                expected = rank_d - linalg.numeric_rank(lvals, 1e-5)
            except (MissingMoment, OrderTooSmall):
                expected = None
        rows.append(
            ConstraintFeasibility(
                index=idx,
                kind=con.kind,
                values=vals,
                violations=violations,
                zero_atom_count=zero_count,
                expected_zero_count=expected,
            )
        )
    return rows


# ----------------------------------------------------------------- file IO

_FORMAT_NAME = "measure"
_FORMAT_VERSION = 1


def _fmt(x):
    return format(float(x), ".17g")


def write_measure(measure, target):
    own = isinstance(target, str)
    fh = open(target, "w") if own else target
    try:
        fh.write(f"{_FORMAT_NAME} {_FORMAT_VERSION}\n")
        fh.write(f"mode {measure.mode}\n")
        fh.write(f"n {measure.n}\n")
        for atom, w in zip(measure.atoms, measure.weights):
            coords = " ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in atom)
            w = complex(w)
            fh.write(f"atom {coords} w {_fmt(w.real)} {_fmt(w.imag)}\n")
    finally:
        if own:
            fh.close()


def read_measure(source):
    if isinstance(source, str) and "\n" not in source:
        with open(source) as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source.read().splitlines()
    mode = None
    n = None
    atoms, weights = [], []
    seen_header = False
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == _FORMAT_NAME:
            seen_header = True
        elif parts[0] == "mode":
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: bad mode")
            mode = parts[1]
        elif parts[0] == "n":
            try:
                n = int(parts[1])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad n") from None
        elif parts[0] == "atom":
            if n is None:
                raise ParseError(f"line {lineno}: atom before n header")
            try:
                wpos = parts.index("w")
                coords = [float(p) for p in parts[1:wpos]]
                wre, wim = float(parts[wpos + 1]), float(parts[wpos + 2])
            except (ValueError, IndexError):
                raise ParseError(f"line {lineno}: malformed atom") from None
            if not all(np.isfinite(coords + [wre, wim])):
                raise ParseError(f"line {lineno}: non-finite atom")
            if len(coords) != 2 * n:
                raise ParseError(f"line {lineno}: expected {2 * n} coordinates")
            atoms.append(tuple(complex(coords[2 * i], coords[2 * i + 1]) for i in range(n)))
            weights.append(complex(wre, wim))
        else:
            raise ParseError(f"line {lineno}: unknown directive {parts[0]!r}")
    if not seen_header or mode is None or n is None:
        raise ParseError("missing measure header")
    if mode not in (CONJUGATE, TRANSPOSE):
        raise ParseError(f"unknown measure mode {mode!r}")
    if n < 1:
        raise ParseError("need n >= 1")
    if mode == CONJUGATE:
        weights = [w.real for w in weights]
    return AtomicMeasure(atoms, weights, mode)
