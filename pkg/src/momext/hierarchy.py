"""Complex moment relaxations of polynomial optimization problems.

Hermitian moment variables y[alpha,beta] are flattened to real scalars
(real/imaginary parts of the upper triangle, or plain real Hankel moments
for problems over real variables). The relaxation at order d is one PSD
block per matrix inequality plus linear equality rows; equality constraints
and the normalization y[0,0] = 1 stay linear rather than becoming paired
PSD blocks, which preserves strict feasibility for the interior-point
solver. SDPA export rewrites the equality rows as paired 1x1 diagonal
blocks, since the sparse format is pure-LMI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, NotHermitian, OrderTooSmall, ParseError
from .moment import (
    HermitianPoly,
    MomentSequence,
    enumerate_indices,
    index_add,
    total_degree,
    unit_index,
)

__all__ = [
    "Constraint",
    "PolynomialProblem",
    "RelaxationMap",
    "SDPBlock",
    "SDPProblem",
    "parse_problem",
    "problem_to_text",
    "assemble_relaxation",
    "realify",
    "export_sdpa",
    "read_sdpa",
    "import_solution",
]


@dataclass
class Constraint:
    poly: HermitianPoly
    kind: str  # "eq" | "ineq"


@dataclass
class PolynomialProblem:
    n: int
    objective: HermitianPoly
    constraints: list
    real_vars: bool = False

    @property
    def d_K(self):
        return max([1] + [c.poly.k for c in self.constraints])

    @property
    def objective_order(self):
        return max(1, self.objective.k)


# ------------------------------------------------------------- variable map


class RelaxationMap:
    """Bijection between real solver unknowns and moment keys.

    mode 'hermitian': unknowns are Re y[a,b] for a <= b (graded-lex) and
    Im y[a,b] for a < b; y[b,a] is tied to the conjugate.
    mode 'hankel_real': unknowns are the real Hankel moments y[s], |s| <= 2d.
    """

    def __init__(self, n, d, real_vars=False):
        self.n = n
        self.d = d
        self.mode = "hankel_real" if real_vars else "hermitian"
        self.indices = enumerate_indices(n, d)
        self._rank = {a: i for i, a in enumerate(self.indices)}
        self.var_names = []
        self._re = {}
        self._im = {}
        self._hk = {}
        if self.mode == "hermitian":
            for i, a in enumerate(self.indices):
                for b in self.indices[i:]:
                    self._re[(a, b)] = len(self.var_names)
                    self.var_names.append(f"re[{_istr(a)}|{_istr(b)}]")
            for i, a in enumerate(self.indices):
                for b in self.indices[i + 1 :]:
                    self._im[(a, b)] = len(self.var_names)
                    self.var_names.append(f"im[{_istr(a)}|{_istr(b)}]")
        else:
            for s in enumerate_indices(n, 2 * d):
                self._hk[s] = len(self.var_names)
                self.var_names.append(f"y[{_istr(s)}]")

    @property
    def n_vars(self):
        return len(self.var_names)

    def expr(self, a, b):
        """y[a,b] as [(var_index, complex coefficient), ...]."""
        a, b = tuple(a), tuple(b)
        if self.mode == "hankel_real":
            return [(self._hk[index_add(a, b)], 1.0 + 0.0j)]
        ra, rb = self._rank[a], self._rank[b]
        if ra == rb:
            return [(self._re[(a, b)], 1.0 + 0.0j)]
        if ra < rb:
            return [(self._re[(a, b)], 1.0 + 0.0j), (self._im[(a, b)], 1.0j)]
        return [(self._re[(b, a)], 1.0 + 0.0j), (self._im[(b, a)], -1.0j)]

    def sequence_from_values(self, x):
        """Solver vector -> exactly Hermitian paired MomentSequence."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise FormatError(f"expected {self.n_vars} values, got {x.shape}")
        values = {}
        for a in self.indices:
            for b in self.indices:
                values[(a, b)] = sum(c * x[i] for i, c in self.expr(a, b))
        return MomentSequence(n=self.n, d=self.d, mode="paired", values=values)

    def values_from_sequence(self, seq):
        """Moment sequence -> solver vector (inverse of sequence_from_values)."""
        x = np.zeros(self.n_vars)
        if self.mode == "hermitian":
            for (a, b), i in self._re.items():
                v = (complex(seq.get(a, b)) + np.conj(seq.get(b, a))) / 2.0
                x[i] = v.real
            for (a, b), i in self._im.items():
                v = (complex(seq.get(a, b)) + np.conj(seq.get(b, a))) / 2.0
                x[i] = v.imag
        else:
            for s, i in self._hk.items():
                beta = _split_index(s, self.d)
                alpha = tuple(si - bi for si, bi in zip(s, beta))
                x[i] = complex(seq.get(alpha, beta)).real
        return x


def _istr(alpha):
    return ",".join(str(a) for a in alpha)


def _split_index(s, d):
    """Some beta <= s componentwise with |beta| <= d and |s - beta| <= d."""
    budget = d
    beta = []
    for si in s:
        take = min(si, budget)
        beta.append(take)
        budget -= take
    return tuple(beta)


# ----------------------------------------------------------------- problem


@dataclass
class SDPBlock:
    name: str
    size: int
    const: np.ndarray
    coeffs: dict  # var index -> matrix

    def evaluate(self, x):
        m = self.const.copy()
        for i, f in self.coeffs.items():
            m = m + x[i] * f
        return m


@dataclass
class SDPProblem:
    var_names: list
    blocks: list
    eq_a: np.ndarray  # (rows, n_vars)
    eq_b: np.ndarray  # (rows,)
    objective: np.ndarray  # (n_vars,)
    obj_const: float = 0.0
    is_real: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n_vars(self):
        return len(self.var_names)


def parse_problem(text):
    """Parse a polynomial optimization problem file.

    Grammar (one directive per line, '#' comments):

        pop 1
        n <count>
        vars complex|real
        minimize
        term <alpha> <beta> <re> <im>
        constraint eq|ineq
        term ...

    Inequality constraints and the objective must be Hermitian; an equality
    with a plain complex polynomial (such as z^3 = 1) splits into its real
    and imaginary Hermitian parts.
    """
    if isinstance(source := text, str) and "\n" not in source:
        with open(source) as fh:
            text = fh.read()
    elif not isinstance(text, str):
        text = text.read()

    n = None
    real_vars = False
    objective_terms = None
    pending = []  # (kind, terms dict) in file order
    current = None  # ("objective", terms) or ("constraint", kind, terms)
    seen_header = False

    def close_current():
        nonlocal objective_terms
        if current is None:
            return
        if current[0] == "objective":
            objective_terms = current[1]
        else:
            pending.append((current[1], current[2]))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        where = f"line {lineno}"
        if parts[0] == "pop":
            if len(parts) != 2 or parts[1] != "1":
                raise ParseError(f"{where}: unsupported pop version")
            seen_header = True
        elif parts[0] == "n":
            try:
                n = int(parts[1])
            except (IndexError, ValueError):
                raise ParseError(f"{where}: bad n") from None
            if n < 1:
                raise ParseError(f"{where}: need n >= 1")
        elif parts[0] == "vars":
            if len(parts) != 2 or parts[1] not in ("complex", "real"):
                raise ParseError(f"{where}: vars must be complex or real")
            real_vars = parts[1] == "real"
        elif parts[0] == "minimize":
            close_current()
            current = ("objective", {})
        elif parts[0] == "constraint":
            if len(parts) != 2 or parts[1] not in ("eq", "ineq"):
                raise ParseError(f"{where}: constraint kind must be eq or ineq")
            close_current()
            current = ("constraint", parts[1], {})
        elif parts[0] == "term":
            if current is None:
                raise ParseError(f"{where}: term outside a section")
            if n is None:
                raise ParseError(f"{where}: term before n")
            if len(parts) != 5:
                raise ParseError(f"{where}: term needs alpha beta re im")
            a = _parse_index(parts[1], n, where)
            b = _parse_index(parts[2], n, where)
            try:
                c = complex(float(parts[3]), float(parts[4]))
            except ValueError:
                raise ParseError(f"{where}: bad coefficient") from None
            if not (np.isfinite(c.real) and np.isfinite(c.imag)):
                raise ParseError(f"{where}: non-finite coefficient")
            terms = current[1] if current[0] == "objective" else current[2]
            terms[(a, b)] = terms.get((a, b), 0.0) + c
        else:
            raise ParseError(f"{where}: unknown directive {parts[0]!r}")
    close_current()

    if not seen_header:
        raise ParseError("missing 'pop 1' header")
    if n is None:
        raise ParseError("missing n")
    if objective_terms is None:
        raise ParseError("missing minimize section")

    objective = HermitianPoly(n, objective_terms)
    if not objective.is_hermitian(1e-12):
        raise NotHermitian("objective polynomial is not Hermitian (not real-valued)")

    constraints = []
    for kind, terms in pending:
        poly = HermitianPoly(n, terms)
        if poly.is_hermitian(1e-12):
            constraints.append(Constraint(poly, kind))
        elif kind == "eq":
            re_part, im_part = poly.hermitian_parts()
            if re_part.terms:
                constraints.append(Constraint(re_part, "eq"))
            if im_part.terms:
                constraints.append(Constraint(im_part, "eq"))
        else:
            raise NotHermitian(
                "inequality constraint polynomial is not Hermitian (not real-valued)"
            )
    return PolynomialProblem(n=n, objective=objective, constraints=constraints,
                             real_vars=real_vars)


def _parse_index(text, n, where):
    parts = text.split(",")
    if len(parts) != n:
        raise ParseError(f"{where}: index {text!r} needs {n} entries")
    try:
        idx = tuple(int(p) for p in parts)
    except ValueError:
        raise ParseError(f"{where}: bad index {text!r}") from None
    if any(k < 0 for k in idx):
        raise ParseError(f"{where}: negative exponent in {text!r}")
    return idx


def problem_to_text(problem):
    lines = ["pop 1", f"n {problem.n}", f"vars {'real' if problem.real_vars else 'complex'}"]
    lines.append("minimize")
    for (a, b), c in sorted(problem.objective.terms.items()):
        lines.append(f"term {_istr(a)} {_istr(b)} {c.real:.17g} {c.imag:.17g}")
    for con in problem.constraints:
        lines.append(f"constraint {con.kind}")
        for (a, b), c in sorted(con.poly.terms.items()):
            lines.append(f"term {_istr(a)} {_istr(b)} {c.real:.17g} {c.imag:.17g}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- relaxation


def _linear_entry(rmap, pairs):
    """Accumulate sum of coeff * y[a,b] into a complex row over variables."""
    row = {}
    for coeff, a, b in pairs:
        for idx, c in rmap.expr(a, b):
            row[idx] = row.get(idx, 0.0 + 0.0j) + coeff * c
    return row


def _block_from_entries(rmap, name, labels, entry_pairs):
    """Build an SDPBlock from per-entry lists of (coeff, alpha, beta)."""
    size = len(labels)
    const = np.zeros((size, size), dtype=complex)
    coeffs = {}
    for (i, j), pairs in entry_pairs.items():
        row = _linear_entry(rmap, pairs)
        for idx, c in row.items():
            if idx not in coeffs:
                coeffs[idx] = np.zeros((size, size), dtype=complex)
            coeffs[idx][i, j] += c
    return SDPBlock(name=name, size=size, const=const, coeffs=coeffs)


def _poly_shifted_entries(poly, labels):
    """Entry map for the localizing matrix of `poly` over `labels`."""
    entries = {}
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            pairs = [
                (c, index_add(a, gamma), index_add(b, delta))
                for (gamma, delta), c in poly.terms.items()
            ]
            entries[(i, j)] = pairs
    return entries


def _hypo_entry_pairs(n, labels, i_var, j_var):
    """Entry map for the joint-hyponormality block of the pair (i_var, j_var)."""
    zero = (0,) * n
    ei = unit_index(n, i_var)
    if n == 1 or i_var == j_var:
        grid = [
            [(zero, zero), (ei, zero)],
            [(zero, ei), (ei, ei)],
        ]
    else:
        ej = unit_index(n, j_var)
        grid = [
            [(zero, zero), (ei, zero), (ej, zero)],
            [(zero, ei), (ei, ei), (ej, ei)],
            [(zero, ej), (ei, ej), (ej, ej)],
        ]
    m = len(labels)
    entries = {}
    for bi, row in enumerate(grid):
        for bj, (gamma, delta) in enumerate(row):
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    entries[(bi * m + i, bj * m + j)] = [
                        (1.0, index_add(a, gamma), index_add(b, delta))
                    ]
    return entries


def assemble_relaxation(problem, d, enforce_hyponormality=False):
    """Moment relaxation of order d as an SDP over the flattened moments.

    Blocks: M_d(y) plus one localizing block per inequality constraint;
    equality constraints (and y[0,0] = 1) become linear equality rows.
    With enforcement on, one joint-hyponormality block per variable pair is
    added with sub-blocks of order d-1, matching the strongest data-level
    condition expressible at order d.
    """
    n = problem.n
    if d < problem.d_K:
        raise OrderTooSmall(
            f"order-{d} relaxation is not defined: constraint degree needs d >= {problem.d_K}"
        )
    if d < problem.objective_order:
        raise OrderTooSmall(
            f"order-{d} relaxation is not defined: objective degree needs d >= {problem.objective_order}"
        )
    rmap = RelaxationMap(n, d, real_vars=problem.real_vars)
    blocks = []
    eq_rows = []

    labels_d = enumerate_indices(n, d)
    one = HermitianPoly(n, {(((0,) * n), ((0,) * n)): 1.0})
    blocks.append(_block_from_entries(rmap, "moment", labels_d,
                                      _poly_shifted_entries(one, labels_d)))

    for ci, con in enumerate(problem.constraints):
        k = con.poly.k
        labels = enumerate_indices(n, d - k)
        entries = _poly_shifted_entries(con.poly, labels)
        if con.kind == "ineq":
            blocks.append(_block_from_entries(rmap, f"localizing:{ci}", labels, entries))
        else:
            eq_rows.extend(_equality_rows(rmap, labels, entries))

    # normalization y[0,0] = 1
    zero = (0,) * n
    row = _linear_entry(rmap, [(1.0, zero, zero)])
    eq_rows.append((_dense_row(rmap, {i: c.real for i, c in row.items()}), 1.0))

    if enforce_hyponormality:
        labels = enumerate_indices(n, d - 1)
        pairs = [(1, 1)] if n == 1 else [
            (i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
        ]
        for i_var, j_var in pairs:
            entries = _hypo_entry_pairs(n, labels, i_var, j_var)
            name = "hypo:uni" if n == 1 else f"hypo:{i_var},{j_var}"
            blocks.append(_block_from_entries(rmap, name, labels * (2 if n == 1 else 3), entries))

    obj = np.zeros(rmap.n_vars)
    obj_const = 0.0
    acc = {}
    for (a, b), c in problem.objective.terms.items():
        for idx, coef in rmap.expr(a, b):
            acc[idx] = acc.get(idx, 0.0 + 0.0j) + c * coef
    for idx, v in acc.items():
        if abs(v.imag) > 1e-9 * max(1.0, abs(v)):
            raise NotHermitian("objective produced a complex linear functional")
        obj[idx] = v.real

    eq_a, eq_b = _stack_rows(rmap.n_vars, eq_rows)
    sdp = SDPProblem(
        var_names=list(rmap.var_names),
        blocks=blocks,
        eq_a=eq_a,
        eq_b=eq_b,
        objective=obj,
        obj_const=obj_const,
        is_real=problem.real_vars,
        metadata={"order": d, "enforced": enforce_hyponormality},
    )
    return sdp, rmap


def _dense_row(rmap, sparse):
    row = np.zeros(rmap.n_vars)
    for i, v in sparse.items():
        row[i] = v
    return row


def _equality_rows(rmap, labels, entries):
    """Real equality rows (a . x = b) for a vanishing localizing matrix.

    Only the upper triangle is scanned; the lower one is its conjugate.
    Near-duplicate rows (from structural symmetry) are dropped.
    """
    rows = []
    seen = set()
    for i in range(len(labels)):
        for j in range(i, len(labels)):
            pairs = entries[(i, j)]
            row = _linear_entry(rmap, pairs)
            for picker in (lambda c: c.real, lambda c: c.imag):
                dense = {idx: picker(c) for idx, c in row.items() if abs(picker(c)) > 1e-14}
                if not dense:
                    continue
                sig = _row_signature(dense)
                if sig in seen:
                    continue
                seen.add(sig)
                rows.append((_dense_row(rmap, dense), 0.0))
    return rows


def _row_signature(dense):
    items = sorted(dense.items())
    lead = items[0][1]
    return tuple((i, round(v / lead, 9)) for i, v in items)


def _stack_rows(n_vars, rows):
    if not rows:
        return np.zeros((0, n_vars)), np.zeros(0)
    a = np.vstack([r for r, _ in rows])
    b = np.array([v for _, v in rows])
    return a, b


# ---------------------------------------------------------------- realify


def _is_real_matrix(m, tol=0.0):
    return np.all(np.abs(np.imag(m)) <= tol)


def realify(sdp):
    """Rewrite complex Hermitian blocks as real symmetric ones.

    H becomes [[Re H, -Im H], [Im H, Re H]], doubling eigenvalue
    multiplicities; blocks that are already real pass through unchanged.
    """
    if sdp.is_real and all(_is_real_matrix(b.const) and
                           all(_is_real_matrix(f) for f in b.coeffs.values())
                           for b in sdp.blocks):
        out_blocks = [
            SDPBlock(b.name, b.size, np.real(b.const).astype(float),
                     {i: np.real(f).astype(float) for i, f in b.coeffs.items()})
            for b in sdp.blocks
        ]
        return SDPProblem(sdp.var_names, out_blocks, sdp.eq_a, sdp.eq_b,
                          sdp.objective, sdp.obj_const, is_real=True,
                          metadata=dict(sdp.metadata))

    out_blocks = []
    for b in sdp.blocks:
        mats = [b.const] + list(b.coeffs.values())
        if all(_is_real_matrix(m, 1e-300) for m in mats):
            out_blocks.append(
                SDPBlock(b.name, b.size, np.real(b.const).astype(float),
                         {i: np.real(f).astype(float) for i, f in b.coeffs.items()})
            )
            continue
        out_blocks.append(
            SDPBlock(
                b.name,
                2 * b.size,
                _embed(b.const),
                {i: _embed(f) for i, f in b.coeffs.items()},
            )
        )
    return SDPProblem(sdp.var_names, out_blocks, sdp.eq_a, sdp.eq_b,
                      sdp.objective, sdp.obj_const, is_real=True,
                      metadata=dict(sdp.metadata))


def _embed(h):
    re, im = np.real(h), np.imag(h)
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    out = np.vstack([top, bot])
    return (out + out.T) / 2.0


# ------------------------------------------------------------- SDPA text


def export_sdpa(sdp, comment="momext export"):
    """Serialize a realified problem in SDPA sparse format.

    Equality rows become paired 1x1 entries inside one diagonal block, since
    the format only speaks LMIs. Convention: minimize c.x subject to
    sum_i x_i F_i - F_0 >= 0.
    """
    if not sdp.is_real:
        raise FormatError("export requires a realified problem")
    m = sdp.n_vars
    sizes = [b.size for b in sdp.blocks]
    n_eq = sdp.eq_a.shape[0]
    if n_eq:
        sizes.append(-2 * n_eq)
    lines = [f'"{comment}', f"{m}", f"{len(sizes)}", " ".join(str(s) for s in sizes)]
    lines.append(" ".join(format(float(c), ".17g") for c in sdp.objective))

    entries = []  # (matno, blkno, i, j, value)

    def emit(matno, blkno, i, j, value):
        if i <= j and abs(value) > 0.0:
            entries.append((matno, blkno, i, j, value))

    for bi, b in enumerate(sdp.blocks, start=1):
        cm = np.asarray(np.real(b.const))
        for i in range(b.size):
            for j in range(i, b.size):
                emit(0, bi, i + 1, j + 1, -cm[i, j])  # F_0 = -const
        for vi, f in sorted(b.coeffs.items()):
            fm = np.asarray(np.real(f))
            for i in range(f.shape[0]):
                for j in range(i, f.shape[1]):
                    emit(vi + 1, bi, i + 1, j + 1, fm[i, j])
    if n_eq:
        blk = len(sdp.blocks) + 1
        for r in range(n_eq):
            # a.x - b >= 0 and b - a.x >= 0
            emit(0, blk, 2 * r + 1, 2 * r + 1, float(sdp.eq_b[r]))
            emit(0, blk, 2 * r + 2, 2 * r + 2, -float(sdp.eq_b[r]))
            for vi in range(m):
                v = float(sdp.eq_a[r, vi])
                emit(vi + 1, blk, 2 * r + 1, 2 * r + 1, v)
                emit(vi + 1, blk, 2 * r + 2, 2 * r + 2, -v)

    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    for matno, blkno, i, j, v in entries:
        lines.append(f"{matno} {blkno} {i} {j} {format(v, '.17g')}")
    return "\n".join(lines) + "\n"


@dataclass
class SdpaText:
    n_vars: int
    block_sizes: list
    objective: np.ndarray
    entries: dict  # matno -> list of (blkno, i, j, value)


def read_sdpa(text):
    """Parse SDPA sparse text back into its structural pieces."""
    lines = [ln for ln in text.splitlines()]
    body = []
    for ln in lines:
        stripped = ln.strip()
        if not stripped or stripped.startswith('"') or stripped.startswith("*"):
            continue
        body.append(stripped)
    if len(body) < 4:
        raise FormatError("truncated SDPA input")
    try:
        m = int(body[0].split()[0])
        nblocks = int(body[1].split()[0])
        sizes = [int(tok) for tok in body[2].replace(",", " ").replace("{", " ")
                 .replace("}", " ").replace("(", " ").replace(")", " ").split()]
        objective = np.array([float(tok) for tok in body[3].replace(",", " ").split()])
    except (ValueError, IndexError):
        raise FormatError("malformed SDPA header") from None
    if len(sizes) != nblocks:
        raise FormatError(f"expected {nblocks} block sizes, got {len(sizes)}")
    if objective.size != m:
        raise FormatError(f"expected {m} objective entries, got {objective.size}")
    entries = {}
    for ln in body[4:]:
        toks = ln.replace(",", " ").split()
        if len(toks) != 5:
            raise FormatError(f"malformed entry line {ln!r}")
        try:
            matno, blkno, i, j = (int(t) for t in toks[:4])
            value = float(toks[4])
        except ValueError:
            raise FormatError(f"malformed entry line {ln!r}") from None
        if not (0 <= matno <= m) or not (1 <= blkno <= nblocks):
            raise FormatError(f"entry indices out of range in {ln!r}")
        entries.setdefault(matno, []).append((blkno, i, j, value))
    return SdpaText(n_vars=m, block_sizes=sizes, objective=objective, entries=entries)


def import_solution(text, rmap):
    """Whitespace-separated solver vector -> Hermitian MomentSequence."""
    if not isinstance(text, str):
        text = text.read()
    try:
        x = np.array([float(tok) for tok in text.split()])
    except ValueError:
        raise FormatError("solution vector contains a non-numeric token") from None
    if x.size != rmap.n_vars:
        raise FormatError(f"expected {rmap.n_vars} values, got {x.size}")
    return rmap.sequence_from_values(x)
