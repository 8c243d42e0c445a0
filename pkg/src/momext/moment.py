"""Multi-index calculus and structured matrices built from truncated moments.

Indices are plain tuples of nonnegative ints ordered graded-lexicographically
(total degree first, then lexicographic with the first variable highest).
A MomentSequence stores the raw truncated data in one of two modes:

* ``paired``  -- keys are (alpha, beta) pairs, values y[alpha, beta];
* ``hankel``  -- keys are single indices, values y[alpha] (interpolation data).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingMoment, OrderTooSmall, ParseError

__all__ = [
    "enumerate_indices",
    "index_add",
    "total_degree",
    "MomentSequence",
    "MomentMatrix",
    "HermitianPoly",
    "StructureFlags",
    "moment_matrix",
    "hankel_matrix",
    "localizing_matrix",
    "classify_structure",
    "hyponormality_block",
    "write_sequence",
    "read_sequence",
]


def total_degree(alpha):
    return sum(alpha)


def index_add(alpha, beta):
    return tuple(a + b for a, b in zip(alpha, beta))


def unit_index(n, k):
    """e_k as a tuple (k is 1-based)."""
    return tuple(1 if i == k - 1 else 0 for i in range(n))


def _compositions(total, n):
    """Compositions of `total` into n parts, first part largest first."""
    if n == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, n - 1):
            yield (head,) + tail


def enumerate_indices(n, d):
    """All multi-indices with |alpha| <= d in graded lexicographic order."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    out = []
    for t in range(d + 1):
        out.extend(_compositions(t, n))
    return out


def index_count(n, d):
    return math.comb(n + d, d)


@dataclass
class MomentSequence:
    """Truncated moment data y over C^n.

    mode 'paired': values keyed by (alpha, beta), covering |alpha|,|beta| <= d.
    mode 'hankel': values keyed by alpha, covering |alpha| <= 2d.
    """

    n: int
    d: int
    mode: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("paired", "hankel"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def get(self, alpha, beta):
        """y_{alpha,beta}; in hankel mode this is y_{alpha+beta}."""
        if self.mode == "paired":
            key = (tuple(alpha), tuple(beta))
        else:
            key = index_add(alpha, beta)
        try:
            return complex(self.values[key])
        except KeyError:
            raise MissingMoment(key) from None

    def zero_moment(self):
        origin = (0,) * self.n
        if self.mode == "paired":
            return self.get(origin, origin)
        return self.get(origin, origin)

    def covers(self, order):
        try:
            self.check_coverage(order)
        except MissingMoment:
            return False
        return True

    def check_coverage(self, order):
        idx = enumerate_indices(self.n, order)
        if self.mode == "paired":
            for a in idx:
                for b in idx:
                    if (a, b) not in self.values:
                        raise MissingMoment((a, b))
        else:
            for s in enumerate_indices(self.n, 2 * order):
                if s not in self.values:
                    raise MissingMoment(s)

    def is_hermitian(self, tol=1e-12):
        if self.mode == "hankel":
            return all(abs(v.imag) <= tol for v in map(complex, self.values.values()))
        scale = max((abs(complex(v)) for v in self.values.values()), default=1.0)
        for (a, b), v in self.values.items():
            w = self.values.get((b, a))
            if w is None or abs(np.conj(complex(v)) - complex(w)) > tol * max(scale, 1.0):
                return False
        return True


@dataclass
class MomentMatrix:
    matrix: np.ndarray
    row_labels: list
    col_labels: list
    kind: str  # moment | localizing | hankel | hypoblock


@dataclass
class HermitianPoly:
    """Polynomial sum of c[alpha,beta] * conj(z)^alpha z^beta with real values.

    Hermitian means conj(c[a,b]) == c[b,a]; `strict` construction enforces it.
    """

    n: int
    terms: dict

    def __post_init__(self):
        self.terms = {
            (tuple(a), tuple(b)): complex(c)
            for (a, b), c in self.terms.items()
            if c != 0
        }

    @property
    def k(self):
        """Half-degree: max of |alpha|, |beta| over nonzero terms."""
        if not self.terms:
            return 0
        return max(max(total_degree(a), total_degree(b)) for a, b in self.terms)

    def is_hermitian(self, tol=1e-12):
        scale = max((abs(c) for c in self.terms.values()), default=1.0)
        for (a, b), c in self.terms.items():
            if abs(np.conj(c) - self.terms.get((b, a), 0.0)) > tol * scale:
                return False
        return True

    def hermitian_parts(self):
        """Split arbitrary complex-coefficient terms into (re, im) Hermitian polys.

        p == re_part + i * im_part pointwise, each part real-valued on C^n.
        """
        keys = set(self.terms)
        keys.update((b, a) for a, b in self.terms)
        re_terms, im_terms = {}, {}
        for a, b in keys:
            c = self.terms.get((a, b), 0.0)
            cc = np.conj(self.terms.get((b, a), 0.0))
            re_terms[(a, b)] = (c + cc) / 2.0
            im_terms[(a, b)] = (c - cc) / 2.0j
        return (
            HermitianPoly(self.n, re_terms),
            HermitianPoly(self.n, im_terms),
        )

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        acc = 0.0 + 0.0j
        for (a, b), c in self.terms.items():
            acc += c * np.prod(np.conj(z) ** np.array(a)) * np.prod(z ** np.array(b))
        return acc

    def scaled(self, factor):
        return HermitianPoly(self.n, {k: factor * c for k, c in self.terms.items()})


def moment_matrix(seq, d):
    """M_d(y): entry (alpha, beta) = y_{alpha,beta} (or y_{alpha+beta})."""
    labels = enumerate_indices(seq.n, d)
    m = np.empty((len(labels), len(labels)), dtype=complex)
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            m[i, j] = seq.get(a, b)
    kind = "hankel" if seq.mode == "hankel" else "moment"
    return MomentMatrix(m, labels, labels, kind)


def hankel_matrix(seq, d):
    """H_d(y) from hankel-mode samples: entry (alpha, beta) = y_{alpha+beta}."""
    if seq.mode != "hankel":
        raise ValueError("hankel_matrix requires a hankel-mode sequence")
    return moment_matrix(seq, d)


def localizing_matrix(seq, g, d):
    """M_{d-k}(g y): entry (a,b) = sum over g terms of c[gamma,delta]*y[a+gamma, b+delta].

    `d` is the order of the data the matrix is built against; the result is
    indexed by |alpha|,|beta| <= d - k where k is the half-degree of g.
    """
    k = g.k
    if d < k:
        raise OrderTooSmall(f"localizing matrix needs d >= {k}, got d={d}")
    labels = enumerate_indices(seq.n, d - k)
    m = np.zeros((len(labels), len(labels)), dtype=complex)
    for (gamma, delta), c in g.terms.items():
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                m[i, j] += c * seq.get(index_add(a, gamma), index_add(b, delta))
    return MomentMatrix(m, labels, labels, "localizing")


@dataclass
class StructureFlags:
    hermitian: bool
    hankel: bool
    toeplitz: bool


def classify_structure(m, tol=1e-9):
    """Detect Hermitian / Hankel / Toeplitz structure of a labeled matrix.

    Hankel: entries agree whenever alpha+beta agree; Toeplitz: whenever
    alpha-beta agree. Purely advisory; comparisons use absolute tolerance.
    """
    a = m.matrix
    hermitian = bool(np.all(np.abs(a - a.conj().T) <= tol))
    sums, diffs = {}, {}
    hankel = True
    toeplitz = True
    for i, ra in enumerate(m.row_labels):
        for j, cb in enumerate(m.col_labels):
            v = a[i, j]
            skey = index_add(ra, cb)
            dkey = tuple(x - y for x, y in zip(ra, cb))
            if skey in sums:
                if abs(v - sums[skey]) > tol:
                    hankel = False
            else:
                sums[skey] = v
            if dkey in diffs:
                if abs(v - diffs[dkey]) > tol:
                    toeplitz = False
            else:
                diffs[dkey] = v
    return StructureFlags(hermitian=hermitian, hankel=hankel, toeplitz=toeplitz)


def _shifted_block(seq, order, gamma, delta):
    """Matrix of y_{alpha+gamma, beta+delta} over |alpha|,|beta| <= order."""
    labels = enumerate_indices(seq.n, order)
    m = np.empty((len(labels), len(labels)), dtype=complex)
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            m[i, j] = seq.get(index_add(a, gamma), index_add(b, delta))
    return m


def hyponormality_block(seq, dk, i, j):
    """Data-level joint-hyponormality block for the variable pair (i, j).

    Built from M_{d-dk}-sized sub-blocks; for n == 1 (i == j == 1) the
    two-by-two univariate form is produced instead of the three-by-three one.
    """
    if dk < 1:
        raise OrderTooSmall("hyponormality block needs a gap dk >= 1")
    h = seq.d - dk
    if h < 0:
        raise OrderTooSmall(f"gap dk={dk} exceeds data order d={seq.d}")
    n = seq.n
    zero = (0,) * n
    if n == 1 or i == j:
        ei = unit_index(n, i)
        rows = [
            [(zero, zero), (ei, zero)],
            [(zero, ei), (ei, ei)],
        ]
    else:
        if not (1 <= i < j <= n):
            raise ValueError(f"need 1 <= i < j <= n, got i={i}, j={j}")
        ei, ej = unit_index(n, i), unit_index(n, j)
        rows = [
            [(zero, zero), (ei, zero), (ej, zero)],
            [(zero, ei), (ei, ei), (ej, ei)],
            [(zero, ej), (ei, ej), (ej, ej)],
        ]
    blocks = [[_shifted_block(seq, h, g, dl) for (g, dl) in row] for row in rows]
    m = np.block(blocks)
    labels = enumerate_indices(n, h) * len(rows)
    return MomentMatrix(m, labels, labels, "hypoblock")


# ----------------------------------------------------------------- file IO

_FORMAT_NAME = "momseq"
_FORMAT_VERSION = 1


def _fmt(x):
    return format(float(x), ".17g")


def _idx_str(alpha):
    return ",".join(str(int(a)) for a in alpha)


def _finite(re_part, im_part, where):
    if not (math.isfinite(re_part) and math.isfinite(im_part)):
        raise ParseError(f"{where}: non-finite value")
    return complex(re_part, im_part)


def _parse_idx(text, n, where):
    parts = text.split(",")
    if len(parts) != n:
        raise ParseError(f"{where}: index {text!r} has {len(parts)} parts, expected {n}")
    try:
        idx = tuple(int(p) for p in parts)
    except ValueError:
        raise ParseError(f"{where}: bad index {text!r}") from None
    if any(a < 0 for a in idx):
        raise ParseError(f"{where}: negative exponent in {text!r}")
    return idx


def write_sequence(seq, target):
    """Write a moment sequence as versioned structured text (round-trip exact)."""
    own = isinstance(target, str)
    fh = open(target, "w") if own else target
    try:
        fh.write(f"{_FORMAT_NAME} {_FORMAT_VERSION}\n")
        fh.write(f"mode {seq.mode}\n")
        fh.write(f"n {seq.n}\n")
        fh.write(f"d {seq.d}\n")
        if seq.mode == "paired":
            for (a, b), v in sorted(seq.values.items()):
                v = complex(v)
                fh.write(f"y {_idx_str(a)} {_idx_str(b)} {_fmt(v.real)} {_fmt(v.imag)}\n")
        else:
            for a, v in sorted(seq.values.items()):
                v = complex(v)
                fh.write(f"y {_idx_str(a)} {_fmt(v.real)} {_fmt(v.imag)}\n")
    finally:
        if own:
            fh.close()


def sequence_to_text(seq):
    buf = io.StringIO()
    write_sequence(seq, buf)
    return buf.getvalue()


def read_sequence(source):
    """Parse a moment-sequence file (path, file object, or text)."""
    if isinstance(source, str) and "\n" not in source:
        with open(source) as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source.read().splitlines()

    header = {}
    values = {}
    mode = None
    n = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        where = f"line {lineno}"
        if parts[0] == _FORMAT_NAME:
            if len(parts) != 2 or parts[1] != str(_FORMAT_VERSION):
                raise ParseError(f"{where}: unsupported {_FORMAT_NAME} version")
            header["format"] = parts[1]
        elif parts[0] in ("mode", "n", "d"):
            if len(parts) != 2:
                raise ParseError(f"{where}: malformed header field")
            header[parts[0]] = parts[1]
            if parts[0] == "mode":
                mode = parts[1]
                if mode not in ("paired", "hankel"):
                    raise ParseError(f"{where}: unknown mode {mode!r}")
            if parts[0] == "n":
                try:
                    n = int(parts[1])
                except ValueError:
                    raise ParseError(f"{where}: bad n") from None
                if n < 1:
                    raise ParseError(f"{where}: need n >= 1")
        elif parts[0] == "y":
            if mode is None or n is None:
                raise ParseError(f"{where}: data before mode/n header")
            if mode == "paired":
                if len(parts) != 5:
                    raise ParseError(f"{where}: paired entry needs 'y A B re im'")
                a = _parse_idx(parts[1], n, where)
                b = _parse_idx(parts[2], n, where)
                try:
                    values[(a, b)] = _finite(float(parts[3]), float(parts[4]), where)
                except ValueError:
                    raise ParseError(f"{where}: bad value") from None
            else:
                if len(parts) != 4:
                    raise ParseError(f"{where}: hankel entry needs 'y A re im'")
                a = _parse_idx(parts[1], n, where)
                try:
                    values[a] = _finite(float(parts[2]), float(parts[3]), where)
                except ValueError:
                    raise ParseError(f"{where}: bad value") from None
        else:
            raise ParseError(f"{where}: unknown directive {parts[0]!r}")

    if "format" not in header:
        raise ParseError("missing momseq header line")
    for key in ("mode", "n", "d"):
        if key not in header:
            raise ParseError(f"missing header field {key!r}")
    try:
        d = int(header["d"])
    except ValueError:
        raise ParseError("bad d") from None
    seq = MomentSequence(n=n, d=d, mode=header["mode"], values=values)
    return seq
