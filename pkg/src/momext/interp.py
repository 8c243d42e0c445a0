"""Exponential-sum modeling and recovery.

A model is a finite sum of terms w_k * exp(<f_k, z>) with complex weights
and frequency vectors. Sampling it on the integer grid turns interpolation
into a truncated moment problem in Hankel form; recovery factorizes the
Hankel moment matrix with the Takagi decomposition and runs the shift
extraction in transpose mode. A classical univariate Prony implementation
is kept alongside as an independent cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    AtomAtZero,
    KernelNotUnidimensional,
    ParseError,
    RankNotStabilized,
)
from .extraction import TRANSPOSE, Tolerances, extract_measure
from .moment import MomentSequence, enumerate_indices, hankel_matrix

log = logging.getLogger(__name__)

__all__ = [
    "ExpTerm",
    "ExpSumModel",
    "eval_expsum",
    "sample_grid",
    "interpolate",
    "prony_univariate",
    "damped_sinusoid_to_expsum",
    "emit_signal",
    "write_model",
    "read_model",
]

TWO_PI = 2.0 * np.pi


@dataclass
class ExpTerm:
    weight: complex
    frequencies: tuple  # length-n complex vector f_k

    def canonical(self):
        freqs = tuple(
            complex(f.real, _wrap_angle(f.imag)) for f in map(complex, self.frequencies)
        )
        return ExpTerm(complex(self.weight), freqs)


def _wrap_angle(x):
    """Reduce to the principal interval (-pi, pi]."""
    y = np.remainder(x + np.pi, TWO_PI) - np.pi
    return np.pi if y == -np.pi else y


@dataclass
class ExpSumModel:
    n: int
    terms: list = field(default_factory=list)

    def canonical(self, merge_tol=1e-9, weight_floor=0.0):
        """Wrap frequencies, merge coincident terms, drop null weights, sort."""
        merged = []
        for term in (t.canonical() for t in self.terms):
            for other in merged:
                if max(
                    abs(a - b) for a, b in zip(term.frequencies, other.frequencies)
                ) <= merge_tol:
                    other.weight += term.weight
                    break
            else:
                merged.append(ExpTerm(term.weight, term.frequencies))
        scale = max((abs(t.weight) for t in merged), default=0.0)
        merged = [t for t in merged if abs(t.weight) > weight_floor * max(scale, 1e-300)]
        merged.sort(
            key=lambda t: tuple(x for f in t.frequencies for x in (f.real, f.imag))
        )
        return ExpSumModel(self.n, merged)


def eval_expsum(model, z):
    """Evaluate the exponential sum at a point of C^n."""
    z = np.asarray(z, dtype=complex)
    acc = 0.0 + 0.0j
    for term in model.terms:
        acc += term.weight * np.exp(np.dot(np.asarray(term.frequencies), z))
    return complex(acc)


def sample_grid(model, d):
    """Integer-grid samples y_alpha = f(alpha) for |alpha| <= 2d, Hankel mode."""
    if d < 1:
        raise ValueError("sampling order must be >= 1")
    values = {
        alpha: eval_expsum(model, alpha)
        for alpha in enumerate_indices(model.n, 2 * d)
    }
    return MomentSequence(n=model.n, d=d, mode="hankel", values=values)


def _hankel_rank(seq, d, rank_tol):
    h = hankel_matrix(seq, d).matrix
    _, sigma = linalg.takagi(h, tol=1e-6)
    return linalg.numeric_rank(sigma, rank_tol)


def interpolate(samples, d_max=None, tol=None, seed=0):
    """Recover an exponential-sum model from integer-grid samples.

    `samples` is a hankel-mode MomentSequence. The Hankel order grows from 1
    until the rank stabilizes, then the transpose-mode extraction runs and
    atom coordinates map to frequencies through the principal logarithm.
    Returns (model, report); the report carries the resampling residual.
    """
    tol = tol or Tolerances()
    if samples.mode != "hankel":
        raise ValueError("interpolation requires hankel-mode samples")
    d_max = samples.d if d_max is None else min(d_max, samples.d)
    if d_max < 1:
        raise ValueError("need at least order-1 samples")

    prev_rank = _hankel_rank(samples, 0, tol.rank_tol)
    stabilized = None
    for d in range(1, d_max + 1):
        rank = _hankel_rank(samples, d, tol.rank_tol)
        if rank == prev_rank:
            stabilized = d
            break
        prev_rank = rank
    if stabilized is None:
        raise RankNotStabilized(
            f"Hankel rank still growing at order {d_max} (rank {prev_rank})"
        )

    sub = MomentSequence(
        n=samples.n,
        d=stabilized,
        mode="hankel",
        values={
            a: samples.values[a]
            for a in enumerate_indices(samples.n, 2 * stabilized)
        },
    )
    measure, report = extract_measure(sub, d=stabilized, mode=TRANSPOSE, seed=seed, tol=tol)

    terms = []
    for atom, w in zip(measure.atoms, measure.weights):
        freqs = []
        for coord in atom:
            if abs(coord) < 1e-12:
                raise AtomAtZero(f"node {coord} too close to zero for log()")
            freqs.append(complex(np.log(coord)))
        terms.append(ExpTerm(complex(w), tuple(freqs)))
    model = ExpSumModel(samples.n, terms).canonical()

    resampled = sample_grid(model, stabilized)
    resid = max(
        abs(resampled.values[a] - complex(samples.values[a]))
        for a in resampled.values
    )
    report.reconstruction_residual = float(resid)
    report.notes.append(f"rank stabilized at order {stabilized}")
    return model, report


def prony_univariate(samples, tol=1e-8):
    """Classical univariate Prony from samples y_0 .. y_{2d}.

    Kernel vector of the Hankel matrix via the smallest eigenvector of
    H^* H, roots via the companion matrix, weights via the Vandermonde
    system. Ill conditioning of the Vandermonde solve is logged, not fatal.
    """
    if isinstance(samples, MomentSequence):
        if samples.mode != "hankel" or samples.n != 1:
            raise ValueError("prony_univariate needs univariate hankel samples")
        y = np.array(
            [samples.values[(a,)] for a in range(2 * samples.d + 1)], dtype=complex
        )
    else:
        y = np.asarray(samples, dtype=complex)
    if y.size < 3 or y.size % 2 == 0:
        raise ValueError("need an odd number of samples y_0..y_{2d} with d >= 1")
    d = (y.size - 1) // 2

    h = np.empty((d + 1, d + 1), dtype=complex)
    for i in range(d + 1):
        h[i] = y[i : i + d + 1]
    gram = h.conj().T @ h
    vals, vecs = linalg.hermitian_eig((gram + gram.conj().T) / 2.0, tol=np.inf)
    scale = max(vals[-1], 1.0)
    # one-dimensional kernel: a lone vanishing eigenvalue well separated
    # from the next one
    if vals.size > 1 and vals[1] <= tol * scale and vals[1] <= 1e4 * max(vals[0], 1e-300):
        raise KernelNotUnidimensional(
            f"second smallest eigenvalue {vals[1]:.3e} also vanishes"
        )
    p = vecs[:, 0]
    if abs(p[d]) < 1e-10:
        raise KernelNotUnidimensional("kernel polynomial is not monic-normalizable")
    p = p / p[d]

    companion = np.zeros((d, d), dtype=complex)
    if d > 1:
        companion[1:, :-1] = np.eye(d - 1)
    companion[:, -1] = -p[:d]
    nodes = np.linalg.eigvals(companion)

    vander = np.vander(nodes, N=d, increasing=True).T
    cond = np.linalg.cond(vander)
    if cond > 1e10:
        log.warning("prony: Vandermonde condition %.3e; weights may be inaccurate", cond)
    weights = np.linalg.solve(vander, y[:d])

    terms = []
    for node, w in zip(nodes, weights):
        if abs(node) < 1e-12:
            raise AtomAtZero(f"node {node} too close to zero for log()")
        terms.append(ExpTerm(complex(w), (complex(np.log(node)),)))
    return ExpSumModel(1, terms).canonical()


def damped_sinusoid_to_expsum(components):
    """Convert A * exp(sigma t) * cos(w t + phi) components to a model.

    Each component becomes the conjugate pair (A/2) e^{+i phi} at sigma + i w
    and (A/2) e^{-i phi} at sigma - i w.
    """
    terms = []
    for comp in components:
        a = float(comp["A"])
        sigma = float(comp["sigma"])
        w = float(comp["w"])
        phi = float(comp["phi"])
        terms.append(ExpTerm(0.5 * a * np.exp(1j * phi), (complex(sigma, w),)))
        terms.append(ExpTerm(0.5 * a * np.exp(-1j * phi), (complex(sigma, -w),)))
    return ExpSumModel(1, terms).canonical()


def emit_signal(model, ranges, which="real", delimiter=","):
    """Tabulate the model on a real grid as delimiter-separated text.

    `ranges` is one (start, stop, count) triple per variable (n <= 2).
    `which` selects the real part, imaginary part, or modulus.
    """
    if model.n > 2:
        raise ValueError("gridded signal output supports n <= 2")
    if len(ranges) != model.n:
        raise ValueError(f"need {model.n} range specs, got {len(ranges)}")
    if which not in ("real", "imag", "abs"):
        raise ValueError("which must be real, imag or abs")
    axes = [np.linspace(start, stop, int(count)) for start, stop, count in ranges]
    pick = {"real": lambda v: v.real, "imag": lambda v: v.imag, "abs": abs}[which]

    names = [f"z{i + 1}" for i in range(model.n)]
    lines = [delimiter.join(names + [which])]
    if model.n == 1:
        points = ((t,) for t in axes[0])
    else:
        points = ((t1, t2) for t1 in axes[0] for t2 in axes[1])
    for pt in points:
        val = pick(eval_expsum(model, pt))
        row = [format(float(c), ".12g") for c in pt] + [format(float(val), ".12g")]
        lines.append(delimiter.join(row))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- file IO

_FORMAT_NAME = "expsum"
_FORMAT_VERSION = 1


def _fmt(x):
    return format(float(x), ".17g")


def write_model(model, target):
    own = isinstance(target, str)
    fh = open(target, "w") if own else target
    try:
        fh.write(f"{_FORMAT_NAME} {_FORMAT_VERSION}\n")
        fh.write(f"n {model.n}\n")
        for term in model.terms:
            w = complex(term.weight)
            freqs = " ".join(
                f"{_fmt(f.real)} {_fmt(f.imag)}" for f in map(complex, term.frequencies)
            )
            fh.write(f"term {_fmt(w.real)} {_fmt(w.imag)} {freqs}\n")
    finally:
        if own:
            fh.close()


def read_model(source):
    if isinstance(source, str) and "\n" not in source:
        with open(source) as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source.read().splitlines()
    n = None
    terms = []
    seen = False
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == _FORMAT_NAME:
            seen = True
        elif parts[0] == "n":
            try:
                n = int(parts[1])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad n") from None
            if n < 1:
                raise ParseError(f"line {lineno}: need n >= 1")
        elif parts[0] == "term":
            if n is None:
                raise ParseError(f"line {lineno}: term before n header")
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError:
                raise ParseError(f"line {lineno}: bad number") from None
            if not all(np.isfinite(nums)):
                raise ParseError(f"line {lineno}: non-finite value")
            if len(nums) != 2 + 2 * n:
                raise ParseError(f"line {lineno}: expected {2 + 2 * n} numbers")
            w = complex(nums[0], nums[1])
            freqs = tuple(complex(nums[2 + 2 * i], nums[3 + 2 * i]) for i in range(n))
            terms.append(ExpTerm(w, freqs))
        else:
            raise ParseError(f"line {lineno}: unknown directive {parts[0]!r}")
    if not seen or n is None:
        raise ParseError("missing expsum header")
    return ExpSumModel(n, terms)
