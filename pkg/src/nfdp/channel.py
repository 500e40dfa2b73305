"""Finite alphabets, stochastic channel kernels and seeded sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, ValidationError

INGEST_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet of dense integer symbols ``0 .. size-1``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise DomainError(f"alphabet size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))

    def __len__(self):
        return self.size

    def __contains__(self, symbol):
        return isinstance(symbol, (int, np.integer)) and 0 <= symbol < self.size

    def check(self, symbol, what="symbol"):
        if symbol not in self:
            raise DomainError(f"{what} {symbol!r} outside alphabet of size {self.size}")
        return int(symbol)


@dataclass(frozen=True, eq=False)
class StochasticKernel:
    """Row-stochastic matrix ``rows[input, output]``.

    Instances are immutable; ``rows`` is a read-only float array whose rows
    sum to one within 1e-12.
    """

    rows: np.ndarray
    input_alphabet: Alphabet = field(init=False)
    output_alphabet: Alphabet = field(init=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "input_alphabet", Alphabet(rows.shape[0]))
        object.__setattr__(self, "output_alphabet", Alphabet(rows.shape[1]))

    @property
    def shape(self):
        return self.rows.shape

    def __eq__(self, other):
        if not isinstance(other, StochasticKernel):
            return NotImplemented
        return self.rows.shape == other.rows.shape and bool(np.array_equal(self.rows, other.rows))

    def __hash__(self):
        return hash((self.rows.shape, self.rows.tobytes()))

    def __repr__(self):
        return f"StochasticKernel({self.rows.tolist()!r})"

    def is_identity(self):
        n, m = self.rows.shape
        return n == m and bool(np.array_equal(self.rows, np.eye(n)))

    def to_literal(self):
        return self.rows.tolist()


def validate_kernel(rows) -> StochasticKernel:
    """Check that ``rows`` is a non-empty rectangular probability matrix.

    Rows that sum to one within 1e-9 are accepted and renormalized.
    """
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"kernel is not a rectangular numeric matrix: {exc}") from exc
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"kernel must be a non-empty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("kernel contains non-finite entries")
    problems = []
    for i, row in enumerate(arr):
        if np.any(row < 0):
            problems.append(f"row {i} has a negative entry")
        elif abs(row.sum() - 1.0) > INGEST_TOL:
            problems.append(f"row {i} sums to {row.sum():.12g}, not 1")
    if problems:
        raise ValidationError("invalid kernel: " + "; ".join(problems), problems)
    arr = arr / arr.sum(axis=1, keepdims=True)
    return StochasticKernel(arr)


def make_bsc(epsilon: float) -> StochasticKernel:
    """Binary symmetric channel with crossover probability ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"crossover probability must lie in [0, 1], got {epsilon}")
    e = float(epsilon)
    return StochasticKernel(np.array([[1.0 - e, e], [e, 1.0 - e]]))


def make_identity(n: int) -> StochasticKernel:
    """Noiseless ``n``-ary channel."""
    Alphabet(n)
    return StochasticKernel(np.eye(n))


def kernel_row(kernel: StochasticKernel, symbol: int) -> np.ndarray:
    """Copy of the conditional output distribution for ``symbol``."""
    kernel.input_alphabet.check(symbol, "input")
    return kernel.rows[symbol].copy()


def sample(kernel: StochasticKernel, symbol: int, rng: np.random.Generator) -> int:
    """Draw one output symbol given ``symbol``; consumes one uniform from ``rng``."""
    kernel.input_alphabet.check(symbol, "input")
    return int(sample_many(kernel, np.array([symbol]), np.array([rng.random()]))[0])


def sample_many(kernel: StochasticKernel, symbols: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one output per input, driven by given uniforms."""
    cdf = np.cumsum(kernel.rows, axis=1)
    cdf[:, -1] = np.inf
    rows = cdf[symbols]
    return (uniforms[:, None] >= rows).sum(axis=1)


@dataclass(frozen=True)
class ChannelPair:
    """Forward channel ``X -> Y`` and feedback channel ``Y -> Z``."""

    forward: StochasticKernel
    feedback: StochasticKernel

    def __post_init__(self):
        if self.forward.output_alphabet != self.feedback.input_alphabet:
            raise DomainError(
                f"forward output alphabet ({self.forward.output_alphabet.size}) differs from "
                f"feedback input alphabet ({self.feedback.input_alphabet.size})"
            )

    @property
    def n_inputs(self):
        return self.forward.input_alphabet.size

    @property
    def n_outputs(self):
        return self.forward.output_alphabet.size

    @property
    def n_feedback(self):
        return self.feedback.output_alphabet.size

    def feedback_given_input(self) -> np.ndarray:
        """``P(z | x) = sum_y Qf(y|x) Qb(z|y)`` as an ``|X| x |Z|`` matrix."""
        return self.forward.rows @ self.feedback.rows

    def noiseless_feedback(self):
        return self.feedback.is_identity()


def parse_kernel(literal: Any) -> StochasticKernel:
    """Build a kernel from a config literal.

    Accepts a nested row-major list, ``{"bsc": eps}`` or ``{"identity": n}``.
    """
    if isinstance(literal, dict):
        if len(literal) != 1:
            raise ValidationError(f"kernel shorthand must have exactly one key, got {sorted(literal)}")
        (kind, value), = literal.items()
        try:
            if kind == "bsc":
                return make_bsc(float(value))
            if kind == "identity":
                return make_identity(int(value))
        except DomainError as exc:
            raise ValidationError(f"bad {kind} shorthand: {exc}") from exc
        raise ValidationError(f"unknown kernel shorthand {kind!r}")
    return validate_kernel(literal)
