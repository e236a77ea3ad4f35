"""Monomial candidate libraries.

Terms are stored in graded order: by total degree, then by descending
exponent of the earlier state variables, e.g. for ``(x, v)`` up to degree 3::

    1, x, v, x^2, x v, v^2, x^3, x^2 v, x v^2, v^3
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_STATE_NAMES = ("x", "v")


def _monomial_name(exponents: Sequence[int], state_names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(state_names, exponents):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return " ".join(parts) if parts else "1"


@dataclass(frozen=True)
class TermDescriptor:
    exponents: tuple[int, ...]
    name: str

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        col = np.ones(states.shape[0])
        for k, e in enumerate(self.exponents):
            if e:
                col = col * states[:, k] ** e
        return col

    def to_dict(self) -> dict:
        return {"name": self.name, "exponents": list(self.exponents)}

    @classmethod
    def from_dict(cls, data: dict) -> "TermDescriptor":
        return cls(tuple(int(e) for e in data["exponents"]), data["name"])


def make_term(exponents: Sequence[int], state_names: Sequence[str] = DEFAULT_STATE_NAMES) -> TermDescriptor:
    exps = tuple(int(e) for e in exponents)
    if any(e < 0 for e in exps):
        raise ValueError(f"exponents must be non-negative, got {exps}")
    return TermDescriptor(exps, _monomial_name(exps, state_names))


def polynomial_terms(
    n_states: int,
    degree: int,
    state_names: Sequence[str] | None = None,
) -> list[TermDescriptor]:
    """All monomials in ``n_states`` variables with total degree <= ``degree``."""
    if n_states < 1:
        raise ValueError(f"n_states must be >= 1, got {n_states}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    if state_names is None:
        state_names = DEFAULT_STATE_NAMES if n_states == 2 else tuple(f"x{k + 1}" for k in range(n_states))
    if len(state_names) != n_states:
        raise ValueError("need one state name per state variable")

    terms = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(n_states), d):
            exps = [0] * n_states
            for k in combo:
                exps[k] += 1
            terms.append(make_term(exps, state_names))
    assert len(terms) == comb(n_states + degree, degree)
    return terms


def mixed_first_order(terms: Sequence[TermDescriptor]) -> list[int]:
    """Display permutation listing mixed monomials before pure powers within
    each degree (``1, x, v, x v, x^2, v^2, ...``)."""

    def key(idx):
        exps = terms[idx].exponents
        pure = sum(1 for e in exps if e) <= 1
        return (terms[idx].degree, pure, idx)

    return sorted(range(len(terms)), key=key)


@dataclass(frozen=True, eq=False)
class LibraryMatrix:
    values: np.ndarray  # (n_samples, n_terms)
    terms: tuple[TermDescriptor, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.values.ndim != 2 or self.values.shape[1] != len(self.terms):
            raise ValidationError(
                f"library has {self.values.shape} values for {len(self.terms)} terms"
            )

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    def select(self, indices: Sequence[int]) -> "LibraryMatrix":
        indices = list(indices)
        return LibraryMatrix(self.values[:, indices], tuple(self.terms[i] for i in indices))

    def index_of(self, name: str) -> int:
        for i, t in enumerate(self.terms):
            if t.name == name:
                return i
        raise KeyError(name)


def evaluate_library(states, terms: Sequence[TermDescriptor]) -> LibraryMatrix:
    """Evaluate each term on every row of ``states``."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[None, :]
    if not np.all(np.isfinite(states)):
        raise ValidationError("states contain non-finite entries")
    n = states.shape[1]
    for t in terms:
        if len(t.exponents) != n:
            raise ValidationError(f"term {t.name!r} expects {len(t.exponents)} states, got {n}")
    values = np.column_stack([t.evaluate(states) for t in terms]) if terms else np.empty((states.shape[0], 0))
    return LibraryMatrix(values, tuple(terms))


def terms_to_json(terms: Sequence[TermDescriptor]) -> list[dict]:
    return [t.to_dict() for t in terms]


def terms_from_json(data: Sequence[dict]) -> list[TermDescriptor]:
    return [TermDescriptor.from_dict(d) for d in data]
