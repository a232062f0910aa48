"""Sparse polynomials in the (p, 1-p) product basis.

Every transition probability in the branching construction is a sum of
products of factors p and q = 1-p (and, for two-parameter models, r = p2
and s = 1-p2).  Working directly in that basis keeps all coefficients
nonnegative integers: there is never any cancellation, so evaluation at a
point in [0,1] is a sum of nonnegative terms and is numerically stable.

A polynomial is a mapping from exponent tuples to positive integer
coefficients.  Exponent tuples have length 2*arity:

    arity 1:  (a, b)          ->  c * p^a * q^b
    arity 2:  (a, b, c2, d2)  ->  c * p1^a * q1^b * p2^c2 * q2^d2

Coefficients are Python integers, so there is no overflow to guard
against.
"""

from __future__ import annotations

from typing import Dict, Iterable, Tuple

Exponents = Tuple[int, ...]


class TransitionPoly:
    """Immutable sparse polynomial with nonnegative integer coefficients."""

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: Dict[Exponents, int] | None = None):
        if arity not in (1, 2):
            raise ValueError(f"arity must be 1 or 2, got {arity}")
        clean: Dict[Exponents, int] = {}
        if terms:
            width = 2 * arity
            for exps, coeff in terms.items():
                if coeff == 0:
                    continue
                if coeff < 0:
                    raise ValueError(f"negative coefficient {coeff} for {exps}")
                if len(exps) != width or any(e < 0 for e in exps):
                    raise ValueError(f"bad exponent tuple {exps} for arity {arity}")
                clean[tuple(exps)] = clean.get(tuple(exps), 0) + coeff
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("TransitionPoly is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, arity: int = 1) -> "TransitionPoly":
        return cls(arity, {})

    @classmethod
    def one(cls, arity: int = 1) -> "TransitionPoly":
        return cls(arity, {(0,) * (2 * arity): 1})

    @classmethod
    def var_p(cls, arity: int = 1, param: int = 0) -> "TransitionPoly":
        """The polynomial p (param=0) or p2 (param=1)."""
        exps = [0] * (2 * arity)
        exps[2 * param] = 1
        return cls(arity, {tuple(exps): 1})

    @classmethod
    def var_q(cls, arity: int = 1, param: int = 0) -> "TransitionPoly":
        """The polynomial 1-p (param=0) or 1-p2 (param=1)."""
        exps = [0] * (2 * arity)
        exps[2 * param + 1] = 1
        return cls(arity, {tuple(exps): 1})

    # -- algebra -------------------------------------------------------

    def __add__(self, other: "TransitionPoly") -> "TransitionPoly":
        if self.arity != other.arity:
            raise ValueError("arity mismatch in add")
        terms = dict(self.terms)
        for exps, coeff in other.terms.items():
            terms[exps] = terms.get(exps, 0) + coeff
        return TransitionPoly(self.arity, terms)

    def __mul__(self, other):
        if isinstance(other, int):
            if other == 0:
                return TransitionPoly.zero(self.arity)
            return TransitionPoly(self.arity, {e: c * other for e, c in self.terms.items()})
        if self.arity != other.arity:
            raise ValueError("arity mismatch in mul")
        out: Dict[Exponents, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return TransitionPoly(self.arity, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "TransitionPoly":
        if n < 0:
            raise ValueError("negative power")
        result = TransitionPoly.one(self.arity)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def eval(self, params) -> float:
        """Evaluate at parameter values in [0, 1]; always >= 0."""
        if isinstance(params, (int, float)):
            params = (params,)
        if len(params) != self.arity:
            raise ValueError(f"expected {self.arity} parameters, got {len(params)}")
        for p in params:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"parameter {p} outside [0, 1]")
        pq = []
        for p in params:
            pq.append(float(p))
            pq.append(1.0 - float(p))
        total = 0.0
        for exps, coeff in self.terms.items():
            term = float(coeff)
            for base, e in zip(pq, exps):
                if e:
                    term *= base ** e
            total += term
        return total

    def degree(self, param: int = 0) -> int:
        """Largest combined exponent of p and q for the given parameter."""
        if not self.terms:
            return 0
        i = 2 * param
        return max(e[i] + e[i + 1] for e in self.terms)

    def canonical_key(self) -> tuple:
        return (self.arity, tuple(sorted(self.terms.items())))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TransitionPoly)
            and self.arity == other.arity
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return hash(self.canonical_key())

    # -- rendering -----------------------------------------------------

    def render(self) -> str:
        """Textual dump form, e.g. ``2·p^1·q^1 + 1·p^2`` with q = 1-p.

        The second parameter, when present, is rendered with r = p2 and
        s = 1-p2.
        """
        if not self.terms:
            return "0"
        symbols = ("p", "q", "r", "s")
        parts = []
        for exps in sorted(self.terms):
            coeff = self.terms[exps]
            factors = [f"{sym}^{e}" for sym, e in zip(symbols, exps) if e]
            if factors:
                parts.append("·".join([str(coeff)] + factors))
            else:
                parts.append(str(coeff))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TransitionPoly({self.render()})"


def add(a: TransitionPoly, b: TransitionPoly) -> TransitionPoly:
    return a + b


def mul(a: TransitionPoly, b: TransitionPoly) -> TransitionPoly:
    return a * b


class PolyPool:
    """Deduplicating pool of polynomials with stable integer ids.

    Structurally equal polynomials (same canonical term map) always get
    the same id.  Ids are assigned in first-intern order, which the
    matrix builder makes deterministic by interning in state order.
    """

    def __init__(self):
        self._by_key: Dict[tuple, int] = {}
        self._polys: list[TransitionPoly] = []

    def intern(self, poly: TransitionPoly) -> int:
        key = poly.canonical_key()
        pid = self._by_key.get(key)
        if pid is None:
            pid = len(self._polys)
            self._by_key[key] = pid
            self._polys.append(poly)
        return pid

    def __getitem__(self, pid: int) -> TransitionPoly:
        return self._polys[pid]

    def __len__(self) -> int:
        return len(self._polys)

    def __iter__(self) -> Iterable[TransitionPoly]:
        return iter(self._polys)
