"""Generalized polynomials in the experimentation rate.

Transition probabilities in the perturbed dynamics are finite sums
``sum_k c_k * eps**e_k`` with rational coefficients and nonnegative (possibly
fractional) exponents. Keeping them symbolic lets one chain construction be
instantiated at any rate, and makes the leading exponent (the resistance of
a transition) exact.
"""

from __future__ import annotations

from fractions import Fraction


def _as_exponent(e):
    if isinstance(e, (int, Fraction)):
        return Fraction(e)
    return float(e)


class EpsPoly:
    """Immutable sum of c * eps**e terms, keyed by exponent."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict):
        self.terms = {e: c for e, c in terms.items() if c != 0}

    @staticmethod
    def constant(c) -> "EpsPoly":
        return EpsPoly({Fraction(0): Fraction(c) if not isinstance(c, float) else c})

    @staticmethod
    def power(e, c=1) -> "EpsPoly":
        return EpsPoly({_as_exponent(e): Fraction(c) if not isinstance(c, float) else c})

    @staticmethod
    def one_minus_power(e) -> "EpsPoly":
        return EpsPoly({Fraction(0): Fraction(1), _as_exponent(e): Fraction(-1)})

    @staticmethod
    def baseline_mixture() -> "EpsPoly":
        """1 - eps - eps**2, the stay-at-baseline branch of the proposer rule."""
        return EpsPoly({Fraction(0): Fraction(1), Fraction(1): Fraction(-1), Fraction(2): Fraction(-1)})

    def __add__(self, other: "EpsPoly") -> "EpsPoly":
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return EpsPoly(terms)

    def __mul__(self, other: "EpsPoly") -> "EpsPoly":
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = e1 + e2
                terms[e] = terms.get(e, 0) + c1 * c2
        return EpsPoly(terms)

    def scale(self, c) -> "EpsPoly":
        return EpsPoly({e: coeff * c for e, coeff in self.terms.items()})

    def evaluate(self, eps):
        """Value at a numeric rate; exact when rate, coeffs, exponents are rational."""
        total = Fraction(0)
        for e, c in sorted(self.terms.items(), key=lambda item: float(item[0])):
            if e == 0:
                total = total + c
            else:
                total = total + c * eps**e
        return total

    def leading(self):
        """(exponent, coefficient) of the dominant term as the rate -> 0."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = min(self.terms, key=float)
        return e, self.terms[e]

    def resistance(self):
        e, c = self.leading()
        if not c > 0:
            raise ValueError(f"leading coefficient {c} at exponent {e} is not positive")
        return e

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self) -> str:
        inner = " + ".join(f"{c}*eps^{e}" for e, c in sorted(self.terms.items(), key=lambda i: float(i[0])))
        return f"EpsPoly({inner or '0'})"


EPS_ONE = EpsPoly.constant(1)
