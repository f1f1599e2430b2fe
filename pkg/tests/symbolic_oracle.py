"""Exact symbolic evaluation of matrix elements, independent of the package.

Each axis contributes ``J(t) = int int psi1 psi4(x1) psi2 psi3(x2) exp(-t^2 (x1-x2)^2)``,
computed as Gaussian moments after rotating to ``u, v = (x1 +- x2)/sqrt 2``.
With ``c = 1 + 2 t^2`` every axis gives ``c^(-1/2) P(1/c)``, and the remaining
``t`` integral of ``1/r = (2/sqrt pi) int exp(-t^2 r^2) dt`` is a Beta function.
Only practical for small indices.
"""
from functools import lru_cache

import sympy as sp

x1, x2, u, v, w = sp.symbols("x1 x2 u v w")


def _psi_poly(n, x):
    return sp.hermite(n, x) / sp.sqrt(2**n * sp.factorial(n) * sp.sqrt(sp.pi))


@lru_cache(maxsize=None)
def axis_poly(n1, n2, n3, n4):
    poly = sp.expand(_psi_poly(n1, x1) * _psi_poly(n4, x1) * _psi_poly(n2, x2) * _psi_poly(n3, x2))
    poly = sp.expand(poly.subs({x1: (u + v) / sp.sqrt(2), x2: (u - v) / sp.sqrt(2)}, simultaneous=True))
    out = 0
    for (mu, mv), coef in sp.Poly(poly, u, v).terms():
        if mu % 2 or mv % 2:
            continue
        out += coef * sp.gamma(sp.Rational(mu + 1, 2)) * sp.gamma(sp.Rational(mv + 1, 2)) * w ** (mv // 2)
    return sp.expand(out)


def symbolic_element(key):
    """Element at ``a = 1`` as a sympy number."""
    total = sp.Integer(1)
    for ax in range(3):
        total = sp.expand(total * axis_poly(key[ax], key[3 + ax], key[6 + ax], key[9 + ax]))
    if total == 0:
        return sp.Integer(0)
    result = 0
    for (j,), coef in sp.Poly(total, w).terms():
        # int_0^inf (1 + 2 t^2)^(-j - 3/2) dt
        result += coef * sp.sqrt(sp.pi) / (2 * sp.sqrt(2)) * sp.gamma(j + 1) / sp.gamma(j + sp.Rational(3, 2))
    return sp.nsimplify(sp.simplify(2 / sp.sqrt(sp.pi) * result))
