"""Robba-ring arithmetic at finite precision and connection-module analysis.

Series are Laurent polynomials with exact rational coefficients, a support
floor (coefficients below it are exactly zero), a precision horizon
(coefficients above it are unknown), an inner-radius exponent, and an
optional p-adic precision cap.  Windows only ever shrink conservatively.

Connections are written nabla(y) = dy - A y dt (holomorphic) or
dy - A y dt/t (logarithmic pole), so residue eigenvalues are the local
exponents and a basis t^c gauges a rank-one residue c to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import sympy

from phodge.padic import vp_fraction


class RobbaError(ArithmeticError):
    pass


class WindowExhausted(RobbaError):
    pass


class NotRegular(RobbaError):
    pass


class ResonanceObstruction(RobbaError):
    pass


class NotUnipotentFormally(RobbaError):
    pass


class FrobeniusMissing(RobbaError):
    pass


class LogDivergent(RobbaError):
    pass


class ChiTrivial(RobbaError):
    pass


class BasisSingular(RobbaError):
    pass


class RobbaSeries:
    """sum a_n x^n with a_n rational: exact below ``lo``... unknown above ``hi``.

    ``lo`` is a hard support bound (coefficients below are zero), ``hi`` the
    precision horizon (the element is only known modulo O(x^(hi+1))),
    ``r_exp`` the inner-radius exponent, ``prec`` an optional p-adic cap.
    """

    __slots__ = ("p", "coeffs", "lo", "hi", "r_exp", "prec")

    def __init__(self, p, coeffs, lo=None, hi=None, r_exp=Fraction(0), prec=None):
        clean = {}
        for n, c in coeffs.items():
            c = Fraction(c)
            if c:
                clean[int(n)] = c
        support_lo = min(clean) if clean else 0
        support_hi = max(clean) if clean else 0
        self.p = p
        self.lo = support_lo if lo is None else int(lo)
        self.hi = support_hi if hi is None else int(hi)
        if clean and min(clean) < self.lo:
            raise WindowExhausted("coefficient below the declared support floor")
        self.coeffs = {n: c for n, c in clean.items() if n <= self.hi}
        self.r_exp = Fraction(r_exp)
        self.prec = prec

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, p, c, hi=None):
        return cls(p, {0: Fraction(c)}, lo=0, hi=hi)

    @classmethod
    def x_power(cls, p, n, hi=None):
        return cls(p, {n: Fraction(1)}, lo=min(n, 0) if hi is None else n, hi=hi)

    @classmethod
    def zero(cls, p, hi=None):
        return cls(p, {}, lo=0, hi=hi)

    def copy_with(self, coeffs, lo, hi, r_exp=None, prec=None):
        return RobbaSeries(
            self.p, coeffs, lo=lo, hi=hi,
            r_exp=self.r_exp if r_exp is None else r_exp,
            prec=self.prec if prec is None else prec,
        )

    # -- structure ----------------------------------------------------------

    def __getitem__(self, n):
        return self.coeffs.get(n, Fraction(0))

    @property
    def is_zero(self):
        return not self.coeffs

    def support(self):
        return sorted(self.coeffs)

    def order(self):
        """x-adic order of the known part; None when no terms are stored."""
        return min(self.coeffs) if self.coeffs else None

    def bounded(self):
        return all(vp_fraction(c, self.p) >= 0 for c in self.coeffs.values()) or (
            min(vp_fraction(c, self.p) for c in self.coeffs.values()) is not None
        )

    def sup_valuation(self):
        """Valuation of a bounded element: min_n v_p(a_n) (sup of |a_n|)."""
        if not self.coeffs:
            return None
        return min(vp_fraction(c, self.p) for c in self.coeffs.values())

    # -- arithmetic -----------------------------------------------------------

    def _join_prec(self, other):
        if self.prec is None:
            return other.prec
        if other.prec is None:
            return self.prec
        return min(self.prec, other.prec)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RobbaSeries.constant(self.p, other, hi=self.hi)
        c = dict(self.coeffs)
        for n, v in other.coeffs.items():
            nc = c.get(n, Fraction(0)) + v
            if nc:
                c[n] = nc
            elif n in c:
                del c[n]
        hi = min(self.hi, other.hi)
        lo = min(self.lo, other.lo)
        return RobbaSeries(self.p, c, lo=lo, hi=hi,
                           r_exp=max(self.r_exp, other.r_exp), prec=self._join_prec(other))

    __radd__ = __add__

    def __neg__(self):
        return self.copy_with({n: -c for n, c in self.coeffs.items()}, self.lo, self.hi)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RobbaSeries.constant(self.p, other, hi=self.hi)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.copy_with(
                {n: c * other for n, c in self.coeffs.items()}, self.lo, self.hi
            )
        hi = min(self.hi + other.lo, other.hi + self.lo)
        lo = self.lo + other.lo
        c = {}
        for n1, c1 in self.coeffs.items():
            for n2, c2 in other.coeffs.items():
                n = n1 + n2
                if n > hi:
                    continue
                nc = c.get(n, Fraction(0)) + c1 * c2
                if nc:
                    c[n] = nc
                elif n in c:
                    del c[n]
        return RobbaSeries(self.p, c, lo=lo, hi=hi,
                           r_exp=max(self.r_exp, other.r_exp), prec=self._join_prec(other))

    __rmul__ = __mul__

    def derive(self):
        """d/dx, toward the rank-one module of differentials with basis dx."""
        c = {n - 1: n * v for n, v in self.coeffs.items() if n != 0}
        return self.copy_with(c, self.lo - 1, self.hi - 1)

    def shift(self, k):
        """Multiplication by x^k."""
        return self.copy_with({n + k: v for n, v in self.coeffs.items()}, self.lo + k, self.hi + k)

    def truncate(self, hi):
        return self.copy_with({n: v for n, v in self.coeffs.items() if n <= hi}, self.lo, min(self.hi, hi))

    def inverse(self, hi=None):
        """Inverse of a series whose lowest stored term is its true order."""
        hi = self.hi if hi is None else hi
        if self.is_zero:
            raise ZeroDivisionError("inverting the zero series")
        k = min(self.coeffs)
        c0 = self.coeffs[k]
        rest = self.shift(-k) * (1 / c0) - 1
        ro = rest.order()
        if ro is not None and ro <= 0:
            raise WindowExhausted("series order is not isolated; cannot invert on the window")
        out = RobbaSeries.constant(self.p, 1, hi=hi + abs(k))
        power = RobbaSeries.constant(self.p, 1, hi=hi + abs(k))
        if not rest.is_zero:
            n = 1
            while n * ro <= hi + abs(k):
                power = power * rest
                out = out + power * ((-1) ** n)
                n += 1
        return (out.shift(-k) * (1 / c0)).truncate(hi)

    def agrees_with(self, other, hi=None, prec=None) -> bool:
        hi = min(self.hi, other.hi) if hi is None else hi
        d = self - other
        for n, c in d.coeffs.items():
            if n > hi:
                continue
            if prec is not None and vp_fraction(c, self.p) >= prec:
                continue
            return False
        return True

    def to_json(self):
        return {
            "window": [self.lo, self.hi],
            "r_exponent": str(self.r_exp),
            "coeffs": {str(n): (int(c) if c.denominator == 1 else f"{c.numerator}/{c.denominator}")
                       for n, c in sorted(self.coeffs.items())},
        }

    @classmethod
    def from_json(cls, p, obj):
        lo, hi = obj.get("window", [None, None])
        coeffs = {int(n): Fraction(c) for n, c in obj["coeffs"].items()}
        return cls(p, coeffs, lo=lo, hi=hi, r_exp=Fraction(obj.get("r_exponent", 0)))

    def __repr__(self):
        if not self.coeffs:
            return f"O(x^{self.hi + 1})"
        bits = []
        for n in sorted(self.coeffs):
            c = self.coeffs[n]
            bits.append(f"{c}" if n == 0 else f"{c}*x^{n}")
        return " + ".join(bits) + f" + O(x^{self.hi + 1})"


@dataclass(frozen=True)
class BoundedElement:
    """An element of the bounded subring; its valuation is sup_n |a_n|."""

    series: RobbaSeries

    def valuation(self):
        return self.series.sup_valuation()

    def is_integral(self) -> bool:
        v = self.valuation()
        return v is None or v >= 0


def robba_arith(f: RobbaSeries, g: RobbaSeries | None, op: str) -> RobbaSeries:
    if op == "add":
        return f + g
    if op == "mul":
        return f * g
    if op == "derive":
        return f.derive()
    raise ValueError(f"unknown operation {op!r}")


def gauss_valuation(f: RobbaSeries, s) -> tuple:
    """min_n (v_p(a_n) + n*s) over the stored window, with a boundary flag."""
    s = Fraction(s)
    best, arg = None, None
    for n, c in f.coeffs.items():
        v = vp_fraction(c, f.p) + n * s
        if best is None or v < best:
            best, arg = v, n
    if best is None:
        return None, True
    boundary = arg == f.hi or arg == f.lo
    return best, boundary


def frobenius_pullback(f: RobbaSeries, z: BoundedElement | RobbaSeries, hi=None, prec=None) -> RobbaSeries:
    """f(x) -> f(x^p + p z) with sigma on coefficients (trivial over Q)."""
    if isinstance(z, BoundedElement):
        zs = z.series
    else:
        zs = z
    if not BoundedElement(zs).is_integral():
        raise RobbaError("the Frobenius twist z must be integral")
    p = f.p
    hi = f.hi * p if hi is None else hi
    prec = 64 if prec is None else prec
    phi_x = RobbaSeries.x_power(p, p, hi=hi) + zs * Fraction(p)
    out = RobbaSeries.zero(p, hi=hi)
    inv_cache = None
    pos_pows = {0: RobbaSeries.constant(p, 1, hi=hi)}

    def pos_pow(k):
        if k not in pos_pows:
            half = pos_pow(k // 2)
            res = half * half
            if k & 1:
                res = res * phi_x
            pos_pows[k] = res
        return pos_pows[k]

    neg_base = None
    for n in sorted(f.coeffs):
        c = f.coeffs[n]
        if n >= 0:
            term = pos_pow(n)
        else:
            if neg_base is None:
                # (x^p + pz)^(-1) = x^(-p) sum (-p z x^(-p))^k, truncated by
                # the p-adic cap and the window floor
                geo = RobbaSeries.constant(p, 1, hi=hi - min(0, -p))
                core = zs * Fraction(-p)
                powk = RobbaSeries.constant(p, 1, hi=hi + p * (prec + 1))
                acc = RobbaSeries.constant(p, 1, hi=hi + p * (prec + 1))
                for k in range(1, prec + 1):
                    powk = powk * core
                    if powk.is_zero:
                        break
                    acc = acc + powk.shift(-p * k)
                neg_base = acc.shift(-p).truncate(hi)
                neg_base = RobbaSeries(p, neg_base.coeffs, lo=neg_base.lo, hi=hi, prec=prec)
            term = RobbaSeries.constant(p, 1, hi=hi)
            for _ in range(-n):
                term = term * neg_base
        out = out + term * c
    out.r_exp = max(out.r_exp, f.r_exp / p if f.r_exp else Fraction(0))
    return out


# ----------------------------------------------------------------------
# matrices of series


def smat(p, rows, hi=None):
    return tuple(
        tuple(e if isinstance(e, RobbaSeries) else RobbaSeries.constant(p, e, hi=hi) for e in row)
        for row in rows
    )


def smat_identity(p, h, hi):
    return tuple(
        tuple(RobbaSeries.constant(p, int(i == j), hi=hi) for j in range(h)) for i in range(h)
    )


def smat_zero(p, h, hi):
    return tuple(tuple(RobbaSeries.zero(p, hi=hi) for _ in range(h)) for _ in range(h))


def smat_mul(a, b):
    h, k, m = len(a), len(b), len(b[0])
    out = []
    for i in range(h):
        row = []
        for j in range(m):
            acc = None
            for t in range(k):
                term = a[i][t] * b[t][j]
                acc = term if acc is None else acc + term
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def smat_add(a, b):
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def smat_scale(a, c):
    return tuple(tuple(x * c for x in row) for row in a)


def smat_derive(a):
    return tuple(tuple(x.derive() for x in row) for row in a)


def smat_eval0(a):
    return tuple(tuple(x[0] for x in row) for row in a)


def smat_coeff(a, n):
    return tuple(tuple(x[n] for x in row) for row in a)


def smat_min_hi(a):
    return min(x.hi for row in a for x in row)


def smat_truncate(a, hi):
    return tuple(tuple(x.truncate(hi) for x in row) for row in a)


def smat_is_zero_mod(a, hi, prec=None):
    z = True
    for row in a:
        for x in row:
            for n, c in x.coeffs.items():
                if n <= hi:
                    if prec is not None and vp_fraction(c, x.p) >= prec:
                        continue
                    z = False
    return z


# ----------------------------------------------------------------------
# connection modules


@dataclass(frozen=True)
class FrobeniusStructure:
    z: BoundedElement
    matrix: tuple  # h x h of RobbaSeries


@dataclass(frozen=True)
class ConnectionModule:
    """Free module with nabla = d - A dt (holomorphic) or d - A dt/t (log)."""

    p: int
    rank: int
    matrix: tuple  # h x h of RobbaSeries
    pole: str = "holomorphic"  # or "logarithmic"
    frobenius: FrobeniusStructure | None = None

    @classmethod
    def build(cls, p, rows, pole="holomorphic", frobenius=None, hi=None):
        return cls(p=p, rank=len(rows), matrix=smat(p, rows, hi=hi), pole=pole, frobenius=frobenius)

    def to_json(self):
        out = {
            "rank": self.rank,
            "pole": self.pole,
            "A": [[e.to_json() for e in row] for row in self.matrix],
        }
        if self.frobenius:
            out["frobenius"] = {
                "z": self.frobenius.z.series.to_json(),
                "matrix": [[e.to_json() for e in row] for row in self.frobenius.matrix],
            }
        return out


@dataclass(frozen=True)
class ResidueReport:
    residue: tuple  # constant matrix (Fractions)
    exponents: tuple  # (value | None, minpoly coeffs, multiplicity)
    semisimple: bool


def residue_exponents(M: ConnectionModule) -> ResidueReport:
    """Residue matrix A(0) and its exact eigenvalue data."""
    if M.pole != "logarithmic":
        raise NotRegular("residue analysis needs a logarithmic pole")
    for row in M.matrix:
        for e in row:
            o = e.order()
            if o is not None and o < 0:
                raise NotRegular("connection matrix has negative-index coefficients")
    a0 = smat_eval0(M.matrix)
    from phodge.filtered_modules import charpoly, _factor_charpoly, _poly_eval_matrix, zero_matrix

    coeffs = charpoly(a0)
    factors = _factor_charpoly(coeffs)
    exps = []
    semisimple = True
    for fac, mult in factors:
        deg = len(fac) - 1
        value = -fac[1] if deg == 1 else None
        exps.append((value, tuple(fac), mult))
        if mult > 1:
            # semisimple iff the squarefree part annihilates a0
            pass
    radical = [Fraction(1)]
    for fac, _ in factors:
        # multiply radical by fac
        new = [Fraction(0)] * (len(radical) + len(fac) - 1)
        for i, a in enumerate(radical):
            for j, b in enumerate(fac):
                new[i + j] += a * b
        radical = new
    semisimple = _poly_eval_matrix(radical, a0) == zero_matrix(len(a0))
    return ResidueReport(residue=a0, exponents=tuple(exps), semisimple=semisimple)


@dataclass(frozen=True)
class FundamentalSolution:
    matrix: tuple  # h x h of RobbaSeries, = I mod t
    order: int
    residual_zero: bool


@dataclass(frozen=True)
class UnipotenceCertificate:
    steps: tuple  # increasing tuple of step bases; each basis a tuple of vector-of-series
    order: int


def solve_horizontal_formal(M: ConnectionModule, order: int):
    """Fundamental solution mod t^order, or a unipotence certificate.

    Holomorphic: the unique Y = I mod t with Y' = A Y, verified by
    back-substitution.  Logarithmic with nilpotent residue: the canonical
    increasing filtration by flat extensions, with trivial graded pieces."""
    p, h = M.p, M.rank
    if M.pole == "holomorphic":
        for row in M.matrix:
            for e in row:
                o = e.order()
                if o is not None and o < 0:
                    raise NotRegular("holomorphic connection has a pole")
        if smat_min_hi(M.matrix) < order - 2:
            raise WindowExhausted(
                f"connection matrix window ends at {smat_min_hi(M.matrix)}; "
                f"cannot solve to order {order}"
            )
        coeffs = [smat_coeff(M.matrix, i) for i in range(order)]
        ys = [tuple(tuple(Fraction(int(i == j)) for j in range(h)) for i in range(h))]
        from phodge.filtered_modules import mat_mul as qmul, mat_add as qadd, mat_scale as qscale, zero_matrix

        for k in range(order - 1):
            acc = zero_matrix(h)
            for i in range(k + 1):
                acc = qadd(acc, qmul(coeffs[i], ys[k - i]))
            ys.append(qscale(acc, Fraction(1, k + 1)))
        sol = tuple(
            tuple(
                RobbaSeries(p, {k: ys[k][i][j] for k in range(order)}, lo=0, hi=order - 1)
                for j in range(h)
            )
            for i in range(h)
        )
        # back-substitute: Y' - A Y must vanish identically mod t^(order-1)
        resid = smat_add(smat_derive(sol), smat_scale(smat_mul(M.matrix, sol), Fraction(-1)))
        ok = smat_is_zero_mod(resid, order - 2)
        return FundamentalSolution(matrix=sol, order=order, residual_zero=ok)

    # logarithmic pole
    rep = residue_exponents(M)
    from phodge.filtered_modules import (
        charpoly, mat_pow, zero_matrix, kernel_basis, mat_vec, rank as qrank, rref,
    )

    a0 = rep.residue
    nilpotent = mat_pow(a0, h) == zero_matrix(h)
    if not nilpotent:
        # check for integer-difference eigenvalue pairs among rational exponents
        rationals = [v for v, _, _ in rep.exponents if v is not None]
        for i, a in enumerate(rationals):
            for b in rationals[i + 1:]:
                if (a - b).denominator == 1 and a != b:
                    raise ResonanceObstruction(
                        f"exponents {a} and {b} differ by a nonzero integer"
                    )
        raise NotUnipotentFormally("residue is not nilpotent")
    # flat sections: t y' = A y; (k - A0) y_k = sum A_i y_(k-i)
    coeffs = [smat_coeff(M.matrix, i) for i in range(order)]
    steps = []
    # work with explicit coordinates, quotienting by the span found so far
    span: list = []
    while qrank(span) < h:
        flats = _flat_sections_mod_span(coeffs, span, h, order, p)
        if not flats:
            raise NotUnipotentFormally("no flat sections on the graded piece")
        new_span = list(span)
        for y0, series_vec in flats:
            new_span.append(y0)
        step_basis = tuple(
            tuple(RobbaSeries(p, dict(sv[i]), lo=0, hi=order - 1) for i in range(h))
            for _, sv in flats
        )
        prev = tuple(tuple(RobbaSeries(p, dict(sv[i]), lo=0, hi=order - 1) for i in range(h))
                     for _, sv in flats)
        steps.append(step_basis if not steps else steps[-1] + step_basis)
        span = [list(v) for v in rref(new_span)[0]]
    return UnipotenceCertificate(steps=tuple(steps), order=order)


def _flat_sections_mod_span(coeffs, span, h, order, p):
    """Solutions of t y' = A0 y + ... modulo the current flat span."""
    from phodge.filtered_modules import (
        identity, kernel_basis, mat_vec, mat_scale, mat_add, subspace_contains, rref,
    )

    a0 = coeffs[0]
    # sections exist for y_0 in ker(A0) not already in the span; modulo the
    # span we only need A0 y_0 inside it (flat on the quotient)
    m = [[a0[i][j] for j in range(h)] for i in range(h)]
    cands = []
    if span:
        # kernel of the composite "A0 then project off span" on complement
        rows_span, _ = rref(span)
        def in_span(v):
            return subspace_contains([tuple(r) for r in rows_span], tuple(v))
        # solve A0 y in span: kernel of quotient map
        aug = []
        for i in range(h):
            aug.append([a0[i][j] for j in range(h)])
        # brute: basis of {y : A0 y in span}
        sol = _preimage_basis(a0, [tuple(r) for r in rows_span], h)
        cands = [v for v in sol if not in_span(v)]
    else:
        cands = kernel_basis(m)
    out = []
    for y0 in cands:
        # y_k solves (k - A0) y_k = sum_{i>=1} A_i y_{k-i} + (span corrections ignored:
        # corrections stay inside the span and do not affect the quotient section)
        ys = [tuple(y0)]
        ok = True
        for k in range(1, order):
            rhs = [Fraction(0)] * h
            for i in range(1, min(k, len(coeffs) - 1) + 1):
                img = mat_vec(coeffs[i], ys[k - i])
                rhs = [a + b for a, b in zip(rhs, img)]
            mk = [[(Fraction(int(i == j)) * k) - a0[i][j] for j in range(h)] for i in range(h)]
            try:
                yk = _solve_square(mk, rhs)
            except RobbaError:
                ok = False
                break
            ys.append(tuple(yk))
        if not ok:
            continue
        sv = [{k: ys[k][i] for k in range(order) if ys[k][i]} for i in range(h)]
        out.append((tuple(y0), sv))
    return out


def _preimage_basis(mat, span_rows, h):
    """Basis of {y : mat y in span(span_rows)}."""
    from phodge.filtered_modules import kernel_basis, rref

    if not span_rows:
        return kernel_basis([[mat[i][j] for j in range(h)] for i in range(h)])
    # y such that mat y is a combination of span rows: solve [mat | -span^T] kernel
    k = len(span_rows)
    rows = []
    for i in range(h):
        rows.append([mat[i][j] for j in range(h)] + [-span_rows[t][i] for t in range(k)])
    out = []
    for v in kernel_basis(rows):
        y = v[:h]
        if any(c != 0 for c in y):
            out.append(tuple(y))
    reduced, _ = rref(out)
    return [tuple(r) for r in reduced]


def _solve_square(m, rhs):
    from phodge.filtered_modules import rref

    h = len(m)
    aug = [list(row) + [rhs[i]] for i, row in enumerate(m)]
    red, piv = rref(aug)
    if len(piv) < h or any(c >= h for c in piv[:0]):
        raise RobbaError("singular system")
    if any(pc == h for pc in piv):
        raise RobbaError("inconsistent system")
    if len(piv) < h:
        raise RobbaError("singular system")
    sol = [Fraction(0)] * h
    for r, pc in enumerate(piv):
        sol[pc] = red[r][h]
    return sol


# ----------------------------------------------------------------------
# Frobenius structure verification


@dataclass(frozen=True)
class FrobeniusCheckReport:
    passed: bool
    verified_order: int
    first_failure: int | None = None


def frobenius_structure_check(M: ConnectionModule, order: int | None = None) -> FrobeniusCheckReport:
    """Verify nabla(phi_D) = (phi_D (x) phi) nabla as series matrices."""
    if M.frobenius is None:
        raise FrobeniusMissing("module carries no Frobenius structure")
    p = M.p
    z = M.frobenius.z.series
    phi_mat = M.frobenius.matrix
    hi = min(smat_min_hi(phi_mat), smat_min_hi(M.matrix))
    order = hi if order is None else min(order, hi)
    # phi(x) = x^p + p z and its derivative
    dphi = RobbaSeries.x_power(p, p - 1, hi=order + p) * Fraction(p) + z.derive() * Fraction(p)
    phiA = tuple(tuple(frobenius_pullback(e, z, hi=order + p) for e in row) for row in M.matrix)
    dmat = smat_derive(phi_mat)
    if M.pole == "holomorphic":
        lhs = smat_add(dmat, smat_scale(smat_mul(M.matrix, phi_mat), Fraction(-1)))
        rhs = smat_scale(smat_mul(phi_mat, smat_scale(phiA, dphi)), Fraction(-1))
    else:
        xinv = RobbaSeries.x_power(p, -1, hi=order + p)
        phix_inv = (RobbaSeries.x_power(p, p, hi=order + p) + z * Fraction(p)).inverse(hi=order + p)
        lhs = smat_add(dmat, smat_scale(smat_mul(smat_scale(M.matrix, xinv), phi_mat), Fraction(-1)))
        rhs = smat_scale(smat_mul(phi_mat, smat_scale(phiA, dphi * phix_inv)), Fraction(-1))
    diff = smat_add(lhs, smat_scale(rhs, Fraction(-1)))
    lo = min(e.lo for row in diff for e in row)
    first_fail = None
    for n in range(lo, order + 1):
        bad = any(e[n] != 0 for row in diff for e in row)
        if bad:
            first_fail = n
            break
    if first_fail is None:
        return FrobeniusCheckReport(True, verified_order=order)
    return FrobeniusCheckReport(False, verified_order=first_fail - 1, first_failure=first_fail)


# ----------------------------------------------------------------------
# Sen operator


@dataclass(frozen=True)
class GammaActionData:
    """A topological generator acting on a rank-h module mod t^r."""

    p: int
    matrix: tuple  # h x h of RobbaSeries (t-polynomials mod t^r)
    chi: Fraction  # chi(gamma), a 1-unit given exactly or as a truncated rational
    chi_prec: int = 64
    t_order: int = 8
    prec: int = 12


@dataclass(frozen=True)
class SenOperator:
    matrix: tuple
    t_order: int
    verified_prec: int


def _log_1unit(u: Fraction, p: int, prec: int) -> Fraction:
    """Truncated p-adic logarithm of a 1-unit, as a rational approximant."""
    x = u - 1
    v = vp_fraction(x, p)
    if v is None:
        raise ChiTrivial("chi(gamma) = 1")
    if v < (2 if p == 2 else 1):
        raise LogDivergent("chi(gamma) is not close enough to 1")
    total = Fraction(0)
    power = Fraction(1)
    n = 1
    while (n * v - _vp_int_bound(n, p)) <= prec + 2 or n <= 2:
        power *= x
        total += Fraction((-1) ** (n + 1), n) * power
        n += 1
        if n > 4 * (prec + 4):
            break
    return total


def _vp_int_bound(n, p):
    out = 0
    while n % p == 0:
        n //= p
        out += 1
    return out


def sen_connection(g: GammaActionData) -> SenOperator:
    """nabla_0 = log(gamma-matrix) / log chi(gamma), verified by the
    round trip exp(log chi * nabla_0) = gamma-matrix mod t^r at precision."""
    p, h = g.p, len(g.matrix)
    r, prec = g.t_order, g.prec
    if g.chi == 1:
        raise ChiTrivial("chi(gamma) = 1 determines no Sen operator")
    log_chi = _log_1unit(g.chi, p, prec + 4)
    v_chi = vp_fraction(g.chi - 1, p)
    ident = smat_identity(p, h, r - 1)
    b = smat_add(smat_truncate(g.matrix, r - 1), smat_scale(ident, Fraction(-1)))
    # convergence check on the constant part: v_p >= 1 (p odd) / 2 (p = 2)
    need = 2 if p == 2 else 1
    b0 = smat_eval0(b)
    from phodge.filtered_modules import mat_pow, zero_matrix

    semis = [vp_fraction(c, p) for row in b0 for c in row if c != 0]
    nilpart_ok = mat_pow(b0, h) == zero_matrix(h)
    if semis and min(semis) < need and not nilpart_ok:
        raise LogDivergent("matrix logarithm does not converge at this precision")
    log_m = smat_zero(p, h, r - 1)
    power = ident
    k = 1
    kmax = (h + 1) * (r + 1) * (prec + 2) * (2 if p == 2 else 1)
    while True:
        power = smat_mul(power, b)
        term = smat_scale(power, Fraction((-1) ** (k + 1), k))
        if smat_is_zero_mod(term, r - 1, prec + v_chi + 2):
            break
        log_m = smat_add(log_m, term)
        k += 1
        if k > kmax:
            raise LogDivergent("matrix logarithm series did not settle")
    nabla0 = smat_scale(log_m, Fraction(1, 1) / log_chi)
    # round trip
    scaled = smat_scale(nabla0, log_chi)
    expm = smat_identity(p, h, r - 1)
    power = smat_identity(p, h, r - 1)
    fact = Fraction(1)
    k = 1
    while True:
        power = smat_mul(power, scaled)
        fact *= k
        term = smat_scale(power, Fraction(1, 1) / fact)
        if smat_is_zero_mod(term, r - 1, prec + 2):
            break
        expm = smat_add(expm, term)
        k += 1
        if k > kmax:
            raise LogDivergent("exponential round trip did not settle")
    diff = smat_add(expm, smat_scale(smat_truncate(g.matrix, r - 1), Fraction(-1)))
    if not smat_is_zero_mod(diff, r - 1, prec):
        raise LogDivergent("round trip fails to reproduce the action at precision")
    return SenOperator(matrix=nabla0, t_order=r, verified_prec=prec)


# ----------------------------------------------------------------------
# the D^0 lattice predicate


@dataclass(frozen=True)
class LatticeTestReport:
    passed: bool
    order: int
    failing_degree: int | None = None


def d0_lattice_test(M: ConnectionModule, basis, order: int) -> LatticeTestReport:
    """Does the gauge by ``basis`` remove the dt/t pole to the given order?

    Gauged matrix (sections y = B y'): B^-1 (A/t) B - B^-1 B' for the
    logarithmic form; pass iff no negative t-degrees survive."""
    p, h = M.p, M.rank
    hi = order + max(0, -min(e.lo for row in basis for e in row)) + 2
    bmat = smat_truncate(basis, hi)
    binv = _smat_inverse(bmat, hi)
    if M.pole == "logarithmic":
        amat = tuple(tuple(e.shift(-1) for e in row) for row in M.matrix)
    else:
        amat = M.matrix
    gauged = smat_add(
        smat_mul(binv, smat_mul(amat, bmat)),
        smat_scale(smat_mul(binv, smat_derive(bmat)), Fraction(-1)),
    )
    failing = None
    lo = min(e.lo for row in gauged for e in row)
    for n in range(lo, 0):
        if any(e[n] != 0 for row in gauged for e in row):
            failing = n
            break
    return LatticeTestReport(passed=failing is None, order=order, failing_degree=failing)


def _smat_inverse(b, hi):
    """Inverse of a series matrix whose determinant has isolated lowest term."""
    h = len(b)
    p = b[0][0].p
    # cofactor expansion is fine at these ranks
    d = _smat_det(b)
    if d.is_zero:
        raise BasisSingular("basis matrix determinant vanishes on the window")
    try:
        dinv = d.inverse(hi=hi)
    except (WindowExhausted, ZeroDivisionError) as exc:
        raise BasisSingular(str(exc))
    cof = []
    for i in range(h):
        row = []
        for j in range(h):
            minor = [
                [b[r][c] for c in range(h) if c != j] for r in range(h) if r != i
            ]
            mdet = _smat_det(tuple(tuple(r) for r in minor)) if h > 1 else RobbaSeries.constant(p, 1, hi=hi)
            row.append(mdet * ((-1) ** (i + j)))
        cof.append(row)
    # adjugate transpose
    return tuple(
        tuple(cof[j][i] * dinv for j in range(h)) for i in range(h)
    )


def _smat_det(b):
    h = len(b)
    if h == 1:
        return b[0][0]
    p = b[0][0].p
    if h == 2:
        return b[0][0] * b[1][1] - b[0][1] * b[1][0]
    acc = None
    for j in range(h):
        minor = tuple(tuple(b[r][c] for c in range(h) if c != j) for r in range(1, h))
        term = b[0][j] * _smat_det(minor) * ((-1) ** j)
        acc = term if acc is None else acc + term
    return acc
