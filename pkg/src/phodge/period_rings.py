"""Desk-scale period rings: the tilt, theta, truncated B_dR+ and B_st.

The tilt is modeled as the depth-m truncated perfection of F_p[[U]] where U
is the distinguished uniformizer of the chosen variant:

* kummer:     U realizes through the compatible p-power roots of p, so the
              C-side is Q_p(rho) with rho^(p^m) = p and monomials realize
              exactly at any precision;
* cyclotomic: U = eps - 1 for the compatible system eps of p-power roots of
              unity; the C-side is Q_p(zeta_{p^m}) in the Eisenstein basis
              lambda = zeta - 1.  Monomials in eps realize exactly; anything
              else is realized through the root tower with a certified,
              recorded precision.

All arithmetic is exact at the tracked precision; realization precision is
computed from explicit valuation estimates and enforced by capping the
p-adic precision of every coordinate.
"""

from __future__ import annotations

import math
from fractions import Fraction

from phodge.padic import PadicNumber, vp_int
from phodge.witt import CoefficientRing, LiftContext, WittVector


class PeriodError(ArithmeticError):
    pass


class DepthExceeded(PeriodError):
    pass


class NonDivisible(PeriodError):
    pass


class NotAUnit(PeriodError):
    pass


class NonConvergent(PeriodError):
    pass


class PhiUnavailable(PeriodError):
    pass


# ----------------------------------------------------------------------
# tilt elements


class TiltElement:
    """Finite F_p-combination of monomials U^e, e in Z[1/p] bounded below.

    ``terms`` maps Fraction exponents (denominator dividing p^depth) to
    nonzero residues mod p.  ``cutoff`` is None for exactly-known elements,
    or a Fraction c meaning the element is only known modulo O(U^c).
    """

    __slots__ = ("ring", "terms", "cutoff")

    def __init__(self, ring: "TiltRing", terms: dict, cutoff=None):
        p = ring.p
        window = ring.window
        if window is not None and (cutoff is None or cutoff > window):
            if any(Fraction(e) >= window for e, c in terms.items() if c % p):
                cutoff = window  # the ring is degree-truncated; record the loss
        clean = {}
        for e, c in terms.items():
            e = Fraction(e)
            c = c % p
            if c == 0:
                continue
            if cutoff is not None and e >= cutoff:
                continue
            if p**ring.depth % e.denominator:
                raise DepthExceeded(f"exponent {e} outside perfection depth {ring.depth}")
            clean[e] = c
        self.ring = ring
        self.terms = clean
        self.cutoff = cutoff

    # -- structure -------------------------------------------------------

    @property
    def is_zero(self):
        return not self.terms

    def valuation(self):
        """Least exponent; for an empty element, the window cutoff (or None)."""
        if self.terms:
            return min(self.terms)
        return self.cutoff

    def denom_depth(self) -> int:
        """Largest j such that some exponent has denominator p^j."""
        d = 1
        for e in self.terms:
            d = max(d, e.denominator)
        return 0 if d == 1 else round(math.log(d, self.ring.p))

    def monomials(self):
        return sorted(self.terms.items())

    # -- ring operations ---------------------------------------------------

    def _merge_cutoff(self, other):
        if self.cutoff is None:
            return other.cutoff
        if other.cutoff is None:
            return self.cutoff
        return min(self.cutoff, other.cutoff)

    def __add__(self, other):
        t = dict(self.terms)
        for e, c in other.terms.items():
            nc = (t.get(e, 0) + c) % self.ring.p
            if nc:
                t[e] = nc
            elif e in t:
                del t[e]
        return TiltElement(self.ring, t, self._merge_cutoff(other))

    def __neg__(self):
        return TiltElement(self.ring, {e: -c for e, c in self.terms.items()}, self.cutoff)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return TiltElement(self.ring, {e: c * other for e, c in self.terms.items()}, self.cutoff)
        cut = None
        if self.cutoff is not None or other.cutoff is not None:
            v1 = self.valuation() if self.terms else self.cutoff
            v2 = other.valuation() if other.terms else other.cutoff
            cands = []
            if self.cutoff is not None and v2 is not None:
                cands.append(self.cutoff + v2)
            if other.cutoff is not None and v1 is not None:
                cands.append(other.cutoff + v1)
            cut = min(cands) if cands else None
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = e1 + e2
                if cut is not None and e >= cut:
                    continue
                nc = (t.get(e, 0) + c1 * c2) % self.ring.p
                if nc:
                    t[e] = nc
                elif e in t:
                    del t[e]
        return TiltElement(self.ring, t, cut)  # ring window applied by the constructor

    __rmul__ = __mul__

    def p_power(self):
        """x -> x^p; exact in characteristic p."""
        return TiltElement(
            self.ring,
            {e * self.ring.p: c for e, c in self.terms.items()},
            None if self.cutoff is None else self.cutoff * self.ring.p,
        )

    def p_root(self):
        """The unique p-th root (coefficientwise for F_p, exponents / p)."""
        return TiltElement(
            self.ring,
            {e / self.ring.p: c for e, c in self.terms.items()},
            None if self.cutoff is None else self.cutoff / self.ring.p,
        )

    def shift(self, e0) -> "TiltElement":
        """Multiplication by the monomial U^e0."""
        e0 = Fraction(e0)
        return TiltElement(
            self.ring,
            {e + e0: c for e, c in self.terms.items()},
            None if self.cutoff is None else self.cutoff + e0,
        )

    def __pow__(self, n: int):
        out = self.ring.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, TiltElement) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0" if self.cutoff is None else f"O(U^{self.cutoff})"
        bits = " + ".join(f"{c}*U^{e}" if e else f"{c}" for e, c in self.monomials())
        tail = "" if self.cutoff is None else f" + O(U^{self.cutoff})"
        return bits + tail


class TiltRing(CoefficientRing):
    """The tilt model as a Witt coefficient ring (characteristic p, perfect).

    ``window`` is the ring-level degree cutoff: monomials at or above it are
    dropped by every operation, and any element that loses a term this way is
    marked truncated so realization precision stays honest.
    """

    has_char_p = True

    def __init__(self, p: int, depth: int, window=None):
        self.p = p
        self.depth = depth
        self.window = None if window is None else Fraction(window)

    def zero(self):
        return TiltElement(self, {})

    def one(self):
        return TiltElement(self, {Fraction(0): 1})

    def from_int(self, n):
        return TiltElement(self, {Fraction(0): n % self.p})

    def monomial(self, exponent, coeff=1):
        return TiltElement(self, {Fraction(exponent): coeff})

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def eq(self, a, b):
        return a == b

    def char_p_power(self, a):
        return a.p_power()

    def lift_context(self, length):
        return _TiltLift(self, length)

    def inverse_of_unit(self, x: TiltElement, cutoff) -> TiltElement:
        """Inverse of a unit-with-constant-term via a geometric series mod U^cutoff."""
        v = x.valuation()
        if v is None or x.is_zero:
            raise ZeroDivisionError("inverse of zero tilt element")
        xs = x.shift(-v)
        c0 = xs.terms.get(Fraction(0))
        if not c0:
            raise NotAUnit("element is not monomial-times-unit")
        cutoff = Fraction(cutoff)
        c0inv = pow(c0, -1, self.p)
        rest = xs * c0inv - self.one()  # strictly positive valuation
        acc = self.one()
        power = self.one()
        rv = rest.valuation()
        if not rest.is_zero:
            n = 1
            while n * rv < cutoff:
                power = power * rest
                acc = acc + (power * ((-1) ** n))
                n += 1
        acc = TiltElement(self, acc.terms, cutoff)
        return (acc * c0inv).shift(-v)

    def __repr__(self):
        return f"TiltRing(p={self.p}, depth={self.depth})"


class _TiltLift(LiftContext):
    """Windowed Laurent polynomials over Z/p^(1+L) lifting the tilt.

    Coefficients retained below the cutoff are exact representatives of the
    true integral computation, so ghost inversion applies.
    """

    def __init__(self, ring: TiltRing, length: int):
        self.p = ring.p
        self.ring = ring
        self.mod = ring.p ** (1 + length)

    def lift(self, a: TiltElement):
        return (dict(a.terms), a.cutoff)

    def reduce(self, x):
        terms, cutoff = x
        return TiltElement(self.ring, {e: c % self.p for e, c in terms.items()}, cutoff)

    def from_int(self, n):
        n %= self.mod
        return ({Fraction(0): n} if n else {}, None)

    def _window(self, terms, cut):
        w = self.ring.window
        if w is not None and (cut is None or cut > w):
            if any(e >= w for e in terms):
                cut = w
        if cut is not None:
            terms = {e: c for e, c in terms.items() if e < cut}
        return (terms, cut)

    def add(self, x, y):
        tx, cx = x
        ty, cy = y
        cut = cx if cy is None else cy if cx is None else min(cx, cy)
        t = dict(tx)
        for e, c in ty.items():
            nc = (t.get(e, 0) + c) % self.mod
            if nc:
                t[e] = nc
            elif e in t:
                del t[e]
        return self._window(t, cut)

    def neg(self, x):
        tx, cx = x
        return ({e: (-c) % self.mod for e, c in tx.items()}, cx)

    def mul(self, x, y):
        tx, cx = x
        ty, cy = y
        vx = min(tx) if tx else cx
        vy = min(ty) if ty else cy
        cut = None
        cands = []
        if cx is not None and vy is not None:
            cands.append(cx + vy)
        if cy is not None and vx is not None:
            cands.append(cy + vx)
        if cands:
            cut = min(cands)
        w = self.ring.window
        hard = cut if w is None else (w if cut is None else min(cut, w))
        t = {}
        window_bit = False
        for e1, c1 in tx.items():
            for e2, c2 in ty.items():
                e = e1 + e2
                if hard is not None and e >= hard:
                    if cut is None or e < cut:
                        window_bit = True  # lost to the ring window, not input windows
                    continue
                nc = (t.get(e, 0) + c1 * c2) % self.mod
                if nc:
                    t[e] = nc
                elif e in t:
                    del t[e]
        if window_bit and (cut is None or w < cut):
            cut = w
        return (t, cut)

    def div_ppow(self, x, k):
        tx, cx = x
        d = self.p**k
        out = {}
        for e, c in tx.items():
            if c % d:
                raise NonDivisible("xi-division certificate failed at the Witt level")
            q = c // d
            if q:
                out[e] = q
        return (out, cx)


# ----------------------------------------------------------------------
# C-side fields


class CSideField:
    """Q_p(rho) with rho an Eisenstein generator: rho^d = p (kummer) or
    rho = zeta_{p^m} - 1 (cyclotomic)."""

    def __init__(self, p: int, variant: str, depth: int, prec: int):
        self.p = p
        self.variant = variant
        self.depth = depth
        self.prec = prec
        if variant == "kummer":
            self.degree = p**depth
        elif variant == "cyclotomic":
            self.degree = p ** (depth - 1) * (p - 1)
        else:
            raise ValueError(f"unknown model variant {variant!r}")
        self.ram_index = self.degree
        if variant == "cyclotomic":
            self._reduction_rows = self._cyclotomic_reduction_rows()
        self._zeta_pow_cache = {}

    def _cyclotomic_reduction_rows(self):
        # modulus Phi_{p^m}(1 + X), monic of degree d; rows give X^{d+j} mod it
        p, m = self.p, self.depth
        d = self.degree
        mod = [0] * (d + 1)
        for j in range(p):
            # (1+X)^(j * p^(m-1))
            e = j * p ** (m - 1)
            for k in range(e + 1):
                mod[k] += math.comb(e, k)
        assert mod[d] == 1
        rows = []
        # X^d = -sum_{k<d} mod[k] X^k
        base = [-mod[k] for k in range(d)]
        rows.append(base)
        for _ in range(d - 2):
            prev = rows[-1]
            nxt = [0] * d
            carry = prev[d - 1]
            for k in range(d - 1, 0, -1):
                nxt[k] = prev[k - 1] + carry * base[k]
            nxt[0] = carry * base[0]
            rows.append(nxt)
        return rows

    # -- elements ---------------------------------------------------------

    def zero(self, prec=None):
        prec = self.prec if prec is None else prec
        z = PadicNumber.zero(self.p, prec)
        return CSideElement(self, (z,) * self.degree)

    def one(self, prec=None):
        return self.from_fraction(1, prec)

    def from_fraction(self, q, prec=None):
        prec = self.prec if prec is None else prec
        coords = [PadicNumber.zero(self.p, prec)] * self.degree
        coords[0] = PadicNumber.from_fraction(Fraction(q), self.p, prec)
        return CSideElement(self, tuple(coords))

    def from_padic(self, x: PadicNumber):
        coords = [PadicNumber.zero(self.p, x.abs_precision)] * self.degree
        coords[0] = x
        return CSideElement(self, tuple(coords))

    def gen_power(self, exponent: int, prec=None) -> "CSideElement":
        """rho^exponent, exact, for any integer exponent."""
        prec = self.prec if prec is None else prec
        d = self.degree
        if self.variant == "kummer":
            q, r = divmod(exponent, d)
            coords = [PadicNumber.zero(self.p, prec + max(0, -q))] * d
            coords[r] = PadicNumber.from_fraction(Fraction(self.p) ** q, self.p, prec + q if q > 0 else prec)
            return CSideElement(self, tuple(coords))
        key = (exponent, prec)
        if key not in self._zeta_pow_cache:
            if exponent >= 0:
                out = self.one(prec)
                lam = self.monomial_basis(1, prec)
                base = lam
                n = exponent
                while n:
                    if n & 1:
                        out = out * base
                    base = base * base
                    n >>= 1
            else:
                out = self.gen_power(-exponent, prec).inverse()
            self._zeta_pow_cache[key] = out
        return self._zeta_pow_cache[key]

    def monomial_basis(self, k: int, prec=None):
        prec = self.prec if prec is None else prec
        coords = [PadicNumber.zero(self.p, prec)] * self.degree
        one = PadicNumber.from_int(1, self.p, prec)
        coords[k] = one
        return CSideElement(self, tuple(coords))

    def zeta_power(self, exponent: int, prec=None) -> "CSideElement":
        """zeta^exponent = (1 + lambda)^exponent for the cyclotomic variant."""
        prec = self.prec if prec is None else prec
        key = ("zeta", exponent % (self.p**self.depth), prec)
        if key not in self._zeta_pow_cache:
            e = exponent % (self.p**self.depth)
            out = self.one(prec)
            base = self.one(prec) + self.monomial_basis(1, prec)
            n = e
            while n:
                if n & 1:
                    out = out * base
                base = base * base
                n >>= 1
            self._zeta_pow_cache[key] = out
        return self._zeta_pow_cache[key]

    def __repr__(self):
        return f"CSideField(p={self.p}, {self.variant}, depth={self.depth})"


class CSideElement:
    """Element of the C-side field in the Eisenstein power basis."""

    __slots__ = ("field", "coords")

    def __init__(self, field: CSideField, coords: tuple):
        self.field = field
        self.coords = coords

    @property
    def is_zero(self):
        return all(c.is_zero for c in self.coords)

    def abs_precision(self) -> int:
        return min(c.abs_precision for c in self.coords)

    def valuation(self):
        """min_k v_p(a_k) + k/e, None when indistinguishable from 0."""
        best = None
        e = self.field.ram_index
        for k, c in enumerate(self.coords):
            if c.is_zero:
                continue
            v = Fraction(c.valuation()) + Fraction(k, e)
            if best is None or v < best:
                best = v
        return best

    def cap_precision(self, prec) -> "CSideElement":
        prec = int(math.floor(prec))
        return CSideElement(self.field, tuple(c.at_precision(prec) for c in self.coords))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.from_fraction(other)
        return CSideElement(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __neg__(self):
        return CSideElement(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.from_fraction(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "CSideElement":
        if isinstance(s, (int, Fraction)):
            if s == 0:
                return self.field.zero(self.abs_precision())
            s = PadicNumber.from_fraction(Fraction(s), self.field.p, self.abs_precision() + 8)
        return CSideElement(self.field, tuple(s * c for c in self.coords))

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PadicNumber)):
            return self.scale(other)
        d = self.field.degree
        p = self.field.p
        raw = [None] * (2 * d - 1)
        for i, a in enumerate(self.coords):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coords):
                if b.is_zero:
                    continue
                w = a * b
                raw[i + j] = w if raw[i + j] is None else raw[i + j] + w
        prec = min(self.abs_precision(), other.abs_precision())
        out = [PadicNumber.zero(p, max(prec, 1)) for _ in range(d)]
        if self.field.variant == "kummer":
            for k, w in enumerate(raw):
                if w is None:
                    continue
                q, r = divmod(k, d)
                out[r] = out[r] + (w * p**q if q else w)
        else:
            rows = self.field._reduction_rows
            extra = [None] * d
            for k in range(2 * d - 2, d - 1, -1):
                w = raw[k]
                if w is None:
                    continue
                row = rows[k - d]
                for t, coef in enumerate(row):
                    if coef:
                        term = w * coef
                        extra[t] = term if extra[t] is None else extra[t] + term
            for r in range(d):
                if raw[r] is not None:
                    out[r] = out[r] + raw[r]
                if extra[r] is not None:
                    out[r] = out[r] + extra[r]
            return CSideElement(self.field, tuple(out))
        return CSideElement(self.field, tuple(out))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return (self ** (-n)).inverse()
        out = self.field.one(self.abs_precision())
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def inverse(self) -> "CSideElement":
        """Solve (mult-by-self) y = 1 by exact Gaussian elimination."""
        d = self.field.degree
        cols = []
        for j in range(d):
            basis = self.field.monomial_basis(j, self.abs_precision())
            cols.append((self * basis).coords)
        # matrix M[i][j] = coord i of self * rho^j
        mat = [[cols[j][i] for j in range(d)] for i in range(d)]
        rhs = [PadicNumber.from_int(1 if i == 0 else 0, self.field.p, self.abs_precision()) for i in range(d)]
        sol = _solve_padic_linear(mat, rhs, self.field.p)
        return CSideElement(self.field, tuple(sol))

    def agrees_with(self, other) -> bool:
        return all(a.agrees_with(b) for a, b in zip(self.coords, other.coords))

    def residue_disc_value(self):
        return self.coords[0]

    def to_json(self):
        return [c.to_json() for c in self.coords]

    def __repr__(self):
        nz = [(k, c) for k, c in enumerate(self.coords) if not c.is_zero]
        if not nz:
            return f"O(p^{self.abs_precision()})"
        return " + ".join(f"({c!r})*rho^{k}" if k else f"({c!r})" for k, c in nz)


def _solve_padic_linear(mat, rhs, p):
    """Gaussian elimination over Q_p with minimal-valuation pivoting."""
    n = len(mat)
    m = [row[:] + [r] for row, r in zip(mat, rhs)]
    perm = list(range(n))
    for col in range(n):
        piv, pv = None, None
        for r in range(col, n):
            entry = m[r][col]
            if entry.is_zero:
                continue
            v = entry.valuation()
            if pv is None or v < pv:
                piv, pv = r, v
        if piv is None:
            raise PeriodError("singular matrix in C-side inversion")
        m[col], m[piv] = m[piv], m[col]
        pivot = m[col][col]
        m[col] = [x / pivot for x in m[col]]
        for r in range(n):
            if r != col and not m[r][col].is_zero:
                c = m[r][col]
                m[r] = [x - c * y for x, y in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


# ----------------------------------------------------------------------
# B_dR truncations


class BdRElement:
    """Sum c_i xi^i mod xi^N with C-side coefficients; Fil^j = (xi^j)."""

    __slots__ = ("model", "coeffs", "truncation_order")

    def __init__(self, model: "PeriodModel", coeffs, truncation_order=None):
        self.model = model
        self.coeffs = tuple(coeffs)
        self.truncation_order = truncation_order

    @property
    def order(self):
        return len(self.coeffs)

    def fil_order(self) -> int:
        """Largest j with the element in Fil^j, at tracked precision."""
        for i, c in enumerate(self.coeffs):
            if not c.is_zero:
                return i
        return self.order

    def theta(self) -> CSideElement:
        return self.coeffs[0]

    def __add__(self, other):
        self._match(other)
        return BdRElement(self.model, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return BdRElement(self.model, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PadicNumber, CSideElement)):
            return self.scale(other)
        self._match(other)
        N = self.order
        field = self.model.cside
        out = [None] * N
        for i, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coeffs):
                if i + j >= N:
                    break
                if b.is_zero:
                    continue
                w = a * b
                out[i + j] = w if out[i + j] is None else out[i + j] + w
        prec = min(x.abs_precision() for x in self.coeffs + other.coeffs)
        return BdRElement(
            self.model, tuple(field.zero(prec) if x is None else x for x in out)
        )

    __rmul__ = __mul__

    def scale(self, s):
        if isinstance(s, (int, Fraction)):
            s = Fraction(s)
            return BdRElement(self.model, tuple(c.scale(s) for c in self.coeffs))
        return BdRElement(self.model, tuple(c * s for c in self.coeffs))

    def __pow__(self, n: int):
        out = self.model.bdr_one(self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def _match(self, other):
        if self.order != other.order:
            raise PeriodError("xi-truncation orders differ")

    def agrees_with(self, other) -> bool:
        return all(a.agrees_with(b) for a, b in zip(self.coeffs, other.coeffs))

    def to_json(self):
        return {
            "model": self.model.variant,
            "N": self.order,
            "coeffs": [c.to_json() for c in self.coeffs],
        }

    def __repr__(self):
        bits = []
        for i, c in enumerate(self.coeffs):
            if not c.is_zero:
                bits.append(f"({c!r})*xi^{i}" if i else f"({c!r})")
        return " + ".join(bits) if bits else f"O(Fil^{self.order})"


class BdRFraction:
    """An element of B_dR = B_dR+[1/t]: a truncated numerator over a power of t."""

    __slots__ = ("numerator", "t_power")

    def __init__(self, numerator: BdRElement, t_power: int = 0):
        self.numerator = numerator
        self.t_power = t_power

    def __mul__(self, other):
        return BdRFraction(self.numerator * other.numerator, self.t_power + other.t_power)

    def __repr__(self):
        return f"({self.numerator!r}) / t^{self.t_power}"


# ----------------------------------------------------------------------
# B_st truncations


class BstElement:
    """Polynomial in u over the B_dR truncation, with phi(u) = p*u, N(u) = -1.

    Coefficients may carry a Witt-level presentation -- a formal sum of
    terms (rational scalar, Witt vector over the tilt or None, power of t)
    -- which is what the Frobenius acts on.  Coefficients without a
    presentation support N but not phi.
    """

    __slots__ = ("model", "pres", "u_order")

    def __init__(self, model: "PeriodModel", pres, u_order: int):
        # pres: tuple (per u-degree) of tuples of (Fraction, WittVector|None, t_exp) or None
        self.model = model
        self.pres = tuple(pres)
        self.u_order = u_order

    @classmethod
    def from_terms(cls, model, terms_by_degree: dict, u_order: int):
        pres = []
        for k in range(u_order):
            terms = terms_by_degree.get(k, [])
            pres.append(tuple((Fraction(s), w, int(j)) for s, w, j in terms))
        return cls(model, pres, u_order)

    def phi(self) -> "BstElement":
        out = []
        for k, terms in enumerate(self.pres):
            if terms is None:
                raise PhiUnavailable("coefficient has no Witt-level presentation")
            scaled = []
            for s, w, j in terms:
                fw = w.frobenius() if w is not None else None
                scaled.append((s * Fraction(self.model.p) ** (j + k), fw, j))
            out.append(tuple(scaled))
        return BstElement(self.model, out, self.u_order)

    def monodromy(self) -> "BstElement":
        """N: the derivation with N(u) = -1, trivial on coefficients."""
        out = []
        for k in range(self.u_order):
            if k + 1 < self.u_order and self.pres[k + 1] is not None:
                src = self.pres[k + 1]
                out.append(tuple((-(k + 1) * s, w, j) for s, w, j in src))
            elif k + 1 < self.u_order:
                out.append(None)
            else:
                out.append(())
        return BstElement(self.model, out, self.u_order)

    def scale(self, s) -> "BstElement":
        s = Fraction(s)
        return BstElement(
            self.model,
            tuple(None if t is None else tuple((s * a, w, j) for a, w, j in t) for t in self.pres),
            self.u_order,
        )

    def __add__(self, other):
        out = []
        for a, b in zip(self.pres, other.pres):
            if a is None or b is None:
                out.append(None)
            else:
                out.append(a + b)
        return BstElement(self.model, out, self.u_order)

    def expand(self, N=None) -> list:
        """Concrete B_dR coefficients by u-degree."""
        N = N or self.model.xi_order
        out = []
        for terms in self.pres:
            acc = self.model.bdr_zero(N)
            if terms is None:
                out.append(None)
                continue
            for s, w, j in terms:
                val = self.model.bdr_one(N) if w is None else self.model.xi_expand(w, N)
                if j:
                    val = val * self.model.t_power(j, N)
                acc = acc + val.scale(s)
            out.append(acc)
        return out

    def agrees_with(self, other) -> bool:
        ea, eb = self.expand(), other.expand()
        for a, b in zip(ea, eb):
            if a is None or b is None:
                if a is not b:
                    return False
                continue
            if not a.agrees_with(b):
                return False
        return True

    def pres_normalized(self):
        """Canonical form of the presentation for structural comparison."""
        out = []
        for terms in self.pres:
            if terms is None:
                out.append(None)
                continue
            merged = {}
            for s, w, j in terms:
                key = (None if w is None else (w.components), j)
                merged[key] = merged.get(key, Fraction(0)) + s
            out.append(tuple(sorted(
                ((k[1], k[0], s) for k, s in merged.items() if s != 0),
                key=lambda z: (z[0], str(z[1])),
            )))
        return tuple(out)

    def to_json(self):
        return [None if c is None else c.to_json() for c in self.expand()]

    def __repr__(self):
        return f"Bst(u-order {self.u_order})"


def bst_actions(x: BstElement, which: str) -> BstElement:
    if which == "phi":
        return x.phi()
    if which == "N":
        return x.monodromy()
    raise ValueError(f"unknown action {which!r}")


# ----------------------------------------------------------------------
# the model session


def _teichmuller_int(c: int, p: int, prec: int) -> PadicNumber:
    """Teichmueller lift of c in F_p as a p-adic integer mod p^prec."""
    c %= p
    if c == 0:
        return PadicNumber.zero(p, prec)
    mod = p**prec
    y = c
    for _ in range(prec + 1):
        y2 = pow(y, p, mod)
        if y2 == y:
            break
        y = y2
    return PadicNumber.from_int(y, p, prec)


class PeriodModel:
    """One desk-scale session: fixed prime, variant, perfection depth, precision.

    Immutable after construction; every produced element references the
    session read-only, so independent sessions can be used concurrently.
    """

    def __init__(
        self,
        p: int,
        variant: str = "kummer",
        depth: int = 2,
        prec: int = 12,
        xi_order: int = 8,
        witt_len: int | None = None,
        tilt_cutoff=16,
    ):
        self.p = p
        self.variant = variant
        self.depth = depth
        self.prec = prec
        self.xi_order = xi_order
        self.witt_len = witt_len if witt_len is not None else prec + 1
        self.tilt_cutoff = Fraction(tilt_cutoff)
        self.tilt = TiltRing(p, depth, window=self.tilt_cutoff)
        self.cside = CSideField(p, variant, depth, prec)
        # v_p of the realized uniformizer U at level 0
        self.u_val = Fraction(1) if variant == "kummer" else Fraction(p, p - 1)
        self._teich_cache: dict = {}
        self._xi_witt = None
        self._t_cache: dict = {}
        self._t_pow_cache: dict = {}
        self._lift_mono_cache: dict = {}

    # -- distinguished tilt elements --------------------------------------

    @property
    def uniformizer(self) -> TiltElement:
        """U: the element pi with pi^(0) = p (kummer) or eps - 1 (cyclotomic)."""
        return self.tilt.monomial(1)

    @property
    def eps(self) -> TiltElement:
        """The compatible system of p-power roots of unity (cyclotomic variant)."""
        if self.variant != "cyclotomic":
            raise PeriodError("eps lives in the cyclotomic variant")
        return self.tilt.one() + self.uniformizer

    def eps_root_power(self, k: int, root_depth: int) -> TiltElement:
        """eps^(k / p^root_depth) as a tilt element."""
        base = self.tilt.one() + self.tilt.monomial(Fraction(1, self.p**root_depth))
        return base**k

    # -- Witt layer --------------------------------------------------------

    def teich(self, x: TiltElement, length: int | None = None) -> WittVector:
        return WittVector.teichmuller(self.tilt, x, length or self.witt_len)

    def witt_one(self, length: int | None = None) -> WittVector:
        return WittVector.one(self.tilt, length or self.witt_len)

    def witt_zero(self, length: int | None = None) -> WittVector:
        return WittVector.zero(self.tilt, length or self.witt_len)

    def xi_witt(self, length: int | None = None) -> WittVector:
        """The distinguished generator of ker(theta) at the Witt level."""
        length = length or self.witt_len
        if self._xi_witt is None or len(self._xi_witt) < length:
            full = max(length, self.witt_len)
            if self.variant == "kummer":
                xi = self.teich(self.uniformizer, full) - self.witt_one(full).scale_int(self.p)
            else:
                acc = self.witt_zero(full)
                for k in range(self.p):
                    acc = acc + self.teich(self.eps_root_power(k, 1), full)
                xi = acc
            self._xi_witt = xi
        if len(self._xi_witt) == length:
            return self._xi_witt
        return WittVector(self.tilt, self._xi_witt.components[:length])

    # -- realization -------------------------------------------------------

    def _teich_scalar(self, c: int) -> PadicNumber:
        c %= self.p
        if c not in self._teich_cache:
            self._teich_cache[c] = _teichmuller_int(c, self.p, self.prec)
        return self._teich_cache[c]

    def _cutoff_cert(self, cutoff, level: int) -> int:
        if cutoff is None:
            return self.prec
        return int(math.floor(cutoff * self.u_val / self.p**level))

    def _mono_cert(self, exponent_int: int) -> int:
        """Certified absolute precision of the chain value for U-exponent
        E = exponent_int / p^m at level 0 in the cyclotomic variant."""
        if exponent_int == 0:
            return self.prec
        k = vp_int(exponent_int, self.p)
        a = abs(exponent_int) // self.p**k
        cert = k + 1
        if exponent_int < 0:
            cert -= math.ceil(Fraction((a + 1) * self.p**k, self.cside.ram_index))
        return min(cert, self.prec)

    def _realize_monomial(self, exponent, level: int) -> CSideElement:
        """(U^exponent)^(level); exact for kummer, chain-certified for cyclotomic."""
        e_scaled = Fraction(exponent) * self.p**self.depth / self.p**level
        if e_scaled.denominator != 1:
            raise DepthExceeded(
                f"monomial U^{exponent} has no level-{level} realization at depth {self.depth}"
            )
        E = int(e_scaled)
        val = self.cside.gen_power(E)
        if self.variant == "kummer":
            return val
        return val.cap_precision(self._mono_cert(E))

    def _eps_form(self, x: TiltElement) -> dict:
        """Rewrite a tilt element with non-negative exponents as an
        F_p-combination of eps-monomials (cyclotomic variant)."""
        out: dict = {}
        p = self.p
        for e, c in x.terms.items():
            if e < 0:
                raise PeriodError("eps-form needs non-negative exponents")
            a = e * e.denominator  # integer numerator after scaling by p^j
            j_den = e.denominator
            a = int(e * j_den)
            # u^(a/p^j) = (eps^(1/p^j) - 1)^a
            for k in range(a + 1):
                coef = math.comb(a, k) * ((-1) ** (a - k)) * c
                coef %= p
                if not coef:
                    continue
                key = Fraction(k, j_den)
                nc = (out.get(key, 0) + coef) % p
                if nc:
                    out[key] = nc
                elif key in out:
                    del out[key]
        return out

    def _eval_eps_terms(self, terms: dict, level: int) -> CSideElement:
        """Termwise-exact evaluation of eps-monomials at the given level."""
        acc = self.cside.zero(self.prec)
        pm = self.p**self.depth
        for g, c in terms.items():
            scaled = g * pm / self.p**level
            if scaled.denominator != 1:
                raise DepthExceeded("eps-monomial beyond perfection depth")
            val = self.cside.zeta_power(int(scaled)) * self._teich_scalar(c)
            acc = acc + val
        return acc

    def realize(self, x: TiltElement, level: int = 0) -> CSideElement:
        """The level-component x^(level) in the C-side model, precision-capped.

        Single monomials (kummer) and single eps-monomials (cyclotomic) are
        exact; sums go through the deepest available root of the tower and
        carry certified precision s+1, where s is the depth boost."""
        p = self.p
        if x.is_zero:
            return self.cside.zero(max(1, min(self.prec, self._cutoff_cert(x.cutoff, level))))
        v = x.valuation()
        xhat = x.shift(-v)
        mono = self._realize_monomial(v, level)
        if len(xhat.terms) == 1:
            val = mono * self._teich_scalar(xhat.terms[Fraction(0)])
            cut = self._cutoff_cert(xhat.cutoff, level)
            return val.cap_precision(min(self.prec, cut)) if xhat.cutoff is not None else val
        if self.variant == "cyclotomic":
            eps_terms = self._eps_form(xhat)
            if len(eps_terms) == 1 and xhat.cutoff is None:
                (g, c), = eps_terms.items()
                pm = p**self.depth
                scaled = g * pm / p**level
                if scaled.denominator != 1:
                    raise DepthExceeded("eps-monomial beyond perfection depth")
                return mono * (self.cside.zeta_power(int(scaled)) * self._teich_scalar(c))
        # sum: realize the deepest root termwise, then power back up
        s = self.depth - level - xhat.denom_depth()
        if s < 0:
            raise DepthExceeded(
                f"no depth left to realize a {len(xhat.terms)}-term element at level {level}"
            )
        y = xhat
        for _ in range(level + s):
            y = y.p_root()
        if self.variant == "kummer":
            acc = self.cside.zero(self.prec)
            pm = p**self.depth
            for e, c in y.terms.items():
                acc = acc + self.cside.gen_power(int(e * pm)) * self._teich_scalar(c)
        else:
            acc = self._eval_eps_terms(self._eps_form(y), 0)
        value = acc ** (p**s)
        cert = min(s + 1, self._cutoff_cert(xhat.cutoff, level), self.prec)
        return (mono * value).cap_precision(cert + _floor_val(mono))


    def theta(self, w: WittVector, prec: int | None = None) -> CSideElement:
        """Sum of p^n * a_n^(n): the ring map W(R) -> C at tracked precision."""
        cap = min(self.prec, len(w), prec if prec is not None else self.prec)
        acc = self.cside.zero(self.prec)
        for n, a in enumerate(w.components):
            if n >= cap:
                break
            if a.is_zero and a.cutoff is None:
                continue
            try:
                val = self.realize(a, n)
            except DepthExceeded:
                cap = min(cap, max(n, 1))
                break
            if val.abs_precision() <= 0:
                cap = min(cap, max(n, 1))
                break
            acc = acc + val.scale(Fraction(self.p) ** n)
        return acc.cap_precision(cap)

    # -- xi-adic expansion ---------------------------------------------------

    def _lift_scalar(self, x: PadicNumber, length: int) -> WittVector:
        """A Witt vector over the tilt with theta-value x (x integral).

        Teichmueller digits t_j of x fill the components directly: theta of
        (t_0, t_1, ...) is sum p^j [t_j] by the defining formula."""
        if x.is_zero:
            return self.witt_zero(length)
        if x.valuation() < 0:
            raise NonDivisible("cannot lift a non-integral scalar into W(R)")
        p = self.p
        K = min(x.abs_precision, length)
        mod = p**K
        y = x.lift() % mod
        comps = [self.tilt.zero()] * length
        for j in range(K):
            if y == 0:
                break
            t = y % p
            if t:
                comps[j] = self.tilt.from_int(t)
                y = (y - _teichmuller_int(t, p, K).lift()) % mod
            y //= p
        return WittVector(self.tilt, comps)

    def _lift_cside_monomial(self, k: int, length: int) -> WittVector:
        key = (k, length)
        if key not in self._lift_mono_cache:
            self._lift_mono_cache[key] = self.teich(
                self.tilt.monomial(Fraction(k, self.p**self.depth)), length
            )
        return self._lift_mono_cache[key]

    def lift_cside(self, c: CSideElement, length: int | None = None) -> WittVector:
        """Some Witt vector whose theta-value agrees with c at its precision."""
        length = length or self.witt_len
        acc = self.witt_zero(length)
        for k, coord in enumerate(c.coords):
            if coord.is_zero:
                continue
            acc = acc + self._lift_scalar(coord, length) * self._lift_cside_monomial(k, length)
        return acc

    def divide_by_xi(self, u: WittVector) -> WittVector:
        """Exact division by xi in W(R); caller certifies theta(u) = 0."""
        L = len(u)
        xi = self.xi_witt(L)
        xi0 = xi.components[0]
        v0 = xi0.valuation()
        c0inv = pow(xi0.terms[v0], -1, self.p)
        q: list = []
        for n in range(L):
            if n == 0:
                rem = u.components[0]
            else:
                partial = WittVector(self.tilt, tuple(q) + (self.tilt.zero(),))
                xi_n = WittVector(self.tilt, xi.components[: n + 1])
                u_n = WittVector(self.tilt, u.components[: n + 1])
                diff = u_n - xi_n * partial
                rem = diff.components[n]
            # divide by xi0^(p^n): a monomial, so an exact Laurent shift
            q.append(rem.shift(-v0 * self.p**n) * pow(c0inv, self.p**n, self.p))
        return WittVector(self.tilt, q)

    def bdr_zero(self, N: int | None = None) -> BdRElement:
        N = N or self.xi_order
        return BdRElement(self, tuple(self.cside.zero(self.prec) for _ in range(N)))

    def bdr_one(self, N: int | None = None) -> BdRElement:
        N = N or self.xi_order
        return BdRElement(
            self, (self.cside.one(self.prec),) + tuple(self.cside.zero(self.prec) for _ in range(N - 1))
        )

    def bdr_xi(self, N: int | None = None) -> BdRElement:
        N = N or self.xi_order
        coeffs = [self.cside.zero(self.prec) for _ in range(N)]
        if N > 1:
            coeffs[1] = self.cside.one(self.prec)
        return BdRElement(self, tuple(coeffs))

    def bdr_from_fractions(self, fracs, N: int | None = None) -> BdRElement:
        N = N or self.xi_order
        coeffs = [self.cside.from_fraction(Fraction(q)) for q in fracs]
        coeffs += [self.cside.zero(self.prec) for _ in range(N - len(coeffs))]
        return BdRElement(self, tuple(coeffs[:N]))

    def xi_expand(self, w: WittVector, N: int | None = None) -> BdRElement:
        """The xi-adic expansion of w mod xi^N, certified step by step."""
        N = N or self.xi_order
        r = w
        coeffs = []
        for i in range(N):
            c = self.theta(r)
            coeffs.append(c)
            if i == N - 1:
                break
            r2 = r - self.lift_cside(c, len(r))
            # certificate: the adjusted remainder must have theta = 0 at precision
            resid = self.theta(r2)
            if not resid.is_zero:
                raise NonDivisible(f"theta of the remainder is nonzero at step {i}: {resid!r}")
            r = self.divide_by_xi(r2)
            if len(r) > 1:
                # each division costs a slot of theta-fidelity; drop it
                r = WittVector(self.tilt, r.components[:-1])
        return BdRElement(self, tuple(coeffs))

    # -- logarithms ----------------------------------------------------------

    def log_pi(self, N: int | None = None) -> BdRElement:
        """log([pi]/p) = sum (-1)^(n+1) xi^n / (n p^n), exact mod Fil^N."""
        N = N or self.xi_order
        fracs = [Fraction(0)]
        for n in range(1, N):
            fracs.append(Fraction((-1) ** (n + 1), n * self.p**n))
        out = self.bdr_from_fractions(fracs, N)
        out.truncation_order = N - 1
        return out

    def log_unit(self, a: TiltElement, N: int | None = None) -> BdRElement:
        """log[a] for a unit a of R with |a+ - 1| < 1."""
        N = N or self.xi_order
        if a.is_zero or a.valuation() != 0:
            raise NotAUnit(f"{a!r} is not a unit of the tilt ring")
        c0 = a.terms[Fraction(0)]
        aplus = a * pow(c0, -1, self.p)
        dev = aplus - self.tilt.one()
        if not dev.is_zero and dev.valuation() <= 0:
            raise NonConvergent("|a+ - 1| >= 1: the logarithm series does not converge")
        x = self.xi_expand(self.teich(aplus) - self.witt_one(), N)
        f0 = x.fil_order()
        if f0 >= N:
            return self.bdr_zero(N)
        if f0 >= 1:
            nmax = (N - 1) // f0
        else:
            theta_x = x.coeffs[0]
            delta0 = (
                Fraction(theta_x.abs_precision())
                if theta_x.is_zero
                else theta_x.valuation()
            )
            if delta0 <= 0:
                raise NonConvergent("theta(a+) is not congruent to 1")
            w1 = Fraction(0)
            for c in x.coeffs[1:]:
                v = None if c.is_zero else c.valuation()
                if v is not None and v < w1:
                    w1 = v
            eff = min(c.abs_precision() for c in x.coeffs)
            n = 1
            while True:
                bound = (n + 1 - N) * delta0 + (N - 1) * w1 - _log_floor(n + 1, self.p)
                if bound >= eff and n >= N:
                    break
                n += 1
                if n > 10 * (eff + N) * max(1, int(1 / delta0 if delta0 < 1 else 1)):
                    raise NonConvergent("no effective truncation bound found")
            nmax = n
        total = self.bdr_zero(N)
        xp = self.bdr_one(N)
        for n in range(1, nmax + 1):
            xp = xp * x
            total = total + xp.scale(Fraction((-1) ** (n + 1), n))
        total.truncation_order = nmax
        return total

    def t_element(self, N: int | None = None) -> BdRElement:
        """t = log[eps] (cyclotomic variant)."""
        N = N or self.xi_order
        if N not in self._t_cache:
            self._t_cache[N] = self.log_unit(self.eps, N)
        return self._t_cache[N]

    def t_power(self, j: int, N: int | None = None) -> BdRElement:
        N = N or self.xi_order
        key = (j, N)
        if key not in self._t_pow_cache:
            self._t_pow_cache[key] = self.t_element(N) ** j
        return self._t_pow_cache[key]

    def log_element(self, b: TiltElement, N: int | None = None) -> BdRElement:
        """log[b] for nonzero b: e*log[pi] + log[unit part], minimal-s choice."""
        N = N or self.xi_order
        if b.is_zero:
            raise NotAUnit("log of zero")
        e = b.valuation()
        unit = b.shift(-e)
        out = self.log_pi(N).scale(Fraction(e)) if e else self.bdr_zero(N)
        return out + self.log_unit(unit, N)

    # -- B_st ------------------------------------------------------------------

    def bst(self, terms_by_degree: dict, u_order: int = 4) -> BstElement:
        return BstElement.from_terms(self, terms_by_degree, u_order)

    def bst_u(self, u_order: int = 4) -> BstElement:
        return self.bst({1: [(1, None, 0)]}, u_order)

    def __repr__(self):
        return (
            f"PeriodModel(p={self.p}, {self.variant}, depth={self.depth}, "
            f"prec={self.prec}, xi_order={self.xi_order})"
        )


def _floor_val(x: CSideElement) -> int:
    v = x.valuation()
    return 0 if v is None else int(math.floor(v))


def _log_floor(n: int, p: int) -> int:
    out = 0
    while n >= p:
        n //= p
        out += 1
    return out


def theta(model: PeriodModel, w: WittVector, prec: int | None = None) -> CSideElement:
    return model.theta(w, prec)


def xi_expand(model: PeriodModel, w: WittVector, N: int | None = None) -> BdRElement:
    return model.xi_expand(w, N)


def log_unit(model: PeriodModel, a: TiltElement, N: int | None = None) -> BdRElement:
    return model.log_unit(a, N)


def log_pi(model: PeriodModel, N: int | None = None) -> BdRElement:
    return model.log_pi(N)
