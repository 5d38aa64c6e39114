"""Exact p-adic arithmetic with explicit precision tracking.

Numbers are stored in fixed-point style: a valuation, a unit part known to
finitely many base-p digits, and the absolute precision those digits justify.
Zero is tracked as "0 mod p^N" rather than as an exact element, so arithmetic
never claims digits the inputs do not determine.

Unramified extensions Q_q = W(F_q)[1/p] are represented on a Teichmueller
lift of a normal basis of F_q, which makes the Frobenius an exact coordinate
rotation.
"""

from __future__ import annotations

from fractions import Fraction


class PadicError(ArithmeticError):
    pass


class PrimeMismatch(PadicError):
    pass


class DivisionByZero(PadicError):
    pass


class PrecisionExhausted(PadicError):
    pass


def vp_int(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_fraction(q, p: int):
    """p-adic valuation of a rational; None for 0."""
    q = Fraction(q)
    if q == 0:
        return None
    return vp_int(q.numerator, p) - vp_int(q.denominator, p)


class PadicNumber:
    """An element of Q_p known modulo p^abs_precision.

    Fields: prime ``p``; valuation ``v``; ``unit`` (an integer prime to p,
    stored mod p^rel); ``rel`` digits of relative precision.  A tracked zero
    has ``rel == 0`` and ``v`` equal to its absolute precision, meaning
    "congruent to 0 mod p^v".
    """

    __slots__ = ("p", "v", "unit", "rel")

    def __init__(self, p: int, v: int, unit: int, rel: int):
        if rel < 0:
            raise ValueError("negative relative precision")
        if rel == 0:
            unit = 0
        else:
            unit %= p ** rel
            if unit % p == 0:
                raise ValueError("unit part must be prime to p")
        self.p = p
        self.v = v
        self.unit = unit
        self.rel = rel

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def zero(cls, p: int, abs_prec: int) -> "PadicNumber":
        return cls(p, abs_prec, 0, 0)

    @classmethod
    def from_int(cls, n: int, p: int, abs_prec: int) -> "PadicNumber":
        if n == 0:
            return cls.zero(p, abs_prec)
        v = vp_int(n, p)
        if v >= abs_prec:
            return cls.zero(p, abs_prec)
        return cls(p, v, n // p**v, abs_prec - v)

    @classmethod
    def from_fraction(cls, q, p: int, abs_prec: int) -> "PadicNumber":
        q = Fraction(q)
        if q == 0:
            return cls.zero(p, abs_prec)
        vn = vp_int(q.numerator, p)
        vd = vp_int(q.denominator, p)
        v = vn - vd
        if v >= abs_prec:
            return cls.zero(p, abs_prec)
        rel = abs_prec - v
        num = q.numerator // p**vn
        den = q.denominator // p**vd
        unit = num * pow(den, -1, p**rel)
        return cls(p, v, unit, rel)

    # ------------------------------------------------------------------
    # queries

    @property
    def is_zero(self) -> bool:
        """True when the element is indistinguishable from 0 at its precision."""
        return self.rel == 0

    @property
    def abs_precision(self) -> int:
        return self.v + self.rel

    def valuation(self) -> int:
        """Valuation; for a tracked zero this is only the lower bound v >= abs_precision."""
        return self.v

    def digits(self) -> list[int]:
        """Base-p digits of the unit part, lowest first."""
        out = []
        u = self.unit
        for _ in range(self.rel):
            out.append(u % self.p)
            u //= self.p
        return out

    def lift(self) -> int:
        """The canonical integer representative p^v * unit (0 for tracked zero)."""
        if self.is_zero:
            return 0
        if self.v < 0:
            raise PadicError("negative valuation: use lift_fraction")
        return self.p**self.v * self.unit

    def lift_fraction(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.p) ** self.v * self.unit

    def residue(self) -> int:
        """Reduction mod p, for elements of non-negative valuation."""
        if self.is_zero:
            return 0
        if self.v < 0:
            raise PadicError("negative valuation has no residue")
        return self.unit % self.p if self.v == 0 else 0

    def at_precision(self, abs_prec: int) -> "PadicNumber":
        """Truncate (never extend) to absolute precision abs_prec."""
        if abs_prec >= self.abs_precision:
            return self
        if self.is_zero or self.v >= abs_prec:
            return PadicNumber.zero(self.p, abs_prec)
        return PadicNumber(self.p, self.v, self.unit, abs_prec - self.v)

    def agrees_with(self, other: "PadicNumber") -> bool:
        """Equality at the joint precision min(abs_precision)."""
        self._check(other)
        prec = min(self.abs_precision, other.abs_precision)
        d = self - other
        return d.is_zero and d.abs_precision >= prec

    # ------------------------------------------------------------------
    # arithmetic

    def _check(self, other: "PadicNumber"):
        if self.p != other.p:
            raise PrimeMismatch(f"primes differ: {self.p} vs {other.p}")

    def _coerce(self, other):
        if isinstance(other, PadicNumber):
            return other
        if isinstance(other, int):
            return PadicNumber.from_int(other, self.p, self.abs_precision + max(0, -self.v) + 4)
        if isinstance(other, Fraction):
            return PadicNumber.from_fraction(other, self.p, self.abs_precision + max(0, -self.v) + 4)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check(other)
        prec = min(self.abs_precision, other.abs_precision)
        val = self.lift_fraction() + other.lift_fraction()
        return PadicNumber.from_fraction(val, self.p, prec)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero:
            return self
        return PadicNumber(self.p, self.v, self.p**self.rel - self.unit, self.rel)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check(other)
        v = self.v + other.v
        if self.is_zero or other.is_zero:
            return PadicNumber.zero(self.p, v)
        rel = min(self.rel, other.rel)
        return PadicNumber(self.p, v, self.unit * other.unit, rel)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check(other)
        if other.is_zero:
            raise DivisionByZero("division by an element indistinguishable from 0")
        if self.is_zero:
            return PadicNumber.zero(self.p, self.v - other.v)
        rel = min(self.rel, other.rel)
        if rel == 0:
            raise PrecisionExhausted("quotient known to 0 digits")
        unit = self.unit * pow(other.unit, -1, self.p**rel)
        return PadicNumber(self.p, self.v - other.v, unit, rel)

    def __pow__(self, n: int):
        if n < 0:
            if self.is_zero:
                raise DivisionByZero("inverting a tracked zero")
            inv = PadicNumber.from_int(1, self.p, self.rel) / self
            return inv ** (-n)
        out = PadicNumber.from_int(1, self.p, self.rel if self.rel else self.abs_precision)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, PadicNumber):
            return NotImplemented
        return (self.p, self.v, self.unit, self.rel) == (other.p, other.v, other.unit, other.rel)

    def __hash__(self):
        return hash((self.p, self.v, self.unit, self.rel))

    def __repr__(self):
        if self.is_zero:
            return f"O({self.p}^{self.v})"
        if self.v == 0:
            return f"{self.unit} + O({self.p}^{self.abs_precision})"
        return f"{self.unit}*{self.p}^{self.v} + O({self.p}^{self.abs_precision})"

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "valuation": self.v,
            "digits": self.digits(),
            "abs_prec": self.abs_precision,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PadicNumber":
        p = obj["p"]
        digits = obj["digits"]
        unit = sum(d * p**i for i, d in enumerate(digits))
        if not digits:
            return cls.zero(p, obj["abs_prec"])
        return cls(p, obj["valuation"], unit, len(digits))


def qp_arith(a: PadicNumber, b: PadicNumber, op: str) -> PadicNumber:
    """Dispatch form of Q_p arithmetic used by the CLI layer."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# ----------------------------------------------------------------------
# finite fields F_q


def _poly_mul_mod(a, b, modulus, p):
    """Product of coefficient tuples mod (modulus, p); modulus monic."""
    f = len(modulus) - 1
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    for k in range(len(out) - 1, f - 1, -1):
        c = out[k]
        if c:
            out[k] = 0
            for j in range(f):
                out[k - f + j] = (out[k - f + j] - c * modulus[j]) % p
    out = out[:f] + [0] * max(0, f - len(out))
    return tuple(out[:f])


def _poly_pow_mod(a, n, modulus, p):
    f = len(modulus) - 1
    out = tuple([1] + [0] * (f - 1))
    base = a
    while n:
        if n & 1:
            out = _poly_mul_mod(out, base, modulus, p)
        base = _poly_mul_mod(base, base, modulus, p)
        n >>= 1
    return out


def _is_irreducible(modulus, p):
    f = len(modulus) - 1
    if f == 1:
        return True
    x = tuple([0, 1] + [0] * (f - 2))
    xq = _poly_pow_mod(x, p**f, modulus, p)
    if xq != x:
        return False
    for ell in range(2, f + 1):
        if f % ell == 0 and _is_prime(ell):
            xe = _poly_pow_mod(x, p ** (f // ell), modulus, p)
            if xe == x:
                return False
    return True


def _is_prime(n):
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


class Fq:
    """The finite field F_{p^f} as F_p[y]/(g) for a fixed deterministic g."""

    def __init__(self, p: int, f: int = 1):
        self.p = p
        self.f = f
        self.q = p**f
        self.modulus = self._find_modulus(p, f)

    @staticmethod
    def _find_modulus(p, f):
        if f == 1:
            return (0, 1)
        # smallest monic irreducible in lexicographic order of low coefficients
        for code in range(p**f):
            coeffs = []
            c = code
            for _ in range(f):
                coeffs.append(c % p)
                c //= p
            modulus = tuple(coeffs + [1])
            if _is_irreducible(modulus, p):
                return modulus
        raise RuntimeError("no irreducible polynomial found")

    def __call__(self, coords) -> "FqElement":
        if isinstance(coords, int):
            coords = (coords % self.p,) + (0,) * (self.f - 1)
        return FqElement(self, tuple(c % self.p for c in coords))

    @property
    def zero(self):
        return self((0,) * self.f)

    @property
    def one(self):
        return self(1)

    def elements(self):
        for code in range(self.q):
            coords = []
            c = code
            for _ in range(self.f):
                coords.append(c % self.p)
                c //= self.p
            yield self(tuple(coords))

    def __eq__(self, other):
        return isinstance(other, Fq) and (self.p, self.f) == (other.p, other.f)

    def __hash__(self):
        return hash((self.p, self.f))

    def __repr__(self):
        return f"Fq({self.p}^{self.f})"


class FqElement:
    __slots__ = ("field", "coords")

    def __init__(self, field: Fq, coords: tuple):
        self.field = field
        self.coords = coords

    @property
    def is_zero(self):
        return all(c == 0 for c in self.coords)

    def __add__(self, other):
        return FqElement(self.field, tuple((a + b) % self.field.p for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return FqElement(self.field, tuple((a - b) % self.field.p for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return FqElement(self.field, tuple((-a) % self.field.p for a in self.coords))

    def __mul__(self, other):
        if isinstance(other, int):
            return FqElement(self.field, tuple((a * other) % self.field.p for a in self.coords))
        return FqElement(self.field, _poly_mul_mod(self.coords, other.coords, self.field.modulus, self.field.p))

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        return FqElement(self.field, _poly_pow_mod(self.coords, n, self.field.modulus, self.field.p))

    def inverse(self):
        if self.is_zero:
            raise ZeroDivisionError("inverse of 0 in F_q")
        return self ** (self.field.q - 2)

    def frobenius(self):
        return self**self.field.p

    def frobenius_inverse(self):
        return self ** (self.field.p ** (self.field.f - 1))

    def __eq__(self, other):
        return isinstance(other, FqElement) and self.coords == other.coords and self.field == other.field

    def __hash__(self):
        return hash((self.field, self.coords))

    def __repr__(self):
        return f"Fq{self.field.p}^{self.field.f}{self.coords}"


# ----------------------------------------------------------------------
# unramified extensions


def _mat_solve_mod(mat, rhs_cols, mod, p):
    """Solve mat * X = rhs_cols mod p^k, entries ints, mat invertible mod p."""
    n = len(mat)
    m = [row[:] + rhs[:] for row, rhs in zip(mat, rhs_cols)]
    # forward elimination with unit pivots
    width = len(m[0])
    for col in range(n):
        piv = None
        for r in range(col, n):
            if m[r][col] % p != 0:
                piv = r
                break
        if piv is None:
            raise PadicError("matrix not invertible mod p")
        m[col], m[piv] = m[piv], m[col]
        inv = pow(m[col][col], -1, mod)
        m[col] = [(x * inv) % mod for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                c = m[r][col]
                m[r] = [(x - c * y) % mod for x, y in zip(m[r], m[col])]
    return [row[n:width] for row in m]


class UnramifiedField:
    """Q_q = W(F_q)[1/p] with integral model Z_q mod p^prec.

    The integral basis is the Teichmueller lift of a normal basis
    b, b^p, ..., b^{p^(f-1)} of F_q, so the Frobenius acts by rotating
    coordinates.
    """

    def __init__(self, p: int, f: int = 1, prec: int = 32):
        self.p = p
        self.f = f
        self.prec = prec
        self.residue_field = Fq(p, f)
        self.modulus_lift = tuple(self.residue_field.modulus)  # integer lift, coefficients 0..p-1
        self._mod = p**prec
        self.normal_generator = self._find_normal_generator()
        # theta-basis: omega_j = [b^(p^j)] as power-basis integer tuples
        self.basis_polys = [
            self._teichmuller_poly((self.normal_generator ** (p**j)).coords, prec) for j in range(f)
        ]
        self._basis_matrix = [[self.basis_polys[j][i] for j in range(f)] for i in range(f)]
        self._mult_table = self._build_mult_table()
        self._one_coords = self._power_basis_to_coords(tuple([1] + [0] * (f - 1)))

    # -- residue/Witt-model plumbing ------------------------------------

    def _find_normal_generator(self):
        p, f = self.p, self.f
        if f == 1:
            return self.residue_field.one
        for b in self.residue_field.elements():
            if b.is_zero:
                continue
            rows = [(b ** (p**j)).coords for j in range(f)]
            if self._rank_mod_p(rows) == f:
                return b
        raise RuntimeError("no normal basis generator found")

    def _rank_mod_p(self, rows):
        p = self.p
        m = [list(r) for r in rows]
        rank = 0
        for col in range(len(m[0])):
            piv = None
            for r in range(rank, len(m)):
                if m[r][col] % p != 0:
                    piv = r
                    break
            if piv is None:
                continue
            m[rank], m[piv] = m[piv], m[rank]
            inv = pow(m[rank][col], -1, p)
            m[rank] = [(x * inv) % p for x in m[rank]]
            for r in range(len(m)):
                if r != rank and m[r][col]:
                    c = m[r][col]
                    m[r] = [(x - c * y) % p for x, y in zip(m[r], m[rank])]
            rank += 1
        return rank

    def _lift_poly_mul(self, a, b, mod):
        f = self.f
        out = [0] * (2 * f - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[i + j] = (out[i + j] + ai * bj) % mod
        for k in range(len(out) - 1, f - 1, -1):
            c = out[k]
            if c:
                out[k] = 0
                for j in range(f):
                    out[k - f + j] = (out[k - f + j] - c * self.modulus_lift[j]) % mod
        return tuple(out[:f])

    def _lift_poly_pow(self, a, n, mod):
        out = tuple([1] + [0] * (self.f - 1))
        base = a
        while n:
            if n & 1:
                out = self._lift_poly_mul(out, base, mod)
            base = self._lift_poly_mul(base, base, mod)
            n >>= 1
        return out

    def _teichmuller_poly(self, residue_coords, prec):
        """Hensel fixed point of y -> y^q lifting the given residue."""
        mod = self.p**prec
        y = tuple(int(c) for c in residue_coords)
        for _ in range(prec + 2):
            y2 = self._lift_poly_pow(y, self.residue_field.q, mod)
            if y2 == y:
                break
            y = y2
        return y

    def _power_basis_to_coords(self, poly, prec=None):
        prec = prec or self.prec
        mod = self.p**prec
        cols = [[c % mod] for c in poly]
        sol = _mat_solve_mod([row[:] for row in self._basis_matrix], cols, mod, self.p)
        return tuple(s[0] % mod for s in sol)

    def _build_mult_table(self):
        f = self.f
        table = [[None] * f for _ in range(f)]
        mod = self._mod
        for i in range(f):
            for j in range(i, f):
                prod = self._lift_poly_mul(self.basis_polys[i], self.basis_polys[j], mod)
                coords = self._power_basis_to_coords(prod)
                table[i][j] = coords
                table[j][i] = coords
        return table

    # -- element constructors -------------------------------------------

    def element(self, coords) -> "UnramifiedElement":
        return UnramifiedElement(self, tuple(coords))

    def from_padic(self, x: PadicNumber) -> "UnramifiedElement":
        return self.element(tuple(x * c for c in self._one_scalars()))

    def _one_scalars(self):
        return tuple(PadicNumber.from_int(c, self.p, self.prec) for c in self._one_coords)

    @property
    def one(self):
        return self.element(self._one_scalars())

    @property
    def zero(self):
        return self.element(tuple(PadicNumber.zero(self.p, self.prec) for _ in range(self.f)))

    def teichmuller(self, a: FqElement, prec: int | None = None) -> "UnramifiedElement":
        """The Teichmueller lift [a]: the (q-1)-th root of unity (or 0) over a."""
        prec = prec or self.prec
        if prec < 1:
            raise ValueError("precision must be >= 1")
        if a.is_zero:
            return self.element(tuple(PadicNumber.zero(self.p, prec) for _ in range(self.f)))
        poly = self._teichmuller_poly(a.coords, prec)
        coords = self._power_basis_to_coords(poly, prec)
        return self.element(tuple(PadicNumber.from_int(c, self.p, prec) for c in coords))

    def __repr__(self):
        return f"UnramifiedField(p={self.p}, f={self.f}, prec={self.prec})"


class UnramifiedElement:
    """Element of Q_q in Teichmueller-normal-basis coordinates over Q_p."""

    __slots__ = ("field", "coords")

    def __init__(self, field: UnramifiedField, coords: tuple):
        if len(coords) != field.f:
            raise ValueError("coordinate vector has wrong length")
        self.field = field
        self.coords = coords

    def __add__(self, other):
        self._check(other)
        return UnramifiedElement(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        self._check(other)
        return UnramifiedElement(self.field, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return UnramifiedElement(self.field, tuple(-a for a in self.coords))

    def _check(self, other):
        if self.field is not other.field and self.field.p != other.field.p:
            raise PrimeMismatch("elements of different fields")

    def __mul__(self, other):
        if isinstance(other, PadicNumber):
            return UnramifiedElement(self.field, tuple(other * c for c in self.coords))
        self._check(other)
        f = self.field.f
        table = self.field._mult_table
        prec = self.field.prec
        out = [PadicNumber.zero(self.field.p, prec) for _ in range(f)]
        for i, ci in enumerate(self.coords):
            if ci.is_zero:
                continue
            for j, dj in enumerate(other.coords):
                if dj.is_zero:
                    continue
                w = ci * dj
                for k, t in enumerate(table[i][j]):
                    if t:
                        out[k] = out[k] + w * t
        return UnramifiedElement(self.field, tuple(out))

    __rmul__ = __mul__

    def frobenius(self) -> "UnramifiedElement":
        """sigma: rotates normal-basis coordinates; exact, sigma^f = id."""
        f = self.field.f
        return UnramifiedElement(self.field, tuple(self.coords[(k - 1) % f] for k in range(f)))

    def valuation(self):
        """min over coordinates; sigma-orbit invariant by construction."""
        vals = [c.valuation() for c in self.coords]
        return min(vals)

    @property
    def is_zero(self):
        return all(c.is_zero for c in self.coords)

    def agrees_with(self, other) -> bool:
        return all(a.agrees_with(b) for a, b in zip(self.coords, other.coords))

    def __eq__(self, other):
        return isinstance(other, UnramifiedElement) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return f"Unram({', '.join(map(repr, self.coords))})"


def unramified_frobenius(x: UnramifiedElement) -> UnramifiedElement:
    return x.frobenius()


def teichmuller_residue(field: UnramifiedField, a: FqElement, prec: int) -> UnramifiedElement:
    return field.teichmuller(a, prec)
