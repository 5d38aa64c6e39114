"""p-typical Witt vectors of finite length over pluggable coefficient rings.

Arithmetic is defined by the universal sum/product polynomials.  Two engines
compute it:

* rings that supply an integral lift into a p-torsion-free ring use exact
  ghost inversion through that lift (fast; this is how values of the
  universal polynomials are evaluated without expanding them), and
* rings without a lift fall back to a cached table of the expanded
  universal polynomials, whose size grows doubly exponentially in the
  length (hence the configurable cap).

Both routes agree wherever both apply; the tests cross-check them.
"""

from __future__ import annotations

from fractions import Fraction


class WittError(ArithmeticError):
    pass


class LengthMismatch(WittError):
    pass


class TableCapExceeded(WittError):
    pass


# ----------------------------------------------------------------------
# coefficient ring interface


class CoefficientRing:
    """Operations a coefficient ring must provide for Witt arithmetic."""

    p: int

    def zero(self):
        raise NotImplementedError

    def one(self):
        raise NotImplementedError

    def from_int(self, n: int):
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def eq(self, a, b) -> bool:
        raise NotImplementedError

    def pow(self, a, n: int):
        out = self.one()
        base = a
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def lift_context(self, length: int):
        """Return a LiftContext for ghost-inversion arithmetic, or None."""
        return None

    def char_p_power(self, a):
        """a -> a^p when the ring has characteristic p (Witt Frobenius)."""
        raise WittError("coefficient ring is not of characteristic p")

    has_char_p = False


class LiftContext:
    """A p-torsion-free ring L with a surjection onto the coefficient ring.

    Witt sums/products are computed on lifted components by inverting the
    ghost map in L (all divisions by p^k are exact there) and reducing back.
    """

    p: int

    def lift(self, a):
        raise NotImplementedError

    def reduce(self, x):
        raise NotImplementedError

    def add(self, x, y):
        raise NotImplementedError

    def neg(self, x):
        raise NotImplementedError

    def mul(self, x, y):
        raise NotImplementedError

    def from_int(self, n: int):
        raise NotImplementedError

    def div_ppow(self, x, k: int):
        """Exact division by p^k; the quotient is determined mod p^(budget-k)."""
        raise NotImplementedError

    def pow(self, x, n: int):
        out = self.from_int(1)
        base = x
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out


class IntegerRing(CoefficientRing):
    """Z with exact arithmetic; its own lift context."""

    def __init__(self, p: int):
        self.p = p

    def zero(self):
        return 0

    def one(self):
        return 1

    def from_int(self, n):
        return n

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def eq(self, a, b):
        return a == b

    def lift_context(self, length):
        return _ExactIntLift(self.p)

    def __repr__(self):
        return f"IntegerRing(p={self.p})"


class _ExactIntLift(LiftContext):
    def __init__(self, p):
        self.p = p

    def lift(self, a):
        return a

    def reduce(self, x):
        return x

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def from_int(self, n):
        return n

    def div_ppow(self, x, k):
        d = self.p**k
        if x % d:
            raise WittError("ghost inversion hit a non-exact division")
        return x // d


class RationalRing(CoefficientRing):
    """Q; torsion-free and divisible, so ghost inversion applies directly."""

    def __init__(self, p: int):
        self.p = p

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def from_int(self, n):
        return Fraction(n)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def eq(self, a, b):
        return a == b

    def lift_context(self, length):
        return _FractionLift(self.p)


class _FractionLift(LiftContext):
    def __init__(self, p):
        self.p = p

    def lift(self, a):
        return Fraction(a)

    def reduce(self, x):
        return x

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def from_int(self, n):
        return Fraction(n)

    def div_ppow(self, x, k):
        return x / self.p**k


class IntegersMod(CoefficientRing):
    """Z/m with m = p^e; lifts to Z carried mod p^(e + length)."""

    def __init__(self, p: int, exponent: int):
        self.p = p
        self.exponent = exponent
        self.m = p**exponent

    def zero(self):
        return 0

    def one(self):
        return 1 % self.m

    def from_int(self, n):
        return n % self.m

    def add(self, a, b):
        return (a + b) % self.m

    def neg(self, a):
        return (-a) % self.m

    def mul(self, a, b):
        return (a * b) % self.m

    def eq(self, a, b):
        return a % self.m == b % self.m

    def lift_context(self, length):
        return _ModLift(self.p, self.exponent, length)

    def __repr__(self):
        return f"IntegersMod({self.p}^{self.exponent})"


class _ModLift(LiftContext):
    # budget p^(e+L): every division by p^k in a length-L ghost inversion
    # still leaves the reduction mod p^e correct (powers regain precision).
    def __init__(self, p, exponent, length):
        self.p = p
        self.target = p**exponent
        self.mod = p ** (exponent + length)

    def lift(self, a):
        return a % self.mod

    def reduce(self, x):
        return x % self.target

    def add(self, x, y):
        return (x + y) % self.mod

    def neg(self, x):
        return (-x) % self.mod

    def mul(self, x, y):
        return (x * y) % self.mod

    def from_int(self, n):
        return n % self.mod

    def div_ppow(self, x, k):
        d = self.p**k
        if x % d:
            raise WittError("ghost inversion hit a non-exact division")
        return x // d

    def pow(self, x, n):
        return pow(x, n, self.mod)


class FqRing(CoefficientRing):
    """F_q as a Witt coefficient ring (perfect, characteristic p)."""

    has_char_p = True

    def __init__(self, field):
        self.field = field
        self.p = field.p

    def zero(self):
        return self.field.zero

    def one(self):
        return self.field.one

    def from_int(self, n):
        return self.field(n)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def eq(self, a, b):
        return a == b

    def char_p_power(self, a):
        return a.frobenius()

    def lift_context(self, length):
        return _FqLift(self.field, length)


class _FqLift(LiftContext):
    """Z[y]/(G) with integer coefficients mod p^(1+L); G a monic lift."""

    def __init__(self, field, length):
        self.field = field
        self.p = field.p
        self.mod = field.p ** (1 + length)
        self.modulus = tuple(field.modulus)

    def lift(self, a):
        return tuple(int(c) for c in a.coords)

    def reduce(self, x):
        return self.field(tuple(c % self.p for c in x))

    def _mul_poly(self, a, b):
        f = len(self.modulus) - 1
        out = [0] * (2 * f - 1) if f > 1 else [0]
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[i + j] = (out[i + j] + ai * bj) % self.mod
        for k in range(len(out) - 1, f - 1, -1):
            c = out[k]
            if c:
                out[k] = 0
                for j in range(f):
                    out[k - f + j] = (out[k - f + j] - c * self.modulus[j]) % self.mod
        return tuple(out[:f]) + (0,) * max(0, f - len(out))

    def add(self, x, y):
        return tuple((a + b) % self.mod for a, b in zip(x, y))

    def neg(self, x):
        return tuple((-a) % self.mod for a in x)

    def mul(self, x, y):
        return self._mul_poly(x, y)

    def from_int(self, n):
        f = len(self.modulus) - 1
        return (n % self.mod,) + (0,) * (f - 1)

    def div_ppow(self, x, k):
        d = self.p**k
        for c in x:
            if c % d:
                raise WittError("ghost inversion hit a non-exact division")
        return tuple(c // d for c in x)


# ----------------------------------------------------------------------
# ghost machinery


def ghost_map(w: "WittVector"):
    """Ghost components w_k = sum_i p^i a_i^(p^(k-i)), computed in the ring."""
    ring = w.ring
    p = ring.p
    out = []
    # incremental powers: pows[i] holds a_i^(p^(k-i)) for the current k
    pows = []
    for k in range(len(w.components)):
        pows = [ring.pow(x, p) for x in pows]
        pows.append(w.components[k])
        acc = ring.zero()
        scale = 1
        for i in range(k + 1):
            term = pows[i]
            if scale > 1:
                term = ring.mul(ring.from_int(scale), term)
            acc = ring.add(acc, term)
            scale *= p
        out.append(acc)
    return out


def _ghost_in_lift(ctx: LiftContext, comps):
    p = ctx.p
    out = []
    pows = []
    for k in range(len(comps)):
        pows = [ctx.pow(x, p) for x in pows]
        pows.append(comps[k])
        acc = ctx.from_int(0)
        scale = 1
        for i in range(k + 1):
            term = pows[i]
            if scale > 1:
                term = ctx.mul(ctx.from_int(scale), term)
            acc = ctx.add(acc, term)
            scale *= p
        out.append(acc)
    return out


def _ghost_invert(ctx: LiftContext, ghost):
    p = ctx.p
    comps = []
    pows = []  # pows[i] = comps[i]^(p^(k-i)) for current k
    for k in range(len(ghost)):
        pows = [ctx.pow(x, p) for x in pows]
        acc = ghost[k]
        scale = 1
        for i in range(k):
            term = pows[i] if scale == 1 else ctx.mul(ctx.from_int(scale), pows[i])
            acc = ctx.add(acc, ctx.neg(term))
            scale *= p
        c = ctx.div_ppow(acc, k) if k else acc
        comps.append(c)
        pows.append(c)
    return comps


def _witt_op_via_lift(ctx, a_comps, b_comps, op):
    la = [ctx.lift(x) for x in a_comps]
    lb = [ctx.lift(x) for x in b_comps] if b_comps is not None else None
    ga = _ghost_in_lift(ctx, la)
    if op == "neg":
        g = [ctx.neg(x) for x in ga]
    else:
        gb = _ghost_in_lift(ctx, lb)
        if op == "add":
            g = [ctx.add(x, y) for x, y in zip(ga, gb)]
        elif op == "mul":
            g = [ctx.mul(x, y) for x, y in zip(ga, gb)]
        elif op == "sub":
            g = [ctx.add(x, ctx.neg(y)) for x, y in zip(ga, gb)]
        else:
            raise ValueError(f"unknown op {op!r}")
    return [ctx.reduce(x) for x in _ghost_invert(ctx, g)]


# ----------------------------------------------------------------------
# universal polynomial table


class _MPoly:
    """Sparse multivariate integer polynomial: {exponent tuple: coefficient}."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = terms or {}

    @classmethod
    def var(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {tuple([0] * nvars): c} if c else {})

    def add(self, other):
        t = dict(self.terms)
        for e, c in other.terms.items():
            nc = t.get(e, 0) + c
            if nc:
                t[e] = nc
            elif e in t:
                del t[e]
        return _MPoly(self.nvars, t)

    def neg(self):
        return _MPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def mul(self, other):
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                nc = t.get(e, 0) + c1 * c2
                if nc:
                    t[e] = nc
                elif e in t:
                    del t[e]
        return _MPoly(self.nvars, t)

    def scale(self, c):
        if c == 0:
            return _MPoly(self.nvars, {})
        return _MPoly(self.nvars, {e: c * x for e, x in self.terms.items()})

    def pow(self, n):
        out = _MPoly.const(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                out = out.mul(base)
            base = base.mul(base)
            n >>= 1
        return out

    def div_int(self, d):
        t = {}
        for e, c in self.terms.items():
            if c % d:
                raise WittError("non-exact division building universal polynomials")
            t[e] = c // d
        return _MPoly(self.nvars, t)

    def eval(self, ring: CoefficientRing, args):
        acc = ring.zero()
        for e, c in self.terms.items():
            term = ring.from_int(c)
            for i, k in enumerate(e):
                if k:
                    term = ring.mul(term, ring.pow(args[i], k))
            acc = ring.add(acc, term)
        return acc

    def __eq__(self, other):
        return self.terms == other.terms


def _ghost_polys(nvars, offset, length, p):
    """Ghost polynomials w_k in variables x_offset..x_(offset+length-1)."""
    out = []
    for k in range(length):
        acc = _MPoly(nvars, {})
        for i in range(k + 1):
            acc = acc.add(_MPoly.var(nvars, offset + i).pow(p ** (k - i)).scale(p**i))
        out.append(acc)
    return out


class WittPolynomialTable:
    """Cached universal sum/product/negation polynomials for one prime.

    Building length n costs doubly-exponentially growing polynomial
    expansions, so the constructor enforces a cap instead of silently
    blowing up.
    """

    def __init__(self, p: int, length: int, cap: int = 4, verify: bool = True):
        if length > cap:
            raise TableCapExceeded(
                f"universal polynomial table capped at length {cap} "
                f"(requested {length}); raise the cap explicitly if you accept the cost"
            )
        self.p = p
        self.length = length
        n = length
        nv = 2 * n
        gx = _ghost_polys(nv, 0, n, p)
        gy = _ghost_polys(nv, n, n, p)
        self.sums = self._invert([a.add(b) for a, b in zip(gx, gy)], nv)
        self.products = self._invert([a.mul(b) for a, b in zip(gx, gy)], nv)
        gneg = _ghost_polys(n, 0, n, p)
        self.negations = self._invert([g.neg() for g in gneg], n)
        if verify:
            self._verify(gx, gy)

    def _invert(self, ghost, nvars):
        p = self.p
        comps = []
        pows = []
        for k in range(len(ghost)):
            pows = [x.pow(p) for x in pows]
            acc = ghost[k]
            scale = 1
            for i in range(k):
                acc = acc.add(pows[i].scale(scale).neg())
                scale *= p
            comps.append(acc.div_int(p**k) if k else acc)
            pows.append(comps[k])
        return comps

    def _verify(self, gx, gy):
        # ghost(S_*) must equal ghost(x) + ghost(y), and likewise for products
        n = self.length
        nv = 2 * n
        for polys, combine in ((self.sums, "add"), (self.products, "mul")):
            pows = []
            for k in range(n):
                pows = [q.pow(self.p) for q in pows]
                pows.append(polys[k])
                acc = _MPoly(nv, {})
                for i in range(k + 1):
                    acc = acc.add(pows[i].scale(self.p**i))
                want = gx[k].add(gy[k]) if combine == "add" else gx[k].mul(gy[k])
                if acc != want:
                    raise WittError("universal polynomial self-check failed")


_TABLE_CACHE: dict = {}


def get_table(p: int, length: int, cap: int = 4) -> WittPolynomialTable:
    key = (p, length)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = WittPolynomialTable(p, length, cap=cap)
    return _TABLE_CACHE[key]


# ----------------------------------------------------------------------
# Witt vectors


class WittVector:
    """Length-n p-typical Witt vector over a coefficient ring."""

    __slots__ = ("ring", "components")

    def __init__(self, ring: CoefficientRing, components):
        self.ring = ring
        self.components = tuple(components)

    @classmethod
    def teichmuller(cls, ring, a, length):
        return cls(ring, (a,) + tuple(ring.zero() for _ in range(length - 1)))

    @classmethod
    def zero(cls, ring, length):
        return cls(ring, tuple(ring.zero() for _ in range(length)))

    @classmethod
    def one(cls, ring, length):
        return cls(ring, (ring.one(),) + tuple(ring.zero() for _ in range(length - 1)))

    @classmethod
    def from_int(cls, ring, n, length):
        return cls.one(ring, length).scale_int(n)

    def __len__(self):
        return len(self.components)

    def _check(self, other):
        if self.ring is not other.ring and repr(self.ring) != repr(other.ring):
            raise WittError("coefficient rings differ")
        if len(self) != len(other):
            raise LengthMismatch(f"lengths differ: {len(self)} vs {len(other)}")

    def _binop(self, other, op):
        self._check(other)
        ctx = self.ring.lift_context(len(self))
        if ctx is not None:
            comps = _witt_op_via_lift(ctx, self.components, other.components, op)
            return WittVector(self.ring, comps)
        table = get_table(self.ring.p, len(self))
        args = self.components + other.components
        if op == "add":
            polys = table.sums
        elif op == "mul":
            polys = table.products
        elif op == "sub":
            other = -other
            return self._binop(other, "add")
        else:
            raise ValueError(op)
        return WittVector(self.ring, tuple(q.eval(self.ring, args) for q in polys))

    def __add__(self, other):
        return self._binop(other, "add")

    def __sub__(self, other):
        return self._binop(other, "sub")

    def __mul__(self, other):
        return self._binop(other, "mul")

    def __neg__(self):
        ctx = self.ring.lift_context(len(self))
        if ctx is not None:
            comps = _witt_op_via_lift(ctx, self.components, None, "neg")
            return WittVector(self.ring, comps)
        table = get_table(self.ring.p, len(self))
        return WittVector(self.ring, tuple(q.eval(self.ring, self.components) for q in table.negations))

    def scale_int(self, n: int):
        """n * w for an integer n, via the ring's Witt structure."""
        if n == 0:
            return WittVector.zero(self.ring, len(self))
        out = None
        base = self if n > 0 else -self
        n = abs(n)
        while n:
            if n & 1:
                out = base if out is None else out + base
            n >>= 1
            if n:
                base = base + base
        return out

    def ghost(self):
        return ghost_map(self)

    def verschiebung(self):
        return WittVector(self.ring, (self.ring.zero(),) + self.components[:-1])

    def frobenius(self):
        """Witt Frobenius; componentwise p-th power on char-p coefficients."""
        return WittVector(self.ring, tuple(self.ring.char_p_power(a) for a in self.components))

    def __eq__(self, other):
        if not isinstance(other, WittVector):
            return NotImplemented
        return len(self) == len(other) and all(
            self.ring.eq(a, b) for a, b in zip(self.components, other.components)
        )

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"W({', '.join(map(repr, self.components))})"


def witt_arith(a: WittVector, b: WittVector, op: str) -> WittVector:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "sub":
        return a - b
    raise ValueError(f"unknown operation {op!r}")


def frobenius_verschiebung(w: WittVector, which: str) -> WittVector:
    if which == "F":
        return w.frobenius()
    if which == "V":
        return w.verschiebung()
    raise ValueError(f"unknown operator {which!r}")
