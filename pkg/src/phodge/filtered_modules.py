"""Filtered (phi,N)-modules: invariants, polygons, weak admissibility.

All arithmetic is exact: matrix entries are rationals (the sigma-semilinear
Frobenius acts through them unchanged, since sigma fixes Q), slopes are
Fractions, and the admissibility checker only ever returns a verdict it can
certify -- Inconclusive is an explicit outcome, never a guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from phodge.padic import vp_fraction


class FilteredModuleError(Exception):
    pass


class CoefficientMismatch(FilteredModuleError):
    pass


class GaloisUnsupported(FilteredModuleError):
    pass


class NotNormalized(FilteredModuleError):
    pass


# ----------------------------------------------------------------------
# exact linear algebra over Q (small dense matrices)


def mat_mul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)) for i in range(n)
    )


def mat_vec(a, v):
    return tuple(sum(a[i][j] * v[j] for j in range(len(v))) for i in range(len(a)))


def mat_add(a, b):
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(a, c):
    return tuple(tuple(c * x for x in row) for row in a)


def identity(n):
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def zero_matrix(n):
    return tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(n))


def mat_pow(a, k):
    out = identity(len(a))
    base = a
    while k:
        if k & 1:
            out = mat_mul(out, base)
        base = mat_mul(base, base)
        k >>= 1
    return out


def rref(rows):
    """Reduced row echelon form; returns (rows, pivots)."""
    m = [list(r) for r in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(m)):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = m[r][c]
        m[r] = [x / inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(vectors) -> int:
    return len(rref(vectors)[0])


def subspace_contains(basis, v) -> bool:
    return rank(list(basis) + [v]) == rank(basis)


def intersect_dim(basis_a, basis_b) -> int:
    ra, rb = rank(basis_a), rank(basis_b)
    return ra + rb - rank(list(basis_a) + list(basis_b))


def intersection_basis(basis_a, basis_b):
    """Basis of span(a) n span(b) via the kernel of the stacked system."""
    if not basis_a or not basis_b:
        return []
    n = len(basis_a[0])
    # columns: vectors of a then vectors of b; kernel rows give relations
    cols = list(basis_a) + [tuple(-x for x in v) for v in basis_b]
    mat = [[cols[j][i] for j in range(len(cols))] for i in range(n)]
    ker = kernel_basis(mat)
    out = []
    for rel in ker:
        vec = tuple(
            sum(rel[j] * basis_a[j][i] for j in range(len(basis_a))) for i in range(n)
        )
        if any(x != 0 for x in vec):
            out.append(vec)
    reduced, _ = rref(out)
    return [tuple(r) for r in reduced]


def kernel_basis(mat):
    """Right kernel of a matrix given as list of rows."""
    if not mat:
        return []
    ncols = len(mat[0])
    reduced, pivots = rref(mat)
    free = [c for c in range(ncols) if c not in pivots]
    out = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -reduced[r][fc]
        out.append(tuple(v))
    return out


def mat_inv(a):
    n = len(a)
    m = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    red, piv = rref(m)
    if len(piv) < n or piv[:n] != list(range(n)):
        raise FilteredModuleError("matrix is singular")
    return tuple(tuple(red[i][n:]) for i in range(n))


def det(a):
    n = len(a)
    m = [list(row) for row in a]
    out = Fraction(1)
    for c in range(n):
        piv = None
        for r in range(c, n):
            if m[r][c] != 0:
                piv = r
                break
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            out = -out
        out *= m[c][c]
        inv = m[c][c]
        for r in range(c + 1, n):
            if m[r][c] != 0:
                f = m[r][c] / inv
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return out


def charpoly(a):
    """Monic characteristic polynomial, coefficients [1, c1, ..., ch]
    with det(XI - A) = X^h + c1 X^(h-1) + ... + ch (Faddeev-LeVerrier)."""
    n = len(a)
    coeffs = [Fraction(1)]
    m = zero_matrix(n)
    c = Fraction(1)
    for k in range(1, n + 1):
        m = mat_mul(a, mat_add(m, mat_scale(identity(n), c)))
        c = -Fraction(sum(m[i][i] for i in range(n)), k)
        coeffs.append(c)
    return coeffs


# ----------------------------------------------------------------------
# polygons


@dataclass(frozen=True)
class Polygon:
    """Lower-convex polygon from (0,0) to (h, total), vertices at slope changes."""

    vertices: tuple

    @classmethod
    def from_slopes(cls, slopes) -> "Polygon":
        slopes = sorted(Fraction(s) for s in slopes)
        verts = [(0, Fraction(0))]
        x, y = 0, Fraction(0)
        i = 0
        while i < len(slopes):
            j = i
            while j < len(slopes) and slopes[j] == slopes[i]:
                j += 1
            x += j - i
            y += slopes[i] * (j - i)
            verts.append((x, y))
            i = j
        return cls(tuple(verts))

    @property
    def endpoint(self):
        return self.vertices[-1]

    def slopes(self):
        out = []
        for (x1, y1), (x2, y2) in zip(self.vertices, self.vertices[1:]):
            s = Fraction(y2 - y1, x2 - x1)
            out.extend([s] * (x2 - x1))
        return out

    def is_convex(self) -> bool:
        ss = []
        for (x1, y1), (x2, y2) in zip(self.vertices, self.vertices[1:]):
            ss.append(Fraction(y2 - y1, x2 - x1))
        return all(a < b for a, b in zip(ss, ss[1:]))

    def lies_above(self, other: "Polygon") -> bool:
        """self on or above other at every integer abscissa (same span)."""
        mine = dict(self._points())
        theirs = dict(other._points())
        return all(mine[x] >= theirs[x] for x in theirs if x in mine)

    def _points(self):
        pts = []
        for (x1, y1), (x2, y2) in zip(self.vertices, self.vertices[1:]):
            s = Fraction(y2 - y1, x2 - x1)
            for x in range(x1, x2):
                pts.append((x, y1 + s * (x - x1)))
        pts.append(self.vertices[-1])
        return pts

    def to_json(self):
        return [[x, _frac_json(y)] for x, y in self.vertices]


def newton_slopes(coeffs, p):
    """Root valuations of a monic polynomial from its Newton polygon.

    coeffs = [1, c1, ..., ch] with ci the coefficient of X^(h-i)."""
    h = len(coeffs) - 1
    pts = []
    for i in range(h + 1):
        a = coeffs[h - i]  # coefficient of X^i
        v = vp_fraction(a, p)
        if v is not None:
            pts.append((i, Fraction(v)))
    # lower convex hull, left to right
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    slopes = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        s = Fraction(y1 - y2, x2 - x1)
        slopes.extend([s] * (x2 - x1))
    slopes.sort()
    return slopes


# ----------------------------------------------------------------------
# the module type


def _frac_json(q):
    q = Fraction(q)
    return int(q) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _frac_from_json(obj, p=None):
    if isinstance(obj, bool):
        raise FilteredModuleError("boolean is not a matrix entry")
    if isinstance(obj, int):
        return Fraction(obj)
    if isinstance(obj, str):
        return Fraction(obj)
    if isinstance(obj, dict):
        # PadicNumber record: exact representative p^v * digits
        digits = obj["digits"]
        p0 = obj["p"]
        unit = sum(d * p0**i for i, d in enumerate(digits))
        return Fraction(p0) ** obj["valuation"] * unit
    raise FilteredModuleError(f"cannot parse matrix entry {obj!r}")


@dataclass(frozen=True)
class FilteredPhiNModule:
    """A filtered (phi,N)-module over L0 = Q_q given by rational matrices.

    The filtration is a step flag: pairs (jump, basis) with basis a tuple of
    spanning vectors for Fil^jump; Fil is full below the first listed jump,
    constant between listed jumps, and zero above the last one.
    """

    p: int
    f: int
    h: int
    phi: tuple
    nmat: tuple
    filtration: tuple  # ((jump, (vec, ...)), ...) sorted by jump
    galois: tuple = ()

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, p, h, phi, nmat=None, filtration=(), f=1, galois=()):
        phi = tuple(tuple(Fraction(x) for x in row) for row in phi)
        nmat = (
            tuple(tuple(Fraction(x) for x in row) for row in nmat)
            if nmat is not None
            else zero_matrix(h)
        )
        fil = []
        for jump, basis in filtration:
            fil.append((int(jump), tuple(tuple(Fraction(x) for x in v) for v in basis)))
        fil.sort(key=lambda t: t[0])
        gal = tuple(tuple(tuple(Fraction(x) for x in row) for row in g) for g in galois)
        return cls(p=p, f=f, h=h, phi=phi, nmat=nmat, filtration=tuple(fil), galois=gal)

    # -- filtration как step function ---------------------------------------

    def fil_basis(self, i: int):
        """Spanning vectors of Fil^i: full below the first listed jump, the
        last listed basis at or below i in between, zero above the last."""
        if not self.filtration:
            return tuple(identity(self.h)) if i <= 0 else ()
        if i < self.filtration[0][0]:
            return tuple(identity(self.h))
        if i > self.filtration[-1][0]:
            return ()
        out = self.filtration[0][1]
        for jump, b in self.filtration:
            if jump <= i:
                out = b
            else:
                break
        return out

    def fil_dim(self, i: int) -> int:
        return rank(self.fil_basis(i))

    def jump_range(self):
        if not self.filtration:
            return 0, 0
        return self.filtration[0][0], self.filtration[-1][0]

    def graded_dims(self):
        """(i, dim gr^i) over the support of the filtration."""
        lo, hi = self.jump_range()
        out = []
        for i in range(lo, hi + 1):
            d = self.fil_dim(i) - self.fil_dim(i + 1)
            if d:
                out.append((i, d))
        if not self.filtration:
            out.append((0, self.h))
        return out

    # -- serialization -----------------------------------------------------

    def to_json(self):
        out = {
            "p": self.p,
            "f": self.f,
            "h": self.h,
            "phi": [[_frac_json(x) for x in row] for row in self.phi],
            "N": [[_frac_json(x) for x in row] for row in self.nmat],
            "filtration": [
                {"jump": j, "basis": [[_frac_json(x) for x in v] for v in b]}
                for j, b in self.filtration
            ],
        }
        if self.galois:
            out["galois"] = [[[_frac_json(x) for x in row] for row in g] for g in self.galois]
        return out

    @classmethod
    def from_json(cls, obj) -> "FilteredPhiNModule":
        for key in ("p", "h", "phi", "N", "filtration"):
            if key not in obj:
                raise FilteredModuleError(f"missing field {key!r} in filtered module payload")
        h = obj["h"]
        phi = [[_frac_from_json(x) for x in row] for row in obj["phi"]]
        nmat = [[_frac_from_json(x) for x in row] for row in obj["N"]]
        fil = [
            (e["jump"], [[_frac_from_json(x) for x in v] for v in e["basis"]])
            for e in obj["filtration"]
        ]
        gal = [
            [[_frac_from_json(x) for x in row] for row in g] for g in obj.get("galois", [])
        ]
        return cls.build(obj["p"], h, phi, nmat, fil, f=obj.get("f", 1), galois=gal)


# ----------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple


def validate(D: FilteredPhiNModule) -> ValidationReport:
    fails = []
    h = D.h
    if len(D.phi) != h or any(len(r) != h for r in D.phi):
        fails.append("phi matrix is not h x h")
    if len(D.nmat) != h or any(len(r) != h for r in D.nmat):
        fails.append("N matrix is not h x h")
    if fails:
        return ValidationReport(False, tuple(fails))
    if det(D.phi) == 0:
        fails.append("phi is not bijective (determinant zero)")
    np_mat = mat_mul(D.nmat, D.phi)
    pn_mat = mat_scale(mat_mul(D.phi, D.nmat), Fraction(D.p))
    if np_mat != pn_mat:
        fails.append("N phi != p phi N")
    if mat_pow(D.nmat, h) != zero_matrix(h):
        fails.append("N is not nilpotent")
    # filtration: nested flag, weakly decreasing dims, exhaustive, separated
    prev_basis = None
    prev_dim = h + 1
    for jump, basis in D.filtration:
        dmB = rank(basis)
        if len(basis) and any(len(v) != h for v in basis):
            fails.append(f"filtration basis at jump {jump} has wrong vector length")
            continue
        if dmB != len(basis):
            fails.append(f"filtration basis at jump {jump} is linearly dependent")
        if dmB > prev_dim:
            fails.append(f"filtration dimensions increase at jump {jump}")
        if prev_basis is not None:
            if rank(list(prev_basis) + list(basis)) != rank(prev_basis):
                fails.append(f"filtration step at jump {jump} is not nested")
        prev_basis, prev_dim = basis, dmB
    for g in D.galois:
        if mat_mul(g, D.phi) != mat_mul(D.phi, g):
            fails.append("a Galois matrix does not commute with phi")
        if mat_mul(g, D.nmat) != mat_mul(D.nmat, g):
            fails.append("a Galois matrix does not commute with N")
    return ValidationReport(not fails, tuple(fails))


# ----------------------------------------------------------------------
# invariants


def linearized_frobenius(D: FilteredPhiNModule):
    """Matrix of phi^f, which is L0-linear (entries are rational, sigma-fixed)."""
    return mat_pow(D.phi, D.f)


def tN(D: FilteredPhiNModule) -> Fraction:
    """Newton number: v_p(det of the f-fold linearization) / f."""
    d = det(linearized_frobenius(D))
    if d == 0:
        raise FilteredModuleError("phi is not bijective")
    return Fraction(vp_fraction(d, D.p), D.f)


def tH(D: FilteredPhiNModule) -> int:
    """Hodge number: sum of i * dim gr^i."""
    return sum(i * d for i, d in D.graded_dims())


def newton_polygon(D: FilteredPhiNModule) -> Polygon:
    coeffs = charpoly(linearized_frobenius(D))
    slopes = [s / D.f for s in newton_slopes(coeffs, D.p)]
    return Polygon.from_slopes(slopes)


def hodge_polygon(D: FilteredPhiNModule) -> Polygon:
    jumps = []
    for i, d in D.graded_dims():
        jumps.extend([Fraction(i)] * d)
    return Polygon.from_slopes(jumps)


def polygons(D: FilteredPhiNModule):
    return newton_polygon(D), hodge_polygon(D)


def tate_twist(D: FilteredPhiNModule, i: int) -> FilteredPhiNModule:
    """phi -> p^(-i) phi, filtration jumps shifted by -i."""
    phi = mat_scale(D.phi, Fraction(1, D.p**i) if i >= 0 else Fraction(D.p ** (-i)))
    fil = tuple((j - i, b) for j, b in D.filtration)
    return FilteredPhiNModule(
        p=D.p, f=D.f, h=D.h, phi=phi, nmat=D.nmat, filtration=fil, galois=D.galois
    )


def direct_sum(D1: FilteredPhiNModule, D2: FilteredPhiNModule) -> FilteredPhiNModule:
    if (D1.p, D1.f) != (D2.p, D2.f):
        raise CoefficientMismatch("summands live over different coefficient fields")
    h = D1.h + D2.h
    z1, z2 = D1.h, D2.h

    def block(a, b):
        out = []
        for i in range(z1):
            out.append(tuple(a[i]) + tuple(Fraction(0) for _ in range(z2)))
        for i in range(z2):
            out.append(tuple(Fraction(0) for _ in range(z1)) + tuple(b[i]))
        return tuple(out)

    def pad1(v):
        return tuple(v) + tuple(Fraction(0) for _ in range(z2))

    def pad2(v):
        return tuple(Fraction(0) for _ in range(z1)) + tuple(v)

    jumps = sorted(
        set([j for j, _ in D1.filtration] + [j for j, _ in D2.filtration])
    )
    fil = []
    for j in jumps:
        basis = [pad1(v) for v in D1.fil_basis(j)] + [pad2(v) for v in D2.fil_basis(j)]
        fil.append((j, tuple(basis)))
    return FilteredPhiNModule(
        p=D1.p,
        f=D1.f,
        h=h,
        phi=block(D1.phi, D2.phi),
        nmat=block(D1.nmat, D2.nmat),
        filtration=tuple(fil),
        galois=(),
    )


def conjugate(D: FilteredPhiNModule, M) -> FilteredPhiNModule:
    """Base change by M (new coordinates v' = M^-1 v); all invariants unchanged."""
    M = tuple(tuple(Fraction(x) for x in row) for row in M)
    Minv = mat_inv(M)
    phi = mat_mul(Minv, mat_mul(D.phi, M))
    nmat = mat_mul(Minv, mat_mul(D.nmat, M))
    fil = tuple(
        (j, tuple(tuple(mat_vec(Minv, v)) for v in b)) for j, b in D.filtration
    )
    return FilteredPhiNModule(
        p=D.p, f=D.f, h=D.h, phi=phi, nmat=nmat, filtration=fil, galois=D.galois
    )


# ----------------------------------------------------------------------
# weak admissibility


@dataclass(frozen=True)
class SubspaceWitness:
    basis: tuple
    tH: Fraction
    tN: Fraction
    description: str = ""


@dataclass(frozen=True)
class AdmissibilityVerdict:
    status: str  # "admissible" | "not_admissible" | "inconclusive"
    witness: SubspaceWitness | None = None
    reason: str = ""
    checked: int = 0
    sampled: int = 0

    @property
    def is_admissible(self):
        return self.status == "admissible"


def induced_tH(D: FilteredPhiNModule, basis) -> int:
    """Hodge number of the sub with the induced filtration dim(V n Fil^i)."""
    lo, hi = D.jump_range()
    total = 0
    prev = intersect_dim(basis, D.fil_basis(lo))
    for i in range(lo, hi + 1):
        nxt = intersect_dim(basis, D.fil_basis(i + 1))
        total += i * (prev - nxt)
        prev = nxt
    return total


def sub_tN(D: FilteredPhiNModule, basis) -> Fraction:
    """Newton number of the phi-stable subspace spanned by basis."""
    # restrict linearized phi to the subspace and take v_p(det)/f
    lin = linearized_frobenius(D)
    rows, piv = rref(basis)
    k = len(rows)
    imgs = [mat_vec(lin, tuple(r)) for r in rows]
    # coordinates of the images in the row-reduced basis
    restr = []
    for img in imgs:
        coords = []
        residual = list(img)
        for r_i, pc in enumerate(piv):
            c = residual[pc]
            coords.append(c)
            if c:
                residual = [x - c * y for x, y in zip(residual, rows[r_i])]
        if any(x != 0 for x in residual):
            raise FilteredModuleError("subspace is not phi-stable")
        restr.append(tuple(coords))
    d = det(tuple(restr)) if k else Fraction(1)
    if d == 0:
        raise FilteredModuleError("phi restricted to the subspace is singular")
    return Fraction(vp_fraction(d, D.p), D.f)


def _is_stable(mat, basis) -> bool:
    return all(subspace_contains(basis, mat_vec(mat, v)) for v in basis)


def _qp_square(a: Fraction, p: int) -> bool:
    """Exact test: is the nonzero rational a a square in Q_p?"""
    v = vp_fraction(a, p)
    if v % 2:
        return False
    u = a / Fraction(p) ** v
    num, den = u.numerator, u.denominator
    if p != 2:
        un = num * pow(den, -1, p) % p
        return pow(un, (p - 1) // 2, p) == 1
    un = num * pow(den, -1, 8) % 8
    return un == 1


def _eigenline(phi, lam):
    """A rational eigenvector for a rational eigenvalue of a 2x2 or larger matrix."""
    h = len(phi)
    m = [[phi[i][j] - (lam if i == j else 0) for j in range(h)] for i in range(h)]
    ker = kernel_basis(m)
    return ker


def _irrational_line_nstable(phi, nmat, g_coeffs) -> bool:
    """For an irreducible-over-Q quadratic g with roots l, is the eigenline of
    l stable under N?  Decided exactly in Q[l]/(g); the answer is shared by
    both conjugate lines."""
    # g = x^2 + b x + c
    b, c = g_coeffs[1], g_coeffs[2]
    a11, a12 = phi[0][0], phi[0][1]
    a21, a22 = phi[1][0], phi[1][1]
    # eigenvector: (a12, l - a11) if a12 != 0 else (l - a22, a21)
    # elements of Q[l] are pairs (u0, u1) for u0 + u1*l, with l^2 = -b l - c
    def q_mul(x, y):
        u0, u1 = x
        w0, w1 = y
        quad = u1 * w1
        return (u0 * w0 - c * quad, u0 * w1 + u1 * w0 - b * quad)

    if a12 != 0:
        v = ((a12, Fraction(0)), (-a11, Fraction(1)))
    elif a21 != 0:
        v = ((-a22, Fraction(1)), (a21, Fraction(0)))
    else:
        return False  # diagonal rational matrix cannot have irrational eigenvalues
    nv = (
        (
            nmat[0][0] * v[0][0] + nmat[0][1] * v[1][0],
            nmat[0][0] * v[0][1] + nmat[0][1] * v[1][1],
        ),
        (
            nmat[1][0] * v[0][0] + nmat[1][1] * v[1][0],
            nmat[1][0] * v[0][1] + nmat[1][1] * v[1][1],
        ),
    )
    # N v parallel to v  <=>  det([Nv, v]) = 0 in Q[l]
    d = tuple(
        x - y
        for x, y in zip(q_mul(nv[0], v[1]), q_mul(nv[1], v[0]))
    )
    return d[0] == 0 and d[1] == 0


def _factor_charpoly(coeffs):
    """Irreducible factors over Q of a monic rational polynomial.

    Returns a list of (coeff list [1, ...], multiplicity)."""
    x = sympy.symbols("x")
    poly = sum(sympy.Rational(c.numerator, c.denominator) * x ** (len(coeffs) - 1 - i)
               for i, c in enumerate(coeffs))
    _, factors = sympy.factor_list(sympy.Poly(poly, x))
    out = []
    for fac, mult in factors:
        fp = sympy.Poly(fac, x)
        cs = [Fraction(str(c)) for c in fp.all_coeffs()]
        lead = cs[0]
        cs = [c / lead for c in cs]
        out.append((cs, mult))
    return out


def _poly_eval_matrix(coeffs, mat):
    """Evaluate a monic polynomial (coefficient list, leading first) at a matrix."""
    h = len(mat)
    out = zero_matrix(h)
    for c in coeffs:
        out = mat_add(mat_mul(out, mat), mat_scale(identity(h), c))
    return out


def is_weakly_admissible(D: FilteredPhiNModule, sample: int = 0, rng=None) -> AdmissibilityVerdict:
    """Check t_H = t_N and t_H(D') <= t_N(D') over phi,N-stable subspaces.

    Strategy ladder: h <= 2 exactly via the classification of stable lines;
    then squarefree characteristic polynomials whose irreducible factors are
    certified Q_p-atomic (degree 1, slope denominator = degree, or quadratic
    with a non-square discriminant); otherwise the rational sub-lattice is
    still searched -- a violation is a definite NotAdmissible -- but a clean
    pass is only reported as Inconclusive.
    """
    for g in D.galois:
        if g != identity(D.h):
            raise GaloisUnsupported("admissibility checking requires trivial Galois data")
    th, tn = Fraction(tH(D)), tN(D)
    if th != tn:
        return AdmissibilityVerdict(
            "not_admissible",
            witness=SubspaceWitness(tuple(identity(D.h)), th, tn, "the module itself"),
            reason=f"t_H = {th} differs from t_N = {tn}",
        )
    if D.h == 1:
        return AdmissibilityVerdict("admissible", checked=1)
    if D.f > 1:
        return AdmissibilityVerdict(
            "inconclusive",
            reason="stable-subspace enumeration over residue degree f > 1 is not implemented",
        )
    if D.h == 2:
        return _check_rank2(D, th, tn)
    return _check_general(D, th, tn, sample=sample, rng=rng)


def _line_violation(D, basis, slope, description):
    th_sub = Fraction(induced_tH(D, basis))
    if th_sub > slope:
        return SubspaceWitness(tuple(basis), th_sub, slope, description)
    return None


def _check_rank2(D, th, tn) -> AdmissibilityVerdict:
    phi, nmat, p = D.phi, D.nmat, D.p
    coeffs = charpoly(phi)
    disc = coeffs[1] ** 2 - 4 * coeffs[2]
    checked = 0
    n_zero = D.nmat == zero_matrix(2)

    def finish(witness):
        if witness:
            return AdmissibilityVerdict("not_admissible", witness=witness)
        return AdmissibilityVerdict("admissible", checked=checked)

    if disc == 0:
        lam = -coeffs[1] / 2
        scalar = phi == mat_scale(identity(2), lam)
        slope = Fraction(vp_fraction(lam, p))
        if scalar and n_zero:
            # every line is stable; the worst line sits in the deepest step
            hi = max((j for j, b in D.filtration if rank(b) >= 1), default=None)
            checked += 1
            if hi is not None and Fraction(hi) > slope:
                basis = [v for v in D.fil_basis(hi)][:1]
                return finish(SubspaceWitness(tuple(basis), Fraction(hi), slope, "line in the deepest step"))
            return finish(None)
        if scalar:
            lines = [ker for ker in [kernel_basis(nmat)] if ker]
        else:
            lines = [k for k in [_eigenline(phi, lam)] if k]
        for basis in lines:
            if not _is_stable(nmat, basis):
                continue
            checked += 1
            w = _line_violation(D, basis, slope, "repeated-eigenvalue line")
            if w:
                return finish(w)
        return finish(None)
    # distinct eigenvalues
    sq = sympy.sqrt(sympy.Rational(disc.numerator, disc.denominator))
    if sq.is_rational:
        r = Fraction(str(sq))
        for lam in ((-coeffs[1] + r) / 2, (-coeffs[1] - r) / 2):
            basis = _eigenline(phi, lam)
            if not basis or not _is_stable(nmat, basis):
                continue
            checked += 1
            w = _line_violation(D, basis, Fraction(vp_fraction(lam, p)), f"eigenline for {lam}")
            if w:
                return finish(w)
        return finish(None)
    # irrational over Q: the two roots lie in Q_p iff the polygon is broken
    # or the (slope-balanced) discriminant is a p-adic square
    slopes = newton_slopes(coeffs, p)
    split = slopes[0] != slopes[1] or _qp_square(disc, p)
    if not split:
        return AdmissibilityVerdict("admissible", checked=checked, reason="no stable lines")
    if not _irrational_line_nstable(phi, nmat, coeffs):
        return AdmissibilityVerdict("admissible", checked=checked, reason="irrational lines are not N-stable")
    # an irrational line lies in no proper rational subspace, so its induced
    # Hodge number is the top jump at which Fil is still everything
    full_top = max((j for j, b in D.filtration if rank(b) == 2), default=None)
    lo, _ = D.jump_range()
    th_line = Fraction(full_top if full_top is not None else min(lo, 0))
    if not D.filtration:
        th_line = Fraction(0)
    for s in slopes:
        checked += 1
        if th_line > s:
            return AdmissibilityVerdict(
                "not_admissible",
                witness=SubspaceWitness((), th_line, s, "irrational eigenline (basis not rational)"),
            )
    return AdmissibilityVerdict("admissible", checked=checked)


def _check_general(D, th, tn, sample=0, rng=None) -> AdmissibilityVerdict:
    phi, p = D.phi, D.p
    lin = linearized_frobenius(D)
    coeffs = charpoly(lin)
    factors = _factor_charpoly(coeffs)
    squarefree = all(m == 1 for _, m in factors)
    atoms = []
    complete = squarefree
    notes = []
    for fac, mult in factors:
        if mult > 1:
            notes.append("characteristic polynomial is not squarefree")
            continue
        deg = len(fac) - 1
        basis = kernel_basis(_poly_eval_matrix(fac, lin))
        slopes = newton_slopes(fac, p)
        if deg == 1:
            atoms.append((basis, sum(slopes), f"eigenvalue {-fac[1]}"))
            continue
        pure = all(s == slopes[0] for s in slopes)
        if pure and slopes[0].denominator == deg:
            atoms.append((basis, sum(slopes), "totally-ramified irreducible factor"))
            continue
        if pure and deg == 2:
            disc = fac[1] ** 2 - 4 * fac[2]
            if not _qp_square(disc, p):
                atoms.append((basis, sum(slopes), "inert quadratic factor"))
                continue
        complete = False
        notes.append(f"factor of degree {deg} not certified Q_p-atomic")
        atoms.append((basis, sum(slopes), f"rational kernel of a degree-{deg} factor"))
    # enumerate subset sums of atoms, filter N-stability, check each
    checked = 0
    n = len(atoms)
    for mask in range(1, 2**n - (1 if complete else 0)):
        basis = []
        slope_sum = Fraction(0)
        desc = []
        for i in range(n):
            if mask >> i & 1:
                basis.extend(atoms[i][0])
                slope_sum += atoms[i][1]
                desc.append(atoms[i][2])
        if len(basis) == D.h:
            continue  # the whole module is condition (a)
        if not _is_stable(D.nmat, basis):
            continue
        checked += 1
        th_sub = Fraction(induced_tH(D, basis))
        if th_sub > slope_sum:
            return AdmissibilityVerdict(
                "not_admissible",
                witness=SubspaceWitness(tuple(basis), th_sub, slope_sum, " + ".join(desc)),
                checked=checked,
            )
    sampled = 0
    if not complete and sample and rng is not None:
        for _ in range(sample):
            v = tuple(Fraction(rng.randint(-9, 9)) for _ in range(D.h))
            if all(x == 0 for x in v):
                continue
            basis = [v]
            while True:
                img = mat_vec(lin, basis[-1])
                if subspace_contains(basis, img):
                    break
                basis.append(img)
            if len(basis) == D.h or not _is_stable(D.nmat, basis):
                continue
            if not _is_stable(lin, basis):
                continue
            sampled += 1
            th_sub = Fraction(induced_tH(D, basis))
            try:
                tn_sub = sub_tN(D, basis)
            except FilteredModuleError:
                continue
            if th_sub > tn_sub:
                return AdmissibilityVerdict(
                    "not_admissible",
                    witness=SubspaceWitness(tuple(basis), th_sub, tn_sub, "sampled cyclic subspace"),
                    checked=checked,
                    sampled=sampled,
                )
    if complete:
        return AdmissibilityVerdict("admissible", checked=checked)
    return AdmissibilityVerdict(
        "inconclusive",
        reason="; ".join(sorted(set(notes))) or "enumeration incomplete",
        checked=checked,
        sampled=sampled,
    )


# ----------------------------------------------------------------------
# the dh dimension report


@dataclass(frozen=True)
class DhPair:
    d: Fraction
    h: int

    def __add__(self, other):
        return DhPair(self.d + other.d, self.h + other.h)

    def to_json(self):
        return [_frac_json(self.d), self.h]


@dataclass(frozen=True)
class DhReport:
    vplus0: DhPair
    vplus1: DhPair
    vstar: DhPair | None
    vstar_reason: str = ""

    def to_json(self):
        return {
            "vplus0": self.vplus0.to_json(),
            "vplus1": self.vplus1.to_json(),
            "vstar": None if self.vstar is None else self.vstar.to_json(),
            "vstar_reason": self.vstar_reason,
        }


def dh_report(D: FilteredPhiNModule, verdict: AdmissibilityVerdict | None = None) -> DhReport:
    """Dimension bookkeeping (t_N, h), (t_H, 0) and, for admissible inputs
    with t_H = t_N, the kernel pair (0, h)."""
    if D.fil_dim(0) != D.h:
        raise NotNormalized("apply a Tate twist so that Fil^0 is everything")
    th, tn = Fraction(tH(D)), tN(D)
    vplus0 = DhPair(tn, D.h)
    vplus1 = DhPair(th, 0)
    if th != tn:
        return DhReport(vplus0, vplus1, None, f"t_H - t_N = {th - tn} != 0")
    if verdict is None:
        verdict = is_weakly_admissible(D)
    if verdict.status == "admissible":
        return DhReport(vplus0, vplus1, DhPair(Fraction(0), D.h))
    if verdict.status == "not_admissible":
        return DhReport(
            vplus0, vplus1, None, "condition (b) fails; the kernel pair is not certified"
        )
    return DhReport(vplus0, vplus1, None, f"admissibility inconclusive: {verdict.reason}")
