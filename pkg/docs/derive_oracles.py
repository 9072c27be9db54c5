"""Regenerate the scenario oracle tables from closed-form symbolic geometry.

This script is deliberately independent of the library: it builds each
metric, Killing field and gauge function in sympy, differentiates exactly,
and writes ``src/bundlereduce/scenarios/data/<scenario>.json``.

Run from the repository root::

    python3 docs/derive_oracles.py            # rewrite the tables
    python3 docs/derive_oracles.py --check    # fail if the tables are stale

Conventions: standard curvature sign (unit S^3 has R = +6); the orbit-space
metric is the pull-back of the horizontal metric through the gauge surface.
"""
from __future__ import annotations

import argparse
import itertools
import json
import pathlib
import sys

import sympy as sp

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "bundlereduce" / "scenarios" / "data"


# ---------------------------------------------------------------------------
# symbolic Riemannian geometry
# ---------------------------------------------------------------------------


def christoffel(G, X):
    n = len(X)
    Gi = G.inv()
    return [[[sp.simplify(sum(Gi[c, e] * (sp.diff(G[e, a], X[b]) + sp.diff(G[e, b], X[a]) - sp.diff(G[a, b], X[e]))
                              for e in range(n)) / 2)
              for b in range(n)] for a in range(n)] for c in range(n)]


def scalar_curvature(G, X):
    """Standard ``R = G^{ac} R_ac`` with ``R_ac = d_p Gamma^p_ac - d_c Gamma^p_pa + ...``."""
    n = len(X)
    if n < 2:
        return sp.Integer(0)
    Gm = christoffel(G, X)
    Gi = G.inv()
    R = 0
    for a, c in itertools.product(range(n), repeat=2):
        ric = sum(sp.diff(Gm[p][a][c], X[p]) - sp.diff(Gm[p][p][a], X[c]) for p in range(n))
        ric += sum(Gm[p][p][e] * Gm[e][a][c] - Gm[p][c][e] * Gm[e][p][a] for p in range(n) for e in range(n))
        R += Gi[a, c] * ric
    return sp.simplify(R)


class U1Bundle:
    """Abelian one-dimensional symmetry: all reduction objects in closed form."""

    def __init__(self, G, K, chi, X, surface, x):
        self.G, self.K, self.chi, self.X = G, K, chi, X
        self.surface, self.x = surface, x  # Q*(x): dict X_i -> expr(x)
        n = len(X)
        self.n = n
        self.Gi = G.inv()
        chiQ = sp.Matrix([[sp.diff(chi, X[b]) for b in range(n)]])
        self.gamma = sp.simplify((K.T * G * K)[0, 0])
        Phi = (chiQ * K)[0, 0]
        Lam = chiQ / Phi
        self.N = sp.simplify(sp.eye(n) - K * Lam)
        self.h = sp.simplify(self.N * self.Gi * self.N.T)
        self.A = sp.simplify(K.T * G / self.gamma)
        self.GH = sp.simplify(G - (G * K) * (K.T * G) / self.gamma)

    def at(self, expr, xval):
        sub = {s: v for s, v in zip(self.x, xval)}
        e = expr.subs({X: q for X, q in self.surface.items()}) if self.surface else expr
        return sp.N(sp.simplify(e.subs(sub)), 30)

    def F(self):
        n = self.n
        return sp.Matrix(n, n, lambda e, p: sp.diff(self.A[p], self.X[e]) - sp.diff(self.A[e], self.X[p]))

    def Fsq(self):
        F, h, n = self.F(), self.h, self.n
        return sp.simplify(self.gamma * sum(h[f, b] * h[p, a] * F[p, f] * F[a, b]
                                            for f, b, p, a in itertools.product(range(n), repeat=4)))

    def s(self):
        return [sp.diff(sp.log(self.gamma), X) for X in self.X]

    def jsq(self):
        s, h, n = self.s(), self.h, self.n
        return sp.simplify(sum(h[e, f] * s[e] * s[f] for e in range(n) for f in range(n)) / 4)

    def j_II(self):
        s, h, n = self.s(), self.h, self.n
        return [sp.simplify(sum(h[a, b] * s[b] for b in range(n)) / 4) for a in range(n)]

    def hor_christoffel(self):
        n, X, GH = self.n, self.X, self.GH
        low = [[[(sp.diff(GH[a, c], X[d]) + sp.diff(GH[a, d], X[c]) - sp.diff(GH[c, d], X[a])) / 2
                 for d in range(n)] for c in range(n)] for a in range(n)]
        NGi = self.N * self.Gi
        return [[[sp.simplify(sum(NGi[b, e] * low[e][c][d] for e in range(n))) for d in range(n)]
                 for c in range(n)] for b in range(n)]

    def jtilde_coords(self):
        n, X, N, Gi, h = self.n, self.X, self.N, self.Gi, self.h
        s = self.s()
        HG = self.hor_christoffel()
        J = sum(h[a, e] * s[a] * s[e] for a in range(n) for e in range(n)) / 4
        J += sum(h[a, b] * sp.diff(s[b], X[a]) for a in range(n) for b in range(n))
        for B in range(n):
            v = sum(Gi[c, a] * N[f, a] * sp.diff(N[B, c], X[f]) for c in range(n) for a in range(n) for f in range(n))
            v -= sum(Gi[a, c] * N[e, a] * N[B, m] * HG[m][e][c]
                     for a in range(n) for c in range(n) for e in range(n) for m in range(n))
            J += v * s[B]
        return sp.simplify(J)

    def base_metric(self):
        Qs = sp.Matrix([self.surface.get(X, X) for X in self.X])
        J = Qs.jacobian(sp.Matrix(self.x))
        GH = self.GH.subs(self.surface)
        return sp.simplify(J.T * GH * J)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def row(q, point, value, tol, prov):
    return {"quantity": q, "point": [float(p) for p in point], "value": float(value),
            "tolerance": tol, "provenance": prov}


def u1_table(bundle, points, extra=None, tol=1e-6, curvature_tol=1e-5):
    Rp = scalar_curvature(bundle.G, bundle.X)
    HR = scalar_curvature(bundle.base_metric(), bundle.x)
    Fsq, jsq, Jc = bundle.Fsq(), bundle.jsq(), bundle.jtilde_coords()
    jII = bundle.j_II()
    # cross-check: coordinate integrand equals the curvature form with eps = -1
    geo = sp.simplify(-(Rp - HR) - Fsq / 4 - jsq)
    entries = []
    for x in points:
        chk = bundle.at(Jc - geo, x)
        assert abs(chk) < 1e-20, f"Jtilde routes disagree symbolically at {x}: {chk}"
        entries += [
            row("gamma", x, bundle.at(bundle.gamma, x), 1e-10, "symbolic: gamma = K^T G K"),
            row("R_P", x, bundle.at(Rp, x), curvature_tol, "symbolic coordinate scalar curvature of G"),
            row("HR", x, bundle.at(HR, x), curvature_tol, "symbolic scalar curvature of the pulled-back horizontal metric"),
            row("R_G", x, 0.0, 1e-10, "abelian group: structure constants vanish"),
            row("Fsq", x, bundle.at(Fsq, x), tol, "symbolic curvature of A = gamma^-1 K^T G, contracted with h h gamma"),
            row("jsq", x, bundle.at(jsq, x), tol, "symbolic: |j|^2 = h^{EF} d_E ln(gamma) d_F ln(gamma) / 4"),
            row("Jtilde", x, bundle.at(Jc, x), tol,
                "symbolic coordinate integrand; equals -(R_P - HR) - Fsq/4 - jsq identically"),
        ]
        for a, comp in enumerate(jII):
            entries.append(row(f"j_II[{a}]", x, bundle.at(comp, x), tol, "symbolic: j_II = h d ln(gamma) / 4"))
        if extra:
            for q, expr, prov in extra:
                entries.append(row(q, x, bundle.at(expr, x), tol, prov))
    return {"points": [list(map(float, p)) for p in points], "entries": entries}


def flat_torus():
    x, y, u = sp.symbols("x y u", real=True)
    G, K = sp.eye(2), sp.Matrix([0, 1])
    out = {}
    for name, chi, slope in (("straight", y, 0), ("tilted", y + sp.Rational(3, 10) * x, -sp.Rational(3, 10)),
                             ("scaled", 2 * y, 0)):
        b = U1Bundle(G, K, chi, [x, y], {x: u, y: slope * u}, [u])
        out[name] = u1_table(b, [(0.3,), (1.0,), (2.5,)], tol=1e-8, curvature_tol=1e-8)
    return {"eps_F": -1.0, "variants": out}


def polar_plane():
    r, p, u = sp.symbols("r phi u", positive=True)
    G, K = sp.diag(1, r**2), sp.Matrix([0, 1])
    out = {}
    for name, pitch in (("radial", 0), ("spiral", sp.Rational(2, 5))):
        b = U1Bundle(G, K, p - pitch * r, [r, p], {r: u, p: pitch * u}, [u])
        Gm = christoffel(G, [r, p])
        extra = [("Gamma[0,1,1]", Gm[0][1][1], "symbolic Levi-Civita symbol of diag(1, r^2)"),
                 ("Gamma[1,0,1]", Gm[1][0][1], "symbolic Levi-Civita symbol of diag(1, r^2)")]
        out[name] = u1_table(b, [(0.5,), (1.0,), (2.0,)], extra=extra)
    return {"eps_F": -1.0, "variants": out}


def hopf():
    th, ph, ps = sp.symbols("theta phi psi", real=True)
    u, w = sp.symbols("u w", real=True)
    G = sp.Matrix([[1, 0, 0], [0, 1, sp.cos(th)], [0, sp.cos(th), 1]]) / 4
    K = sp.Matrix([0, 0, 1])
    Gm = christoffel(G, [th, ph, ps])
    extra = [(f"Gamma[{c},{a},{b_}]", Gm[c][a][b_], "symbolic Levi-Civita symbol of the round S^3 metric")
             for c, a, b_ in ((0, 1, 2), (1, 0, 2), (2, 0, 1), (1, 0, 1))]
    out = {}
    for name, tilt in (("fiber", 0), ("tilted", sp.Rational(3, 10))):
        b = U1Bundle(G, K, ps - tilt * sp.sin(th) * sp.cos(ph), [th, ph, ps],
                     {th: u, ph: w, ps: tilt * sp.sin(u) * sp.cos(w)}, [u, w])
        out[name] = u1_table(b, [(1.0, 0.5), (0.7, 2.0), (2.2, 4.0)], extra=extra)
    return {"eps_F": -1.0, "variants": out}


def sphere():
    th, ph, u = sp.symbols("theta phi u", real=True)
    b = U1Bundle(sp.diag(1, sp.sin(th) ** 2), sp.Matrix([0, 1]), ph, [th, ph], {th: u, ph: 0}, [u])
    return {"eps_F": -1.0, "variants": {"polar": u1_table(b, [(0.6,), (1.0,), (2.0,)])}}


def euclidean_r3():
    x, y, z, u, v = sp.symbols("x y z u v", real=True)
    # chi = atan2(y, x), which equals atan(y / x) on the half-space x > 0 containing Sigma
    pts = [(0.5, 0.0), (1.5, 0.3), (2.0, -0.7)]
    b = U1Bundle(sp.eye(3), sp.Matrix([-y, x, 0]), sp.atan(y / x), [x, y, z], {x: u, y: 0, z: v}, [u, v])
    out = {"cartesian": u1_table(b, pts)}
    # helical gauge phi = 0.4 z + 0.3 rho; Sigma stays inside x > 0 for these points
    c = sp.Rational(2, 5) * z + sp.Rational(3, 10) * sp.sqrt(x**2 + y**2)
    cs = sp.Rational(2, 5) * v + sp.Rational(3, 10) * u
    b = U1Bundle(sp.eye(3), sp.Matrix([-y, x, 0]), sp.atan(y / x) - c, [x, y, z],
                 {x: u * sp.cos(cs), y: u * sp.sin(cs), z: v}, [u, v])
    out["helical"] = u1_table(b, pts)
    return {"eps_F": -1.0, "variants": out}


def su2():
    # bi-invariant metric with orthonormal left-invariant frame, c = Levi-Civita symbol:
    # Ric(X, X) = 1/4 sum_i |[X, e_i]|^2, hence R = 1/4 sum_{ijk} (c^k_ij)^2
    eps = lambda i, j, k: sp.LeviCivita(i, j, k)
    R = sp.Rational(1, 4) * sum(eps(i, j, k) ** 2 for i, j, k in itertools.product(range(3), repeat=3))
    prov = "brute-force sum over the structure constants of su(2), R = (1/4) sum (c^k_ij)^2"
    entries = [row("R_P", (), R, 1e-6, prov), row("R_G", (), R, 1e-8, prov),
               row("HR", (), 0, 1e-10, "base is a point"), row("Fsq", (), 0, 1e-10, "base is a point"),
               row("jsq", (), 0, 1e-10, "base is a point"), row("Jtilde", (), 0, 1e-8, "base is a point"),
               row("gamma", (), 1, 1e-10, "orthonormal left-invariant frame")]
    for a, b_ in itertools.product(range(3), repeat=2):
        entries.append(row(f"Ric_G[{a},{b_}]", (), sp.Rational(1, 2) if a == b_ else 0, 1e-10,
                           "Ric(X, Y) = 1/4 sum_i <[X, e_i], [Y, e_i]> for a bi-invariant metric"))
    return {"eps_F": -1.0, "variants": {"exp": {"points": [[]], "entries": entries}}}


TABLES = {
    "flat_torus_u1": flat_torus,
    "polar_plane_u1": polar_plane,
    "hopf_s3": hopf,
    "su2_self": su2,
    "sphere_s2_u1": sphere,
    "euclidean_r3_u1": euclidean_r3,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="compare against the checked-in tables")
    args = ap.parse_args(argv)
    stale = []
    for name, build in TABLES.items():
        doc = build()
        doc = {"scenario": name, **doc}
        text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
        path = DATA / f"{name}.json"
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(name)
        else:
            path.write_text(text)
            print(f"wrote {path}")
    if stale:
        print("stale tables: " + ", ".join(stale))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
