"""Independent oracle for the frozen constants in the test suite.

Uses sympy for symbolic substitution and mpmath for high-precision quadrature;
nothing here imports tensionlab.  Run with ``python3 tools/derive_oracles.py``.
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 40
x, y = sp.symbols("x y", real=True)
z = x + sp.I * y


def d_z(F):
    return (sp.diff(F, x) - sp.I * sp.diff(F, y)) / 2


def d_zbar(F):
    return (sp.diff(F, x) + sp.I * sp.diff(F, y)) / 2


def show(name, value):
    print(f"{name} = {value}")


# log-cosh strip map into exp_x (log rho = 2 Re w, lambda = 1)
u = sp.log(sp.cosh(x))
f = u + sp.I * y
T = d_z(d_zbar(f)) + 1 * d_z(f) * d_zbar(f)
show("tanh tension", sp.simplify(T.rewrite(sp.exp)))
rho_f = sp.exp(2 * sp.re(f))
Phi = rho_f * d_z(f) * sp.conjugate(d_zbar(f))
show("tanh hopf (rho^1)", sp.simplify(Phi.rewrite(sp.exp)))
Phi2 = rho_f ** 2 * d_z(f) * sp.conjugate(d_zbar(f))
show("tanh hopf (rho^2) dzbar at x=1", sp.N(sp.Abs(d_zbar(Phi2)).subs(x, 1), 15))
show("tanh mu", sp.simplify((d_zbar(f) / d_z(f)).rewrite(sp.exp)))
show("tanh sigma2", sp.simplify((rho_f * sp.Abs(d_z(f)) ** 2).rewrite(sp.exp)))
hmap = sp.exp(2 * z) / 8 - sp.conjugate(z) / 4
show("companion h_z - Psi", sp.simplify(d_z(hmap) - sp.exp(2 * z) / 4))
show("companion h_zbar - conj(Phi)", sp.simplify(d_zbar(hmap) + sp.Rational(1, 4)))

# inverse-map equation residual R = mu_w - conj(mu) mu_wbar - s mu (lam + conj(mu) conj(lam))
a = sp.Rational(3, 10)


def residual(mu, lam, s):
    return d_z(mu) - sp.conjugate(mu) * d_zbar(mu) - s * mu * (lam + sp.conjugate(mu) * sp.conjugate(lam))


pt = {x: sp.Rational(3, 10), y: sp.Rational(1, 5)}
for s in (1, -1):
    # exp_x family (v = 2 Im w), exp_y literal and derived coefficients (v = -Re w)
    show(f"s={s} exp_x family", sp.N(sp.Abs(residual(a * sp.exp(s * sp.I * 2 * y), 1, s)).subs(pt), 20))
    show(f"s={s} exp_y literal", sp.N(sp.Abs(residual(a * sp.exp(sp.I * x / 2), -sp.I / 2, s)).subs(pt), 20))
    show(f"s={s} exp_y derived", sp.N(sp.Abs(residual(a * sp.exp(-s * sp.I * x), -sp.I / 2, s)).subs(pt), 20))

# real-coefficient example, A = 1 + c e^{k x}, mu = sqrt(A^2 - 1) - A
c = sp.Integer(1)
for k in (-1, -2, 2):
    A = 1 + c * sp.exp(k * x)
    mu = sp.sqrt(A ** 2 - 1) - A
    for s in (1, -1):
        r = sp.Abs(residual(mu, 1, s)).subs(x, sp.Rational(1, 2))
        show(f"k={k} s={s} residual/|mu(1+mu)| at x=1/2",
             sp.N(r / sp.Abs(mu * (1 + mu)).subs(x, sp.Rational(1, 2)), 20))
mu0 = (sp.sqrt(3) - 2)
show("mu(0)", sp.N(mu0, 20))
show("u'(0)", sp.N((1 + mu0) / (1 - mu0), 20))


def uprime(t):
    t = mp.mpf(t)
    T = mp.e ** (-t)
    s = mp.sqrt(T * (2 + T))
    return (s + T) / (s + T + 2)


show("u(20)", mp.quad(uprime, [0, 5, 20]))
show("u(40)", mp.quad(uprime, [0, 5, 20, 40]))
show("u(40) - u(20)", mp.quad(uprime, [20, 40]))
show("u(inf)", mp.quad(uprime, [0, 5, 20, mp.inf]))
show("u'(-20)", uprime(-20))
show("u'(20)/(sqrt(1/2) e^-10)", uprime(20) / (mp.sqrt(0.5) * mp.e ** -10))

# explicit exp_x family member, tension sign: g = w + log(1 + alpha e^{-2 i Im w})
alpha = mp.mpf("0.3")


def g(w):
    return w + mp.log(1 + alpha * mp.e ** (-2j * mp.im(w)))


g0, g1 = g(0), g(1)
for w in (mp.mpc(0.4, 0.3), mp.mpc(-0.7, 0.9)):
    show(f"normalised g({w})", (g(w) - g0) / (g1 - g0))

# distances
show("log 3", mp.log(3))
t = mp.mpf(1) / 2
show("hyperbolic(0, 1/2)", mp.log((1 + t) / (1 - t)))
