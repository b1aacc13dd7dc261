"""Reference values frozen into the unit tests, computed with mpmath at 40 digits."""
from fractions import Fraction as F

import mpmath as mp

mp.mp.dps = 40


def show(label, x):
    print(f"{label:48s} {mp.nstr(x, 20)}")


print("# regularized lower incomplete gamma P(a, x)")
for a, x in [(0.5, 0.1), (2.5, 1.0), (5, 5), (10, 12), (100, 90), (1e-3, 1e-2), (50, 200), (30, 1e-3), (3.7, 40)]:
    show(f"P({a}, {x})", mp.gammainc(a, 0, x, regularized=True))

print("# log densities")
# normal variance m=1 v=4 at 2.5
show("normal_var(1,4) at 2.5", mp.log(mp.npdf(2.5, 1, 2)))
# normal precision m=-1 vprec=0.25 at 0.5
show("normal_prec(-1,0.25) at 0.5", mp.log(mp.npdf(0.5, -1, 2)))
# gamma shape 3 rate 2 at 0.7
a, b, x = mp.mpf(3), mp.mpf(2), mp.mpf("0.7")
show("gamma(3,2) at 0.7", a * mp.log(b) - mp.loggamma(a) + (a - 1) * mp.log(x) - b * x)
# inverse gamma, kernel x^-(a+1) exp(-1/(b x))
a, b, x = mp.mpf(3), mp.mpf("0.5"), mp.mpf("0.4")
show("invgamma(3,0.5) at 0.4", -a * mp.log(b) - mp.loggamma(a) - (a + 1) * mp.log(x) - 1 / (b * x))
show("invgamma(3,0.5) cdf at 0.4", mp.gammainc(a, 1 / (b * x), mp.inf, regularized=True))
show("gamma(3,2) cdf at 0.7", mp.gammainc(3, 0, 1.4, regularized=True))
show("normal_var(1,4) cdf at 2.5", mp.ncdf(2.5, 1, 2))
# dirichlet d=(2,3,4) at (0.2,0.3,0.5)
d = [2, 3, 4]
p = [mp.mpf("0.2"), mp.mpf("0.3"), mp.mpf("0.5")]
show("dirichlet(2,3,4) at (.2,.3,.5)",
     mp.loggamma(sum(d)) - sum(mp.loggamma(v) for v in d) + sum((v - 1) * mp.log(q) for v, q in zip(d, p)))

print("# forward maps, exact rationals")
# inverse gamma (2,1), (3,1/2), (1.5, 4)
comps = [(F(2), F(1)), (F(3), F(1, 2)), (F(3, 2), F(4))]
a1 = sum(c[0] for c in comps) + len(comps) - 1
b1 = 1 / sum(1 / c[1] for c in comps)
print("invgamma product", a1, b1)
comps = [(F(2), F(1)), (F(3), F(1, 2)), (F(3, 2), F(4))]
print("gamma product", sum(c[0] for c in comps) - len(comps) + 1, sum(c[1] for c in comps))
nv = [(F(1), F(2)), (F(-2), F(1, 2)), (F(3), F(4))]
prec = sum(1 / v for _, v in nv)
print("normal_var product", sum(m / v for m, v in nv) / prec, 1 / prec)

print("# normalized product density by quadrature")


def ig_pdf(x, a, b):
    return mp.exp(-a * mp.log(b) - mp.loggamma(a) - (a + 1) * mp.log(x) - 1 / (b * x))


comps = [(2, 1), (3, mp.mpf("0.5")), (mp.mpf("1.5"), 4)]
prod = lambda x: mp.fprod(ig_pdf(x, a, b) for a, b in comps)
Z = mp.quad(prod, [0, 0.05, 0.2, 1, 10, mp.inf])
for x in ["0.05", "0.1", "0.3"]:
    show(f"invgamma product density at {x}", prod(mp.mpf(x)) / Z)


def g_pdf(x, a, b):
    return mp.exp(a * mp.log(b) - mp.loggamma(a) + (a - 1) * mp.log(x) - b * x)


comps = [(2, 1), (3, mp.mpf("0.5")), (mp.mpf("1.5"), 4)]
prod = lambda x: mp.fprod(g_pdf(x, a, b) for a, b in comps)
Z = mp.quad(prod, [0, 0.5, 1, 3, mp.inf])
for x in ["0.2", "0.5", "1.5"]:
    show(f"gamma product density at {x}", prod(mp.mpf(x)) / Z)

print("# KS critical value, alpha = 0.001, asymptotic")
show("sqrt(-0.5 ln(alpha/2))", mp.sqrt(-0.5 * mp.log(mp.mpf("0.0005"))))
show("Kolmogorov tail at that value", 2 * mp.nsum(lambda k: (-1) ** (k - 1) * mp.exp(-2 * k * k * mp.sqrt(-0.5 * mp.log(mp.mpf("0.0005"))) ** 2), [1, mp.inf]))

print("# AR(2) stationarity triangle mass under independent N(0, 100) priors")
mass = mp.quad(lambda p2: mp.npdf(p2, 0, 10) * (mp.ncdf(1 - p2, 0, 10) - mp.ncdf(p2 - 1, 0, 10)), [-1, 1])
show("triangle mass", mass)

print("# spectral radius of companion matrix phi = (0.5, 0.3)")
show("(0.5 + sqrt(1.45)) / 2", (mp.mpf("0.5") + mp.sqrt(mp.mpf("1.45"))) / 2)
