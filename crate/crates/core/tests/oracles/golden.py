"""Extended-precision reference values for the core test suite.

Run with `python3 golden.py`; the printed constants are frozen into
`tests/golden.rs`. Every formula here is evaluated naively (unscaled
Bessel functions, explicit exponentials) at 50 significant digits.
"""
from mpmath import mp, mpf, besseli, besselk, sinh, exp, sqrt, pi, log, euler

mp.dps = 50

KB = mpf("1.380649e-23")
H = mpf("6.62607015e-34")
HBAR = H / (2 * pi)


def gap0(tc):
    return mpf("1.764") * KB * tc


def xi(t, f):
    return HBAR * 2 * pi * f / (2 * KB * t)


def nqp(t, tc, n0):
    d = gap0(tc)
    return 2 * n0 * sqrt(2 * pi * KB * t * d) * exp(-d / (KB * t))


def sigma(t, tc, f, n=None, n0=mpf(1)):
    d = gap0(tc)
    w = 2 * pi * f
    x = xi(t, f)
    if n is None:
        n = nqp(t, tc, n0)
    s1 = (2 * d / (HBAR * w)) * n / (n0 * sqrt(2 * pi * KB * t * d)) * sinh(x) * besselk(0, x)
    s2 = (pi * d / (HBAR * w)) * (1 - n / (2 * n0 * d) * (1 + sqrt(2 * d / (pi * KB * t)) * exp(-x) * besseli(0, x)))
    return s1, s2


def tauqp(t, tc, tau0):
    d = gap0(tc)
    return tau0 / sqrt(pi) * (KB * tc / (2 * d)) ** mpf(2.5) * sqrt(tc / t) * exp(d / (KB * t))


def fmt(v):
    return mp.nstr(v, 20)


print("// scaled Bessel functions")
for x in ["1e-6", "0.1", "1", "2", "2.5", "7", "10", "30", "50", "1000", "100000"]:
    xv = mpf(x)
    print(f"({x}, {fmt(exp(-xv) * besseli(0, xv))}, {fmt(exp(xv) * besselk(0, xv))}, {fmt(sinh(xv) * besselk(0, xv))}),")
print("// small-x K0:", fmt(-log(mpf("1e-6") / 2) - euler))

print("// xi")
print("xi(0.5, 6.84e9) =", fmt(xi(mpf("0.5"), mpf("6.84e9"))))
print("xi(0.01, 6.84e9) =", fmt(xi(mpf("0.01"), mpf("6.84e9"))))

print("// gap0(1.34) =", fmt(gap0(mpf("1.34"))))
print("// nqp(0.5, 1.34, N0=1) =", fmt(nqp(mpf("0.5"), mpf("1.34"), 1)))

s1, s2 = sigma(mpf("0.5"), mpf("1.34"), mpf("6.84e9"))
print("// sigma(0.5 K, 1.34 K, 6.84 GHz) =", fmt(s1), fmt(s2))
s1, s2 = sigma(mpf("0.8"), mpf("1.34"), mpf("6.84e9"))
print("// sigma(0.8 K, 1.34 K, 6.84 GHz) =", fmt(s1), fmt(s2))

print("// tauqp(tau0=30 ns, Tc=1.34 K)")
for t in ["0.5", "1.0"]:
    print(f"T={t}:", fmt(tauqp(mpf(t), mpf("1.34"), mpf("30e-9"))))

# Resonator shifts, alpha = 0.17, f = 6.84 GHz, Tref = 10 mK
a = mpf("0.17")
f = mpf("6.84e9")
r1, r2 = sigma(mpf("0.01"), mpf("1.34"), f)
for t in ["0.5", "0.8"]:
    q1, q2 = sigma(mpf(t), mpf("1.34"), f)
    print(f"// T={t}: dff =", fmt(a / 2 * (q2 - r2) / r2), " dinvQ =", fmt(a * (q1 - r1) / r2))
