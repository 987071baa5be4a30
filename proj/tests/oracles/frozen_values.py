"""Independent high-precision evaluation of the expected values frozen into
the C++ tests. Uses mpmath at 50 digits; shares no code with the library.

Run: python3 tests/oracles/frozen_values.py
"""
from fractions import Fraction
from itertools import product
from math import comb

import mpmath as mp

mp.mp.dps = 50


def xlog1x(x):
    # x * ln(1/x) with 0 * ln(1/0) = 0
    return mp.mpf(0) if x == 0 else x * mp.log(1 / x)


def phi(y, s):
    y, s = mp.mpf(y), mp.mpf(s)
    first = (1 - s) * mp.log(1 / (1 - y / 2))
    second = 2 * xlog1x(1 - s)
    third = mp.mpf(0) if s == 0 else s * mp.log((1 + y / 4) / s)
    return first - second - third


def b_of_z(z):
    z = mp.mpf(z)
    return mp.e ** (xlog1x(z) + xlog1x(1 - z))


def threshold(y):
    # scan s on a fine grid, take the largest + -> - sign change, refine with findroot
    ys = mp.mpf(y)
    n = 20000
    last = None
    for i in range(1, n):
        s0, s1 = mp.mpf(i) / n, mp.mpf(i + 1) / n
        if phi(ys, s0) > 0 and phi(ys, s1) <= 0:
            last = (s0, s1)
    if last is None:
        return None
    root = mp.findroot(lambda s: phi(ys, s), last, solver="bisect")
    return 1 - root ** 2, root


def schedule(r, y5r, lam_min, lam_prime, L, c1, t1):
    r = mp.mpf(r)
    terms = [mp.mpf(t1), mp.log(2 / r) / lam_prime,
             mp.log((4 * mp.sqrt(L)) ** L / (c1 * lam_prime * r ** L)) / lam_prime,
             mp.log(8) / lam_min]
    Tr = max(terms)
    return terms, Tr, max(8 * Tr / mp.mpf(y5r), 1)


def main():
    ln2 = mp.log(2)
    print("phi(0.8,0) =", phi(0.8, 0))
    print("phi(0.8,1) =", phi(0.8, 1))
    print("phi(0.5,0.25) =", phi(0.5, 0.25))
    print("phi(0.3,0.02) =", phi(0.3, 0.02))
    print("B(0.25) =", b_of_z(0.25))
    print("threshold(0.8) =", threshold(0.8))
    print("threshold(0.3) =", threshold(0.3))
    print("threshold(0.91) =", threshold(0.91))
    terms, Tr, T = schedule(0.1, 0.3, ln2, ln2, 1, 1, 1)
    print("shift schedule r=0.1 terms =", [mp.nstr(t, 12) for t in terms], "Tr =", Tr, "T =", T)
    codim = phi(0.3, 0.02) / (ln2 * T)
    print("codim_lower(shift, r=.1, y=.3, d=.9996) =", codim)
    d = mp.mpf("0.9888")
    print("z_star(0.9888) =", 1 - mp.sqrt(1 - d), (1 - mp.sqrt(1 - d)) ** 2)
    r, y = mp.mpf("0.01"), mp.mpf("0.5")
    print("mainbound =", y / (mp.log(1 / r) + mp.log(1 / y)))
    print("balls =", mp.mpf("0.1") ** 3 / mp.log(10))
    print("cor1 =", y * mp.log(1 / (1 - y / 2)) / mp.log(1 / r))
    lam = (3 + mp.sqrt(5)) / 2
    print("cat lambda_u =", lam, "ln =", mp.log(lam))

    # exhaustive shift-model counts
    def words(n):
        return product((0, 1), repeat=n)

    ones = sum(1 for w in words(4) if sum(w) >= 2)
    print("A(S={1}, delta=1/2, NT=4) =", ones)
    blocks = sum(1 for w in words(4) if sum(w[:2]) >= 1 and sum(w[2:]) >= 1)
    print("A_J(S={1}, eps=1/2, T=2, N=2, J={1,2}) =", blocks)
    print("A(S={1}, delta=3/4, NT=4) =", sum(1 for w in words(4) if Fraction(sum(w), 4) >= Fraction(3, 4)))
    print("C(20,10) =", comb(20, 10), "2^20 =", 2 ** 20)


if __name__ == "__main__":
    main()
