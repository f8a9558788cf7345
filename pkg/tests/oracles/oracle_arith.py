"""Independent oracle for the scalar-arithmetic test fixtures.

Pure-integer recomputations, no package imports.  Run directly; the printed
values are frozen into tests/test_arith.py.
"""

from fractions import Fraction


def teich_by_iteration(r, p, N):
    """Teichmueller lift by iterating x -> x^p mod p^N to a fixed point."""
    m = p ** N
    x = r % m
    for _ in range(4 * N + 8):
        y = pow(x, p, m)
        if y == x:
            return x
        x = y
    raise AssertionError("no fixed point reached")


def embed(q, p, N):
    m = p ** N
    return q.numerator * pow(q.denominator, -1, m) % m


def exhaustive_failure_check(residue, bound, p, N):
    """True when no fraction a/b with |a| <= bound, 1 <= b <= bound, p !| b
    reduces to the residue mod p^N."""
    m = p ** N
    for b in range(1, bound + 1):
        if b % p == 0:
            continue
        for a in range(-bound, bound + 1):
            if (a - b * residue) % m == 0:
                return False
    return True


if __name__ == "__main__":
    print("teich(2, p=17, N=2) =", teich_by_iteration(2, 17, 2))
    print("teich(2, p=17, N=5) =", teich_by_iteration(2, 17, 5))
    r = embed(Fraction(-3, 7), 17, 4)
    print("embed(-3/7, 17, 4) =", r)
    # uniqueness window: 17^4 = 83521 > 2 * 10^2, bound 10 suffices
    ok = exhaustive_failure_check(5, 3, 17, 2)
    print("residue 5 mod 17^2 unreachable with bound 3:", ok)
    # a couple of spot digit expansions
    t = teich_by_iteration(2, 17, 2)
    print("digits of 155 base 17:", [t % 17, t // 17])
