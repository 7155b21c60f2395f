"""Independent reference values for the tests.

Nothing here imports the package: roots come from a plain bisection written
out below, eigenvalues from closed forms.  The FROZEN_* numbers were produced
by these functions once and are pinned so that later regressions show up as
changed digits.
"""

import math


def bisect(f, lo, hi, steps=200):
    flo = f(lo)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def g_ref(y):
    return (1 + y * y) * math.atan(y) / y


def F_ref(y, c=(1.0, 1.0, 1.0)):
    return (1 + y * y) / y * (sum(c) * math.atan(y) - 0.5 * (c[1] + c[2]) * math.pi)


def kink_root_ref(lam, c=(1.0, 1.0, 1.0)):
    return bisect(lambda y: g_ref(y) + lam / sum(c), 1e-12, 1e6)


def antikink_root_ref(lam, c=(1.0, 1.0, 1.0)):
    return bisect(lambda y: F_ref(y, c) - lam, 1e-12, 1e6)


def free_eigenvalue_ref(lam, c=(1.0, 1.0, 1.0)):
    """Bound state e^{-kx}: delta' matching gives k = -sum(c)/lam, nu = -k^2."""
    return -((sum(c) / lam) ** 2)


# bisection outputs, c = (1, 1, 1)
FROZEN_KINK_ROOT = {-6.0: 1.391745200270735, -4.0: 0.7412058504979484}
FROZEN_ANTIKINK_SHIFT = {
    0.0: -0.5493061443340548,
    -0.5: -0.3767021322991428,
    1.0: -0.8517557024249447,
    5.0: -1.5978368930443196,
    -10.0: 1.367113900294385,
    -6.0: 0.9436206756901029,
}

# quadratic form of Phi' for the flat anti-kink: 9 c1^2 phi1'(0)^2 / lam with phi1'(0) = 2, lam = -pi/2
FLAT_ANTIKINK_FORM = -72.0 / math.pi
