"""Independent oracles the spectral code is checked against.

Everything here deliberately avoids the package's own evaluation paths:
shooting integrators for ground-state ODEs, composite quadrature, and
finite-difference stencils.
"""

import math

import numpy as np
from scipy.integrate import quad, solve_ivp


def shoot_soliton_1d(r_max=20.0, tol=1e-12):
    """Decaying solution of -Q'' + Q = Q^3 via bisection on Q(0).

    Returns (x, Q) on a fine grid.  The decaying profile blows up for too
    large Q(0) and oscillates through zero for too small Q(0).
    """
    def classify(q0):
        sol = solve_ivp(
            lambda t, y: [y[1], y[0] - y[0] ** 3],
            (0.0, r_max), [q0, 0.0], rtol=1e-12, atol=1e-14,
        )
        # above the separatrix the orbit crosses zero; below it oscillates
        # around the positive center without decaying
        return 1 if np.any(sol.y[0] < 0) else -1

    lo, hi = 1.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) < 0:
            lo = mid
        else:
            hi = mid
    q0 = 0.5 * (lo + hi)
    sol = solve_ivp(
        lambda t, y: [y[1], y[0] - y[0] ** 3],
        (0.0, r_max), [q0, 0.0], rtol=1e-12, atol=1e-14,
        t_eval=np.linspace(0.0, r_max, 4001),
    )
    x = sol.t
    Q = np.clip(sol.y[0], 0.0, None)
    return x, Q


def soliton_gn_constant_1d():
    """Optimal 1D quartic interpolation constant from the shooting profile.

    C = |Q|_4^4 / (|Q'|_2 |Q|_2^3) for the decaying ground state of
    -Q'' + Q = Q^3, evaluated with composite Simpson quadrature on the
    half line (the profile is even).
    """
    x, Q = shoot_soliton_1d()
    dQ = np.gradient(Q, x)
    from scipy.integrate import simpson

    m2 = 2.0 * simpson(Q**2, x=x)
    g2 = 2.0 * simpson(dQ**2, x=x)
    p4 = 2.0 * simpson(Q**4, x=x)
    return p4 / (math.sqrt(g2) * m2**1.5)


def shoot_townes(r_max=14.0, tol=1e-11):
    """Radial ground state of Q'' + Q'/r - Q + Q^3 = 0 by shooting on Q(0).

    Returns (r, Q).  Started from a series expansion at a tiny radius to
    avoid the coordinate singularity.
    """
    def rhs(r, y):
        return [y[1], y[0] - y[0] ** 3 - y[1] / r]

    def profile(q0):
        r0 = 1e-6
        # Q(r) ~ q0 + (q0 - q0^3) r^2 / 4 near the axis
        y0 = [q0 + (q0 - q0**3) * r0**2 / 4, (q0 - q0**3) * r0 / 2]
        return solve_ivp(rhs, (r0, r_max), y0, rtol=1e-11, atol=1e-13,
                         dense_output=True)

    def classify(q0):
        return 1 if np.any(profile(q0).y[0] < 0) else -1

    lo, hi = 2.0, 2.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) < 0:
            lo = mid
        else:
            hi = mid
    q0 = 0.5 * (lo + hi)
    sol = profile(q0)
    r = np.linspace(1e-6, r_max, 6001)
    Q = np.clip(sol.sol(r)[0], 0.0, None)
    return r, Q


def townes_mass():
    """Critical mass 2 pi int Q^2 r dr of the radial cubic ground state."""
    from scipy.integrate import simpson

    r, Q = shoot_townes()
    return 2.0 * math.pi * simpson(Q**2 * r, x=r)


def fsum_quadrature(samples, cell_volume):
    """Compensated-summation quadrature, independent of numpy's pairwise sum."""
    return math.fsum(samples.ravel().tolist()) * cell_volume


def gradient_squared_fd(samples, h):
    """Second-order central-difference |grad u|_2^2 on the periodic grid."""
    total = 0.0
    for a in range(samples.ndim):
        d = (np.roll(samples, -1, axis=a) - np.roll(samples, 1, axis=a)) / (2 * h)
        total += float(np.sum(d**2))
    return total * h**samples.ndim


def antiderivative_quad(f, t):
    """Adaptive quadrature of f from 0 to t."""
    val, _ = quad(f, 0.0, t, limit=200)
    return val
