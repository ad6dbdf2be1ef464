"""Standard normal quantile function.

Wichura's algorithm AS 241 (PPND16): a piecewise rational approximation to
the inverse standard normal CDF with absolute error below 1e-15 over the
full open unit interval. Every Gaussian draw and every normal-approximation
critical value in this package goes through this function, so results do not
depend on the platform's libm or on the numpy version in use.
"""

from __future__ import annotations

import numpy as np

_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _ratpoly(r, num, den):
    p = np.full_like(r, num[-1])
    for c in num[-2::-1]:
        p = p * r + c
    q = np.full_like(r, den[-1])
    for c in den[-2::-1]:
        q = q * r + c
    return p / q


def norm_ppf(p):
    """Inverse standard normal CDF, elementwise.

    Accepts scalars or arrays with entries in the open interval (0, 1);
    returns NaN outside it and +/-inf at the endpoints.
    """
    p = np.asarray(p, dtype=np.float64)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    out = np.full(p.shape, np.nan)

    q = p - 0.5
    central = np.abs(q) <= 0.425
    if central.any():
        r = 0.180625 - q[central] * q[central]
        out[central] = q[central] * _ratpoly(r, _A, _B)

    tail = ~central & (p > 0.0) & (p < 1.0)
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        val[near] = _ratpoly(r[near] - 1.6, _C, _D)
        val[~near] = _ratpoly(r[~near] - 5.0, _E, _F)
        out[tail] = np.where(qt < 0.0, -val, val)

    out[p == 0.0] = -np.inf
    out[p == 1.0] = np.inf
    return float(out[0]) if scalar else out
