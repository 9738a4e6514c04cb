"""Reference values for the regression fixtures, computed independently of the
Rust code with adaptive arbitrary-precision quadrature (mpmath)."""

import json
import mpmath as mp

mp.mp.dps = 30


def npdf(x, mu, sigma):
    return mp.e ** (-((x - mu) ** 2) / (2 * sigma**2)) / (sigma * mp.sqrt(2 * mp.pi))


def updf(x):
    return mp.mpf("0.5") if -1 <= x <= 1 else mp.mpf(0)


def e_uniform(g, kinks=()):
    """E[g(w)] for w ~ U(-1, 1), split at the kinks of g inside (-1, 1)."""
    inner = sorted(k for k in kinks if -1 < k < 1)
    return mp.quad(lambda w: g(w) / 2, [-1, *inner, 1])


def main():
    out = {}

    # Witsenhausen k=0.2 sigma=5, u0 = 0: C1(0.5, 1.0) = E_x0[(x0 - 0.5)^2 phi(1 - x0)]
    sigma = mp.mpf(5)
    c1 = mp.quad(lambda x: npdf(x, 0, sigma) * (x - mp.mpf("0.5")) ** 2 * npdf(1 - x, 0, 1),
                 [-40, -10, 0, 1, 10, 40])
    out["witsenhausen_c1_u0zero_u0.5_y1.0"] = float(c1)

    # its minimiser is the posterior mean sigma^2/(sigma^2+1) * y; snapped to the
    # oracle grid of 1e5 points over [-25, 25]
    lo, hi, steps = mp.mpf(-25), mp.mpf(25), 100000
    step = (hi - lo) / (steps - 1)
    target = sigma**2 / (sigma**2 + 1)
    i = int(mp.nint((target - lo) / step))
    out["witsenhausen_argmin_c1_u0zero_y1.0_true"] = float(target)
    out["witsenhausen_argmin_c1_u0zero_y1.0_grid_index"] = i

    # zero-delay lambda=2, u0 = identity: C1(0.2, 0.5) = E_x0[(0.2 - x0)^2 f_w(0.5 - x0)]
    c1 = mp.quad(lambda x: npdf(x, 0, 1) * (mp.mpf("0.2") - x) ** 2 * mp.mpf("0.5"),
                 [mp.mpf("-0.5"), mp.mpf("1.5")])
    out["zero_delay_c1_u0identity_u0.2_y0.5"] = float(c1)

    # inventory M=2 xi=0.1 gamma=|x|, identity controllers (unprojected)
    xi = mp.mpf("0.1")
    gamma = abs

    half = mp.mpf("0.5")

    def v1(x):
        return xi * x + e_uniform(lambda w: gamma(2 * x - w), [2 * x])

    def continuation(z):
        # gamma(z - w) kinks at w = z; v1(z - w) changes curvature at z - w = +-1/2
        return e_uniform(lambda w: gamma(z - w) + v1(z - w), [z, z - half, z + half])

    def v0(x):
        return xi * x + continuation(2 * x)

    u, y = mp.mpf("0.3"), mp.mpf("-0.2")
    c0 = updf(y) * (xi * u + continuation(y + u))
    out["inventory_c0_identity_u0.3_y-0.2"] = float(c0)
    out["inventory_v0_identity_x0.25"] = float(v0(mp.mpf("0.25")))

    # quantities with closed forms, for cross-checking
    out["witsenhausen_zero_objective"] = 25.0
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
