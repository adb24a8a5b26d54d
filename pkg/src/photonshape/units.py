"""Unit conventions and conversions.

Internally everything is SI: times in seconds, rates in 1/s, couplings and
frequencies as angular frequencies in rad/s. Interfaces (constructors, CSV
columns, config files) speak ns and MHz; a linewidth quoted as "20 MHz"
means kappa = 2*pi*20e6 rad/s.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

NS = 1e-9
US = 1e-6


def mhz_to_angular(f_mhz: float) -> float:
    """Frequency in MHz (f/2pi convention) to angular rad/s."""
    return TWO_PI * 1e6 * f_mhz


def angular_to_mhz(w: float) -> float:
    """Angular rad/s to MHz in the f/2pi convention."""
    return w / (TWO_PI * 1e6)


def ghz_to_angular(f_ghz: float) -> float:
    return TWO_PI * 1e9 * f_ghz


def angular_to_ghz(w: float) -> float:
    return w / (TWO_PI * 1e9)


def ns_to_s(t_ns):
    return np.asarray(t_ns, dtype=float) * NS


def s_to_ns(t_s):
    return np.asarray(t_s, dtype=float) / NS


def make_grid(t_min_ns: float, t_max_ns: float, dt_ns: float = 0.1) -> np.ndarray:
    """Uniform time grid in seconds from endpoints given in ns.

    The default step of 0.1 ns resolves every rate in the toolkit's operating
    range with margin.
    """
    n = int(round((t_max_ns - t_min_ns) / dt_ns))
    if n < 1:
        raise ValueError("grid must contain at least two samples")
    return snap_serialized((t_min_ns + dt_ns * np.arange(n + 1)) * NS, NS)


def snap_serialized(x, scale: float, mode: str = "div"):
    """Nudge values (by at most a few ulp) onto serialization fixed points.

    Text output stores quantities unit-converted (seconds as ns, rad/s as
    MHz); converting back multiplies by the same constant, and that double
    rounding is not always the identity. Iterating the round trip reaches a
    fixed value within a couple of passes, after which write/read cycles are
    bitwise lossless. `mode` names the conversion applied on write: "div"
    stores x/scale, "mul" stores x*scale.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    fwd = (lambda v: (v / scale) * scale) if mode == "div" else (lambda v: (v * scale) / scale)
    for _ in range(6):
        y = fwd(x)
        if np.array_equal(y, x):
            break
        x = y
    else:
        # an oscillating value has no fixed point; walk it one ulp at a time
        for i in np.nonzero(fwd(x) != x)[0]:
            v = x[i]
            for _ in range(16):
                w = fwd(np.float64(v))
                if w == v:
                    break
                v = np.nextafter(w, 0.0)
            x[i] = v
    return float(x[0]) if scalar else x
