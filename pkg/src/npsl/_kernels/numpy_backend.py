"""Pure-numpy fallback for the compiled kernel core."""

import numpy as np


def legendre_sum(cosgamma, degree):
    """sum_{n=0}^{degree} P_n(cosgamma), elementwise, by upward recurrence."""
    c = np.asarray(cosgamma, dtype=float)
    acc = np.ones_like(c)
    if degree >= 1:
        pkm1 = np.ones_like(c)
        pk = c.copy()
        acc = acc + pk
        for n in range(1, degree):
            pnext = ((2 * n + 1) * c * pk - n * pkm1) / (n + 1)
            acc += pnext
            pkm1, pk = pk, pnext
    return acc
