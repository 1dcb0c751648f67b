"""Oscillation bound terms for the measured deviation profile of sin t.

Tabulates the three bound terms next to the sampled supremum
``sup_t e^{-nu t} t omega(t/eps)`` for a range of eps and two values of mu.
"""

import math

import numpy as np

from greenavg import GridFunction, bound_terms, empirical_t_sup, time_average


def main():
    f = GridFunction.sample(np.sin, 0.0, 2000 * math.pi, 2 * math.pi / 200)
    omega = time_average(f, np.geomspace(0.5, 2000.0, 120).tolist())
    nu = 0.9
    for mu in (0.5, 0.75):
        print(f"mu = {mu}")
        print(f"{'eps':>8} {'empirical':>10} {'t_term':>10} {'int_term':>10} {'tail_term':>10}")
        for eps in (0.1, 0.05, 0.025, 0.0125, 0.00625):
            terms = bound_terms(omega, 1.0, nu, eps, mu)
            emp = empirical_t_sup(omega, nu, eps)
            print(f"{eps:8.5f} {emp:10.5f} {terms.t_term:10.5f} {terms.int_term:10.5f} {terms.tail_term:10.5f}")
        print()


if __name__ == "__main__":
    main()
