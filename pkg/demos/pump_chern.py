"""Chern number of a Thouless pump over the (pump phase, twist) torus.

The pumped charge per cycle is C / M.
"""

import numpy as np

from superadiabatic import FockSector, Schedule, TwistedFamily, TwistGrid, chern_number
from superadiabatic.models import rice_mele


def main(M: int = 4):
    tdi = rice_mele(M, sweep=2 * np.pi, schedule=Schedule("linear"))
    fam = TwistedFamily.from_interaction(tdi, FockSector(tdi.lattice, 1, M // 2))
    H = lambda th: fam.H(th[0] / (2 * np.pi), th[1:])
    for n_g in (12, 24):
        C, _ = chern_number(TwistGrid.build(H, n_g))
        print(f"n_g = {n_g:3d}: C = {C:+.10f}, pumped charge C/M = {C / M:+.6f}")


if __name__ == "__main__":
    main()
