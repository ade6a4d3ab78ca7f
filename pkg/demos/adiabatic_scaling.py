"""eps-scaling of the adiabatic errors and the superadiabatic defect on a small chain.

Run with ``python demos/adiabatic_scaling.py``; takes about half a minute.
"""

import numpy as np

from superadiabatic import AdiabaticFamily, FockSector, adiabatic_errors, assemble, defect
from superadiabatic.models import bond_hopping, driven_chain

SCALE = 7.0  # energy unit; equivalent to running at eps / SCALE


def main():
    tdi = driven_chain(4, dimer_drive=0.8, stagger_drive=0.0, flux=np.pi / 2, scale=SCALE)
    sector = FockSector(tdi.lattice, 1, 2)
    fam = AdiabaticFamily(tdi.path(sector))
    B = assemble(bond_hopping(tdi.lattice, (0,), (1,), np.exp(1j * np.pi / 4)), sector)
    grid = np.linspace(0, 1, 11)
    print(f"{'eps':>6} {'err0':>12} {'err1':>12} {'defect':>12}")
    for eps in (0.2, 0.1, 0.05):
        e0, e1 = adiabatic_errors(fam, B, eps / SCALE, grid, tol=1e-8)
        r = defect(fam, eps / SCALE, grid[1:-1]).max()
        print(f"{eps:6.3f} {e0.max():12.4e} {e1.max():12.4e} {r:12.4e}")


if __name__ == "__main__":
    main()
