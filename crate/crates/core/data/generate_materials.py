"""Regenerates materials.json, the bundled closed-world dataset.

Structures are idealised prototypes at experimental lattice constants.
Property values are synthetic placeholders of plausible magnitude.
"""

import json
import math
from pathlib import Path


def cubic(a):
    return [[a, 0, 0], [0, a, 0], [0, 0, a]]


def fcc_prim(a):
    h = a / 2
    return [[0, h, h], [h, 0, h], [h, h, 0]]


def hexagonal(a, c):
    return [[a, 0, 0], [-a / 2, a * math.sqrt(3) / 2, 0], [0, 0, c]]


def diamond(el, a):
    base = [(0, 0, 0), (0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0)]
    sites = [(el, p) for p in base]
    sites += [(el, (x + 0.25, y + 0.25, z + 0.25)) for x, y, z in base]
    return cubic(a), sites


def zincblende(a, b, a0):
    return fcc_prim(a0), [(a, (0, 0, 0)), (b, (0.25, 0.25, 0.25))]


def rocksalt(a, b, a0):
    return fcc_prim(a0), [(a, (0, 0, 0)), (b, (0.5, 0.5, 0.5))]


def wurtzite(a, b, a0, c0, u):
    return hexagonal(a0, c0), [
        (a, (1 / 3, 2 / 3, 0)),
        (a, (2 / 3, 1 / 3, 0.5)),
        (b, (1 / 3, 2 / 3, u)),
        (b, (2 / 3, 1 / 3, 0.5 + u)),
    ]


def hcp(el, a0, c0):
    return hexagonal(a0, c0), [(el, (1 / 3, 2 / 3, 0.25)), (el, (2 / 3, 1 / 3, 0.75))]


def fcc(el, a0):
    return fcc_prim(a0), [(el, (0, 0, 0))]


def bcc(el, a0):
    return cubic(a0), [(el, (0, 0, 0)), (el, (0.5, 0.5, 0.5))]


def perovskite(a, b, x, a0):
    return cubic(a0), [
        (a, (0, 0, 0)),
        (b, (0.5, 0.5, 0.5)),
        (x, (0.5, 0.5, 0)),
        (x, (0.5, 0, 0.5)),
        (x, (0, 0.5, 0.5)),
    ]


def poscar(name, lattice, sites):
    order = []
    for el, _ in sites:
        if el not in order:
            order.append(el)
    lines = [name, "1.0"]
    lines += ["  " + " ".join(f"{v:.10f}" for v in row) for row in lattice]
    lines.append(" ".join(order))
    lines.append(" ".join(str(sum(1 for e, _ in sites if e == el)) for el in order))
    lines.append("Direct")
    for el in order:
        for e, p in sites:
            if e == el:
                lines.append("  " + " ".join(f"{v % 1.0:.10f}" for v in p))
    return "\n".join(lines) + "\n"


# (jid, formula, spacegroup, structure, formation_energy, opt gap, mbj gap, bulk modulus)
ROWS = [
    ("JVASP-1002", "Si", "Fd-3m", diamond("Si", 5.43), 0.0, 0.73, 1.28, 88.0),
    ("JVASP-91", "C", "Fd-3m", diamond("C", 3.567), 0.0, 4.37, 5.04, 437.0),
    ("JVASP-1008", "Ge", "Fd-3m", diamond("Ge", 5.658), 0.0, 0.01, 0.61, 58.0),
    ("JVASP-1151", "GaAs", "F-43m", zincblende("Ga", "As", 5.653), -0.39, 0.19, 1.32, 61.0),
    ("JVASP-1393", "GaP", "F-43m", zincblende("Ga", "P", 5.451), -0.49, 1.48, 2.32, 76.0),
    ("JVASP-1183", "InP", "F-43m", zincblende("In", "P", 5.869), -0.37, 0.46, 1.39, 60.0),
    ("JVASP-1327", "AlP", "F-43m", zincblende("Al", "P", 5.463), -0.85, 1.64, 2.56, 83.0),
    ("JVASP-1372", "AlAs", "F-43m", zincblende("Al", "As", 5.661), -0.73, 1.42, 2.18, 67.0),
    ("JVASP-1702", "ZnS", "F-43m", zincblende("Zn", "S", 5.409), -0.94, 2.09, 3.59, 70.0),
    ("JVASP-8158", "SiC", "F-43m", zincblende("Si", "C", 4.36), -0.31, 1.36, 2.27, 212.0),
    ("JVASP-57695", "BN", "F-43m", zincblende("B", "N", 3.615), -1.35, 4.45, 6.1, 369.0),
    ("JVASP-39", "GaN", "F-43m", zincblende("Ga", "N", 4.50), -0.61, 1.71, 2.98, 172.0),
    ("JVASP-7844", "AlN", "F-43m", zincblende("Al", "N", 4.38), -1.56, 3.31, 5.04, 194.0),
    ("JVASP-23", "CdTe", "F-43m", zincblende("Cd", "Te", 6.48), -0.48, 0.62, 1.63, 42.0),
    ("JVASP-8029", "ZnSe", "F-43m", zincblende("Zn", "Se", 5.668), -0.76, 1.21, 2.67, 58.0),
    ("JVASP-30", "GaN", "P6_3mc", wurtzite("Ga", "N", 3.189, 5.185, 0.377), -0.64, 1.93, 3.08, 173.0),
    ("JVASP-39214", "AlN", "P6_3mc", wurtzite("Al", "N", 3.112, 4.982, 0.382), -1.58, 4.47, 5.2, 195.0),
    ("JVASP-1195", "ZnO", "P6_3mc", wurtzite("Zn", "O", 3.25, 5.207, 0.382), -1.78, 1.04, 2.26, 131.0),
    ("JVASP-1180", "InN", "P6_3mc", wurtzite("In", "N", 3.545, 5.703, 0.377), -0.13, 0.0, 0.76, 124.0),
    ("JVASP-95", "CdS", "P6_3mc", wurtzite("Cd", "S", 4.136, 6.714, 0.377), -0.73, 1.11, 2.31, 54.0),
    ("JVASP-23862", "NaCl", "Fm-3m", rocksalt("Na", "Cl", 5.64), -2.09, 5.0, 7.04, 24.0),
    ("JVASP-116", "MgO", "Fm-3m", rocksalt("Mg", "O", 4.212), -3.04, 4.55, 7.1, 152.0),
    ("JVASP-1236", "KCl", "Fm-3m", rocksalt("K", "Cl", 6.29), -2.2, 4.95, 8.2, 17.0),
    ("JVASP-1130", "LiF", "Fm-3m", rocksalt("Li", "F", 4.03), -3.09, 8.72, 13.23, 70.0),
    ("JVASP-1405", "CaO", "Fm-3m", rocksalt("Ca", "O", 4.81), -3.28, 3.63, 5.35, 105.0),
    ("JVASP-1216", "PbS", "Fm-3m", rocksalt("Pb", "S", 5.936), -0.5, 0.35, 0.53, None),
    ("JVASP-5989", "CsCl", "Pm-3m", (cubic(4.12), [("Cs", (0, 0, 0)), ("Cl", (0.5, 0.5, 0.5))]), -2.17, 5.16, 6.2, 18.0),
    ("JVASP-8082", "SrTiO3", "Pm-3m", perovskite("Sr", "Ti", "O", 3.905), -3.45, 1.78, 2.83, 171.0),
    ("JVASP-8029030", "BaTiO3", "Pm-3m", perovskite("Ba", "Ti", "O", 4.0), -3.39, 1.72, 2.66, None),
    ("JVASP-1174", "CaF2", "Fm-3m", (fcc_prim(5.463), [("Ca", (0, 0, 0)), ("F", (0.25, 0.25, 0.25)), ("F", (0.75, 0.75, 0.75))]), -4.14, 7.25, 10.09, 82.0),
    ("JVASP-867", "Cu", "Fm-3m", fcc("Cu", 3.615), 0.0, 0.0, None, 141.0),
    ("JVASP-816", "Al", "Fm-3m", fcc("Al", 4.05), 0.0, 0.0, None, 76.0),
    ("JVASP-813", "Ag", "Fm-3m", fcc("Ag", 4.086), 0.0, 0.0, None, 100.0),
    ("JVASP-825", "Au", "Fm-3m", fcc("Au", 4.078), 0.0, 0.0, None, 180.0),
    ("JVASP-943", "Ni", "Fm-3m", fcc("Ni", 3.524), 0.0, 0.0, None, 186.0),
    ("JVASP-14606", "Pd", "Fm-3m", fcc("Pd", 3.891), 0.0, 0.0, None, 180.0),
    ("JVASP-972", "Pt", "Fm-3m", fcc("Pt", 3.924), 0.0, 0.0, None, 250.0),
    ("JVASP-961", "Pb", "Fm-3m", fcc("Pb", 4.95), 0.0, 0.0, None, 45.0),
    ("JVASP-882", "Fe", "Im-3m", bcc("Fe", 2.866), 0.0, 0.0, None, 170.0),
    ("JVASP-840", "Cr", "Im-3m", bcc("Cr", 2.91), 0.0, 0.0, None, 160.0),
    ("JVASP-21195", "Mo", "Im-3m", bcc("Mo", 3.147), 0.0, 0.0, None, 262.0),
    ("JVASP-14615", "W", "Im-3m", bcc("W", 3.165), 0.0, 0.0, None, 304.0),
    ("JVASP-25140", "Na", "Im-3m", bcc("Na", 4.29), 0.0, 0.0, None, 7.0),
    ("JVASP-1041", "V", "Im-3m", bcc("V", 3.03), 0.0, 0.0, None, 183.0),
    ("JVASP-934", "Nb", "Im-3m", bcc("Nb", 3.30), 0.0, 0.0, None, 171.0),
    ("JVASP-14750", "Ta", "Im-3m", bcc("Ta", 3.306), 0.0, 0.0, None, 196.0),
    ("JVASP-919", "Mg", "P6_3/mmc", hcp("Mg", 3.209, 5.211), 0.0, 0.0, None, 36.0),
    ("JVASP-14815", "Ti", "P6_3/mmc", hcp("Ti", 2.951, 4.686), 0.0, 0.0, None, 113.0),
    ("JVASP-1056", "Zn", "P6_3/mmc", hcp("Zn", 2.665, 4.947), 0.0, 0.0, None, 68.0),
    ("JVASP-858", "Co", "P6_3/mmc", hcp("Co", 2.507, 4.07), 0.0, 0.0, None, None),
]


def main():
    records = []
    for jid, formula, sg, (lattice, sites), ef, opt, mbj, bulk in ROWS:
        records.append(
            {
                "jid": jid,
                "formula": formula,
                "spacegroup": sg,
                "formation_energy": ef,
                "bandgap_opt": opt,
                "bandgap_mbj": mbj,
                "bulk_modulus": bulk,
                "poscar": poscar(f"{jid} {formula}", lattice, sites),
            }
        )
    assert len(records) == 50
    assert len({r["jid"] for r in records}) == 50
    out = Path(__file__).with_name("materials.json")
    out.write_text(json.dumps(records, indent=1) + "\n")


if __name__ == "__main__":
    main()
