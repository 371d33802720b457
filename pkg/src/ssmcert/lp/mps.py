"""Free-format MPS export and import for potential-search LPs.

Row names encode their origin (``P_i_k`` or ``C_i_k0_k1...``) so a row can be
regenerated from its name alone; column names are ``a_i_k``, ``b_i_k`` and ``v``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class MpsModel:
    name: str
    row_names: list
    col_names: list
    A: sparse.csr_matrix
    rhs: np.ndarray
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _num(x):
    return repr(float(x))


def write_mps(instance, path, name="SSMLP"):
    """Write ``min v`` subject to ``A x <= rhs`` and the variable bounds."""
    rows = instance.row_names()
    cols = instance.var_names()
    A = instance.A.tocsc()
    lines = [f"NAME {name}", "ROWS", " N obj"]
    lines += [f" L {r}" for r in rows]
    lines.append("COLUMNS")
    for j, c in enumerate(cols):
        if instance.cost[j]:
            lines.append(f" {c} obj {_num(instance.cost[j])}")
        start, end = A.indptr[j], A.indptr[j + 1]
        for r, val in zip(A.indices[start:end], A.data[start:end]):
            lines.append(f" {c} {rows[r]} {_num(val)}")
    lines.append("RHS")
    for r, val in zip(rows, instance.rhs):
        if val:
            lines.append(f" RHS {r} {_num(val)}")
    lines.append("BOUNDS")
    for j, c in enumerate(cols):
        lo, hi = instance.lower[j], instance.upper[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" FR BND {c}")
            continue
        if lo == -np.inf:
            lines.append(f" MI BND {c}")
        elif lo != 0:
            lines.append(f" LO BND {c} {_num(lo)}")
        if hi != np.inf:
            lines.append(f" UP BND {c} {_num(hi)}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_mps(path):
    """Read a free-format MPS file holding only ``L`` rows and one objective."""
    section = None
    name = ""
    obj = None
    row_names, row_index = [], {}
    col_names, col_index = [], {}
    entries = []
    rhs = {}
    bounds = {}
    costs = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("*"):
                continue
            parts = line.split()
            if not raw[0].isspace():
                section = parts[0]
                if section == "NAME":
                    name = parts[1] if len(parts) > 1 else ""
                continue
            if section == "ROWS":
                kind, rname = parts
                if kind == "N":
                    obj = rname
                elif kind == "L":
                    row_index[rname] = len(row_names)
                    row_names.append(rname)
                else:
                    raise ValueError(f"unsupported row type {kind!r}")
            elif section == "COLUMNS":
                cname = parts[0]
                if cname not in col_index:
                    col_index[cname] = len(col_names)
                    col_names.append(cname)
                for rname, val in zip(parts[1::2], parts[2::2]):
                    if rname == obj:
                        costs[cname] = float(val)
                    else:
                        entries.append((row_index[rname], col_index[cname], float(val)))
            elif section == "RHS":
                for rname, val in zip(parts[1::2], parts[2::2]):
                    rhs[rname] = float(val)
            elif section == "BOUNDS":
                kind, cname = parts[0], parts[2]
                val = float(parts[3]) if len(parts) > 3 else None
                lo, hi = bounds.get(cname, (0.0, np.inf))
                if kind == "UP":
                    hi = val
                elif kind == "LO":
                    lo = val
                elif kind == "MI":
                    lo = -np.inf
                elif kind == "FR":
                    lo, hi = -np.inf, np.inf
                elif kind == "FX":
                    lo = hi = val
                else:
                    raise ValueError(f"unsupported bound type {kind!r}")
                bounds[cname] = (lo, hi)
    m, n = len(row_names), len(col_names)
    if entries:
        r, c, v = zip(*entries)
    else:
        r, c, v = (), (), ()
    A = sparse.csr_matrix((v, (r, c)), shape=(m, n))
    return MpsModel(
        name=name,
        row_names=row_names,
        col_names=col_names,
        A=A,
        rhs=np.array([rhs.get(x, 0.0) for x in row_names]),
        cost=np.array([costs.get(x, 0.0) for x in col_names]),
        lower=np.array([bounds.get(x, (0.0, np.inf))[0] for x in col_names]),
        upper=np.array([bounds.get(x, (0.0, np.inf))[1] for x in col_names]),
    )
