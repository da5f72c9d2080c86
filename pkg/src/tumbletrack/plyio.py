"""ASCII PLY point I/O (vertex x y z as float64, 17 significant digits)."""

from pathlib import Path

import numpy as np


def write_ply(path, points, comment=None):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines.extend(f"comment {c}" for c in str(comment).splitlines())
    lines += [
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines.extend("%.17g %.17g %.17g" % tuple(p) for p in pts)
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path):
    """Read the vertex positions of an ASCII PLY file into an (m, 3) array."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_vertex = None
    props = []
    in_vertex = False
    for i, line in enumerate(text[1:], start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format" and tok[1] != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertex = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            body = i + 1
            break
    else:
        raise ValueError(f"{path}: missing end_header")
    if n_vertex is None:
        raise ValueError(f"{path}: no vertex element")
    try:
        cols = [props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise ValueError(f"{path}: vertex element lacks x/y/z") from None
    rows = [text[body + k].split() for k in range(n_vertex)]
    data = np.array([[float(r[c]) for c in cols] for r in rows], dtype=np.float64)
    return data.reshape(-1, 3)
