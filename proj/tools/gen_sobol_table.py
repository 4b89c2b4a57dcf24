"""Emit src/sobol_directions.cpp from the Joe-Kuo new-joe-kuo-6.21201 table.

The table is read from the copy that ships with SciPy; only the first
MAX_DIM dimensions are kept.
"""
import os
import sys

import numpy as np
import scipy

MAX_DIM = 2048

data = np.load(os.path.join(os.path.dirname(scipy.__file__), "stats",
                            "_sobol_direction_numbers.npz"))
poly = data["poly"][:MAX_DIM]
vinit = data["vinit"][:MAX_DIM]

out = [
    "// Generated by tools/gen_sobol_table.py from the Joe-Kuo d=21201 table.",
    "// Do not edit by hand.",
    "",
    '#include "noisyei/sobol_directions.hpp"',
    "",
    "namespace nei::detail {",
    "",
    "const std::array<SobolDirection, kSobolTableDimensions> kSobolDirections = {{",
]
for p, v in zip(poly, vinit):
    degree = int(p).bit_length() - 1
    init = ", ".join(str(int(x)) for x in v[:max(degree, 1)])
    out.append(f"    {{{int(p)}u, {degree}u, {{{init}}}}},")
out += ["}};", "", "}  // namespace nei::detail", ""]

path = sys.argv[1] if len(sys.argv) > 1 else "src/sobol_directions.cpp"
with open(path, "w") as fh:
    fh.write("\n".join(out))
print(f"wrote {MAX_DIM} dimensions to {path}, max degree {int(max(int(p).bit_length() - 1 for p in poly))}")
