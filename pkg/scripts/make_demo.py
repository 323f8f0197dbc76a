"""Write the shipped 16x16 demo layer (weights and 16x64 calibration inputs) to data/."""

import os

from septq.instances import demo_instance
from septq.matio import write_matrix

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data")

if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    w, x = demo_instance()
    write_matrix(w, os.path.join(OUT, "demo_w.bin"))
    write_matrix(x, os.path.join(OUT, "demo_x.bin"))
    print(f"wrote {OUT}/demo_w.bin {w.shape} and demo_x.bin {x.shape}")
