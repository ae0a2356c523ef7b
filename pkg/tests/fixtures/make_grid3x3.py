"""Regenerate grid3x3.hex: a 3x3 NDVI grid holding 0.0, 0.1, ..., 0.8 row-major.

Writes the documented IRG1 layout field by field, without using irrigrid.
"""
import struct
from pathlib import Path

out = bytearray()
out += b"IRG1"
out += (0).to_bytes(1, "little")          # band kind: NDVI
out += bytes(3)                           # reserved
out += struct.pack("<d", 10.0)            # origin lon
out += struct.pack("<d", 20.0)            # origin lat
out += struct.pack("<d", 0.5)             # pixel size
out += (3).to_bytes(4, "little")          # width
out += (3).to_bytes(4, "little")          # height
for i in range(9):
    out += struct.pack("<f", i / 10)

hex_text = "\n".join(out[i:i + 16].hex(" ") for i in range(0, len(out), 16)) + "\n"
Path(__file__).with_name("grid3x3.hex").write_text(hex_text)
