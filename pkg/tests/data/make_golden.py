"""Regenerate the reference rasters in this directory.

Standalone on purpose: it does not import facies_gtm. The palette and the
quadrant layout are written out here by hand so that a regression in the
package cannot silently rewrite its own reference.

    python3 tests/data/make_golden.py
"""

from pathlib import Path

HERE = Path(__file__).resolve().parent

COLORS = {
    0: (0, 0, 0),
    1: (230, 25, 75),
    2: (60, 180, 75),
    3: (0, 130, 200),
    4: (255, 225, 25),
}


def ppm(rows):
    h, w = len(rows), len(rows[0])
    body = bytearray()
    for row in rows:
        for label in row:
            body.extend(COLORS[label])
    return b"P6\n" + f"{w} {h}\n255\n".encode() + bytes(body)


def quadrant_labels(n_inline, n_crossline):
    # label 1: low inline/low crossline, 2: low/high, 3: high/low, 4: high/high
    rows = []
    for i in range(n_inline):
        row = []
        for j in range(n_crossline):
            row.append(1 + 2 * (i >= n_inline // 2) + (j >= n_crossline // 2))
        rows.append(row)
    return rows


if __name__ == "__main__":
    (HERE / "palette_2x2.ppm").write_bytes(ppm([[1, 2], [3, 4]]))
    (HERE / "synthetic_facies_time16.ppm").write_bytes(ppm(quadrant_labels(64, 64)))
