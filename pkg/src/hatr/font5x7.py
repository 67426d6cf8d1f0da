"""Embedded 5x7 bitmap font covering the 94 recognition classes.

Zero external assets: glyphs are defined inline as 7 rows of 5 cells each
('#' = ink). Records below are 8 lines: the character, then its rows. The
renderer upscales these with nearest-neighbor before smoothing, so shapes
only need to be distinct and roughly conventional, not pretty.
"""

import numpy as np

_RAW = r"""!
..#..
..#..
..#..
..#..
..#..
.....
..#..
"
.#.#.
.#.#.
.#.#.
.....
.....
.....
.....
#
.#.#.
.#.#.
#####
.#.#.
#####
.#.#.
.#.#.
$
..#..
.####
#.#..
.###.
..#.#
####.
..#..
%
##...
##..#
...#.
..#..
.#...
#..##
...##
&
.##..
#..#.
#.#..
.#...
#.#.#
#..#.
.##.#
'
..#..
..#..
.#...
.....
.....
.....
.....
(
...#.
..#..
.#...
.#...
.#...
..#..
...#.
)
.#...
..#..
...#.
...#.
...#.
..#..
.#...
*
.....
..#..
#.#.#
.###.
#.#.#
..#..
.....
+
.....
..#..
..#..
#####
..#..
..#..
.....
,
.....
.....
.....
.....
.##..
..#..
.#...
-
.....
.....
.....
#####
.....
.....
.....
.
.....
.....
.....
.....
.....
.##..
.##..
/
.....
....#
...#.
..#..
.#...
#....
.....
0
.###.
#...#
#..##
#.#.#
##..#
#...#
.###.
1
..#..
.##..
..#..
..#..
..#..
..#..
.###.
2
.###.
#...#
....#
...#.
..#..
.#...
#####
3
#####
...#.
..#..
...#.
....#
#...#
.###.
4
...#.
..##.
.#.#.
#..#.
#####
...#.
...#.
5
#####
#....
####.
....#
....#
#...#
.###.
6
..##.
.#...
#....
####.
#...#
#...#
.###.
7
#####
....#
...#.
..#..
..#..
..#..
..#..
8
.###.
#...#
#...#
.###.
#...#
#...#
.###.
9
.###.
#...#
#...#
.####
....#
...#.
.##..
:
.....
.##..
.##..
.....
.##..
.##..
.....
;
.....
.##..
.##..
.....
.##..
..#..
.#...
<
...#.
..#..
.#...
#....
.#...
..#..
...#.
=
.....
.....
#####
.....
#####
.....
.....
>
.#...
..#..
...#.
....#
...#.
..#..
.#...
?
.###.
#...#
....#
...#.
..#..
.....
..#..
@
.###.
#...#
....#
.##.#
#.#.#
#.#.#
.###.
A
.###.
#...#
#...#
#####
#...#
#...#
#...#
B
####.
#...#
#...#
####.
#...#
#...#
####.
C
.###.
#...#
#....
#....
#....
#...#
.###.
D
###..
#..#.
#...#
#...#
#...#
#..#.
###..
E
#####
#....
#....
####.
#....
#....
#####
F
#####
#....
#....
####.
#....
#....
#....
G
.###.
#...#
#....
#.###
#...#
#...#
.###.
H
#...#
#...#
#...#
#####
#...#
#...#
#...#
I
.###.
..#..
..#..
..#..
..#..
..#..
.###.
J
..###
...#.
...#.
...#.
...#.
#..#.
.##..
K
#...#
#..#.
#.#..
##...
#.#..
#..#.
#...#
L
#....
#....
#....
#....
#....
#....
#####
M
#...#
##.##
#.#.#
#.#.#
#...#
#...#
#...#
N
#...#
##..#
#.#.#
#..##
#...#
#...#
#...#
O
.###.
#...#
#...#
#...#
#...#
#...#
.###.
P
####.
#...#
#...#
####.
#....
#....
#....
Q
.###.
#...#
#...#
#...#
#.#.#
#..#.
.##.#
R
####.
#...#
#...#
####.
#.#..
#..#.
#...#
S
.####
#....
#....
.###.
....#
....#
####.
T
#####
..#..
..#..
..#..
..#..
..#..
..#..
U
#...#
#...#
#...#
#...#
#...#
#...#
.###.
V
#...#
#...#
#...#
#...#
#...#
.#.#.
..#..
W
#...#
#...#
#...#
#.#.#
#.#.#
##.##
#...#
X
#...#
#...#
.#.#.
..#..
.#.#.
#...#
#...#
Y
#...#
#...#
.#.#.
..#..
..#..
..#..
..#..
Z
#####
....#
...#.
..#..
.#...
#....
#####
[
.###.
.#...
.#...
.#...
.#...
.#...
.###.
\
.....
#....
.#...
..#..
...#.
....#
.....
]
.###.
...#.
...#.
...#.
...#.
...#.
.###.
^
..#..
.#.#.
#...#
.....
.....
.....
.....
_
.....
.....
.....
.....
.....
.....
#####
`
.#...
..#..
...#.
.....
.....
.....
.....
a
.....
.....
.###.
....#
.####
#...#
.####
b
#....
#....
####.
#...#
#...#
#...#
####.
c
.....
.....
.###.
#....
#....
#...#
.###.
d
....#
....#
.####
#...#
#...#
#...#
.####
e
.....
.....
.###.
#...#
#####
#....
.###.
f
..##.
.#..#
.#...
###..
.#...
.#...
.#...
g
.....
.####
#...#
#...#
.####
....#
.###.
h
#....
#....
####.
#...#
#...#
#...#
#...#
i
..#..
.....
.##..
..#..
..#..
..#..
.###.
j
...#.
.....
..##.
...#.
...#.
#..#.
.##..
k
#....
#....
#..#.
#.#..
##...
#.#..
#..#.
l
.##..
..#..
..#..
..#..
..#..
..#..
.###.
m
.....
.....
##.#.
#.#.#
#.#.#
#.#.#
#.#.#
n
.....
.....
####.
#...#
#...#
#...#
#...#
o
.....
.....
.###.
#...#
#...#
#...#
.###.
p
.....
####.
#...#
#...#
####.
#....
#....
q
.....
.####
#...#
#...#
.####
....#
....#
r
.....
.....
#.##.
##..#
#....
#....
#....
s
.....
.....
.####
#....
.###.
....#
####.
t
.#...
.#...
###..
.#...
.#...
.#..#
..##.
u
.....
.....
#...#
#...#
#...#
#..##
.##.#
v
.....
.....
#...#
#...#
#...#
.#.#.
..#..
w
.....
.....
#...#
#...#
#.#.#
#.#.#
.#.#.
x
.....
.....
#...#
.#.#.
..#..
.#.#.
#...#
y
.....
#...#
#...#
#...#
.####
....#
.###.
z
.....
.....
#####
...#.
..#..
.#...
#####
{
...#.
..#..
..#..
.#...
..#..
..#..
...#.
|
..#..
..#..
..#..
..#..
..#..
..#..
..#..
}
.#...
..#..
..#..
...#.
..#..
..#..
.#...
~
.....
.....
.#...
#.#.#
...#.
.....
....."""


def _parse() -> dict[str, np.ndarray]:
    lines = _RAW.split("\n")
    assert len(lines) % 8 == 0, "font table corrupt"
    glyphs = {}
    for i in range(0, len(lines), 8):
        ch = lines[i]
        assert len(ch) == 1, f"bad glyph header {ch!r}"
        rows = lines[i + 1 : i + 8]
        assert all(len(r) == 5 and set(r) <= {".", "#"} for r in rows), f"bad glyph {ch!r}"
        glyphs[ch] = np.array([[c == "#" for c in r] for r in rows], dtype=np.float64)
    return glyphs


GLYPHS = _parse()

GLYPH_HEIGHT = 7
GLYPH_WIDTH = 5


def glyph(ch: str) -> np.ndarray:
    """The 7x5 ink mask (float 0/1) for one character."""
    try:
        return GLYPHS[ch]
    except KeyError:
        raise ValueError(f"no glyph for character {ch!r}") from None
