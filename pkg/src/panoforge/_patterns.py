"""Fixed sampling tables for the binary descriptors."""

# 512 indices into the 903 FREAK field pairs enumerated as
# [(i, j) for i in range(1, 43) for j in range(i)], in descriptor bit order.
FREAK_PAIR_TABLE = (
    404, 431, 818, 511, 181, 52, 311, 874, 774, 543, 719, 230, 417, 205, 11, 560,
    149, 265, 39, 306, 165, 857, 250, 8, 61, 15, 55, 717, 44, 412, 592, 134,
    761, 695, 660, 782, 625, 487, 549, 516, 271, 665, 762, 392, 178, 796, 773, 31,
    672, 845, 548, 794, 677, 654, 241, 831, 225, 238, 849, 83, 691, 484, 826, 707,
    122, 517, 583, 731, 328, 339, 571, 475, 394, 472, 580, 381, 137, 93, 380, 327,
    619, 729, 808, 218, 213, 459, 141, 806, 341, 95, 382, 568, 124, 750, 193, 749,
    706, 843, 79, 199, 317, 329, 768, 198, 100, 466, 613, 78, 562, 783, 689, 136,
    838, 94, 142, 164, 679, 219, 419, 366, 418, 423, 77, 89, 523, 259, 683, 312,
    555, 20, 470, 684, 123, 458, 453, 833, 72, 113, 253, 108, 313, 25, 153, 648,
    411, 607, 618, 128, 305, 232, 301, 84, 56, 264, 371, 46, 407, 360, 38, 99,
    176, 710, 114, 578, 66, 372, 653, 129, 359, 424, 159, 821, 10, 323, 393, 5,
    340, 891, 9, 790, 47, 0, 175, 346, 236, 26, 172, 147, 574, 561, 32, 294,
    429, 724, 755, 398, 787, 288, 299, 769, 565, 767, 722, 757, 224, 465, 723, 498,
    467, 235, 127, 802, 446, 233, 544, 482, 800, 318, 16, 532, 801, 441, 554, 173,
    60, 530, 713, 469, 30, 212, 630, 899, 170, 266, 799, 88, 49, 512, 399, 23,
    500, 107, 524, 90, 194, 143, 135, 192, 206, 345, 148, 71, 119, 101, 563, 870,
    158, 254, 214, 276, 464, 332, 725, 188, 385, 24, 476, 40, 231, 620, 171, 258,
    67, 109, 844, 244, 187, 388, 701, 690, 50, 7, 850, 479, 48, 522, 22, 154,
    12, 659, 736, 655, 577, 737, 830, 811, 174, 21, 237, 335, 353, 234, 53, 270,
    62, 182, 45, 177, 245, 812, 673, 355, 556, 612, 166, 204, 54, 248, 365, 226,
    242, 452, 700, 685, 573, 14, 842, 481, 468, 781, 564, 416, 179, 405, 35, 819,
    608, 624, 367, 98, 643, 448, 2, 460, 676, 440, 240, 130, 146, 184, 185, 430,
    65, 807, 377, 82, 121, 708, 239, 310, 138, 596, 730, 575, 477, 851, 797, 247,
    27, 85, 586, 307, 779, 326, 494, 856, 324, 827, 96, 748, 13, 397, 125, 688,
    702, 92, 293, 716, 277, 140, 112, 4, 80, 855, 839, 1, 413, 347, 584, 493,
    289, 696, 19, 751, 379, 76, 73, 115, 6, 590, 183, 734, 197, 483, 217, 344,
    330, 400, 186, 243, 587, 220, 780, 200, 793, 246, 824, 41, 735, 579, 81, 703,
    322, 760, 720, 139, 480, 490, 91, 814, 813, 163, 152, 488, 763, 263, 425, 410,
    576, 120, 319, 668, 150, 160, 302, 491, 515, 260, 145, 428, 97, 251, 395, 272,
    252, 18, 106, 358, 854, 485, 144, 550, 131, 133, 378, 68, 102, 104, 58, 361,
    275, 209, 697, 582, 338, 742, 589, 325, 408, 229, 28, 304, 191, 189, 110, 126,
    486, 211, 547, 533, 70, 215, 670, 249, 36, 581, 389, 605, 331, 518, 442, 822,
)

# 256 BRIEF test pairs (px, py, qx, qy) inside a 31x31 patch, drawn once from an
# isotropic Gaussian with sigma = 31/5 and clipped to [-15, 15].
BRIEF_PAIR_TABLE = (
    (-12, 4, -8, -9), (-3, 7, -3, 15), (-4, -8, -6, 7), (-2, -12, -3, 4),
    (0, -2, -4, -6), (0, 5, 6, 3), (5, 1, 2, 7), (-1, 0, 1, -7),
    (-7, 8, 6, -4), (4, -4, -3, 6), (11, -3, 2, 9), (2, 3, 0, -6),
    (-1, 7, 3, 4), (1, -9, 0, 3), (8, 0, -15, -13), (10, 4, -2, -5),
    (-1, -5, 0, 0), (-9, 4, 8, -5), (-9, 2, 6, -4), (1, 1, 0, 6),
    (-7, -4, -1, -7), (-3, -1, 4, 1), (3, -2, 1, -6), (1, -5, 8, -2),
    (8, -2, 1, 5), (-15, 0, -7, 6), (1, 7, -4, 1), (8, 5, -2, 2),
    (-6, 4, 4, 11), (7, 11, -3, -2), (4, 1, -2, 6), (5, -5, -11, 6),
    (-5, 0, 1, 3), (3, 7, -12, 3), (6, 5, 0, -4), (-3, 5, -7, -1),
    (-1, 5, -2, 7), (5, 8, 4, 1), (-7, -5, 2, 0), (-1, 1, 6, 2),
    (3, 3, 8, 7), (11, 4, 6, -3), (-4, -9, 11, -6), (0, 7, 2, 1),
    (3, 14, 3, 0), (-2, 14, 6, -4), (-1, 12, -5, -10), (-2, 5, 6, 10),
    (-2, -1, -15, -7), (-6, 1, 15, 6), (-1, 4, 1, 3), (-2, -1, -4, 3),
    (3, -2, 8, 3), (-10, 3, -2, 3), (7, 3, 7, -1), (2, 0, -5, 5),
    (7, -1, 8, -8), (-4, -1, -2, -2), (-3, 6, 8, -5), (10, -1, 1, 5),
    (-9, -9, -2, -5), (3, 6, -2, 0), (6, 3, -2, -5), (-7, 4, 2, -7),
    (8, -6, -5, 3), (3, -2, -2, 5), (8, 6, 4, 4), (-8, -6, 12, -8),
    (-6, 4, 6, -4), (-2, 7, -6, -6), (-4, -8, 0, -1), (5, 5, -2, -9),
    (8, 5, -10, -11), (4, 0, -10, -4), (-10, 3, 1, 5), (-2, 0, 6, 8),
    (4, -3, -6, 0), (-2, 1, -8, 4), (-6, 10, 2, 4), (-2, 3, 6, -8),
    (6, 4, 7, 3), (-3, 6, -12, 2), (0, 5, -11, -4), (-10, 3, -4, 5),
    (6, -5, -3, 5), (7, 0, 4, 10), (10, 3, -9, -10), (4, -13, 2, 4),
    (0, 0, -3, -10), (-7, -5, 0, -2), (5, -5, 5, 1), (5, 2, -5, 1),
    (11, -12, 9, -1), (-12, 9, 1, 7), (-3, 2, 9, -1), (-3, 0, -5, 7),
    (-4, 8, -5, -7), (-1, 0, 14, 9), (-7, 9, -6, -3), (12, 6, -2, 2),
    (2, -8, -4, -5), (8, -12, 8, -5), (6, 3, 5, -1), (-5, -4, -9, 0),
    (-13, 1, -3, -3), (0, 0, 4, -11), (-11, 3, 6, 0), (7, -5, 0, 1),
    (5, 2, -2, 1), (6, -4, -1, 5), (1, 8, 0, 1), (-3, 6, -1, 3),
    (-2, 4, -1, 3), (4, -3, 2, -7), (-5, -5, -5, -10), (-10, 3, 1, -5),
    (4, 8, -10, 3), (11, -5, 2, 5), (6, -3, -7, -7), (4, -11, -2, 8),
    (-11, 0, -10, 0), (-4, 1, 9, -7), (6, 6, -2, -4), (-8, -1, -3, 0),
    (4, -6, -4, 1), (-8, 12, 7, 2), (4, -6, 5, 8), (2, -3, -6, 2),
    (-8, -4, 0, -4), (10, 8, -2, 3), (-5, -14, -11, 1), (0, 12, 3, -5),
    (-8, 3, 0, 3), (4, 7, 4, -9), (3, 2, 6, -4), (2, -1, -2, 10),
    (-3, 2, -2, 10), (-6, 0, 4, 8), (-4, -9, -5, 15), (-5, -2, -2, 10),
    (0, 5, -3, -6), (3, 5, -5, -12), (7, 4, 4, -6), (0, 5, -8, -2),
    (-6, 3, 0, -11), (1, 4, -7, 1), (10, -1, 0, 0), (6, 8, 5, 0),
    (-2, 2, 5, -4), (-2, -3, 6, -8), (-5, -4, 5, 8), (-9, 4, 3, -1),
    (6, -4, 0, 8), (-2, -3, -7, -10), (3, -5, 5, -8), (1, -15, 0, -7),
    (-1, -3, 6, 2), (-4, 7, 3, 14), (-5, -3, -6, -3), (-1, -3, 15, 5),
    (-6, -15, 5, 8), (-8, -7, 4, -8), (-3, -1, 7, -5), (-10, -2, 5, -3),
    (2, 0, -5, 6), (-5, -1, -11, 0), (2, 1, 7, 8), (2, -4, 1, 5),
    (9, -1, -3, -3), (-4, -3, -9, -1), (7, -1, -1, 7), (5, -9, 4, 5),
    (-6, -5, 0, -9), (-2, 7, 1, -1), (1, 2, 3, -3), (2, 6, -9, 4),
    (6, 1, 5, -9), (7, 4, 2, -11), (1, 1, -1, 3), (-8, 3, 2, -7),
    (8, -6, 0, -1), (3, -4, 6, -4), (-9, -4, 0, 8), (5, 2, 5, -1),
    (2, 4, 1, 8), (10, 8, -2, -2), (-3, 9, -12, -9), (8, -4, 1, 7),
    (4, -1, -8, 2), (6, -6, -6, 8), (-1, -7, -4, 0), (7, -2, -3, 4),
    (0, -5, 10, 1), (-5, 3, -7, 7), (7, 1, -7, 0), (14, 1, -5, 6),
    (7, -4, -11, 3), (15, -2, 1, -15), (-5, 3, 3, -2), (8, -6, 1, -15),
    (-8, 6, 5, -2), (-7, -4, 5, -7), (-6, 10, 2, 1), (-9, 0, 1, -4),
    (-3, -7, 0, 1), (7, 7, -6, 5), (9, 0, -4, -14), (10, 9, 4, 14),
    (-2, -3, 8, -5), (-6, -2, -3, 9), (-3, -2, 3, -1), (10, 1, 0, 4),
    (5, 1, 5, -7), (9, 4, 1, -15), (-5, 2, 1, 13), (4, 9, -4, -5),
    (6, 3, 6, -1), (-2, 5, -9, 5), (-2, -4, -8, -12), (3, 4, 8, -11),
    (-4, 8, 8, -3), (1, -3, 8, 0), (-1, 8, -7, 0), (-3, -7, -4, 1),
    (2, 11, -15, -2), (-3, 14, 2, 2), (-7, -6, -5, -9), (11, 0, -6, 5),
    (-7, -12, -9, 10), (1, -3, -4, 6), (-2, -2, 7, 2), (2, -10, 2, 9),
    (-2, -3, -1, 1), (1, -2, -3, 5), (0, 11, 2, 5), (-4, -3, -8, -1),
    (7, -4, 15, -5), (-5, -1, -1, 0), (-9, 1, 11, -6), (-2, 5, -14, -10),
    (0, -5, -2, -6), (-7, -11, -2, 9), (0, 3, -5, 5), (1, -9, 3, 2),
    (10, -10, -5, 2), (2, 3, -7, 6), (6, 3, 9, -9), (-3, -4, 2, -1),
    (2, 1, -2, 2), (2, 2, 6, 4), (6, 5, 4, 4), (-5, 4, 0, 9),
    (1, -2, -7, -6), (-1, 4, 6, 11), (2, -1, -7, 5), (-10, -6, 7, 3),
)
