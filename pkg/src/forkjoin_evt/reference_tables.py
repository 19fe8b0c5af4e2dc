"""Published reference values used by ``forkjoin-evt table``.

Independent-demand tables (2-4) list, per N:
``I*, beta*, F*, I_hat, beta_hat, F(I_hat, beta_hat), scaled gap``.

Dependent-demand tables (6-7) list, per (N, sigma_a):
``I^A, beta^A, F(I^A, beta^A), I_hat^A, beta_hat^A, F(I_hat^A, beta_hat^A), scaled gap``.

Mixed tables (8-9) list, per (N, sigma_a):
``I^M, beta^M, F(I^M, beta^M), gap (mixed vs simulated), gap (normal vs simulated)``.

All use sigma = 1 and h = 1 unless stated.
"""
from __future__ import annotations

from dataclasses import dataclass

__all__ = ["IndepTable", "DepTable", "MixedTable", "TABLES", "EXPERIMENT_GRID"]


@dataclass(frozen=True)
class IndepTable:
    table_id: int
    title: str
    h_rule: str
    b_rule: str
    regime: str
    rows: dict


@dataclass(frozen=True)
class DepTable:
    table_id: int
    title: str
    h_rule: str
    b_rule: str
    rows: dict


@dataclass(frozen=True)
class MixedTable:
    table_id: int
    title: str
    h_rule: str
    b_rule: str
    rows: dict


TABLE2 = IndepTable(2, "balanced regime, h=1, b=N (gamma=1/2)", "const:1", "linear:1", "balanced", {
    10: (1.35178, 1.19648, 23.9315, 1.33455, 1.19328, 23.9315, 0.001807),
    50: (2.14273, 1.49338, 149.338, 2.13927, 1.49286, 149.338, 0.000379),
    100: (2.48757, 1.60499, 320.997, 2.48584, 1.60475, 320.997, 0.000192),
    200: (2.83328, 1.70944, 683.775, 2.83242, 1.70932, 683.775, 9.68e-5),
    500: (3.29091, 1.8385, 1838.5, 3.29056, 1.83846, 1838.5, 3.91e-5),
    1000: (3.63731, 1.93044, 3860.87, 3.63713, 1.93042, 3860.87, 1.97e-5),
})

TABLE3 = IndepTable(3, "quality-driven regime, h=1, b=N^2 (gamma=1/(1+N))", "const:1", "power:1:2", "quality", {
    10: (2.32898, 1.52962, 30.5925, 2.3266, 1.52924, 30.5925, 0.000617),
    50: (3.91708, 1.97978, 197.978, 3.91698, 1.97976, 197.978, 2.52e-5),
    100: (4.60768, 2.14684, 429.368, 4.60766, 2.14684, 429.368, 6.31162e-6),
    200: (5.29957, 2.30221, 920.886, 5.29956, 2.30221, 920.886, 1.21801e-6),
    500: (6.21511, 2.49306, 2493.06, 6.21511, 2.49306, 2493.06, 5.51467e-6),
    1000: (6.90801, 2.62833, 5256.66, 6.90801, 2.62833, 5256.66, 0.000176),
})

TABLE4 = IndepTable(4, "efficiency-driven regime, h=N, b=1 (gamma=N^2/(N^2+1))", "linear:1", "const:1", "efficiency", {
    10: (0.497572, 3.12224, 62.4448, 0.386624, 3.08439, 62.4665, 0.000797),
    50: (0.965997, 9.35451, 935.451, 0.927385, 9.34122, 935.453, 8.65678e-6),
    100: (1.21527, 14.4701, 2894.02, 1.19242, 14.4615, 2894.02, 1.30518e-6),
    200: (1.48208, 22.0864, 8834.57, 1.46889, 22.0808, 8834.57, 2.20863e-7),
    500: (1.85348, 38.0553, 38055.3, 1.84728, 38.0521, 38055.3, 2.51171e-8),
    1000: (2.14443, 56.945, 113890.0, 2.14098, 56.9428, 113890.0, 5.30189e-9),
})

TABLE6 = DepTable(6, "stochastic demand, h=1, b=N", "const:1", "linear:1", {
    (10, 0.1): (1.32672, 1.1583, 23.1894, 1.15129, 0.855514, 24.5143, 0.082011),
    (50, 0.1): (2.12222, 1.47611, 147.534, 1.95601, 1.25004, 150.337, 0.036877),
    (100, 0.1): (2.45516, 1.58865, 318.588, 2.30259, 1.38516, 322.994, 0.029273),
    (10, 0.5): (1.48629, 1.25448, 25.333, 1.15129, 0.976909, 26.9363, 0.090320),
    (50, 0.5): (2.33757, 1.59412, 159.934, 1.95601, 1.3744, 164.689, 0.057107),
    (100, 0.5): (2.71507, 1.71664, 343.937, 2.30259, 1.51094, 352.91, 0.054563),
    (10, 0.75): (1.71443, 1.36908, 27.191, 1.15129, 1.00605, 29.7614, 0.131055),
    (50, 0.75): (2.63758, 1.70591, 171.443, 1.95601, 1.41834, 180.556, 0.099827),
    (100, 0.75): (2.98024, 1.83438, 367.348, 2.30259, 1.55865, 383.319, 0.089412),
    (10, 1.0): (1.98963, 1.47358, 29.8393, 1.15129, 1.0037, 34.6552, 0.210871),
    (50, 1.0): (3.00637, 1.84276, 185.25, 1.95601, 1.43941, 201.314, 0.157827),
    (100, 1.0): (3.3939, 1.97602, 393.668, 2.30259, 1.58534, 421.505, 0.141724),
})

TABLE7 = DepTable(7, "stochastic demand, h=1, b=3N", "const:1", "linear:3", {
    (10, 0.1): (1.72631, 1.31058, 25.9539, 1.22366, 0.884692, 31.2239, 0.256113),
    (50, 0.1): (2.53298, 1.5931, 159.026, 2.05034, 1.27624, 173.141, 0.161243),
    (100, 0.1): (2.88327, 1.69656, 341.44, 2.40493, 1.41084, 367.575, 0.152581),
    (10, 0.5): (2.06709, 1.43331, 28.3311, 1.51315, 1.0992, 31.2606, 0.142201),
    (50, 0.5): (2.98654, 1.74381, 173.875, 2.42767, 1.48993, 183.166, 0.100327),
    (100, 0.5): (3.37032, 1.86469, 371.779, 2.81433, 1.62542, 387.809, 0.088703),
    (10, 0.75): (2.44895, 1.57036, 31.4004, 1.69408, 1.18023, 35.5139, 0.175760),
    (50, 0.75): (3.41775, 1.89842, 190.571, 2.6635, 1.58369, 205.174, 0.140773),
    (100, 0.75): (3.8989, 2.01955, 404.306, 3.0702, 1.72277, 429.58, 0.126256),
    (10, 1.0): (2.91296, 1.72878, 34.6096, 1.87501, 1.23092, 40.7704, 0.229298),
    (50, 1.0): (4.15795, 2.06968, 207.553, 2.89934, 1.65341, 230.281, 0.195211),
    (100, 1.0): (4.5669, 2.20696, 439.681, 3.32607, 1.79761, 479.663, 0.178876),
})

TABLE8 = MixedTable(8, "mixed approximation, h=1, b=N", "const:1", "linear:1", {
    (10, 0.1): (1.33785, 1.1945, 23.2022, 0.000837, 0.082011),
    (50, 0.1): (2.14487, 1.49567, 147.567, 0.000442, 0.036877),
    (100, 0.1): (2.49244, 1.60808, 318.638, 0.000337, 0.029273),
    (10, 0.5): (1.38072, 1.21129, 25.4342, 0.006038, 0.090320),
    (50, 0.5): (2.19829, 1.53814, 160.497, 0.006938, 0.057107),
    (100, 0.5): (2.54871, 1.65808, 345.247, 0.008143, 0.054563),
    (10, 0.75): (1.40013, 1.2128, 27.6956, 0.027647, 0.131055),
    (50, 0.75): (2.216, 1.56166, 174.269, 0.032074, 0.099827),
    (100, 0.75): (2.5656, 1.68745, 372.643, 0.030493, 0.089412),
    (10, 1.0): (1.41255, 1.19665, 31.5428, 0.081950, 0.210871),
    (50, 1.0): (2.22627, 1.57136, 192.722, 0.076684, 0.157827),
    (100, 1.0): (2.57434, 1.70384, 407.343, 0.072043, 0.141724),
})

TABLE9 = MixedTable(9, "mixed approximation, h=1, b=3N", "const:1", "linear:3", {
    (10, 0.1): (1.78238, 1.34746, 25.9965, 0.002487, 0.256113),
    (50, 0.1): (2.59271, 1.62088, 159.162, 0.001690, 0.161243),
    (100, 0.1): (2.94168, 1.72533, 341.49, 0.000314, 0.152581),
    (10, 0.5): (1.94345, 1.38309, 28.3671, 0.001926, 0.142201),
    (50, 0.5): (2.83775, 1.68955, 174.284, 0.004642, 0.100327),
    (100, 0.5): (3.21861, 1.8044, 372.617, 0.004826, 0.088703),
    (10, 0.75): (2.09429, 1.41142, 32.0055, 0.028689, 0.175760),
    (50, 0.75): (3.04648, 1.74512, 193.854, 0.033496, 0.140773),
    (100, 0.75): (3.44819, 1.86761, 410.624, 0.033019, 0.126256),
    (10, 1.0): (2.25658, 1.43095, 36.5165, 0.079240, 0.229298),
    (50, 1.0): (3.26538, 1.79271, 216.91, 0.085321, 0.195211),
    (100, 1.0): (3.68765, 1.92281, 456.859, 0.080689, 0.178876),
})

# factorial design behind tables 6-9
EXPERIMENT_GRID = {
    "N": (10, 50, 100),
    "sigma_a": (0.1, 0.5, 0.75, 1.0),
    "b": ("N", "3N"),
}

TABLES = {2: TABLE2, 3: TABLE3, 4: TABLE4, 6: TABLE6, 7: TABLE7, 8: TABLE8, 9: TABLE9}
