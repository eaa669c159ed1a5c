"""Published per-dataset test NMSEs (3 decimals) used as fixed inputs."""

import numpy as np

# Columns: CR, LR, QR, RBF, fE1, fE2, fE3; one row per dataset.
BASE_AND_LEVEL1 = np.array(
    [
        [1.051, 0.403, 0.204, 0.353, 0.236, 0.390, 0.255],
        [1.227, 0.390, 0.315, 0.408, 0.332, 0.516, 0.432],
        [1.159, 0.516, 9.063, 0.797, 0.486, 0.513, 0.828],
        [1.126, 0.604, 0.842, 0.898, 0.835, 0.682, 0.843],
        [1.158, 0.418, 0.252, 0.624, 0.277, 0.390, 0.256],
        [1.010, 0.443, 2.358, 0.454, 0.665, 0.494, 0.516],
        [1.009, 0.639, 0.629, 0.585, 0.630, 0.644, 0.571],
        [1.109, 0.720, 0.508, 0.406, 0.548, 0.422, 0.433],
        [1.004, 0.688, 0.745, 0.727, 0.703, 0.688, 0.730],
        [1.000, 0.190, 0.551, 0.249, 0.185, 0.205, 0.227],
        [1.005, 0.315, 0.158, 0.242, 0.199, 0.267, 0.165],
        [1.016, 0.119, 0.142, 0.308, 0.071, 0.077, 0.180],
        [1.008, 1.002, 24.818, 1.085, 0.916, 0.968, 1.017],
        [1.002, 0.524, 0.475, 0.838, 0.494, 0.556, 0.511],
        [1.002, 0.376, 0.293, 0.652, 0.301, 0.398, 0.319],
        [1.004, 0.303, 12.958, 0.441, 0.328, 0.313, 0.453],
        [1.005, 0.304, 0.295, 0.376, 0.298, 0.304, 0.296],
        [1.013, 0.955, 1.205, 0.909, 0.930, 0.918, 0.906],
        [1.000, 0.776, 1.640, 0.692, 0.792, 0.722, 0.716],
        [1.008, 1.046, 0.963, 0.834, 0.949, 0.895, 0.834],
        [1.000, 0.216, 0.166, 0.202, 0.163, 0.183, 0.161],
        [1.013, 0.216, 0.149, 0.255, 0.142, 0.211, 0.163],
        [1.000, 1.054, 0.999, 1.050, 0.924, 1.016, 0.929],
        [1.003, 0.549, 0.432, 0.526, 0.473, 0.481, 0.433],
        [1.009, 0.847, 0.781, 0.795, 0.774, 0.771, 0.752],
        [1.000, 0.907, 1.022, 0.941, 0.902, 0.897, 0.933],
        [1.044, 0.831, 0.926, 0.805, 0.792, 0.782, 0.775],
        [1.022, 0.530, 0.506, 0.395, 0.505, 0.397, 0.408],
        [0.203, 0.400, 0.200, 0.522, 0.203, 0.400, 0.203],
        [1.024, 0.957, 0.985, 1.040, 0.942, 0.942, 1.011],
    ]
)

# Columns: best level-1 ensemble, selected level-2 ensemble.
LEVEL1_VS_LEVEL2 = np.array(
    [
        [0.236, 0.257],
        [0.332, 0.332],
        [0.486, 0.513],
        [0.835, 0.820],
        [0.277, 0.302],
        [0.665, 0.494],
        [0.630, 0.630],
        [0.548, 0.458],
        [0.703, 0.674],
        [0.185, 0.203],
        [0.199, 0.196],
        [0.071, 0.066],
        [0.916, 0.960],
        [0.494, 0.521],
        [0.301, 0.308],
        [0.328, 0.313],
        [0.298, 0.298],
        [0.949, 0.865],
        [0.792, 0.750],
        [0.930, 0.915],
        [0.163, 0.160],
        [0.142, 0.135],
        [0.924, 0.918],
        [0.774, 0.735],
        [0.473, 0.458],
        [0.902, 0.882],
        [0.792, 0.783],
        [0.505, 0.411],
        [0.203, 0.203],
        [0.942, 0.941],
    ]
)
