"""
closed-form fixtures of the branch equation and reference settings of the acceptance suite.
Each branch fixture lists params, S and the exact positive roots.
"""
import math

branch_fixtures = [
    {"name": "two_branch",
     "params": {"a": 0.25, "b": 0.25, "alpha": 1.0, "p": 2.0}, "S": 1.0,
     "roots": [(2 - math.sqrt(3)) ** 2, (2 + math.sqrt(3)) ** 2], "y0": 4.0},
    {"name": "supercritical",
     "params": {"a": 1.0, "b": 1.0, "alpha": 1.0, "p": 5.0}, "S": 1.0,
     "roots": [(1 + math.sqrt(5)) / 2]},
    {"name": "resonant",
     "params": {"a": 1.0, "b": 0.5, "alpha": 1.0, "p": 3.0}, "S": 1.0,
     "roots": [2.0]},
    {"name": "tangent",
     "params": {"a": 0.5, "b": 0.5, "alpha": 1.0, "p": 2.0}, "S": 1.0,
     "roots": [1.0], "y0": 1.0},
]

# sampling boxes of the randomized classification check: the open case regions, kept region_margin away
# from p = 1 and p = 2 alpha + 1 so that every root of f stays inside the float64 range
region_margin = 0.05
case_boxes = {
    "sublinear": {"alpha": (0.1, 3.0), "p": (region_margin, 1 - region_margin)},
    "subcritical_two_branch": {"alpha": (0.1, 3.0), "p": (1 + region_margin, None),
                               "gamma": (region_margin, None)},
    "supercritical": {"alpha": (0.1, 3.0), "gamma": (-5.0, -region_margin)},
    "resonant": {"alpha": (0.1, 3.0)},
}
coefficient_box = {"a": (1e-3, 1e3), "b": (1e-3, 1e3), "S": (1e-2, 1e2)}

# asymptotic family p=2, alpha=1, S=1 in the two-root zone for every b = 2^-k, k = 0..12
asymptotic_family = {"params": {"a": 1 / 64, "b": 1.0, "alpha": 1.0, "p": 2.0}, "S": 1.0,
                     "b_sequence": [2.0 ** -k for k in range(13)]}

sublinear_perturbation = {"kind": "sublinear", "mu": 1.0, "q": 0.7, "q1": 0.8}
superlinear_perturbation = {"kind": "superlinear", "lam_fraction": 0.5, "q": 2.0}

example_configs = {
    "branch": {"output": "runs/branch",
               "params": {"a": 0.25, "b": 0.25, "alpha": 1.0, "p": 2.0},
               "branch": {"S": 1.0}},
    "sublinear": {"output": "runs/sublinear",
                  "domain": {"shape": "disk", "radius": 1.0, "resolution": 128},
                  "params": {"a": 1.0, "b": 1.0, "alpha": 1.0, "p": 0.5},
                  "perturbation": sublinear_perturbation,
                  "sweep": {"variable": "t", "values": [0.0, 0.25, 0.5, 0.75, 1.0], "resolutions": [64, 128]}},
    "superlinear": {"output": "runs/superlinear",
                    "domain": {"shape": "disk", "radius": 1.0, "resolution": 128},
                    "params": {"a": 1.0, "b": 1.0, "alpha": 1.0, "p": 5.0},
                    "perturbation": superlinear_perturbation,
                    "sweep": {"variable": "lam_fraction", "values": [0.1, 0.9], "resolutions": [64, 128]}},
}
