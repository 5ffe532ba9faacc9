"""
run a kirlab pipeline stage from the terminal, e.g.

    python main.py branch --config configs/branch.toml
    python main.py verify --out runs/verify
"""

import torch

from kirlab.cli import main

########################################################################################################################
# configure torch tensor
########################################################################################################################

torch.set_printoptions(linewidth=200, precision=10)
torch.set_default_dtype(torch.float64)


if __name__ == "__main__":
    main()
