"""
configure and write the output of a run: <prefix>.report.json, <prefix>.csv, field dumps and
tensorboard directories <prefix>_TB_NNN
"""
import os
import json

import numpy as np
import pandas as pd
import torch

from kirlab.version import get_version

FLOAT_FORMAT = "%.17g"


def conf_output(prefix):
    """
    create the folder of an output prefix
    :param prefix: path prefix of every output file, e.g. runs/sublinear
    :return: absolute prefix
    """
    prefix = os.path.abspath(prefix)
    outdir = os.path.dirname(prefix)
    if not os.path.exists(outdir):
        os.makedirs(outdir)
    return prefix


def conf_writer_path(prefix):
    """
    configure writer path for tensorboard without touching earlier runs
    :param prefix: output prefix
    :return: first free <prefix>_TB_NNN
    """
    it = 1
    while os.path.exists(f"{prefix}_TB_{it:03d}"):
        it += 1
    return f"{prefix}_TB_{it:03d}"


def make_writer(prefix):
    """
    tensorboard SummaryWriter in a fresh directory next to the outputs
    """
    from torch.utils.tensorboard import SummaryWriter

    path = conf_writer_path(conf_output(prefix))
    print("tensorboard logs to: ", path)
    return SummaryWriter(path)


def _default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, torch.Tensor):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def save_report(prefix, command, status, config=None, result=None, errors=None):
    """
    write <prefix>.report.json
    :param prefix: output prefix
    :param command: subcommand that produced the report
    :param status: "ok", "failed" or "error"
    :param config: resolved configuration dict embedded for provenance
    :param result: dict of results
    :param errors: list of error messages
    :return: path of the report
    """
    prefix = conf_output(prefix)
    _dict = {"kirlab_version": get_version(),
             "command": command,
             "status": status,
             "config": config,
             "result": result if result is not None else {},
             "errors": errors or []}
    path = f"{prefix}.report.json"
    with open(path, "w") as f:
        json.dump(_dict, f, indent=4, default=_default)
        f.write("\n")
    return path


def save_table(prefix, table: pd.DataFrame, suffix=""):
    """
    write <prefix><suffix>.csv with 17 significant digits
    """
    prefix = conf_output(prefix)
    path = f"{prefix}{suffix}.csv"
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def save_field(prefix, frame: pd.DataFrame, name):
    """
    dump a grid function (as returned by Grid.to_frame) to <prefix>.<name>.csv
    """
    return save_table(prefix, frame, suffix=f".{name}")
