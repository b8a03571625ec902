import csv
import hashlib
import json
import os
import os.path as op
from typing import Iterable, List, Sequence, Union

import numpy as np


def highprecisionexp(array, minp=0.0) -> np.ndarray[float]:
    """Exponentiates log-domain values without numpy underflow or
    overflow warnings; -inf maps to `minp`.
    Classification: Function

    Parameters
    ----------
    array : array_like
        Log-domain values to exponentiate
    minp : float, optional
        Value assigned where the input is -inf (Default: 0.0)

    Returns
    -------
    ndarray(dtype=float)
        exp(array), with -inf entries replaced by `minp`

    Examples
    --------
    probs = highprecisionexp(log_probs)
    """
    array = np.asarray(array, dtype=float)
    with np.errstate(under="ignore", over="ignore"):
        ans = np.exp(array)
    return np.where(np.isneginf(array), minp, ans)


def safelog(array) -> np.ndarray[float]:
    """Natural logarithm mapping zeros to -inf without raising a
    divide-by-zero warning.
    Classification: Function

    Parameters
    ----------
    array : array_like
        Non-negative values

    Returns
    -------
    ndarray(dtype=float)
        log(array) with log(0) = -inf
    """
    array = np.asarray(array, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(array)


def clipProbabilities(probs, tol=1e-10) -> np.ndarray[float]:
    """Clips round-off negatives of a probability vector to zero and
    renormalizes. Values more negative than `tol` are an error.
    Classification: Function

    Parameters
    ----------
    probs : array_like
        Probability vector with possible round-off error
    tol : float, optional
        Largest negative excursion accepted as round-off (Default: 1e-10)

    Returns
    -------
    ndarray(dtype=float)
        Non-negative vector summing to one
    """
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -tol):
        raise ValueError("Probability vector has entries below -{}: {}".format(tol, probs.min()))
    probs = np.clip(probs, 0, None)
    return probs / probs.sum()


def writecsv(rows: Iterable[Sequence], header: List[str], output: str) -> str:
    """Writes rows to a CSV file with a fixed header. Floats are written
    with ``repr`` precision so files are bit-stable for a given input.

    Parameters
    ----------
    rows : iterable of sequence
        Row values, one sequence per row, in header order
    header : list of str
        Column names
    output : str
        Path of the CSV file to write

    Returns
    -------
    str
        The path written
    """
    if op.isdir(output):
        raise OSError("Output {} cannot be a directory. Please define the output to be a CSV file.".format(output))
    with open(output, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("Row has {} values but the header has {} columns".format(len(row), len(header)))
            writer.writerow([_formatcell(x) for x in row])
    return output


def _formatcell(x: Union[int, float, str, bool, None]) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def writejson(data: dict, output: str) -> str:
    """Writes a dictionary to a JSON file with sorted keys and an indent
    of 2; infinities are written as the strings "inf" / "-inf".

    Parameters
    ----------
    data : dict
        JSON-serializable dictionary
    output : str
        Path of the JSON file to write

    Returns
    -------
    str
        The path written
    """
    with open(output, "w") as fp:
        json.dump(_jsonsafe(data), fp, indent=2, sort_keys=True)
        fp.write("\n")
    return output


def _jsonsafe(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonsafe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonsafe(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if np.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if np.isnan(obj):
            return "nan"
        return obj
    return obj


def filedigest(path: str) -> str:
    """Returns the SHA-256 hex digest of a file.

    Parameters
    ----------
    path : str
        Path to file

    Returns
    -------
    str
        Hexadecimal SHA-256 digest
    """
    if not op.exists(path):
        raise OSError("File {} does not exist".format(path))
    sha = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            sha.update(chunk)
    return sha.hexdigest()


def makedir(path: str) -> str:
    """Creates an output directory if missing and returns it."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as err:
        raise OSError("Output directory {} does not exist and cannot be made".format(path)) from err
    return path
