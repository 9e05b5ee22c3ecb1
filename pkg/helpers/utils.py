"""
A collection of utility functions used across the application.
This includes common tasks such as logging setup, environment lookup and file helpers.
"""
import os
import csv
import json
import logging
from helpers.errors import ValidationError, SpecFileError


def setup_logging(level=logging.INFO, filename='sirf.log', handler=logging.FileHandler, verbose=False):
    """
    Set up the logging configuration for the application.

    Args:
        level: The logging level (e.g., DEBUG, INFO) or its name.
        filename: The name of the file where logs will be stored.
        handler: Handler class used for the log file.
        verbose: Also echo log records to stderr.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
    log_handler = handler(filename)
    log_handler.setLevel(level)
    log_handler.setFormatter(formatter)
    handlers = [log_handler]

    if verbose:
        stream_handler = logging.StreamHandler()
        stream_handler.setLevel(level)
        stream_handler.setFormatter(formatter)
        handlers.append(stream_handler)

    logging.basicConfig(level=level, handlers=handlers, force=True)


def get_env_variable(var_name, default=None):
    """
    Retrieve an environment variable.

    Args:
        var_name: The name of the environment variable.
        default: An optional default value if the variable is not found.

    Returns:
        The value of the environment variable or the default value.
    """
    return os.getenv(var_name, default)


def format_number(value):
    """Full-precision decimal text for a float (shortest repr that round-trips)."""
    return repr(float(value))


def parse_state(text):
    """
    Parse an initial condition given as comma separated fractions.

    Args:
        text: "I,R" or "S,I,R".

    Returns:
        tuple: The parsed floats.

    Raises:
        ValidationError: If the text is not two or three numbers.
    """
    parts = [part.strip() for part in text.split(',')]
    if len(parts) not in (2, 3):
        raise ValidationError(f"Initial state must be 'I,R' or 'S,I,R', got {text!r}")
    try:
        return tuple(float(part) for part in parts)
    except ValueError:
        raise ValidationError(f"Initial state contains a non-numeric value: {text!r}")


def write_csv(file_path, header, rows):
    """
    Write rows of numbers and labels to a CSV file.

    Args:
        file_path: Destination path.
        header: Column names.
        rows: Iterable of row sequences; floats are written at full precision.
    """
    with open(file_path, mode='w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) if isinstance(v, float) else v for v in row])
    logging.info(f"Wrote CSV {file_path}")


def read_csv(file_path):
    """
    Read a CSV file written by write_csv.

    Returns:
        tuple: (header list, list of row lists as strings).
    """
    try:
        with open(file_path, mode='r', newline='', encoding='utf-8') as file:
            reader = csv.reader(file)
            header = next(reader, None)
            if header is None:
                raise SpecFileError(f"CSV file {file_path} is empty")
            rows = [row for row in reader if row]
    except OSError as e:
        logging.error(f"Could not read CSV {file_path}: {e}")
        raise SpecFileError(f"Could not read {file_path}: {e}")
    return header, rows


def dump_json(data, file_path=None):
    """
    Serialize data deterministically (sorted keys, fixed indentation).

    Args:
        data: JSON-compatible object.
        file_path: Optional destination; when omitted the text is only returned.

    Returns:
        str: The JSON text.
    """
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if file_path:
        with open(file_path, mode='w', encoding='utf-8') as file:
            file.write(text)
        logging.info(f"Wrote JSON {file_path}")
    return text


def load_json(file_path):
    """
    Load a JSON document.

    Raises:
        SpecFileError: If the file is missing or not valid JSON.
    """
    try:
        with open(file_path, mode='r', encoding='utf-8') as file:
            return json.load(file)
    except OSError as e:
        raise SpecFileError(f"Could not read {file_path}: {e}")
    except json.JSONDecodeError as e:
        raise SpecFileError(f"{file_path} is not valid JSON: {e}")
