import logging
import os
import sys
from pathlib import Path

from Config import DevConfig


def get_project_root() -> Path:
    return Path(__file__).parent.parent


def get_data_dir(stage: str) -> Path:
    """
    Path to one of the data stage directories (raw, interim, processed), created if missing.

    Parameters
    ----------
    stage: str
        One of DevConfig.DIR_NAME_RAW, DevConfig.DIR_NAME_INTERIM, DevConfig.DIR_NAME_PROCESSED.
    Returns
    -------
    Path
    """
    path = get_project_root() / DevConfig.DIR_NAME_DATA / stage
    if not os.path.isdir(path):  # Check if the stage directory exists
        os.makedirs(path)  # Create it if it doesn't exist already
    return path


def corpus_sources() -> list:
    return [get_data_dir(DevConfig.DIR_NAME_RAW) / DevConfig.DIR_CORPUS]


def corpus_props() -> Path:
    return get_data_dir(DevConfig.DIR_NAME_RAW) / DevConfig.PROPS_CORPUS


def expand_sources(paths, suffix):
    """
    Expand a mix of files and directories into a sorted list of files.

    Parameters
    ----------
    paths: iterable of str or Path
        Files are kept as given; directories contribute every file ending in `suffix` (recursively).
    suffix: str
        File extension selected inside directories, e.g. ".osm".
    Returns
    -------
    files_: list of Path
    Raises
    -------
    FileNotFoundError
        If a path does not exist.
    """
    files_ = []
    for path in map(Path, paths):
        if path.is_dir():
            files_.extend(sorted(p for p in path.rglob(f"*{suffix}") if p.is_file()))
        elif path.is_file():
            files_.append(path)
        else:
            raise FileNotFoundError(f"{path}: no such file or directory")
    return files_


def read_text(path) -> str:
    with open(path, encoding="utf-8") as handle:
        return handle.read()


def write_text(path, text: str):
    path = Path(path)
    if not os.path.isdir(path.parent):
        os.makedirs(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def configure_logging(verbose=False):
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
