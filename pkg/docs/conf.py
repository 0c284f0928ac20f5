#!/usr/bin/env python

import os
import sys

# Get the project root dir, which is the parent dir of this
cwd = os.getcwd()
project_root = os.path.dirname(cwd)

# Insert the project root dir as the first element in the PYTHONPATH.
# This lets us ensure that the source package is imported, and that its
# version is used.
sys.path.insert(0, project_root)

import matlang  # noqa: E402

# -- General configuration ---------------------------------------------

extensions = [
    "notfound.extension",
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
]

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "matlang"
copyright = "2026, matlang developers"

version = matlang.__version__
release = matlang.__version__

exclude_patterns = ["_build"]

pygments_style = "sphinx"

suppress_warnings = ["epub.unknown_project_files"]


# -- Options for HTML output -------------------------------------------

html_theme = "sphinx_rtd_theme"

htmlhelp_basename = "matlangdoc"


# -- Options for the InterSphinx extension ------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "lark": ("https://lark-parser.readthedocs.io/en/stable", None),
}


# --- Nitpicking options ------------------------------------------------------

nitpick_ignore = [
    ("py:class", "lark.Tree"),
    ("py:class", "lark.Token"),
    ("py:class", "Payload"),
]
