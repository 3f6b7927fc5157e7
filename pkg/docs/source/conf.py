# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html
import datetime
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parents[2]))

year = datetime.datetime.now(tz=datetime.timezone.utc).date().year

# -- Project information -----------------------------------------------------
project = 'badmarket'
author = 'badmarket developers'
copyright = f"{year}, {author}"
release = 'v0.0.0'

# -- General configuration ---------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
]

napoleon_numpy_docstring = True

templates_path = ['_templates']
exclude_patterns = []

# -- Options for HTML output -------------------------------------------------
html_theme = 'sphinx_rtd_theme'
html_static_path = []

source_suffix = [".rst"]
