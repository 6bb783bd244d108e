# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.

import os
import sys
sys.path.insert(0, os.path.abspath('../../'))   # path of the parent dir of the package

# -- Project information -----------------------------------------------------

project = 'lacsh'
copyright = '2024, lacsh developers'
author = 'lacsh developers'

# The short X.Y version
version = '0.1.0'
# The full version, including alpha/beta/rc tags
release = '0.1.0'

autodoc_mock_imports = ['numpy', 'scipy', 'pandas', 'statsmodels', 'deap']

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx'
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = 'en'
exclude_patterns = []
pygments_style = 'default'

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = []
htmlhelp_basename = 'lacshdoc'

# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'lacsh', 'lacsh Documentation',
     [author], 1)
]

# -- Extension configuration -------------------------------------------------

todo_include_todos = True
intersphinx_mapping = {'python': ('https://docs.python.org/3/', None),
                       'numpy': ('https://numpy.org/doc/stable/', None),
                       'pandas': ('https://pandas.pydata.org/docs/', None),
                       'deap': ('https://deap.readthedocs.io/en/master/', None)}
html_use_index = True
html_split_index = True
