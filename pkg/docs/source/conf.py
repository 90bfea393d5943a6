#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# kronlite documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os
from datetime import datetime

on_rtd = os.environ.get('READTHEDOCS') == 'True'

# The package itself is imported for its version and for autodoc
sys.path.append(os.path.abspath(os.path.join('..', '..')))


# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = 'kronlite'
copyright = '2023, the kronlite developers'
author = 'the kronlite developers'

if on_rtd:
    # RTD replaces the last update date.  So we need to hack it in here.
    copyright += '. Last updated on {}'.format(datetime.utcnow().strftime('%b %d, %Y'))

import kronlite
# The short X.Y version.
version = kronlite.__version__.split('-', 1)[0]
# The full version, including alpha/beta/rc tags.
release = kronlite.__version__

language = "en"

exclude_patterns = []

pygments_style = 'sphinx'

todo_include_todos = False

autodoc_member_order = 'bysource'


# -- Options for HTML output ----------------------------------------------

html_theme = 'default'

if not on_rtd:
    # only import and set the theme if we're building docs locally
    # otherwise, readthedocs.org uses their theme by default, so no need to specify it
    import sphinx_rtd_theme
    html_theme = 'sphinx_rtd_theme'
    html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

html_static_path = ['_static']

html_last_updated_fmt = '%b %d, %Y'

htmlhelp_basename = 'kronlitedoc'


# -- Options for LaTeX / manual page output -------------------------------

latex_elements = {
}

latex_documents = [
  (master_doc, 'kronlite.tex', 'kronlite Documentation',
   author, 'manual'),
]

man_pages = [
    (master_doc, 'kronlite', 'kronlite Documentation',
     [author], 1)
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'networkx': ('https://networkx.org/documentation/stable', None),
    }
