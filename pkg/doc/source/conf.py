# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
# http://www.sphinx-doc.org/en/master/config

import os
import sys

# Path to project package
sys.path.insert(0, os.path.abspath('../../'))
from profilerank import __version__

# -- Project information -----------------------------------------------------

project = 'profilerank'
copyright = '2021, profilerank contributors'
author = 'profilerank contributors'

version = __version__
release = version

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.imgmath',
    'sphinx.ext.viewcode',
    'sphinx_rtd_theme',
]
templates_path = ['.templates']
source_suffix = '.rst'
master_doc = 'index'
exclude_patterns = []

# -- HTML output -------------------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'collapse_navigation': False,
    'navigation_depth': 3,
}
htmlhelp_basename = project

# -- Manual pages ------------------------------------------------------------

man_pages = [
    (master_doc, project, f'{project} command and library reference',
     [author], 1)
]

# -- autodoc -----------------------------------------------------------------

# Heavy runtime dependencies are not needed to render the API pages
autodoc_mock_imports = ['gensim', 'sklearn', 'scipy', 'networkx', 'nltk']
autodoc_member_order = 'bysource'
autodoc_default_options = {
    'member-order': 'bysource',
    'special-members': '__init__',
}
