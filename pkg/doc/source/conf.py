# -*- coding: utf-8 -*-
#
# trajdiff documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join('..', '..', 'lib')))

from trajdiff.version import __version__

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.mathjax']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'trajdiff'
copyright = u'2026, trajdiff developers'

version = '.'.join(__version__.split('.')[:2])
release = __version__

exclude_patterns = []
pygments_style = 'sphinx'
htmlhelp_basename = 'trajdiffdoc'

latex_documents = [
  ('index', 'trajdiff.tex', u'trajdiff Documentation',
   u'trajdiff developers', 'manual'),
]
