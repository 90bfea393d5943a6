try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

from distutils.command.clean import clean
from distutils import log
from distutils.dir_util import remove_tree
import os
import sys


min_python_version = (3, 8)


def _version_info_str(int_tuple):
    return ".".join(map(str, int_tuple))


def _guard_py_ver():
    current_python_version = sys.version_info[:3]
    min_py = _version_info_str(min_python_version)
    cur_py = _version_info_str(current_python_version)

    if not min_python_version <= current_python_version:
        msg = ('Cannot install on Python version {}; only versions >={} '
               'are supported.')
        raise RuntimeError(msg.format(cur_py, min_py))


_guard_py_ver()

if os.environ.get('READTHEDOCS', None) == 'True':
    sys.exit("setup.py disabled on readthedocs: called with %s"
             % (sys.argv,))


here_dir = os.path.dirname(os.path.abspath(__file__))


def _get_version():
    # kronlite/__init__.py needs numpy, so load _version.py on its own
    namespace = {'__file__': os.path.join(here_dir, 'kronlite',
                                          '_version.py')}
    with open(namespace['__file__']) as f:
        exec(compile(f.read(), namespace['__file__'], 'exec'), namespace)
    return namespace['get_versions']()['version']


class KronliteClean(clean):
    """Custom clean command to tidy up the project root."""
    def run(self):
        clean.run(self)
        for name in ('kronlite.egg-info', 'htmlcov'):
            path = os.path.join(here_dir, name)
            if os.path.isdir(path):
                remove_tree(path, dry_run=self.dry_run)
        if not self.dry_run:
            self._rm_walk()

    def _rm_walk(self):
        for path, dirs, files in os.walk(here_dir):
            if any(p.startswith('.') for p in path.split(os.path.sep)):
                # Skip hidden directories like the git folder right away
                continue
            if path.endswith('__pycache__'):
                remove_tree(path, dry_run=self.dry_run)
            else:
                for fname in files:
                    if fname.endswith('.pyc') or fname.endswith('.prof'):
                        fpath = os.path.join(path, fname)
                        os.remove(fpath)
                        log.info("removing '%s'", fpath)


packages = ['kronlite',
            'kronlite.tests',
            ]

install_requires = ['numpy>=1.20',
                    'scipy>=1.6',
                    'networkx>=2.5',
                    'pandas>=1.2',
                    ]


with open('README.rst') as f:
    long_description = f.read()


setup(name='kronlite',
      description="Kron reduction of three-phase radial networks and its "
                  "exact reversal",
      version=_get_version(),
      classifiers=[
          "Development Status :: 3 - Alpha",
          "Intended Audience :: Science/Research",
          "Operating System :: OS Independent",
          "Programming Language :: Python",
          "Programming Language :: Python :: 3",
          "Programming Language :: Python :: 3.8",
          "Programming Language :: Python :: 3.9",
          "Programming Language :: Python :: 3.10",
          "Programming Language :: Python :: 3.11",
          "Topic :: Scientific/Engineering",
      ],
      packages=packages,
      install_requires=install_requires,
      extras_require={
          'graphviz': ['graphviz'],
          'test': ['unittest-xml-reporting', 'coverage'],
      },
      entry_points={
          'console_scripts': ['kronlite = kronlite.cli:main'],
      },
      license="BSD",
      cmdclass={'clean': KronliteClean},
      long_description=long_description,
      python_requires=">={}".format(_version_info_str(min_python_version)),
      )
