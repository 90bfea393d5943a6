# conda-recipes/kronlite/run_test.py is the conda-build test script (it runs
# the suite at import time); it is not a pytest module.
collect_ignore = ["conda-recipes"]
