#!/usr/bin/env python

from kronlite.tests import main


if __name__ == "__main__":
    main()
