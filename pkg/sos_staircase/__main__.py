import sys

from sos_staircase.cli import main

if __name__ == "__main__":
    sys.exit(main())
