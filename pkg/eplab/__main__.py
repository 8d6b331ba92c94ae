import sys

from eplab.src.cli import main

if __name__ == "__main__":
    sys.exit(main())
