import sys

from matlang.cli import main

if __name__ == "__main__":
    sys.exit(main())
