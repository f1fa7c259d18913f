import sys

from fastnet_dehazing.interface.cli import main

if __name__ == "__main__":
    sys.exit(main())
