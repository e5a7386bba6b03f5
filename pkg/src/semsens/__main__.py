import sys

from semsens.cli import main

sys.exit(main())
