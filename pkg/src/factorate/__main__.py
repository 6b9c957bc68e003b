import sys

from factorate.cli import main

sys.exit(main())
