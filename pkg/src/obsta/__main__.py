import sys

from obsta.cli import main

sys.exit(main())
