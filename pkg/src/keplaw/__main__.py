import sys

from keplaw.cli import main

sys.exit(main())
