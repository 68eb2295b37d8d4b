import sys

from trendlens.cli import main

sys.exit(main())
