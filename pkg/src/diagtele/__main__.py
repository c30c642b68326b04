import sys

from diagtele.cli import main

sys.exit(main())
