import sys

from qkit.main import main

sys.exit(main())
