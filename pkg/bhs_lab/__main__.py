import sys

from bhs_lab.main import main

sys.exit(main())
