import sys

from principal_tmle.main import main

sys.exit(main())
