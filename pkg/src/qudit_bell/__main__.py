from qudit_bell.cli import main

raise SystemExit(main())
