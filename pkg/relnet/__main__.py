from relnet.main import main

raise SystemExit(main())
