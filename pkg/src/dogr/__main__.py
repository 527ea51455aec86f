from dogr.cli import main

main()
