from perclab.cli import main

main()
