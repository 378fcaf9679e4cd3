from .harness_cli import main

main()
