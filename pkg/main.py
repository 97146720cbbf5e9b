# Entry point of the cavity pulse simulator.
# All of the work happens in app.cli; this file only hands over the command line
# and turns the returned code into the process exit status.
from app.cli import main

if __name__ == "__main__":
    # exit code 0 ok, 2 config, 3 threshold/pole, 4 verification, 5 I/O
    raise SystemExit(main())
