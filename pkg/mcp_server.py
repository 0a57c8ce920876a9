"""Runs the QIGL tool server over stdio."""

from server import run

if __name__ == "__main__":
    run()
