"""最大捕获选址工具 - 主入口点"""
import sys

from src.main import cli


if __name__ == "__main__":
    sys.exit(cli())
