"""
BKT 库仑气体重整化群工具包主程序
"""

from pathlib import Path
import sys

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.append(str(project_root))

from src.cli.commands import main

if __name__ == "__main__":
    main()
