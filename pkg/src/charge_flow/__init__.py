# 空文件
