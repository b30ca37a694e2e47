"""テストパッケージ。

このパッケージは、アプリケーションのテストコードを含みます。
"""
