"""モジュラー曲面上のRobin擬ラプラシアンのスペクトル計算ツールキット."""

__version__ = "0.1.0"
