"""robin_spectraのテストパッケージ."""
