"""srcパッケージ."""
