"""pipefuse test suite"""
