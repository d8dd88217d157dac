"""Dataset, result and study models"""
