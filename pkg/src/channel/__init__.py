"""FTR channel model and coefficient cache."""
