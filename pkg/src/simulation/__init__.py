"""Monte Carlo oracle of the FTR wiretap channel."""
