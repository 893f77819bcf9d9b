# Principally stratified treatment effects under crossover designs
__version__ = "1.0.0"
