"""Explainable-AI bubble game.

A simulated performer interprets annotated scenes into parse graphs over an
And-Or grammar; an explainer policy reveals parts of a blurred image through
"bubbles" while tracking a Bayesian model of the user's mind; an evaluator
scores the user's resulting model of the machine as justified trust.
"""

__version__ = "0.1.0"
