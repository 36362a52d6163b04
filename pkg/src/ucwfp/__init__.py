"""Explicit strongly convergent iteration toward fixed points of
asymptotically nonexpansive maps on bounded UCW-hyperbolic spaces."""
