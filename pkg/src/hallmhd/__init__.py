"""Mixed finite element solver for 3D incompressible Hall-MHD.

The package builds a discrete de Rham complex of tensor-product spectral
spaces on mapped hexahedral meshes and advances the dual-field
leapfrog scheme, which conserves mass, the magnetic Gauss law, and the
current-density divergence pointwise, and satisfies an exact discrete
energy balance.
"""

__version__ = "0.1.0"
