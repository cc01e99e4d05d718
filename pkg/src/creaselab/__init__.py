"""Numerical toolkit for creased initial data sets.

Subpackages cover the concrete spacetime-spinor model (`cliffords`), analytic
initial-data catalogs and induced boundary geometry (`geometry`, `catalog`),
Bartnik-data gauge algebra and the DEC-crease margin (`bartnik`), surface and
volume quadrature of mass integrals and spinor identities (`integrals`), the
radial Dirac-Witten transmission solver (`radial`), Killing-development
rigidity checks (`killing`), and a reproducible CLI (`cli`).
"""

__version__ = "0.1.0"
