"""Compare localizer half-signature, flat-band localizer and Chern marker
on hermitian and lossy Haldane flakes, and scan the signature along the
flattening path.
"""

import argparse

import numpy as np
import scipy.sparse as sp

from nhloc.invariants import chern_marker, flatten_path, range_projection, riesz_projection
from nhloc.localizer import assemble_even_localizer
from nhloc.model import HeterostructureSpec, RegionParams, heterostructure
from nhloc.signature import sig_eigencount


def flake(params, mu, radius):
    """Uniform flake whose outermost two bond lengths carry loss mu."""
    lossy = RegionParams(params.M, params.t, params.t_c, params.phi, mu)
    return heterostructure(HeterostructureSpec(radius - 2.1, radius - 2.0, radius, params, params, lossy))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radius", type=float, default=10.0)
    ap.add_argument("--kappa", type=float, default=0.2)
    ap.add_argument("--rho", type=float, default=5.0)
    args = ap.parse_args(argv)

    for mu in (0.0, 0.2, 0.5):
        geom, H = flake(RegionParams(M=0.0, t=1.0, t_c=0.5, phi=np.pi / 2), mu, args.radius)
        P = riesz_projection(H)
        Q = range_projection(P)
        marker = chern_marker(Q, geom)
        sigs = []
        for t in np.linspace(0, 1, 6):
            Ht = sp.csr_matrix(flatten_path(H, t, P))
            L = assemble_even_localizer(Ht, geom, args.kappa, (0.0, 0.0), args.rho).matrix
            sigs.append(sig_eigencount(L).half_signature)
        print(f"mu={mu:.2f}  marker={marker:+.4f}  non-normality={P.non_normality:.2e}  path={sigs}")


if __name__ == "__main__":
    main()
